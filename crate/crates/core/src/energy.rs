//! Node energy model and per-node strategy selection.
//!
//! Every surviving node that blocks because of the failure has an
//! *intervention interval*: a compute phase (failure until the failure-induced
//! block) followed by a waiting phase (until the block is released). The model
//! prices that interval without intervention (ENI, compute and wait at the
//! maximum frequency) and with intervention (EI, one compute frequency for the
//! whole compute phase plus one wait action), and picks the cheapest plan that
//! still reaches the block point before the release.

use std::fmt;

use crate::app::WaitMode;
use crate::error::ModelError;

/// One P-state row of the node characterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyLevel {
    pub ghz: f64,
    /// Application power (W).
    pub p_comp: f64,
    /// Compute slowdown relative to the maximum frequency.
    pub beta: f64,
    /// Checkpoint power (W).
    pub p_ckpt: f64,
    /// Checkpoint slowdown relative to the maximum frequency.
    pub gamma: f64,
    /// Power while busy-polling in a communication wait (W).
    pub p_active_wait: f64,
}

impl FrequencyLevel {
    /// Row whose active-wait power defaults to the application power.
    pub fn new(ghz: f64, p_comp: f64, beta: f64, p_ckpt: f64, gamma: f64) -> Self {
        Self {
            ghz,
            p_comp,
            beta,
            p_ckpt,
            gamma,
            p_active_wait: p_comp,
        }
    }

    pub fn with_active_wait(mut self, watts: f64) -> Self {
        self.p_active_wait = watts;
        self
    }

    pub fn label(&self) -> String {
        format!("{} GHz", fmt_ghz(self.ghz))
    }
}

/// Renders a frequency with at least one decimal ("2.8", "2.0", "2.25").
pub fn fmt_ghz(ghz: f64) -> String {
    let s = format!("{ghz}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

/// Node-level constants of the energy model.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemProfile {
    /// Frequency table, strictly descending in GHz; index 0 is f_max.
    pub freqs: Vec<FrequencyLevel>,
    pub t_go_sleep: f64,
    pub t_wakeup: f64,
    pub p_go_sleep: f64,
    pub p_wakeup: f64,
    pub p_sleep: f64,
    /// Power of an idle wait, close to the node's base power.
    pub p_idle_wait: f64,
    /// Sleep only if the wait exceeds `mu1` times the transition time.
    pub mu1: f64,
    /// Sleep only if it costs less than `mu2` times staying awake.
    pub mu2: f64,
    /// Checkpoint duration at f_max.
    pub t_ckpt: f64,
}

impl SystemProfile {
    /// Six-core Xeon E5-2630 characterization (1.2 to 2.8 GHz), 60 W base power,
    /// 25 s / 51 W to sleep, 5 s / 91 W to wake, 12 W asleep, 2 min checkpoints.
    /// Active-wait power defaults to application power; mu1 = 2, mu2 = 0.9.
    pub fn reference() -> Self {
        Self {
            freqs: vec![
                FrequencyLevel::new(2.8, 166.0, 1.0, 150.0, 1.0),
                FrequencyLevel::new(2.1, 148.0, 1.2, 142.0, 1.1),
                FrequencyLevel::new(1.7, 139.0, 1.5, 131.0, 1.2),
                FrequencyLevel::new(1.2, 126.0, 2.1, 125.0, 1.4),
            ],
            t_go_sleep: 25.0,
            t_wakeup: 5.0,
            p_go_sleep: 51.0,
            p_wakeup: 91.0,
            p_sleep: 12.0,
            p_idle_wait: 60.0,
            mu1: 2.0,
            mu2: 0.9,
            t_ckpt: 120.0,
        }
    }

    pub fn fmax(&self) -> &FrequencyLevel {
        &self.freqs[0]
    }

    pub fn fmin(&self) -> &FrequencyLevel {
        self.freqs.last().expect("validated profile has frequencies")
    }

    pub fn fmin_index(&self) -> usize {
        self.freqs.len() - 1
    }

    pub fn level(&self, ghz: f64) -> Result<&FrequencyLevel, ModelError> {
        self.freqs
            .iter()
            .find(|f| f.ghz == ghz)
            .ok_or(ModelError::UnknownFrequency(ghz))
    }

    pub fn transition_time(&self) -> f64 {
        self.t_go_sleep + self.t_wakeup
    }

    /// Checks the profile invariants; the message names the violated one.
    pub fn validate(&self) -> Result<(), String> {
        let Some(top) = self.freqs.first() else {
            return Err("frequency table is empty".into());
        };
        if top.beta != 1.0 || top.gamma != 1.0 {
            return Err("maximum-frequency row must have beta = 1 and gamma = 1".into());
        }
        for w in self.freqs.windows(2) {
            if !(w[1].ghz < w[0].ghz) {
                return Err("frequencies must be strictly descending".into());
            }
            if w[1].beta < w[0].beta || w[1].gamma < w[0].gamma {
                return Err("beta and gamma must not decrease as frequency decreases".into());
            }
        }
        for f in &self.freqs {
            let vals = [f.ghz, f.p_comp, f.beta, f.p_ckpt, f.gamma, f.p_active_wait];
            if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(format!("row {} GHz has non-positive values", fmt_ghz(f.ghz)));
            }
        }
        if !(self.t_go_sleep > 0.0 && self.t_wakeup > 0.0) {
            return Err("t_go_sleep and t_wakeup must be > 0".into());
        }
        let min_comp = self.freqs.iter().map(|f| f.p_comp).fold(f64::INFINITY, f64::min);
        if !(self.p_sleep < self.p_idle_wait && self.p_idle_wait < min_comp) {
            return Err("require p_sleep < p_idle_wait < min p_comp".into());
        }
        if !(self.mu1 >= 1.0) {
            return Err("mu1 must be >= 1".into());
        }
        if !(self.mu2 > 0.0 && self.mu2 <= 1.0) {
            return Err("mu2 must be in (0, 1]".into());
        }
        if !(self.t_ckpt > 0.0) {
            return Err("checkpoint duration must be > 0".into());
        }
        Ok(())
    }
}

/// Estimated phases of one surviving node at failure time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimate {
    pub node: usize,
    /// Start of the intervention interval (the failure instant).
    pub phase_start: f64,
    /// Compute time at f_max from the failure to the failure-induced block,
    /// excluding checkpoint time.
    pub t_comp_fmax: f64,
    /// Checkpoints executed inside the compute phase, in units of `t_ckpt`.
    pub n_ckpt: f64,
    /// Release of the failure-induced block in the reference execution.
    pub reference_end: f64,
    /// The compute phase posts messages another live process may wait on, so
    /// it must run at f_max.
    pub frequency_locked: bool,
}

impl PhaseEstimate {
    /// Intervention interval length (compute + wait in the reference case).
    pub fn window(&self) -> f64 {
        self.reference_end - self.phase_start
    }

    /// Compute-phase duration at `f`, checkpoints included.
    pub fn busy(&self, f: &FrequencyLevel, profile: &SystemProfile) -> f64 {
        t_comp(f, self) + self.ckpt_time(f, profile)
    }

    pub fn ckpt_time(&self, f: &FrequencyLevel, profile: &SystemProfile) -> f64 {
        self.n_ckpt * (profile.t_ckpt * f.gamma)
    }

    /// Instant the compute phase ends when run at `f`.
    pub fn phase_end(&self, f: &FrequencyLevel, profile: &SystemProfile) -> f64 {
        self.phase_start + self.busy(f, profile)
    }

    /// Remaining wait when the compute phase runs at `f`.
    pub fn wait_at(&self, f: &FrequencyLevel, profile: &SystemProfile) -> f64 {
        (self.reference_end - self.phase_end(f, profile)).max(0.0)
    }

    /// Whether running the compute phase at `freqs[index]` keeps the release
    /// time intact. f_max is always admissible.
    pub fn admits(&self, index: usize, profile: &SystemProfile) -> bool {
        if index == 0 {
            return true;
        }
        !self.frequency_locked && self.phase_end(&profile.freqs[index], profile) <= self.reference_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WaitAction {
    None,
    MinFreq,
    Sleep,
}

impl WaitAction {
    pub const ALL: [WaitAction; 3] = [WaitAction::None, WaitAction::MinFreq, WaitAction::Sleep];
}

impl fmt::Display for WaitAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaitAction::None => "NONE",
            WaitAction::MinFreq => "MIN_FREQ",
            WaitAction::Sleep => "SLEEP",
        })
    }
}

/// Selected actions and estimated savings for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePlan {
    pub node: usize,
    /// Index into the profile's frequency table; 0 means no compute action.
    pub compute_freq: usize,
    pub compute_ghz: f64,
    pub wait_action: WaitAction,
    pub eni_j: f64,
    pub ei_j: f64,
    pub saving_j: f64,
    pub rate_j_s: f64,
    pub saving_pct: f64,
    pub t_comp: f64,
    pub t_wait: f64,
    pub tt: f64,
}

impl NodePlan {
    /// True when the plan changes anything on the node.
    pub fn intervenes(&self) -> bool {
        self.compute_freq != 0 || self.wait_action != WaitAction::None
    }

    /// The no-intervention plan (f_max, no wait action); saves nothing.
    pub fn baseline(est: &PhaseEstimate, profile: &SystemProfile, mode: WaitMode) -> Self {
        let fmax = profile.fmax();
        let eni = compute_phase_energy(fmax, est, profile)
            + awake_wait_energy(fmax, est.wait_at(fmax, profile), mode, profile);
        Self::from_energies(est, profile, 0, WaitAction::None, eni, eni)
    }

    fn from_energies(
        est: &PhaseEstimate,
        profile: &SystemProfile,
        index: usize,
        action: WaitAction,
        eni: f64,
        ei: f64,
    ) -> Self {
        let f = &profile.freqs[index];
        let saving = eni - ei;
        let tt = est.window();
        NodePlan {
            node: est.node,
            compute_freq: index,
            compute_ghz: f.ghz,
            wait_action: action,
            eni_j: eni,
            ei_j: ei,
            saving_j: saving,
            rate_j_s: if tt > 0.0 { saving / tt } else { 0.0 },
            saving_pct: if eni > 0.0 { 100.0 * saving / eni } else { 0.0 },
            t_comp: est.busy(f, profile),
            t_wait: est.wait_at(f, profile),
            tt,
        }
    }
}

pub fn t_comp(f: &FrequencyLevel, est: &PhaseEstimate) -> f64 {
    est.t_comp_fmax * f.beta
}

/// Compute-phase energy at `f`, checkpoints included.
pub fn compute_phase_energy(f: &FrequencyLevel, est: &PhaseEstimate, profile: &SystemProfile) -> f64 {
    t_comp(f, est) * f.p_comp + est.ckpt_time(f, profile) * f.p_ckpt
}

/// Energy of staying awake for `t_wait` seconds with the node at `f`.
pub fn awake_wait_energy(f: &FrequencyLevel, t_wait: f64, mode: WaitMode, profile: &SystemProfile) -> f64 {
    match mode {
        WaitMode::Active => t_wait * f.p_active_wait,
        WaitMode::Idle => t_wait * profile.p_idle_wait,
    }
}

/// Energy of sleeping through a wait of `t_wait` seconds, transitions included.
pub fn sleep_wait_energy(t_wait: f64, profile: &SystemProfile) -> Result<f64, ModelError> {
    let min = profile.transition_time();
    if !(t_wait >= min) {
        return Err(ModelError::WaitTooShort { t_wait, min });
    }
    let asleep = t_wait - profile.t_go_sleep - profile.t_wakeup;
    Ok(profile.t_go_sleep * profile.p_go_sleep + asleep * profile.p_sleep + profile.t_wakeup * profile.p_wakeup)
}

/// Time and energy thresholds for sending the node to sleep. The energy
/// baseline is the awake wait at the minimum frequency (active waits) or at
/// idle power (idle waits).
pub fn sleep_feasible(t_wait: f64, mode: WaitMode, profile: &SystemProfile) -> bool {
    if !(t_wait > profile.mu1 * profile.transition_time()) {
        return false;
    }
    let Ok(asleep) = sleep_wait_energy(t_wait, profile) else {
        return false;
    };
    asleep < profile.mu2 * awake_wait_energy(profile.fmin(), t_wait, mode, profile)
}

fn wait_energy(
    action: WaitAction,
    f: &FrequencyLevel,
    t_wait: f64,
    mode: WaitMode,
    profile: &SystemProfile,
) -> Option<f64> {
    match action {
        WaitAction::None => Some(awake_wait_energy(f, t_wait, mode, profile)),
        // Dropping the clock only pays off while polling.
        WaitAction::MinFreq => match mode {
            WaitMode::Active => Some(awake_wait_energy(profile.fmin(), t_wait, mode, profile)),
            WaitMode::Idle => None,
        },
        WaitAction::Sleep => sleep_feasible(t_wait, mode, profile)
            .then(|| sleep_wait_energy(t_wait, profile).ok())
            .flatten(),
    }
}

/// Minimum-energy plan that does not move the block release.
///
/// Ties go to the higher compute frequency, then to the lighter wait action.
pub fn node_best_plan(est: &PhaseEstimate, profile: &SystemProfile, mode: WaitMode) -> NodePlan {
    let fmax = profile.fmax();
    let eni =
        compute_phase_energy(fmax, est, profile) + awake_wait_energy(fmax, est.wait_at(fmax, profile), mode, profile);

    let mut best: Option<(usize, WaitAction, f64)> = None;
    for (i, f) in profile.freqs.iter().enumerate() {
        if !est.admits(i, profile) {
            continue;
        }
        let t_wait = est.wait_at(f, profile);
        let e_comp = compute_phase_energy(f, est, profile);
        // An idle-wait node gains nothing from a lower clock while waiting.
        let awake = match mode {
            WaitMode::Active => WaitAction::MinFreq,
            WaitMode::Idle => WaitAction::None,
        };
        let mut options = vec![(
            WaitAction::None,
            wait_energy(WaitAction::None, f, t_wait, mode, profile),
        )];
        if awake != WaitAction::None {
            options.push((awake, wait_energy(awake, f, t_wait, mode, profile)));
        }
        options.push((
            WaitAction::Sleep,
            wait_energy(WaitAction::Sleep, f, t_wait, mode, profile),
        ));
        for (action, e_wait) in options {
            let Some(e_wait) = e_wait else { continue };
            let ei = e_comp + e_wait;
            if best.is_none_or(|(_, _, b)| ei < b) {
                best = Some((i, action, ei));
            }
        }
    }
    let (index, action, ei) = best.expect("f_max with no wait action is always admissible");
    NodePlan::from_energies(est, profile, index, action, eni, ei)
}

/// Sum of the per-node savings.
pub fn total_saving(plans: &[NodePlan]) -> f64 {
    plans.iter().map(|p| p.saving_j).sum()
}
