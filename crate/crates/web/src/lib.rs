//! Browser bindings for the simulator. Every export takes plain values and
//! returns a JSON string; errors come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ftsim::app::WaitMode;
use ftsim::energy::{
    awake_wait_energy, compute_phase_energy, node_best_plan, sleep_feasible, sleep_wait_energy, PhaseEstimate,
    SystemProfile, WaitAction,
};
use ftsim::report::{render_report, CSV_HEADER};
use ftsim::scenario::parse_scenario;
use ftsim::trace::{FlagEdge, TraceRecord};
use ftsim::{run_simulation, ReportFormat};

const FIXTURES: [(&str, &str); 15] = [
    (
        "scenario1_short",
        include_str!("../../core/fixtures/scenario1_short.scn"),
    ),
    ("scenario1_long", include_str!("../../core/fixtures/scenario1_long.scn")),
    (
        "scenario2_blocking",
        include_str!("../../core/fixtures/scenario2_blocking.scn"),
    ),
    (
        "scenario2_nonblocking",
        include_str!("../../core/fixtures/scenario2_nonblocking.scn"),
    ),
    (
        "scenario3_active",
        include_str!("../../core/fixtures/scenario3_active.scn"),
    ),
    ("scenario3_idle", include_str!("../../core/fixtures/scenario3_idle.scn")),
    (
        "scenario4_unbuffered",
        include_str!("../../core/fixtures/scenario4_unbuffered.scn"),
    ),
    (
        "scenario4_buffered",
        include_str!("../../core/fixtures/scenario4_buffered.scn"),
    ),
    (
        "scenario5_depth1",
        include_str!("../../core/fixtures/scenario5_depth1.scn"),
    ),
    (
        "scenario5_depth5",
        include_str!("../../core/fixtures/scenario5_depth5.scn"),
    ),
    ("scenario6_on", include_str!("../../core/fixtures/scenario6_on.scn")),
    ("scenario6_off", include_str!("../../core/fixtures/scenario6_off.scn")),
    ("scenario7_long", include_str!("../../core/fixtures/scenario7_long.scn")),
    (
        "scenario7_short_blocking",
        include_str!("../../core/fixtures/scenario7_short_blocking.scn"),
    ),
    (
        "scenario7_short_nonblocking",
        include_str!("../../core/fixtures/scenario7_short_nonblocking.scn"),
    ),
];

/// Profile used by the shipped fixtures.
fn demo_profile(mu1: f64) -> SystemProfile {
    let mut p = SystemProfile::reference();
    let last = p.freqs.len() - 1;
    p.freqs[last] = p.freqs[last].with_active_wait(94.5);
    p.mu1 = mu1;
    p
}

fn wait_mode(name: &str) -> Result<WaitMode, String> {
    match name {
        "active" => Ok(WaitMode::Active),
        "idle" => Ok(WaitMode::Idle),
        other => Err(format!("unknown wait mode `{other}`")),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn respond(r: Result<String, String>) -> String {
    r.unwrap_or_else(|e| serde_json::json!({ "error": e }).to_string())
}

#[derive(Serialize)]
struct WaitOption {
    action: String,
    /// `None` when the action is not available for this wait.
    energy_j: Option<f64>,
}

#[derive(Serialize)]
struct FreqOption {
    ghz: f64,
    admissible: bool,
    t_comp_s: f64,
    t_wait_s: f64,
    compute_j: f64,
    waits: Vec<WaitOption>,
}

#[derive(Serialize)]
struct PlanView {
    eni_j: f64,
    ei_j: f64,
    saving_j: f64,
    saving_pct: f64,
    compute_ghz: f64,
    wait_action: String,
    options: Vec<FreqOption>,
}

pub fn explore_plan_json(
    t_comp_s: f64,
    wait_s: f64,
    n_ckpt: f64,
    locked: bool,
    mode: &str,
    mu1: f64,
) -> Result<String, String> {
    let mode = wait_mode(mode)?;
    let profile = demo_profile(mu1);
    profile.validate()?;
    if !(t_comp_s >= 0.0 && wait_s >= 0.0 && n_ckpt >= 0.0) {
        return Err("times and checkpoint count must be non-negative".into());
    }
    let est = PhaseEstimate {
        node: 1,
        phase_start: 0.0,
        t_comp_fmax: t_comp_s,
        n_ckpt,
        reference_end: t_comp_s + n_ckpt * profile.t_ckpt + wait_s,
        frequency_locked: locked,
    };
    let plan = node_best_plan(&est, &profile, mode);
    let options = profile
        .freqs
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let t_wait = est.wait_at(f, &profile);
            let min_freq =
                (mode == WaitMode::Active).then(|| awake_wait_energy(profile.fmin(), t_wait, mode, &profile));
            let sleep = sleep_feasible(t_wait, mode, &profile)
                .then(|| sleep_wait_energy(t_wait, &profile).ok())
                .flatten();
            FreqOption {
                ghz: f.ghz,
                admissible: est.admits(i, &profile),
                t_comp_s: est.busy(f, &profile),
                t_wait_s: t_wait,
                compute_j: compute_phase_energy(f, &est, &profile),
                waits: vec![
                    WaitOption {
                        action: WaitAction::None.to_string(),
                        energy_j: Some(awake_wait_energy(f, t_wait, mode, &profile)),
                    },
                    WaitOption {
                        action: WaitAction::MinFreq.to_string(),
                        energy_j: min_freq,
                    },
                    WaitOption {
                        action: WaitAction::Sleep.to_string(),
                        energy_j: sleep,
                    },
                ],
            }
        })
        .collect();
    to_json(&PlanView {
        eni_j: plan.eni_j,
        ei_j: plan.ei_j,
        saving_j: plan.saving_j,
        saving_pct: plan.saving_pct,
        compute_ghz: plan.compute_ghz,
        wait_action: plan.wait_action.to_string(),
        options,
    })
}

#[derive(Serialize)]
struct Segment {
    node: usize,
    t0: f64,
    t1: f64,
    state: &'static str,
}

#[derive(Serialize)]
struct Flag {
    node: usize,
    t: f64,
    begin: bool,
    label: String,
}

#[derive(Serialize)]
struct RunView {
    nodes: usize,
    makespan: f64,
    failure_node: usize,
    failure_time: f64,
    recovery_end: f64,
    header: Vec<&'static str>,
    report_csv: String,
    total_j: f64,
    segments: Vec<Segment>,
    flags: Vec<Flag>,
}

pub fn run_scenario_json(text: &str, strategies: bool) -> Result<String, String> {
    let s = parse_scenario(text).map_err(|e| e.to_string())?;
    let s = s.with_strategies(strategies);
    let out = run_simulation(&s);
    let mut segments = Vec::new();
    let mut flags = Vec::new();
    for r in &out.trace {
        match r {
            TraceRecord::State { node, t0, t1, state } => segments.push(Segment {
                node: *node,
                t0: *t0,
                t1: *t1,
                state: state.as_str(),
            }),
            TraceRecord::Flag { node, t, edge, label } => flags.push(Flag {
                node: *node,
                t: *t,
                begin: *edge == FlagEdge::Begin,
                label: label.clone(),
            }),
            TraceRecord::Comm { .. } => {}
        }
    }
    to_json(&RunView {
        nodes: s.nodes,
        makespan: out.makespan,
        failure_node: s.failure.node,
        failure_time: s.failure.time,
        recovery_end: out.recovery_end,
        header: CSV_HEADER.split(',').collect(),
        report_csv: render_report(&out.report, ReportFormat::Csv),
        total_j: out.report.total_j,
        segments,
        flags,
    })
}

#[derive(Serialize)]
struct CurvePoint {
    wait_s: f64,
    awake_fmax_j: f64,
    awake_fmin_j: f64,
    sleep_j: Option<f64>,
    sleep_chosen: bool,
}

#[derive(Serialize)]
struct Curve {
    threshold_s: f64,
    transition_s: f64,
    points: Vec<CurvePoint>,
}

pub fn sleep_curve_json(max_wait_s: f64, samples: usize, mode: &str, mu1: f64) -> Result<String, String> {
    let mode = wait_mode(mode)?;
    let profile = demo_profile(mu1);
    profile.validate()?;
    if max_wait_s.is_nan() || max_wait_s <= 0.0 || samples < 2 {
        return Err("need a positive wait range and at least two samples".into());
    }
    let points = (0..samples)
        .map(|i| {
            let wait_s = max_wait_s * i as f64 / (samples - 1) as f64;
            CurvePoint {
                wait_s,
                awake_fmax_j: awake_wait_energy(profile.fmax(), wait_s, mode, &profile),
                awake_fmin_j: awake_wait_energy(profile.fmin(), wait_s, mode, &profile),
                sleep_j: sleep_wait_energy(wait_s, &profile).ok(),
                sleep_chosen: sleep_feasible(wait_s, mode, &profile),
            }
        })
        .collect();
    to_json(&Curve {
        threshold_s: profile.mu1 * profile.transition_time(),
        transition_s: profile.transition_time(),
        points,
    })
}

/// Best plan for one node and every alternative the selector weighed.
#[wasm_bindgen]
pub fn explore_plan(t_comp_s: f64, wait_s: f64, n_ckpt: f64, locked: bool, mode: &str, mu1: f64) -> String {
    respond(explore_plan_json(t_comp_s, wait_s, n_ckpt, locked, mode, mu1))
}

/// Simulates a scenario file and returns the report plus Gantt segments.
#[wasm_bindgen]
pub fn run_scenario(text: &str, strategies: bool) -> String {
    respond(run_scenario_json(text, strategies))
}

/// Wait energy awake and asleep over a range of wait lengths.
#[wasm_bindgen]
pub fn sleep_curve(max_wait_s: f64, samples: usize, mode: &str, mu1: f64) -> String {
    respond(sleep_curve_json(max_wait_s, samples, mode, mu1))
}

#[wasm_bindgen]
pub fn fixture_names() -> String {
    respond(to_json(&FIXTURES.iter().map(|f| f.0).collect::<Vec<_>>()))
}

#[wasm_bindgen]
pub fn fixture_text(name: &str) -> String {
    FIXTURES
        .iter()
        .find(|f| f.0 == name)
        .map(|f| f.1.to_string())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn long_wait_sleeps() {
        let v = parse(explore_plan(262.2, 3360.0, 0.0, false, "active", 7.0));
        assert_eq!(v["wait_action"], "SLEEP");
        assert_eq!(v["compute_ghz"], 2.8);
        assert_eq!(v["options"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn locked_phase_only_admits_fmax() {
        let v = parse(explore_plan(600.0, 400.0, 0.0, true, "active", 7.0));
        let adm: Vec<bool> = v["options"]
            .as_array()
            .unwrap()
            .iter()
            .map(|o| o["admissible"].as_bool().unwrap())
            .collect();
        assert_eq!(adm, [true, false, false, false]);
    }

    #[test]
    fn errors_are_json() {
        let v = parse(explore_plan(1.0, 1.0, 0.0, false, "spin", 7.0));
        assert!(v["error"].as_str().unwrap().contains("spin"));
        let v = parse(run_scenario("[run]\nnodes = x\n", true));
        assert!(v["error"].as_str().unwrap().contains("line"));
    }

    #[test]
    fn every_fixture_runs() {
        let names: Vec<String> = serde_json::from_str(&fixture_names()).unwrap();
        assert_eq!(names.len(), 15);
        for n in names {
            let v = parse(run_scenario(&fixture_text(&n), true));
            assert!(v["error"].is_null(), "{n}: {}", v["error"]);
            assert!(v["segments"].as_array().unwrap().len() > 4);
        }
    }

    #[test]
    fn run_matches_the_report() {
        let v = parse(run_scenario(&fixture_text("scenario1_long"), true));
        let csv = v["report_csv"].as_str().unwrap();
        assert!(csv.contains("1,No action,4.37,sleep,56.00,60.37,"));
        assert_eq!(v["failure_time"], 4225.8);
    }

    #[test]
    fn curve_threshold() {
        let v = parse(sleep_curve(600.0, 61, "active", 7.0));
        assert_eq!(v["threshold_s"], 210.0);
        let pts = v["points"].as_array().unwrap();
        assert!(pts[0]["sleep_j"].is_null());
        let first = pts.iter().find(|p| p["sleep_chosen"].as_bool().unwrap()).unwrap();
        assert!(first["wait_s"].as_f64().unwrap() > 210.0);
        assert_eq!(pts[30]["sleep_j"], 4970.0);
    }
}
