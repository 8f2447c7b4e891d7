//! Simulation driver: runs the application on the event kernel, injects the
//! failure, plans the survivors' strategies and applies them.

use crate::app::{CommPattern, Direction, WaitMode};
use crate::cascade::{analyze, estimate_releases, CascadeEntry, FailureView};
use crate::energy::{fmt_ghz, node_best_plan, NodePlan, PhaseEstimate, WaitAction};
use crate::ft::{recovery_end, should_anticipate};
use crate::queue::{EventId, EventKind, EventQueue, Payload};
use crate::report::SavingsReport;
use crate::scenario::Scenario;
use crate::trace::{FlagEdge, NodeState, TraceRecord};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: SavingsReport,
    pub plans: Vec<NodePlan>,
    pub estimates: Vec<PhaseEstimate>,
    pub cascade: Vec<CascadeEntry>,
    pub trace: Vec<TraceRecord>,
    /// Completion time of the last process.
    pub makespan: f64,
    /// Completion time of each process's program.
    pub finish: Vec<f64>,
    /// First wait entered at or after the failure, per process, that lasted
    /// longer than zero.
    pub first_wait: Vec<Option<f64>>,
    pub recovery_end: f64,
    /// Some process never finished (the pattern deadlocked).
    pub stalled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Point(usize),
    End,
}

#[derive(Debug, Clone, Copy)]
struct Run {
    x0: f64,
    t0: f64,
    slow: Option<usize>,
    event: EventId,
}

#[derive(Debug, Clone, Copy)]
struct Blocked {
    point: usize,
    since: f64,
    ckpt: Option<(f64, f64)>,
    /// GO_SLEEP start and wake-up end.
    sleep: Option<(f64, f64)>,
    min_freq: bool,
    wait_from: f64,
    activity_end: f64,
    released: bool,
}

#[derive(Debug, Clone, Copy)]
enum Activity {
    Ready,
    Running(Run),
    Blocked(Blocked),
    Frozen { pos: f64, at_point: bool },
    Done,
}

#[derive(Debug, Clone, Copy)]
struct Plan {
    block_point: usize,
    slow: Option<usize>,
    arrival: f64,
    ckpt_end: f64,
    anticipate: bool,
    wait: WaitAction,
    release_est: f64,
}

struct Proc {
    pc: usize,
    act: Activity,
    windows: Vec<(f64, f64)>,
    last_ckpt_end: f64,
    plan: Option<Plan>,
    finish: Option<f64>,
    first_wait: Option<f64>,
}

/// Planned activities that end this close after a release count as ending
/// with it, so estimate rounding never delays a node.
const SAME_INSTANT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default)]
struct MsgState {
    send_post: Option<f64>,
    recv_post: Option<f64>,
}

struct Sim<'a> {
    s: &'a Scenario,
    pat: &'a CommPattern,
    q: EventQueue,
    procs: Vec<Proc>,
    msgs: Vec<MsgState>,
    trace: Vec<TraceRecord>,
    /// Index in `trace` of each node's latest state record.
    last_state: Vec<Option<usize>>,
    wait_state: NodeState,
    fail_time: f64,
    failed_after: bool,
    recovery_end: f64,
    plans: Vec<NodePlan>,
    estimates: Vec<PhaseEstimate>,
    cascade: Vec<CascadeEntry>,
}

/// Simulates the scenario, with strategies if it enables them.
pub fn run_simulation(s: &Scenario) -> SimOutcome {
    let mut sim = Sim::new(s);
    sim.run();
    sim.finish()
}

impl<'a> Sim<'a> {
    fn new(s: &'a Scenario) -> Self {
        let pat = &s.pattern;
        let procs = (0..s.nodes)
            .map(|p| Proc {
                pc: 0,
                act: Activity::Ready,
                windows: s.ckpt.windows(p, s.horizon),
                last_ckpt_end: 0.0,
                plan: None,
                finish: None,
                first_wait: None,
            })
            .collect();
        Self {
            s,
            pat,
            q: EventQueue::new(),
            procs,
            msgs: vec![MsgState::default(); pat.links().len()],
            trace: Vec::new(),
            last_state: vec![None; s.nodes],
            wait_state: match pat.wait_mode {
                WaitMode::Active => NodeState::WaitActive,
                WaitMode::Idle => NodeState::WaitIdle,
            },
            fail_time: s.failure.time,
            failed_after: false,
            recovery_end: s.failure.time,
            plans: Vec::new(),
            estimates: Vec::new(),
            cascade: Vec::new(),
        }
    }

    fn schedule(&mut self, t: f64, kind: EventKind, node: usize, op: Option<usize>) -> EventId {
        let payload = Payload {
            op,
            ..Payload::default()
        };
        self.q
            .schedule(t, kind, node, payload)
            .expect("handlers only schedule at or after the current clock")
    }

    fn run(&mut self) {
        self.schedule(self.fail_time, EventKind::Failure, self.s.failure.node, None);
        for p in 0..self.s.nodes {
            self.start_segment(p, 0.0, 0.0);
        }
        while let Ok(ev) = self.q.advance() {
            let t = ev.time;
            match ev.kind {
                EventKind::Failure => self.on_failure(t),
                EventKind::ReexecEnd => self.on_recovered(ev.node, t),
                EventKind::SimEnd => self.on_end(ev.node, t),
                EventKind::PostSend | EventKind::PostRecv | EventKind::WaitEnter => {
                    self.on_arrive(ev.node, ev.payload.op.expect("arrival carries a point"), t)
                }
                EventKind::CommComplete | EventKind::CkptEnd | EventKind::WakeupEnd => self.try_resume(ev.node, t),
                _ => {}
            }
        }
    }

    // ---- running segments -------------------------------------------------

    fn next_target(&self, p: usize) -> (Target, f64) {
        let pts = self.pat.points(p);
        match pts.get(self.procs[p].pc) {
            Some(pt) => (Target::Point(self.procs[p].pc), pt.pos),
            None => (Target::End, self.s.horizon),
        }
    }

    /// Wall duration of running `[x0, x1]` of `p`'s program at frequency `f`.
    fn scaled(&self, p: usize, x0: f64, x1: f64, f: usize) -> f64 {
        let lvl = &self.s.profile.freqs[f];
        let ckpt = overlap(&self.procs[p].windows, x0, x1);
        (x1 - x0 - ckpt) * lvl.beta + ckpt * lvl.gamma
    }

    fn start_segment(&mut self, p: usize, x0: f64, t0: f64) {
        let (target, x1) = self.next_target(p);
        let x1 = x1.max(x0);
        let slow = self.procs[p].plan.and_then(|pl| pl.slow);
        let t1 = match (slow, self.procs[p].plan) {
            (Some(_), Some(pl)) if target == Target::Point(pl.block_point) => pl.arrival.max(t0),
            (Some(f), Some(pl)) => (t0 + self.scaled(p, x0, x1, f)).min(pl.arrival).max(t0),
            _ => t0 + (x1 - x0),
        };
        let (kind, op) = match target {
            Target::Point(k) => {
                let pt = self.pat.points(p)[k];
                let kind = match pt.kind {
                    crate::app::PointKind::Post => match self.pat.processes[p][pt.op].direction {
                        Direction::Send => EventKind::PostSend,
                        Direction::Recv => EventKind::PostRecv,
                    },
                    _ => EventKind::WaitEnter,
                };
                (kind, Some(k))
            }
            Target::End => (EventKind::SimEnd, None),
        };
        let event = self.schedule(t1, kind, p, op);
        self.procs[p].act = Activity::Running(Run { x0, t0, slow, event });
    }

    /// Emits COMPUTE/CKPT records for `[x0, x1]` run from `t0` to `t1`.
    fn emit_run(&mut self, p: usize, x0: f64, t0: f64, x1: f64, t1: f64, slow: Option<usize>) {
        let windows = self.procs[p].windows.clone();
        let time_at = |x: f64, this: &Self| -> f64 {
            let t = match slow {
                None => t0 + (x - x0),
                Some(f) => t0 + this.scaled(p, x0, x, f),
            };
            t.min(t1)
        };
        let mut cuts: Vec<(f64, NodeState)> = vec![(x0, state_at(&windows, x0))];
        for &(a, b) in &windows {
            for e in [a, b] {
                if e > x0 && e < x1 {
                    cuts.push((e, state_at(&windows, e)));
                }
            }
        }
        cuts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for i in 0..cuts.len() {
            let (xa, st) = cuts[i];
            let ta = if i == 0 { t0 } else { time_at(xa, self) };
            let tb = if i + 1 < cuts.len() {
                time_at(cuts[i + 1].0, self)
            } else {
                t1
            };
            self.state(p, ta, tb, st);
        }
        for &(_, b) in &windows {
            if b > x0 && b <= x1 {
                let tb = if b == x1 { t1 } else { time_at(b, self) };
                self.procs[p].last_ckpt_end = self.procs[p].last_ckpt_end.max(tb);
            }
        }
    }

    fn state(&mut self, node: usize, t0: f64, t1: f64, state: NodeState) {
        if !(t1 > t0) {
            return;
        }
        if let Some(i) = self.last_state[node] {
            if let TraceRecord::State {
                t1: end, state: prev, ..
            } = &mut self.trace[i]
            {
                if *prev == state && *end == t0 {
                    *end = t1;
                    return;
                }
            }
        }
        self.last_state[node] = Some(self.trace.len());
        self.trace.push(TraceRecord::State { node, t0, t1, state });
    }

    fn flag(&mut self, node: usize, t: f64, edge: FlagEdge, label: String) {
        self.trace.push(TraceRecord::Flag { node, t, edge, label });
    }

    // ---- communication ----------------------------------------------------

    fn is_sender(&self, p: usize, op: usize) -> bool {
        self.pat.processes[p][op].direction == Direction::Send
    }

    fn satisfied(&self, p: usize, op: usize) -> bool {
        let m = &self.msgs[self.pat.message_of(p, op)];
        if self.is_sender(p, op) {
            self.pat.buffered || m.recv_post.is_some()
        } else {
            m.send_post.is_some()
        }
    }

    /// When the peer side that lets `op` complete was posted.
    fn release_time(&self, p: usize, op: usize) -> Option<f64> {
        let m = &self.msgs[self.pat.message_of(p, op)];
        if self.is_sender(p, op) {
            if self.pat.buffered {
                None
            } else {
                m.recv_post
            }
        } else {
            m.send_post
        }
    }

    fn posted(&self, p: usize, op: usize) -> bool {
        let m = &self.msgs[self.pat.message_of(p, op)];
        if self.is_sender(p, op) {
            m.send_post.is_some()
        } else {
            m.recv_post.is_some()
        }
    }

    fn post(&mut self, p: usize, op: usize, t: f64) {
        let id = self.pat.message_of(p, op);
        if self.is_sender(p, op) {
            self.msgs[id].send_post = Some(t);
        } else {
            self.msgs[id].recv_post = Some(t);
        }
        let (q, qop) = self.pat.matching(p, op);
        if let Activity::Blocked(b) = self.procs[q].act {
            if !b.released && self.pat.points(q)[b.point].op == qop && self.satisfied(q, qop) {
                if let Activity::Blocked(bb) = &mut self.procs[q].act {
                    bb.released = true;
                }
                self.schedule(t, EventKind::CommComplete, q, Some(b.point));
            }
        }
    }

    fn complete(&mut self, p: usize, op: usize, t: f64) {
        if self.is_sender(p, op) {
            return;
        }
        let (src, _) = self.pat.matching(p, op);
        let t_post = self.msgs[self.pat.message_of(p, op)]
            .send_post
            .expect("a completed receive has a posted send");
        self.trace.push(TraceRecord::Comm {
            src,
            dst: p,
            t_post,
            t_complete: t,
            mode: self.pat.processes[p][op].mode,
        });
    }

    // ---- handlers ---------------------------------------------------------

    fn on_arrive(&mut self, p: usize, k: usize, t: f64) {
        if let Activity::Running(r) = self.procs[p].act {
            let x1 = self.pat.points(p)[k].pos.max(r.x0);
            self.emit_run(p, r.x0, r.t0, x1, t, r.slow);
        }
        self.arrive_at(p, k, t);
    }

    fn arrive_at(&mut self, p: usize, k: usize, t: f64) {
        let pt = self.pat.points(p)[k];
        self.procs[p].pc = k;
        if pt.posts() && !self.posted(p, pt.op) {
            self.post(p, pt.op, t);
        }
        let at_plan = self.procs[p].plan.is_some_and(|pl| pl.block_point == k);
        if !pt.waits() || self.satisfied(p, pt.op) {
            if pt.waits() {
                self.complete(p, pt.op, t);
            }
            let mut t = t;
            if at_plan {
                self.end_plan(p, t);
                if let Some(r) = self.release_time(p, pt.op) {
                    if t > r && t - r <= SAME_INSTANT {
                        t = r;
                    }
                }
            }
            self.procs[p].pc = k + 1;
            self.start_segment(p, pt.pos, t);
            return;
        }
        self.block(p, k, t, at_plan);
    }

    fn end_plan(&mut self, p: usize, t: f64) {
        if let Some(pl) = self.procs[p].plan.take() {
            if let Some(f) = pl.slow {
                self.flag(p, t, FlagEdge::End, freq_label(self.s.profile.freqs[f].ghz));
            }
        }
    }

    fn block(&mut self, p: usize, k: usize, t: f64, at_plan: bool) {
        let mut b = Blocked {
            point: k,
            since: t,
            ckpt: None,
            sleep: None,
            min_freq: false,
            wait_from: t,
            activity_end: t,
            released: false,
        };
        match (at_plan, self.procs[p].plan) {
            (true, Some(pl)) => {
                self.apply_wait_plan(p, &mut b, t, pl);
                self.procs[p].plan = None;
            }
            (false, Some(pl)) if pl.slow.is_some() => {
                // Blocked before the planned point: give up and run at f_max.
                self.end_plan(p, t);
            }
            _ => {}
        }
        self.procs[p].act = Activity::Blocked(b);
        self.schedule_activity_end(p, &b, t);
    }

    /// Sets up the anticipated checkpoint and the wait action of a plan on a
    /// process that blocks at `t`.
    fn apply_wait_plan(&mut self, p: usize, b: &mut Blocked, t: f64, pl: Plan) {
        let prof = &self.s.profile;
        let mut w0 = t;
        if pl.anticipate {
            let end = match pl.slow {
                Some(_) => pl.ckpt_end.max(t),
                None => t + prof.t_ckpt,
            };
            b.ckpt = Some((t, end));
            w0 = end;
        }
        if let Some(f) = pl.slow {
            self.flag(p, w0, FlagEdge::End, freq_label(prof.freqs[f].ghz));
        }
        b.wait_from = w0;
        b.activity_end = w0;
        match pl.wait {
            WaitAction::Sleep if pl.release_est - w0 >= prof.transition_time() => {
                b.sleep = Some((w0, pl.release_est));
                b.activity_end = pl.release_est;
            }
            WaitAction::MinFreq => b.min_freq = true,
            _ => {}
        }
    }

    fn schedule_activity_end(&mut self, p: usize, b: &Blocked, t: f64) {
        if b.activity_end > t {
            let kind = if b.sleep.is_some() {
                EventKind::WakeupEnd
            } else {
                EventKind::CkptEnd
            };
            self.schedule(b.activity_end, kind, p, Some(b.point));
        }
    }

    fn try_resume(&mut self, p: usize, t: f64) {
        let Activity::Blocked(b) = self.procs[p].act else {
            return;
        };
        if !b.released || t + SAME_INSTANT < b.activity_end {
            return;
        }
        let prof = &self.s.profile;
        if let Some((c0, c1)) = b.ckpt {
            let c1 = c1.min(t);
            self.state(p, c0, c1, NodeState::Ckpt);
            self.procs[p].last_ckpt_end = self.procs[p].last_ckpt_end.max(c1);
        }
        let mut wait_from = b.wait_from.min(t);
        if let Some((w0, rel)) = b.sleep {
            let rel = rel.min(t);
            let (go, wake) = (w0 + prof.t_go_sleep, rel - prof.t_wakeup);
            self.flag(p, w0, FlagEdge::Begin, "SLEEP".into());
            self.state(p, w0, go, NodeState::GoSleep);
            self.state(p, go, wake, NodeState::Sleep);
            self.state(p, wake, rel, NodeState::Wakeup);
            self.flag(p, rel, FlagEdge::End, "SLEEP".into());
            wait_from = rel;
        }
        if b.min_freq {
            self.flag(p, wait_from, FlagEdge::Begin, "MIN_FREQ".into());
        }
        self.state(p, wait_from, t, self.wait_state);
        if b.min_freq {
            self.flag(p, t, FlagEdge::End, "MIN_FREQ".into());
        }
        if self.failed_after && b.since >= self.fail_time && t > b.since && self.procs[p].first_wait.is_none() {
            self.procs[p].first_wait = Some(b.since);
        }
        let pt = self.pat.points(p)[b.point];
        self.complete(p, pt.op, t);
        self.procs[p].pc = b.point + 1;
        self.start_segment(p, pt.pos, t);
    }

    fn on_end(&mut self, p: usize, t: f64) {
        if let Activity::Running(r) = self.procs[p].act {
            self.emit_run(p, r.x0, r.t0, self.s.horizon.max(r.x0), t, r.slow);
        }
        self.end_plan(p, t);
        self.procs[p].act = Activity::Done;
        self.procs[p].finish = Some(t);
    }

    fn on_failure(&mut self, f_time: f64) {
        let fnode = self.s.failure.node;
        self.failed_after = true;
        let n = self.s.nodes;

        // Freeze every process's position at the failure instant.
        let mut pos = vec![0.0; n];
        let mut lag = vec![0.0; n];
        let mut blocked_at_f = vec![false; n];
        for p in 0..n {
            match self.procs[p].act {
                Activity::Running(r) => {
                    let (_, x1) = self.next_target(p);
                    pos[p] = (r.x0 + (f_time - r.t0)).min(x1.max(r.x0));
                    lag[p] = r.t0 - r.x0;
                }
                Activity::Blocked(b) => {
                    pos[p] = self.pat.points(p)[b.point].pos;
                    lag[p] = f_time - pos[p];
                    blocked_at_f[p] = true;
                }
                _ => {
                    pos[p] = self.s.horizon;
                }
            }
        }

        // The failed node stops, restarts and replays its lost work.
        match self.procs[fnode].act {
            Activity::Running(r) => {
                self.q.cancel(r.event);
                self.emit_run(fnode, r.x0, r.t0, pos[fnode], f_time, None);
                self.procs[fnode].act = Activity::Frozen {
                    pos: pos[fnode],
                    at_point: false,
                };
            }
            Activity::Blocked(b) => {
                self.state(fnode, b.wait_from, f_time, self.wait_state);
                self.procs[fnode].pc = b.point;
                self.procs[fnode].act = Activity::Frozen {
                    pos: pos[fnode],
                    at_point: true,
                };
            }
            _ => {}
        }
        let c_end = self.procs[fnode].last_ckpt_end.min(f_time);
        let rec = recovery_end(&self.s.failure, c_end);
        self.recovery_end = rec;
        let restart_end = f_time + self.s.failure.restart_duration;
        self.state(fnode, f_time, restart_end, NodeState::Restart);
        self.state(fnode, restart_end, rec, NodeState::Reexec);
        self.schedule(restart_end, EventKind::RestartEnd, fnode, None);
        self.schedule(rec, EventKind::ReexecEnd, fnode, None);

        // Estimate the cascade from what is known now.
        let posted: Vec<Vec<bool>> = (0..n)
            .map(|p| (0..self.pat.processes[p].len()).map(|op| self.posted(p, op)).collect())
            .collect();
        let pc: Vec<usize> = (0..n)
            .map(|p| match self.procs[p].act {
                Activity::Done => self.pat.points(p).len(),
                _ => self.procs[p].pc,
            })
            .collect();
        let view = FailureView {
            pattern: self.pat,
            failed: fnode,
            fail_time: f_time,
            lag: lag.clone(),
            pc,
            posted,
        };
        let blocks = analyze(&view, self.s.depth);
        let failed_delta = rec - pos[fnode];
        let entries = estimate_releases(&view, &blocks, failed_delta);

        let mode = self.pat.wait_mode;
        for e in &entries {
            let sp = e.estimate.process;
            let k = self.pat.wait_point(sp, e.estimate.op);
            let xk = self.pat.points(sp)[k].pos.max(pos[sp]);
            let block_wall = (xk + lag[sp]).max(f_time);
            let ov = overlap(&self.procs[sp].windows, pos[sp], xk);
            let t_ckpt = self.s.profile.t_ckpt;

            let mut last = self.procs[sp].last_ckpt_end;
            for &(_, b) in &self.procs[sp].windows {
                if b > pos[sp] && b <= xk {
                    last = last.max(b + lag[sp]);
                }
            }
            let anticipate = should_anticipate(&self.s.ckpt, block_wall, last) && e.release - block_wall >= t_ckpt;

            let locked = blocked_at_f[sp] || self.hazard(sp, k, e, &entries, failed_delta, &view.pc);
            let est = PhaseEstimate {
                node: sp,
                phase_start: f_time,
                t_comp_fmax: ((xk - pos[sp]) - ov).max(0.0),
                n_ckpt: ov / t_ckpt + if anticipate { 1.0 } else { 0.0 },
                reference_end: e.release,
                frequency_locked: locked,
            };
            let plan = if self.s.strategies_enabled {
                node_best_plan(&est, &self.s.profile, mode)
            } else {
                NodePlan::baseline(&est, &self.s.profile, mode)
            };

            let slow = (plan.compute_freq != 0).then_some(plan.compute_freq);
            let mut sim_plan = Plan {
                block_point: k,
                slow,
                arrival: block_wall,
                ckpt_end: block_wall,
                anticipate,
                wait: plan.wait_action,
                release_est: e.release,
            };
            if let Some(fi) = slow {
                let lvl = &self.s.profile.freqs[fi];
                let phase_end = est.phase_end(lvl, &self.s.profile);
                let periodic = ov / t_ckpt * (t_ckpt * lvl.gamma);
                let arrival = f_time + (est.t_comp_fmax * lvl.beta + periodic);
                sim_plan.arrival = arrival.min(phase_end);
                sim_plan.ckpt_end = phase_end;
            }
            self.procs[sp].plan = Some(sim_plan);
            if let Activity::Blocked(mut b) = self.procs[sp].act {
                // Already waiting on this block: the wait action starts now.
                if b.point == k && !b.released {
                    self.state(sp, b.wait_from, f_time, self.wait_state);
                    b.wait_from = f_time;
                    self.apply_wait_plan(sp, &mut b, f_time, sim_plan);
                    self.procs[sp].plan = None;
                    self.procs[sp].act = Activity::Blocked(b);
                    self.schedule_activity_end(sp, &b, f_time);
                }
            }
            if let (Some(fi), Activity::Running(r)) = (slow, self.procs[sp].act) {
                self.q.cancel(r.event);
                self.emit_run(sp, r.x0, r.t0, pos[sp], f_time, None);
                self.flag(sp, f_time, FlagEdge::Begin, freq_label(self.s.profile.freqs[fi].ghz));
                self.start_segment(sp, pos[sp], f_time);
            }
            self.estimates.push(est);
            self.plans.push(plan);
        }
        self.cascade = entries;
    }

    /// Whether slowing `sp`'s compute phase could delay a post some other
    /// process is or will be waiting on.
    fn hazard(
        &self,
        sp: usize,
        block_point: usize,
        me: &CascadeEntry,
        entries: &[CascadeEntry],
        failed_delta: f64,
        pc: &[usize],
    ) -> bool {
        let fnode = self.s.failure.node;
        let pts = self.pat.points(sp);
        for pt in &pts[pc[sp].min(block_point)..block_point] {
            if !pt.posts() {
                continue;
            }
            let (q, qop) = self.pat.matching(sp, pt.op);
            if !self.pat.can_block(q, qop) {
                continue;
            }
            let qk = self.pat.wait_point(q, qop);
            let qpos = self.pat.points(q)[qk].pos;
            let harmless = if q == fnode {
                qk >= pc[q] && qpos + failed_delta >= me.release
            } else if let Some(other) = entries.iter().find(|x| x.estimate.process == q) {
                let qb = self.pat.wait_point(q, other.estimate.op);
                qk > qb && qpos + other.delta >= me.release
            } else {
                false
            };
            if !harmless {
                return true;
            }
        }
        false
    }

    fn on_recovered(&mut self, p: usize, t: f64) {
        let Activity::Frozen { pos, at_point } = self.procs[p].act else {
            return;
        };
        if at_point {
            let k = self.procs[p].pc;
            self.procs[p].act = Activity::Ready;
            self.arrive_at(p, k, t);
        } else {
            self.start_segment(p, pos, t);
        }
    }

    fn finish(mut self) -> SimOutcome {
        let clock = self.q.clock();
        let stalled = self.procs.iter().any(|p| p.finish.is_none());
        let finish: Vec<f64> = self.procs.iter().map(|p| p.finish.unwrap_or(clock)).collect();
        let makespan = finish.iter().copied().fold(0.0, f64::max);
        for (p, &f) in finish.iter().enumerate() {
            self.state(p, f, makespan, self.wait_state);
        }
        let mut plans = self.plans;
        let mut order: Vec<usize> = (0..plans.len()).collect();
        order.sort_by_key(|&i| plans[i].node);
        plans = order.iter().map(|&i| plans[i].clone()).collect();
        let estimates = order.iter().map(|&i| self.estimates[i].clone()).collect();
        SimOutcome {
            report: SavingsReport::from_plans(&plans, &self.s.profile),
            plans,
            estimates,
            cascade: self.cascade,
            trace: self.trace,
            makespan,
            finish,
            first_wait: self.procs.iter().map(|p| p.first_wait).collect(),
            recovery_end: self.recovery_end,
            stalled,
        }
    }
}

fn freq_label(ghz: f64) -> String {
    format!("FREQ_{}", fmt_ghz(ghz))
}

/// Length of `[x0, x1]` covered by the windows.
fn overlap(windows: &[(f64, f64)], x0: f64, x1: f64) -> f64 {
    windows.iter().map(|&(a, b)| (b.min(x1) - a.max(x0)).max(0.0)).sum()
}

fn state_at(windows: &[(f64, f64)], x: f64) -> NodeState {
    if windows.iter().any(|&(a, b)| a <= x && x < b) {
        NodeState::Ckpt
    } else {
        NodeState::Compute
    }
}
