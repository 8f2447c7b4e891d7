//! Application model: one representative process per node, a fixed
//! communication pattern and MPI standard-mode semantics.
//!
//! Every process runs on its own *program axis*, measured in seconds of work
//! at the maximum frequency. Operations sit at fixed positions on that axis;
//! wall-clock time is the position plus whatever delay the process has
//! accumulated in waits.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::energy::{FrequencyLevel, SystemProfile};
use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Send,
    Recv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpMode {
    Blocking,
    NonBlocking,
}

impl fmt::Display for OpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OpMode::Blocking => "BLOCKING",
            OpMode::NonBlocking => "NONBLOCKING",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaitMode {
    Active,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessStatus {
    Computing,
    BlockedWait,
    Checkpointing,
    Sleeping,
    Restarting,
    Reexecuting,
    Done,
}

impl ProcessStatus {
    /// Allowed state-graph edges (failure edges start from any live state).
    pub fn can_become(self, next: ProcessStatus) -> bool {
        use ProcessStatus::*;
        matches!(
            (self, next),
            (Computing, BlockedWait)
                | (BlockedWait, Computing)
                | (Computing, Checkpointing)
                | (Checkpointing, Computing)
                | (BlockedWait, Sleeping)
                | (Sleeping, BlockedWait)
                | (Restarting, Reexecuting)
                | (Reexecuting, Computing)
                | (Computing, Done)
        ) || (next == Restarting && self != Done)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommOp {
    pub index: usize,
    pub peer: usize,
    pub direction: Direction,
    pub mode: OpMode,
    /// Program position where the operation is posted.
    pub post_time_offset: f64,
    /// Program position of the completing wait; equals the post for blocking ops.
    pub wait_offset: f64,
}

impl CommOp {
    pub fn blocking(index: usize, peer: usize, direction: Direction, at: f64) -> Self {
        Self {
            index,
            peer,
            direction,
            mode: OpMode::Blocking,
            post_time_offset: at,
            wait_offset: at,
        }
    }

    pub fn nonblocking(index: usize, peer: usize, direction: Direction, at: f64, wait_at: f64) -> Self {
        Self {
            index,
            peer,
            direction,
            mode: OpMode::NonBlocking,
            post_time_offset: at,
            wait_offset: wait_at,
        }
    }
}

/// One message of a pattern repetition: `src -> dst` at `offset` seconds into
/// each repetition (both sides post at the same program position).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MessageSpec {
    pub src: usize,
    pub dst: usize,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointKind {
    Post,
    Block,
    Wait,
}

/// A program point: where a process posts, blocks, or waits on an operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub pos: f64,
    pub kind: PointKind,
    pub op: usize,
}

impl Point {
    pub fn posts(&self) -> bool {
        self.kind != PointKind::Wait
    }

    pub fn waits(&self) -> bool {
        self.kind != PointKind::Post
    }
}

/// Both ends of a matched message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub sender: (usize, usize),
    pub receiver: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommPattern {
    pub processes: Vec<Vec<CommOp>>,
    pub interval: f64,
    pub buffered: bool,
    pub wait_mode: WaitMode,
    pub message_size: u64,
    links: Vec<Link>,
    /// `(node, op) -> message id`
    msg_of: Vec<Vec<usize>>,
    points: Vec<Vec<Point>>,
    /// `(node, op) -> (post point index, wait point index)`
    point_of: Vec<Vec<(usize, usize)>>,
}

impl CommPattern {
    /// Matches sends and receives FIFO per channel and builds program points.
    pub fn new(
        processes: Vec<Vec<CommOp>>,
        interval: f64,
        buffered: bool,
        wait_mode: WaitMode,
        message_size: u64,
    ) -> Result<Self, ModelError> {
        let n = processes.len();
        let mut queues: HashMap<(usize, usize), VecDeque<usize>> = HashMap::new();
        for (p, ops) in processes.iter().enumerate() {
            for op in ops {
                if op.peer >= n || op.peer == p {
                    return Err(ModelError::UnmatchedOp {
                        node: p,
                        index: op.index,
                    });
                }
                if op.direction == Direction::Recv {
                    queues.entry((op.peer, p)).or_default().push_back(op.index);
                }
            }
        }
        let mut links = Vec::new();
        let mut msg_of: Vec<Vec<usize>> = processes.iter().map(|ops| vec![usize::MAX; ops.len()]).collect();
        for (p, ops) in processes.iter().enumerate() {
            for op in ops.iter().filter(|o| o.direction == Direction::Send) {
                let recv =
                    queues
                        .get_mut(&(p, op.peer))
                        .and_then(|q| q.pop_front())
                        .ok_or(ModelError::UnmatchedOp {
                            node: p,
                            index: op.index,
                        })?;
                msg_of[p][op.index] = links.len();
                msg_of[op.peer][recv] = links.len();
                links.push(Link {
                    sender: (p, op.index),
                    receiver: (op.peer, recv),
                });
            }
        }
        for (p, ops) in processes.iter().enumerate() {
            if let Some(i) = msg_of[p].iter().position(|&m| m == usize::MAX) {
                return Err(ModelError::UnmatchedOp {
                    node: p,
                    index: ops[i].index,
                });
            }
        }

        let mut points = Vec::with_capacity(n);
        let mut point_of = Vec::with_capacity(n);
        for ops in &processes {
            let mut pts = Vec::new();
            for op in ops {
                match op.mode {
                    OpMode::Blocking => pts.push(Point {
                        pos: op.post_time_offset,
                        kind: PointKind::Block,
                        op: op.index,
                    }),
                    OpMode::NonBlocking => {
                        pts.push(Point {
                            pos: op.post_time_offset,
                            kind: PointKind::Post,
                            op: op.index,
                        });
                        pts.push(Point {
                            pos: op.wait_offset,
                            kind: PointKind::Wait,
                            op: op.index,
                        });
                    }
                }
            }
            pts.sort_by(|a, b| a.pos.total_cmp(&b.pos).then(a.kind.cmp(&b.kind)).then(a.op.cmp(&b.op)));
            let mut idx = vec![(0, 0); ops.len()];
            for (i, pt) in pts.iter().enumerate() {
                match pt.kind {
                    PointKind::Post => idx[pt.op].0 = i,
                    PointKind::Wait => idx[pt.op].1 = i,
                    PointKind::Block => idx[pt.op] = (i, i),
                }
            }
            points.push(pts);
            point_of.push(idx);
        }

        Ok(Self {
            processes,
            interval,
            buffered,
            wait_mode,
            message_size,
            links,
            msg_of,
            points,
            point_of,
        })
    }

    pub fn nodes(&self) -> usize {
        self.processes.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn message_of(&self, node: usize, op: usize) -> usize {
        self.msg_of[node][op]
    }

    /// The peer's end of `(node, op)`.
    pub fn matching(&self, node: usize, op: usize) -> (usize, usize) {
        let l = self.links[self.msg_of[node][op]];
        if l.sender == (node, op) {
            l.receiver
        } else {
            l.sender
        }
    }

    pub fn points(&self, node: usize) -> &[Point] {
        &self.points[node]
    }

    pub fn post_point(&self, node: usize, op: usize) -> usize {
        self.point_of[node][op].0
    }

    pub fn wait_point(&self, node: usize, op: usize) -> usize {
        self.point_of[node][op].1
    }

    /// Whether the `(node, op)` side can be held up by its peer.
    pub fn can_block(&self, node: usize, op: usize) -> bool {
        match self.processes[node][op].direction {
            Direction::Recv => true,
            Direction::Send => !self.buffered,
        }
    }

    /// Checks the per-process ordering invariants.
    pub fn validate(&self) -> Result<(), String> {
        for (p, ops) in self.processes.iter().enumerate() {
            for (i, op) in ops.iter().enumerate() {
                if op.index != i {
                    return Err(format!("process {p}: op indices must be 0..n in order"));
                }
                if !op.post_time_offset.is_finite() || op.post_time_offset < 0.0 {
                    return Err(format!("process {p}: op {i} has an invalid offset"));
                }
                if op.mode == OpMode::NonBlocking && !(op.wait_offset >= op.post_time_offset) {
                    return Err(format!("process {p}: op {i} waits before it posts"));
                }
                if op.mode == OpMode::Blocking && op.wait_offset != op.post_time_offset {
                    return Err(format!("process {p}: blocking op {i} has a separate wait"));
                }
            }
            for w in ops.windows(2) {
                if !(w[1].post_time_offset > w[0].post_time_offset) {
                    return Err(format!(
                        "process {p}: two operations post at {} s",
                        w[1].post_time_offset
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Unrolls per-repetition messages up to `horizon` (exclusive) into per-process
/// operation lists. Non-blocking waits sit `wait_lag` seconds after the post.
pub fn expand_pattern(
    nodes: usize,
    messages: &[MessageSpec],
    interval: f64,
    horizon: f64,
    mode: OpMode,
    wait_lag: f64,
) -> Vec<Vec<CommOp>> {
    let mut raw: Vec<Vec<(f64, usize, Direction)>> = vec![Vec::new(); nodes];
    let mut k = 0u64;
    loop {
        let base = k as f64 * interval;
        if base >= horizon {
            break;
        }
        for m in messages {
            let at = base + m.offset;
            if at < horizon {
                raw[m.src].push((at, m.dst, Direction::Send));
                raw[m.dst].push((at, m.src, Direction::Recv));
            }
        }
        k += 1;
    }
    raw.into_iter()
        .map(|mut ops| {
            ops.sort_by(|a, b| a.0.total_cmp(&b.0));
            ops.into_iter()
                .enumerate()
                .map(|(i, (at, peer, dir))| match mode {
                    OpMode::Blocking => CommOp::blocking(i, peer, dir, at),
                    OpMode::NonBlocking => CommOp::nonblocking(i, peer, dir, at, at + wait_lag),
                })
                .collect()
        })
        .collect()
}

/// Completion times of one message given when each side is ready.
///
/// The sender of a buffered message returns as soon as it is ready; every other
/// side completes once both sides are ready (zero transmission latency).
pub fn completion_time(
    op: &CommOp,
    owner: usize,
    pattern: &CommPattern,
    sender_ready: f64,
    receiver_ready: f64,
) -> Result<(f64, f64), ModelError> {
    let ops = pattern.processes.get(owner).ok_or(ModelError::UnmatchedOp {
        node: owner,
        index: op.index,
    })?;
    if ops
        .get(op.index)
        .is_none_or(|o| o.peer != op.peer || o.direction != op.direction)
    {
        return Err(ModelError::UnmatchedOp {
            node: owner,
            index: op.index,
        });
    }
    let both = sender_ready.max(receiver_ready);
    let sender_done = if pattern.buffered { sender_ready } else { both };
    Ok((sender_done, both))
}

/// Earliest program position strictly after `after` at which `child` posts an
/// operation with `parent`; +inf when none remain.
pub fn next_comm(pattern: &CommPattern, child: usize, parent: usize, after: f64) -> f64 {
    pattern.processes[child]
        .iter()
        .filter(|o| o.peer == parent && o.post_time_offset > after)
        .map(|o| o.post_time_offset)
        .next()
        .unwrap_or(f64::INFINITY)
}

/// Power drawn while waiting at `f`.
pub fn wait_power(mode: WaitMode, f: &FrequencyLevel, profile: &SystemProfile) -> Result<f64, ModelError> {
    let row = profile.level(f.ghz)?;
    Ok(match mode {
        WaitMode::Active => row.p_active_wait,
        WaitMode::Idle => profile.p_idle_wait,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(buffered: bool) -> CommPattern {
        let ops = vec![
            vec![CommOp::blocking(0, 1, Direction::Send, 10.0)],
            vec![CommOp::blocking(0, 0, Direction::Recv, 10.0)],
        ];
        CommPattern::new(ops, 60.0, buffered, WaitMode::Active, 1).unwrap()
    }

    #[test]
    fn blocking_unbuffered_completes_together() {
        let p = pair(false);
        let op = &p.processes[0][0];
        assert_eq!(completion_time(op, 0, &p, 10.0, 30.0).unwrap(), (30.0, 30.0));
    }

    #[test]
    fn blocking_buffered_sender_returns_early() {
        let p = pair(true);
        let op = &p.processes[0][0];
        assert_eq!(completion_time(op, 0, &p, 10.0, 30.0).unwrap(), (10.0, 30.0));
    }

    #[test]
    fn simultaneous_ready_is_mode_independent() {
        for b in [false, true] {
            let p = pair(b);
            let op = &p.processes[0][0];
            assert_eq!(completion_time(op, 0, &p, 0.0, 0.0).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn unknown_op_is_unmatched() {
        let p = pair(false);
        let stray = CommOp::blocking(3, 1, Direction::Send, 1.0);
        assert!(matches!(
            completion_time(&stray, 0, &p, 0.0, 0.0),
            Err(ModelError::UnmatchedOp { node: 0, index: 3 })
        ));
        let ops = vec![vec![CommOp::blocking(0, 1, Direction::Send, 1.0)], vec![]];
        assert!(CommPattern::new(ops, 10.0, false, WaitMode::Active, 1).is_err());
    }

    fn every_minute() -> CommPattern {
        let msgs = [MessageSpec {
            src: 1,
            dst: 2,
            offset: 60.0,
        }];
        let ops = expand_pattern(3, &msgs, 60.0, 400.0, OpMode::Blocking, 0.0);
        CommPattern::new(ops, 60.0, false, WaitMode::Active, 1).unwrap()
    }

    #[test]
    fn next_comm_examples() {
        let p = every_minute();
        assert_eq!(next_comm(&p, 2, 1, 130.0), 180.0);
        assert_eq!(next_comm(&p, 2, 1, 360.0), f64::INFINITY);
        let msgs = [MessageSpec {
            src: 1,
            dst: 2,
            offset: 0.0,
        }];
        let ops = expand_pattern(3, &msgs, 60.0, 400.0, OpMode::Blocking, 0.0);
        let p = CommPattern::new(ops, 60.0, false, WaitMode::Active, 1).unwrap();
        assert_eq!(next_comm(&p, 2, 1, 0.0), 60.0);
    }

    #[test]
    fn wait_power_examples() {
        let prof = SystemProfile::reference();
        assert_eq!(wait_power(WaitMode::Active, prof.fmin(), &prof).unwrap(), 126.0);
        assert_eq!(wait_power(WaitMode::Idle, &prof.freqs[1], &prof).unwrap(), 60.0);
        assert_eq!(wait_power(WaitMode::Active, prof.fmax(), &prof).unwrap(), 166.0);
        let odd = FrequencyLevel::new(3.3, 1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            wait_power(WaitMode::Active, &odd, &prof),
            Err(ModelError::UnknownFrequency(_))
        ));
    }

    #[test]
    fn fifo_matching_and_points() {
        let msgs = [
            MessageSpec {
                src: 0,
                dst: 1,
                offset: 5.0,
            },
            MessageSpec {
                src: 0,
                dst: 1,
                offset: 7.0,
            },
        ];
        let ops = expand_pattern(2, &msgs, 10.0, 20.0, OpMode::NonBlocking, 4.0);
        let p = CommPattern::new(ops, 10.0, false, WaitMode::Idle, 1).unwrap();
        p.validate().unwrap();
        for (i, l) in p.links().iter().enumerate() {
            assert_eq!(l.sender.1, l.receiver.1, "message {i}");
            assert_eq!(p.matching(l.sender.0, l.sender.1), l.receiver);
        }
        let kinds: Vec<_> = p.points(0).iter().map(|pt| (pt.pos, pt.kind)).collect();
        assert_eq!(kinds[0], (5.0, PointKind::Post));
        assert_eq!(kinds[1], (7.0, PointKind::Post));
        assert_eq!(kinds[2], (9.0, PointKind::Wait));
        assert_eq!(p.wait_point(0, 1), 3);
        assert!(p.can_block(1, 0));
        assert!(p.can_block(0, 0));
    }

    #[test]
    fn duplicate_offsets_are_invalid() {
        let msgs = [
            MessageSpec {
                src: 0,
                dst: 1,
                offset: 5.0,
            },
            MessageSpec {
                src: 2,
                dst: 1,
                offset: 5.0,
            },
        ];
        let ops = expand_pattern(3, &msgs, 10.0, 20.0, OpMode::Blocking, 0.0);
        let p = CommPattern::new(ops, 10.0, false, WaitMode::Active, 1).unwrap();
        assert!(p.validate().is_err());
    }

    #[test]
    fn state_graph() {
        use ProcessStatus::*;
        assert!(Computing.can_become(BlockedWait));
        assert!(Sleeping.can_become(BlockedWait));
        assert!(Computing.can_become(Restarting));
        assert!(!Computing.can_become(Sleeping));
        assert!(!Done.can_become(Restarting));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn buffering_dominance(s in 0.0f64..1e4, r in 0.0f64..1e4) {
                let (a, _) = completion_time(&pair(true).processes[0][0], 0, &pair(true), s, r).unwrap();
                let (b, _) = completion_time(&pair(false).processes[0][0], 0, &pair(false), s, r).unwrap();
                prop_assert!(a <= b);
            }

            #[test]
            fn expansion_is_matched_and_ordered(
                offs in proptest::collection::vec((0usize..3, 1usize..3, 0.0f64..50.0), 1..6),
                nb in any::<bool>()
            ) {
                let msgs: Vec<_> = offs.iter()
                    .map(|&(s, d, o)| MessageSpec { src: s, dst: (s + d) % 3, offset: o })
                    .collect();
                let mode = if nb { OpMode::NonBlocking } else { OpMode::Blocking };
                let ops = expand_pattern(3, &msgs, 50.0, 200.0, mode, 3.0);
                let p = CommPattern::new(ops, 50.0, false, WaitMode::Active, 1).unwrap();
                for l in p.links() {
                    let s = &p.processes[l.sender.0][l.sender.1];
                    let r = &p.processes[l.receiver.0][l.receiver.1];
                    prop_assert_eq!(s.post_time_offset, r.post_time_offset);
                }
            }
        }
    }
}
