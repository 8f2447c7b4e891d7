//! Cascade-blocking analysis performed at failure time.
//!
//! Starting from the failed process, each level finds the processes that will
//! block on a communication with a process of the previous level, examining at
//! most `depth` communications per pair. Processes found at the same level can
//! also block on each other earlier than on their parent; a convergence pass
//! lowers those block times until nothing changes.

use std::collections::{BTreeMap, BTreeSet};

use crate::app::CommPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthConfig {
    pub depth: usize,
}

impl DepthConfig {
    pub fn new(depth: usize) -> Option<Self> {
        (depth >= 1).then_some(Self { depth })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockEstimate {
    pub process: usize,
    pub block_time: f64,
    pub level: usize,
    /// Process this one blocks against.
    pub cause: usize,
    /// Operation of `process` it blocks on.
    pub op: usize,
}

/// What is known about every process at the failure instant.
#[derive(Debug, Clone)]
pub struct FailureView<'a> {
    pub pattern: &'a CommPattern,
    pub failed: usize,
    pub fail_time: f64,
    /// Wall time minus program position, per process.
    pub lag: Vec<f64>,
    /// Index of each process's first unfinished program point.
    pub pc: Vec<usize>,
    /// Whether each `(node, op)` side has already been posted.
    pub posted: Vec<Vec<bool>>,
}

impl<'a> FailureView<'a> {
    /// View of an undisturbed run at f_max, where wall time equals position.
    pub fn at_fmax(pattern: &'a CommPattern, failed: usize, fail_time: f64) -> Self {
        let n = pattern.nodes();
        let pc = (0..n)
            .map(|p| {
                pattern
                    .points(p)
                    .iter()
                    .position(|pt| pt.pos >= fail_time)
                    .unwrap_or(pattern.points(p).len())
            })
            .collect();
        let posted = pattern
            .processes
            .iter()
            .map(|ops| ops.iter().map(|o| o.post_time_offset < fail_time).collect())
            .collect();
        Self {
            pattern,
            failed,
            fail_time,
            lag: vec![0.0; n],
            pc,
            posted,
        }
    }

    fn communicates(&self, a: usize, b: usize) -> bool {
        self.pattern.processes[a].iter().any(|o| o.peer == b)
    }

    /// Whether `parent` posts its side of `op` (one of its own ops) before
    /// being stuck at `stuck` (its block point; `None` for the failed process).
    fn parent_reaches(&self, parent: usize, op: usize, stuck: Option<usize>) -> bool {
        if self.posted[parent][op] {
            return true;
        }
        match stuck {
            None => false,
            Some(bp) => self.pattern.post_point(parent, op) <= bp,
        }
    }

    /// First of the next `depth` communications of `child` with `parent` that
    /// cannot complete because `parent` never gets to post its side.
    fn find_block(&self, child: usize, parent: usize, stuck: Option<usize>, depth: usize) -> Option<(usize, f64)> {
        let pat = self.pattern;
        let mut cands: Vec<usize> = pat.processes[child]
            .iter()
            .filter(|o| o.peer == parent && pat.can_block(child, o.index))
            .map(|o| o.index)
            .filter(|&j| pat.wait_point(child, j) >= self.pc[child])
            // exchanges the parent already posted happened before the failure
            .filter(|&j| !self.posted[parent][pat.matching(child, j).1])
            .collect();
        cands.sort_by_key(|&j| pat.wait_point(child, j));
        for &j in cands.iter().take(depth) {
            let (_, pj) = pat.matching(child, j);
            if !self.parent_reaches(parent, pj, stuck) {
                let pos = pat.points(child)[pat.wait_point(child, j)].pos;
                return Some((j, (pos + self.lag[child]).max(self.fail_time)));
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    time: f64,
    op: usize,
    cause: usize,
    level: usize,
}

/// Block estimate for every process the failure blocks, directly or in cascade.
pub fn estimate_block_times(
    pattern: &CommPattern,
    failed: usize,
    fail_time: f64,
    depth: DepthConfig,
) -> Vec<BlockEstimate> {
    analyze(&FailureView::at_fmax(pattern, failed, fail_time), depth)
}

pub fn analyze(view: &FailureView<'_>, depth: DepthConfig) -> Vec<BlockEstimate> {
    let n = view.pattern.nodes();
    let mut global: BTreeSet<usize> = BTreeSet::from([view.failed]);
    // (process, block point or None for the failed one, level)
    let mut list1: Vec<(usize, Option<usize>, usize)> = vec![(view.failed, None, 0)];
    let mut out = Vec::new();

    while !list1.is_empty() {
        let in_list1: BTreeSet<usize> = list1.iter().map(|e| e.0).collect();
        let mut list2: BTreeMap<usize, Entry> = BTreeMap::new();
        for &(parent, stuck, level) in &list1 {
            for child in 0..n {
                if global.contains(&child) || in_list1.contains(&child) || !view.communicates(child, parent) {
                    continue;
                }
                if let Some((op, time)) = view.find_block(child, parent, stuck, depth.depth) {
                    let e = Entry {
                        time,
                        op,
                        cause: parent,
                        level: level + 1,
                    };
                    match list2.get(&child) {
                        Some(old) if old.time <= time => {}
                        _ => {
                            list2.insert(child, e);
                        }
                    }
                }
            }
        }

        let keys: Vec<usize> = list2.keys().copied().collect();
        loop {
            let mut changed = false;
            for &i in &keys {
                for &x in &keys {
                    let (ei, ex) = (list2[&i], list2[&x]);
                    if x == i || !(ex.time < ei.time) || !view.communicates(i, x) {
                        continue;
                    }
                    let stuck = view.pattern.wait_point(x, ex.op);
                    if let Some((op, time)) = view.find_block(i, x, Some(stuck), depth.depth) {
                        if time < ei.time {
                            list2.insert(
                                i,
                                Entry {
                                    time,
                                    op,
                                    cause: x,
                                    level: ex.level + 1,
                                },
                            );
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        list1.clear();
        for (&p, e) in &list2 {
            global.insert(p);
            list1.push((p, Some(view.pattern.wait_point(p, e.op)), e.level));
            out.push(BlockEstimate {
                process: p,
                block_time: e.time,
                level: e.level,
                cause: e.cause,
                op: e.op,
            });
        }
    }
    out.sort_by(|a, b| a.block_time.total_cmp(&b.block_time).then(a.process.cmp(&b.process)));
    out
}

/// A block estimate with its predicted release.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeEntry {
    pub estimate: BlockEstimate,
    pub release: f64,
    /// Delay (release minus program position of the block point) carried into
    /// everything this process does afterwards.
    pub delta: f64,
}

/// Predicts when each block is released: the cause posts its side at that
/// side's program position shifted by the cause's own delay. `failed_delta`
/// is the failed process's delay (recovery end minus its position at the
/// failure). Entries that would not actually wait are dropped, and so is any
/// entry whose cause was dropped.
pub fn estimate_releases(view: &FailureView<'_>, estimates: &[BlockEstimate], failed_delta: f64) -> Vec<CascadeEntry> {
    let pat = view.pattern;
    let mut order: Vec<&BlockEstimate> = estimates.iter().collect();
    order.sort_by(|a, b| {
        a.block_time
            .total_cmp(&b.block_time)
            .then(a.level.cmp(&b.level))
            .then(a.process.cmp(&b.process))
    });
    let mut delta_of: BTreeMap<usize, f64> = BTreeMap::from([(view.failed, failed_delta)]);
    let mut out = Vec::new();
    for e in order {
        let Some(&d_cause) = delta_of.get(&e.cause) else {
            continue;
        };
        let (c, cop) = pat.matching(e.process, e.op);
        let y = pat.points(c)[pat.post_point(c, cop)].pos;
        let release = y + d_cause;
        if !(release > e.block_time) {
            continue;
        }
        let delta = release - pat.points(e.process)[pat.wait_point(e.process, e.op)].pos;
        delta_of.insert(e.process, delta);
        out.push(CascadeEntry {
            estimate: e.clone(),
            release,
            delta,
        });
    }
    out
}

/// Largest number of messages any pair of processes exchanges within one
/// repetition of the pattern.
pub fn pattern_depth(pattern: &CommPattern) -> usize {
    let mut counts: BTreeMap<(usize, usize, i64), usize> = BTreeMap::new();
    for l in pattern.links() {
        let (s, so) = l.sender;
        let r = l.receiver.0;
        let at = pattern.processes[s][so].post_time_offset;
        let rep = if pattern.interval > 0.0 {
            (at / pattern.interval).floor() as i64
        } else {
            0
        };
        *counts.entry((s.min(r), s.max(r), rep)).or_default() += 1;
    }
    counts.values().copied().max().unwrap_or(0).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::app::{expand_pattern, MessageSpec, OpMode, WaitMode};

    fn pattern(nodes: usize, msgs: &[(usize, usize, f64)], interval: f64, horizon: f64, buffered: bool) -> CommPattern {
        let specs: Vec<_> = msgs
            .iter()
            .map(|&(src, dst, offset)| MessageSpec { src, dst, offset })
            .collect();
        let ops = expand_pattern(nodes, &specs, interval, horizon, OpMode::Blocking, 0.0);
        CommPattern::new(ops, interval, buffered, WaitMode::Active, 1).unwrap()
    }

    fn d(n: usize) -> DepthConfig {
        DepthConfig::new(n).unwrap()
    }

    #[test]
    fn earlier_sibling_lowers_block_time() {
        // P1 fails; P2 meets P1 at t1, P3 meets P2 at t2 and P1 at t3.
        let (t1, t2, t3) = (100.0, 150.0, 200.0);
        let p = pattern(4, &[(1, 2, t1), (2, 3, t2), (1, 3, t3)], 1000.0, 1000.0, false);
        let est = estimate_block_times(&p, 1, 50.0, d(3));
        let got: Vec<_> = est.iter().map(|e| (e.process, e.block_time, e.cause)).collect();
        assert_eq!(got, vec![(2, t1, 1), (3, t2, 2)]);
    }

    #[test]
    fn isolated_failed_node_blocks_nobody() {
        let p = pattern(3, &[(1, 2, 10.0)], 100.0, 1000.0, false);
        assert!(estimate_block_times(&p, 0, 50.0, d(5)).is_empty());
    }

    fn depth_topology() -> CommPattern {
        let msgs = [
            (0, 1, 250.0),
            (2, 1, 10.0),
            (2, 1, 76.0),
            (2, 1, 142.0),
            (2, 1, 208.0),
            (2, 1, 274.0),
            (3, 2, 300.0),
        ];
        pattern(4, &msgs, 330.0, 2500.0, false)
    }

    #[test]
    fn deeper_search_finds_cascade() {
        let p = depth_topology();
        let shallow = estimate_block_times(&p, 0, 969.4, d(1));
        assert_eq!(shallow.len(), 1);
        assert_eq!((shallow[0].process, shallow[0].block_time), (1, 1240.0));

        let deep = estimate_block_times(&p, 0, 969.4, d(5));
        let got: Vec<_> = deep.iter().map(|e| (e.process, e.block_time, e.level)).collect();
        assert_eq!(got, vec![(1, 1240.0, 1), (2, 1264.0, 2), (3, 1290.0, 3)]);
        assert_eq!(pattern_depth(&p), 5);
    }

    #[test]
    fn pattern_depth_counts_both_directions() {
        let once = pattern(3, &[(0, 1, 1.0), (1, 2, 2.0)], 10.0, 100.0, false);
        assert_eq!(pattern_depth(&once), 1);
        let msgs = [(0, 1, 1.0), (0, 1, 2.0), (0, 1, 3.0), (1, 0, 4.0), (1, 0, 5.0)];
        assert_eq!(pattern_depth(&pattern(2, &msgs, 10.0, 100.0, false)), 5);
    }

    #[test]
    fn buffered_senders_never_block() {
        let p = pattern(3, &[(1, 0, 100.0), (2, 0, 100.5)], 300.0, 2000.0, true);
        assert!(estimate_block_times(&p, 0, 725.0, d(4)).is_empty());
    }

    #[test]
    fn releases_follow_the_cause_chain() {
        let p = depth_topology();
        let view = FailureView::at_fmax(&p, 0, 969.4);
        let est = analyze(&view, d(5));
        // failed process resumes 240 s late
        let rel = estimate_releases(&view, &est, 240.0);
        let got: Vec<_> = rel.iter().map(|e| (e.estimate.process, e.release)).collect();
        assert_eq!(got, vec![(1, 1240.0 + 240.0), (2, 1264.0 + 240.0), (3, 1290.0 + 240.0)]);
    }

    #[test]
    fn releases_before_the_block_are_dropped() {
        let p = depth_topology();
        let view = FailureView::at_fmax(&p, 0, 969.4);
        let est = analyze(&view, d(5));
        assert!(estimate_releases(&view, &est, 0.0).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_pattern() -> impl Strategy<Value = CommPattern> {
            proptest::collection::btree_set((0usize..4, 1usize..4, 1u32..60), 1..10).prop_map(|set| {
                let mut seen = BTreeSet::new();
                let mut msgs = Vec::new();
                for (s, k, o) in set {
                    let dst = (s + k) % 4;
                    let off = o as f64 * 5.0;
                    if seen.insert((s, o)) && seen.insert((dst, o)) {
                        msgs.push((s, dst, off));
                    }
                }
                pattern(4, &msgs, 300.0, 3000.0, false)
            })
        }

        proptest! {
            #[test]
            fn depth_monotone(p in arb_pattern(), f in 1u32..2000, a in 1usize..6, b in 1usize..6) {
                let (lo, hi) = (a.min(b), a.max(b));
                let fail = f as f64 + 0.5;
                let small = estimate_block_times(&p, 0, fail, d(lo));
                let big = estimate_block_times(&p, 0, fail, d(hi));
                for e in &small {
                    let m = big.iter().find(|x| x.process == e.process);
                    prop_assert!(m.is_some());
                    prop_assert!(m.unwrap().block_time <= e.block_time);
                }
            }

            #[test]
            fn estimates_are_well_formed(p in arb_pattern(), f in 1u32..2000) {
                let fail = f as f64 + 0.5;
                let est = estimate_block_times(&p, 0, fail, d(pattern_depth(&p)));
                for e in &est {
                    prop_assert!(e.block_time >= fail);
                    prop_assert!(e.level >= 1);
                    prop_assert!(e.process != 0);
                    if e.cause != 0 {
                        let c = est.iter().find(|x| x.process == e.cause).unwrap();
                        prop_assert!(c.block_time <= e.block_time);
                    }
                }
            }
        }
    }
}
