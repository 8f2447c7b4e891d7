use std::path::Path;

use ftsim::scenario::parse_scenario;
use ftsim::trace::{NodeState, TraceRecord};
use ftsim::{load_scenario, run_simulation, SimOutcome};

fn states(out: &SimOutcome, node: usize) -> Vec<(f64, f64, NodeState)> {
    let mut v: Vec<_> = out
        .trace
        .iter()
        .filter_map(|r| match *r {
            TraceRecord::State { node: n, t0, t1, state } if n == node => Some((t0, t1, state)),
            _ => None,
        })
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Each node's state records cover [0, makespan] without gaps or overlaps.
fn assert_tiles(name: &str, out: &SimOutcome) {
    for node in 0..out.finish.len() {
        let s = states(out, node);
        assert!(!s.is_empty(), "{name}: node {node} has no states");
        assert_eq!(s[0].0, 0.0, "{name}: node {node} starts at {}", s[0].0);
        for w in s.windows(2) {
            assert!(
                (w[0].1 - w[1].0).abs() < 1e-6,
                "{name}: node {node} gap or overlap at {}",
                w[0].1
            );
        }
        let end = s.last().unwrap().1;
        assert!((end - out.makespan).abs() < 1e-6, "{name}: node {node} ends at {end}");
    }
}

#[test]
fn fixture_traces_tile_each_node() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = load_scenario(&path).unwrap();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        assert_tiles(&name, &run_simulation(&s));
        assert_tiles(&name, &run_simulation(&s.with_strategies(false)));
    }
}

#[test]
fn failed_node_restarts_then_reexecutes() {
    let s = load_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenario1_long.scn")).unwrap();
    let out = run_simulation(&s);
    let s0 = states(&out, 0);
    let i = s0.iter().position(|x| x.2 == NodeState::Restart).unwrap();
    assert_eq!(s0[i].0, 4225.8);
    assert!((s0[i].1 - 4425.2).abs() < 1e-9);
    assert_eq!(s0[i + 1].2, NodeState::Reexec);
    assert!((s0[i + 1].1 - out.recovery_end).abs() < 1e-9);
}

#[test]
fn sleeping_node_goes_through_transitions() {
    let s = load_scenario(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenario7_long.scn")).unwrap();
    let out = run_simulation(&s);
    let seq: Vec<NodeState> = states(&out, 1).iter().map(|x| x.2).collect();
    let i = seq.iter().position(|&x| x == NodeState::GoSleep).unwrap();
    assert_eq!(
        &seq[i..i + 3],
        &[NodeState::GoSleep, NodeState::Sleep, NodeState::Wakeup]
    );
    let s1 = states(&out, 1);
    assert!((s1[i].1 - s1[i].0 - 25.0).abs() < 1e-9);
    assert!((s1[i + 2].1 - s1[i + 2].0 - 5.0).abs() < 1e-9);
}

#[test]
fn canonical_text_round_trips() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for entry in std::fs::read_dir(dir).unwrap() {
        let s = load_scenario(&entry.unwrap().path()).unwrap();
        let again = parse_scenario(&s.to_canonical()).unwrap();
        assert_eq!(again, s);
    }
}

#[test]
fn failure_at_a_message_instant() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenario2_blocking.scn");
    let text = std::fs::read_to_string(path)
        .unwrap()
        .replace("time = 648.4s", "time = 700s");
    let s = parse_scenario(&text).unwrap();
    let out = run_simulation(&s);
    assert_tiles("failure at 700 s", &out);
    let sleep = states(&out, 1).into_iter().find(|x| x.2 == NodeState::GoSleep).unwrap();
    assert_eq!(sleep.0, 700.0);
    assert!(out.makespan <= run_simulation(&s.with_strategies(false)).makespan);
}
