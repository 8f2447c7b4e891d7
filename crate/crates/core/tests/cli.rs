use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.scn"))
}

fn ftsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftsim")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn report_goes_to_stdout_without_a_path() {
    let f = fixture("scenario1_long");
    let o = ftsim(&["run", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("node,compute_action,"));
    assert!(out.contains("\n1,No action,4.37,sleep,56.00,60.37,"));
}

#[test]
fn report_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("scenario2_blocking");
    let path = dir.path().join("r.csv");
    let printed = stdout(&ftsim(&["run", f.to_str().unwrap()]));
    let o = ftsim(&["run", f.to_str().unwrap(), "--report", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(fs::read_to_string(&path).unwrap(), printed);
}

#[test]
fn text_format() {
    let f = fixture("scenario3_active");
    let out = stdout(&ftsim(&["run", f.to_str().unwrap(), "--format", "text"]));
    assert!(out.lines().last().unwrap().starts_with("TOTAL"));
    assert!(!out.contains(','));
}

#[test]
fn trace_file_header_and_layout() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("scenario2_nonblocking");
    let path = dir.path().join("run.trace");
    let o = ftsim(&["run", f.to_str().unwrap(), "--trace", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("TRACE v1\n"));
    assert!(!text.contains('\r'));
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(' ').collect();
        let n = match fields[0] {
            "S" => 5,
            "C" => 6,
            "F" => 5,
            other => panic!("unknown record {other}"),
        };
        assert_eq!(fields.len(), n, "{line}");
    }
    assert!(text.contains(" NONBLOCKING\n"));
    assert!(text.contains(" BEGIN FREQ_2.1\n"));
}

#[test]
fn no_strategies_is_the_reference_run() {
    let f = fixture("scenario1_short");
    let out = stdout(&ftsim(&["run", f.to_str().unwrap(), "--no-strategies"]));
    let rows: Vec<&str> = out.lines().skip(1).take(3).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert!(r.contains(",No action,10.0") && r.contains(",No action,3.33,"), "{r}");
        assert!(r.ends_with(",0.00,0.00,0.00"), "{r}");
    }
    assert!(out.ends_with("TOTAL,,,,,,0.00,,\n"));
}

#[test]
fn depth_override() {
    let f = fixture("scenario5_depth5");
    let auto = stdout(&ftsim(&["run", f.to_str().unwrap(), "--depth", "auto"]));
    let one = stdout(&ftsim(&["run", f.to_str().unwrap(), "--depth", "1"]));
    assert_eq!(auto.lines().count(), 5);
    assert_eq!(one.lines().count(), 3);
}

#[test]
fn horizon_override() {
    let f = fixture("scenario1_short");
    let o = ftsim(&["run", f.to_str().unwrap(), "--horizon", "5000"]);
    assert_eq!(o.status.code(), Some(0));
    let o = ftsim(&["run", f.to_str().unwrap(), "--horizon", "100"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    let text = fs::read_to_string(fixture("scenario1_short"))
        .unwrap()
        .replace("node = 0", "node = 9");
    fs::write(&bad, text).unwrap();
    let o = ftsim(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("failure node"));

    let f = fixture("scenario1_short");
    assert_eq!(
        ftsim(&["run", f.to_str().unwrap(), "--depth", "0"]).status.code(),
        Some(1)
    );
    assert_eq!(
        ftsim(&["run", f.to_str().unwrap(), "--depth", "two"]).status.code(),
        Some(1)
    );
}

#[test]
fn parse_errors_exit_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scn");
    fs::write(&bad, "[pattern]\ninterval = soon\n").unwrap();
    let o = ftsim(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn io_errors_exit_2() {
    let o = ftsim(&["run", "/nonexistent/scenario.scn"]);
    assert_eq!(o.status.code(), Some(2));
    let f = fixture("scenario1_short");
    let o = ftsim(&["run", f.to_str().unwrap(), "--report", "/nonexistent/dir/r.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = ftsim(&["run", f.to_str().unwrap(), "--trace", "/nonexistent/dir/t.trace"]);
    assert_eq!(o.status.code(), Some(2));
}
