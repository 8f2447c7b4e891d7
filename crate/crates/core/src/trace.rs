//! Text execution trace.
//!
//! ```text
//! TRACE v1
//! S 1 0.000 5.000 COMPUTE
//! C 0 1 600.000 600.000 BLOCKING
//! F 1 2588.500 BEGIN FREQ_2.1
//! ```

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use crate::app::OpMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeState {
    Compute,
    Ckpt,
    WaitActive,
    WaitIdle,
    GoSleep,
    Sleep,
    Wakeup,
    Restart,
    Reexec,
}

impl NodeState {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeState::Compute => "COMPUTE",
            NodeState::Ckpt => "CKPT",
            NodeState::WaitActive => "WAIT_ACTIVE",
            NodeState::WaitIdle => "WAIT_IDLE",
            NodeState::GoSleep => "GO_SLEEP",
            NodeState::Sleep => "SLEEP",
            NodeState::Wakeup => "WAKEUP",
            NodeState::Restart => "RESTART",
            NodeState::Reexec => "REEXEC",
        }
    }

    pub fn is_wait(self) -> bool {
        matches!(self, NodeState::WaitActive | NodeState::WaitIdle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlagEdge {
    Begin,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    State {
        node: usize,
        t0: f64,
        t1: f64,
        state: NodeState,
    },
    Comm {
        src: usize,
        dst: usize,
        t_post: f64,
        t_complete: f64,
        mode: OpMode,
    },
    Flag {
        node: usize,
        t: f64,
        edge: FlagEdge,
        label: String,
    },
}

impl TraceRecord {
    fn sort_key(&self) -> (f64, usize, u8) {
        match *self {
            TraceRecord::State { node, t0, .. } => (t0, node, 0),
            TraceRecord::Comm { src, t_post, .. } => (t_post, src, 1),
            TraceRecord::Flag { node, t, .. } => (t, node, 2),
        }
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceRecord::State { node, t0, t1, state } => {
                write!(f, "S {node} {t0:.3} {t1:.3} {}", state.as_str())
            }
            TraceRecord::Comm {
                src,
                dst,
                t_post,
                t_complete,
                mode,
            } => write!(f, "C {src} {dst} {t_post:.3} {t_complete:.3} {mode}"),
            TraceRecord::Flag { node, t, edge, label } => {
                let e = match edge {
                    FlagEdge::Begin => "BEGIN",
                    FlagEdge::End => "END",
                };
                write!(f, "F {node} {t:.3} {e} {label}")
            }
        }
    }
}

/// Stable sort by (time, node, kind); equal keys keep their emission order.
pub fn sort_records(records: &mut [TraceRecord]) {
    records.sort_by(|a, b| {
        let (ta, na, ka) = a.sort_key();
        let (tb, nb, kb) = b.sort_key();
        ta.total_cmp(&tb).then(na.cmp(&nb)).then(ka.cmp(&kb))
    });
}

pub fn render_trace(records: &[TraceRecord]) -> String {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = String::from("TRACE v1\n");
    for r in &sorted {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

pub fn write_trace(records: &[TraceRecord], path: &Path) -> io::Result<()> {
    write_atomic(path, render_trace(records).as_bytes())
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}
