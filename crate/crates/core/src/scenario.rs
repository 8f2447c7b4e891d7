//! Scenario files: parsing, validation and the canonical writer.
//!
//! ```text
//! [pattern]
//! interval = 21.6min
//! messages = 0->1@600s, 1->0@600.9s
//! ```
//!
//! Durations take an `s` or `min` suffix (bare numbers are seconds). The
//! `[system]` section is optional; missing keys fall back to the reference
//! node profile.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::app::{expand_pattern, CommPattern, MessageSpec, OpMode, WaitMode};
use crate::cascade::{pattern_depth, DepthConfig};
use crate::energy::{FrequencyLevel, SystemProfile};
use crate::error::ScenarioError;
use crate::ft::{CheckpointPolicy, FailureSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSpec {
    pub interval: f64,
    pub mode: OpMode,
    pub buffered: bool,
    pub wait_mode: WaitMode,
    /// Distance from a non-blocking post to its wait.
    pub wait_lag: f64,
    pub message_size: u64,
    pub messages: Vec<MessageSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub nodes: usize,
    pub profile: SystemProfile,
    pub spec: PatternSpec,
    pub pattern: CommPattern,
    pub ckpt: CheckpointPolicy,
    pub failure: FailureSpec,
    /// True when the file asked for `depth = auto`.
    pub depth_auto: bool,
    pub depth: DepthConfig,
    pub horizon: f64,
    pub strategies_enabled: bool,
}

impl Scenario {
    /// Assembles and validates a scenario, expanding the pattern to `horizon`.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        name: String,
        nodes: usize,
        profile: SystemProfile,
        spec: PatternSpec,
        ckpt: CheckpointPolicy,
        failure: FailureSpec,
        depth: Option<usize>,
        horizon: f64,
        strategies_enabled: bool,
    ) -> Result<Self, ScenarioError> {
        if nodes < 2 {
            return Err(ScenarioError::invalid("nodes must be at least 2"));
        }
        profile.validate().map_err(ScenarioError::invalid)?;
        ckpt.validate().map_err(ScenarioError::invalid)?;
        if profile.t_ckpt != ckpt.duration {
            return Err(ScenarioError::invalid(
                "profile checkpoint time differs from checkpoint duration",
            ));
        }
        if ckpt.phase_offsets.len() != nodes {
            return Err(ScenarioError::invalid(format!(
                "checkpoint offsets: expected {nodes} values, got {}",
                ckpt.phase_offsets.len()
            )));
        }
        if failure.node >= nodes {
            return Err(ScenarioError::invalid(format!(
                "failure node {} is not below nodes = {nodes}",
                failure.node
            )));
        }
        if !(failure.time > 0.0) || !failure.time.is_finite() {
            return Err(ScenarioError::invalid("failure time must be > 0"));
        }
        if !(failure.restart_duration >= 0.0) || !failure.restart_duration.is_finite() {
            return Err(ScenarioError::invalid("restart duration must be >= 0"));
        }
        if !(horizon > failure.time) || !horizon.is_finite() {
            return Err(ScenarioError::invalid("horizon must be later than the failure time"));
        }
        if !(spec.interval > 0.0) || !spec.interval.is_finite() {
            return Err(ScenarioError::invalid("pattern interval must be > 0"));
        }
        if !(spec.wait_lag >= 0.0) || !spec.wait_lag.is_finite() {
            return Err(ScenarioError::invalid("wait_lag must be >= 0"));
        }
        if spec.messages.is_empty() {
            return Err(ScenarioError::invalid("pattern has no messages"));
        }
        for m in &spec.messages {
            if m.src >= nodes || m.dst >= nodes || m.src == m.dst {
                return Err(ScenarioError::invalid(format!(
                    "message {}->{} names an invalid node",
                    m.src, m.dst
                )));
            }
            if !(m.offset >= 0.0) || !m.offset.is_finite() {
                return Err(ScenarioError::invalid("message offsets must be >= 0"));
            }
        }
        let ops = expand_pattern(nodes, &spec.messages, spec.interval, horizon, spec.mode, spec.wait_lag);
        let pattern = CommPattern::new(ops, spec.interval, spec.buffered, spec.wait_mode, spec.message_size)
            .map_err(|e| ScenarioError::invalid(e.to_string()))?;
        pattern.validate().map_err(ScenarioError::invalid)?;
        let depth_auto = depth.is_none();
        let depth = match depth {
            Some(d) => DepthConfig::new(d).ok_or_else(|| ScenarioError::invalid("depth must be >= 1"))?,
            None => DepthConfig {
                depth: pattern_depth(&pattern),
            },
        };
        Ok(Self {
            name,
            nodes,
            profile,
            spec,
            pattern,
            ckpt,
            failure,
            depth_auto,
            depth,
            horizon,
            strategies_enabled,
        })
    }

    fn rebuild(&self, depth: Option<usize>, horizon: f64, strategies: bool) -> Result<Self, ScenarioError> {
        Scenario::build(
            self.name.clone(),
            self.nodes,
            self.profile.clone(),
            self.spec.clone(),
            self.ckpt.clone(),
            self.failure.clone(),
            depth,
            horizon,
            strategies,
        )
    }

    fn depth_setting(&self) -> Option<usize> {
        (!self.depth_auto).then_some(self.depth.depth)
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self, ScenarioError> {
        self.rebuild(self.depth_setting(), horizon, self.strategies_enabled)
    }

    /// `None` selects the automatic depth.
    pub fn with_depth(&self, depth: Option<usize>) -> Result<Self, ScenarioError> {
        self.rebuild(depth, self.horizon, self.strategies_enabled)
    }

    pub fn with_strategies(&self, enabled: bool) -> Self {
        Self {
            strategies_enabled: enabled,
            ..self.clone()
        }
    }

    /// Canonical text form; `parse` of the output yields an equal scenario.
    pub fn to_canonical(&self) -> String {
        let mut s = String::new();
        let p = &self.profile;
        let list = |f: &dyn Fn(&FrequencyLevel) -> f64| p.freqs.iter().map(|l| num(f(l))).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "[system]");
        let _ = writeln!(s, "frequencies = {}", list(&|l| l.ghz));
        let _ = writeln!(s, "p_comp = {}", list(&|l| l.p_comp));
        let _ = writeln!(s, "beta = {}", list(&|l| l.beta));
        let _ = writeln!(s, "p_ckpt = {}", list(&|l| l.p_ckpt));
        let _ = writeln!(s, "gamma = {}", list(&|l| l.gamma));
        let _ = writeln!(s, "p_active_wait = {}", list(&|l| l.p_active_wait));
        let _ = writeln!(s, "t_go_sleep = {}", secs(p.t_go_sleep));
        let _ = writeln!(s, "t_wakeup = {}", secs(p.t_wakeup));
        let _ = writeln!(s, "p_go_sleep = {}", num(p.p_go_sleep));
        let _ = writeln!(s, "p_wakeup = {}", num(p.p_wakeup));
        let _ = writeln!(s, "p_sleep = {}", num(p.p_sleep));
        let _ = writeln!(s, "p_idle_wait = {}", num(p.p_idle_wait));
        let _ = writeln!(s, "mu1 = {}", num(p.mu1));
        let _ = writeln!(s, "mu2 = {}", num(p.mu2));

        let sp = &self.spec;
        let _ = writeln!(s, "\n[pattern]");
        let _ = writeln!(s, "interval = {}", secs(sp.interval));
        let mode = match sp.mode {
            OpMode::Blocking => "blocking",
            OpMode::NonBlocking => "nonblocking",
        };
        let _ = writeln!(s, "mode = {mode}");
        let _ = writeln!(s, "buffered = {}", sp.buffered);
        let wm = match sp.wait_mode {
            WaitMode::Active => "active",
            WaitMode::Idle => "idle",
        };
        let _ = writeln!(s, "wait_mode = {wm}");
        let _ = writeln!(s, "wait_lag = {}", secs(sp.wait_lag));
        let _ = writeln!(s, "message_size = {}", sp.message_size);
        let msgs: Vec<String> = sp
            .messages
            .iter()
            .map(|m| format!("{}->{}@{}", m.src, m.dst, secs(m.offset)))
            .collect();
        let _ = writeln!(s, "messages = {}", msgs.join(", "));

        let c = &self.ckpt;
        let _ = writeln!(s, "\n[checkpoint]");
        let _ = writeln!(s, "interval = {}", secs(c.interval));
        let _ = writeln!(s, "duration = {}", secs(c.duration));
        let _ = writeln!(s, "anticipation = {}", c.anticipation_enabled);
        let _ = writeln!(s, "alpha = {}", num(c.alpha));
        let offs: Vec<String> = c.phase_offsets.iter().map(|&o| secs(o)).collect();
        let _ = writeln!(s, "offsets = {}", offs.join(" "));

        let f = &self.failure;
        let _ = writeln!(s, "\n[failure]");
        let _ = writeln!(s, "node = {}", f.node);
        let _ = writeln!(s, "time = {}", secs(f.time));
        let _ = writeln!(s, "restart = {}", secs(f.restart_duration));

        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "nodes = {}", self.nodes);
        if self.depth_auto {
            let _ = writeln!(s, "depth = auto");
        } else {
            let _ = writeln!(s, "depth = {}", self.depth.depth);
        }
        let _ = writeln!(s, "horizon = {}", secs(self.horizon));
        let _ = writeln!(s, "strategies = {}", self.strategies_enabled);
        s
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn secs(v: f64) -> String {
    format!("{v}s")
}

const SECTIONS: [&str; 5] = ["system", "pattern", "checkpoint", "failure", "run"];

const KEYS: &[(&str, &[&str])] = &[
    (
        "system",
        &[
            "frequencies",
            "p_comp",
            "beta",
            "p_ckpt",
            "gamma",
            "p_active_wait",
            "t_go_sleep",
            "t_wakeup",
            "p_go_sleep",
            "p_wakeup",
            "p_sleep",
            "p_idle_wait",
            "mu1",
            "mu2",
        ],
    ),
    (
        "pattern",
        &[
            "interval",
            "mode",
            "buffered",
            "wait_mode",
            "wait_lag",
            "message_size",
            "messages",
        ],
    ),
    (
        "checkpoint",
        &["interval", "duration", "anticipation", "alpha", "offsets"],
    ),
    ("failure", &["node", "time", "restart"]),
    ("run", &["name", "nodes", "depth", "horizon", "strategies"]),
];

struct Fields {
    map: BTreeMap<(String, String), (usize, String)>,
    last_line: usize,
}

impl Fields {
    fn get(&self, sec: &str, key: &str) -> Option<(usize, &str)> {
        self.map
            .get(&(sec.to_string(), key.to_string()))
            .map(|(l, v)| (*l, v.as_str()))
    }

    fn required(&self, sec: &str, key: &str) -> Result<(usize, &str), ScenarioError> {
        self.get(sec, key)
            .ok_or_else(|| ScenarioError::parse(self.last_line, format!("missing [{sec}] {key}")))
    }

    fn opt<T>(
        &self,
        sec: &str,
        key: &str,
        f: impl Fn(usize, &str) -> Result<T, ScenarioError>,
    ) -> Result<Option<T>, ScenarioError> {
        self.get(sec, key).map(|(l, v)| f(l, v)).transpose()
    }

    fn req<T>(
        &self,
        sec: &str,
        key: &str,
        f: impl Fn(usize, &str) -> Result<T, ScenarioError>,
    ) -> Result<T, ScenarioError> {
        let (l, v) = self.required(sec, key)?;
        f(l, v)
    }
}

fn tokenize(text: &str) -> Result<Fields, ScenarioError> {
    let mut map = BTreeMap::new();
    let mut section: Option<String> = None;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::parse(line_no, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ScenarioError::parse(line_no, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let sec = section
            .as_ref()
            .ok_or_else(|| ScenarioError::parse(line_no, "key outside of a section"))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ScenarioError::parse(line_no, "expected `key = value`"))?;
        let key = key.trim();
        let known = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key) {
            return Err(ScenarioError::parse(line_no, format!("unknown key `{key}` in [{sec}]")));
        }
        let k = (sec.clone(), key.to_string());
        if let Some((first, _)) = map.get(&k) {
            return Err(ScenarioError::parse(
                line_no,
                format!("duplicate key `{key}` in [{sec}] (first set on line {first})"),
            ));
        }
        map.insert(k, (line_no, value.trim().to_string()));
    }
    Ok(Fields { map, last_line })
}

fn parse_f64(line: usize, v: &str) -> Result<f64, ScenarioError> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| ScenarioError::parse(line, format!("`{v}` is not a number")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ScenarioError::parse(line, format!("`{v}` is not finite")))
    }
}

/// Seconds from `12.5`, `12.5s` or `0.2min`.
pub fn parse_duration(line: usize, v: &str) -> Result<f64, ScenarioError> {
    let v = v.trim();
    if let Some(m) = v.strip_suffix("min") {
        Ok(parse_f64(line, m)? * 60.0)
    } else if let Some(s) = v.strip_suffix('s') {
        parse_f64(line, s)
    } else {
        parse_f64(line, v)
    }
}

fn parse_usize(line: usize, v: &str) -> Result<usize, ScenarioError> {
    v.trim()
        .parse()
        .map_err(|_| ScenarioError::parse(line, format!("`{v}` is not a non-negative integer")))
}

fn parse_bool(line: usize, v: &str) -> Result<bool, ScenarioError> {
    match v.trim() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(ScenarioError::parse(line, format!("`{v}` is not a boolean"))),
    }
}

fn parse_list<T>(
    line: usize,
    v: &str,
    f: impl Fn(usize, &str) -> Result<T, ScenarioError>,
) -> Result<Vec<T>, ScenarioError> {
    v.split_whitespace().map(|t| f(line, t)).collect()
}

fn parse_messages(line: usize, v: &str) -> Result<Vec<MessageSpec>, ScenarioError> {
    v.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let bad = || ScenarioError::parse(line, format!("bad message `{t}`, expected SRC->DST@OFFSET"));
            let (pair, at) = t.split_once('@').ok_or_else(bad)?;
            let (src, dst) = pair.split_once("->").ok_or_else(bad)?;
            Ok(MessageSpec {
                src: parse_usize(line, src)?,
                dst: parse_usize(line, dst)?,
                offset: parse_duration(line, at)?,
            })
        })
        .collect()
}

fn parse_profile(f: &Fields, t_ckpt: f64) -> Result<SystemProfile, ScenarioError> {
    let mut p = SystemProfile::reference();
    p.t_ckpt = t_ckpt;
    let cols = [
        f.opt("system", "frequencies", |l, v| parse_list(l, v, parse_f64))?,
        f.opt("system", "p_comp", |l, v| parse_list(l, v, parse_f64))?,
        f.opt("system", "beta", |l, v| parse_list(l, v, parse_f64))?,
        f.opt("system", "p_ckpt", |l, v| parse_list(l, v, parse_f64))?,
        f.opt("system", "gamma", |l, v| parse_list(l, v, parse_f64))?,
    ];
    let table_given = cols.iter().any(Option::is_some);
    if table_given {
        if cols.iter().any(Option::is_none) {
            let line = f.get("system", "frequencies").map_or(f.last_line, |x| x.0);
            return Err(ScenarioError::parse(
                line,
                "frequencies, p_comp, beta, p_ckpt and gamma must be given together",
            ));
        }
        let cols: Vec<Vec<f64>> = cols.into_iter().map(Option::unwrap).collect();
        let n = cols[0].len();
        if cols.iter().any(|c| c.len() != n) {
            return Err(ScenarioError::invalid("frequency table columns differ in length"));
        }
        p.freqs = (0..n)
            .map(|i| FrequencyLevel::new(cols[0][i], cols[1][i], cols[2][i], cols[3][i], cols[4][i]))
            .collect();
    }
    if let Some(aw) = f.opt("system", "p_active_wait", |l, v| parse_list(l, v, parse_f64))? {
        if aw.len() != p.freqs.len() {
            return Err(ScenarioError::invalid("p_active_wait needs one value per frequency"));
        }
        for (row, w) in p.freqs.iter_mut().zip(aw) {
            row.p_active_wait = w;
        }
    }
    let dur = |key: &str, slot: &mut f64| -> Result<(), ScenarioError> {
        if let Some(v) = f.opt("system", key, parse_duration)? {
            *slot = v;
        }
        Ok(())
    };
    dur("t_go_sleep", &mut p.t_go_sleep)?;
    dur("t_wakeup", &mut p.t_wakeup)?;
    let val = |key: &str, slot: &mut f64| -> Result<(), ScenarioError> {
        if let Some(v) = f.opt("system", key, parse_f64)? {
            *slot = v;
        }
        Ok(())
    };
    val("p_go_sleep", &mut p.p_go_sleep)?;
    val("p_wakeup", &mut p.p_wakeup)?;
    val("p_sleep", &mut p.p_sleep)?;
    val("p_idle_wait", &mut p.p_idle_wait)?;
    val("mu1", &mut p.mu1)?;
    val("mu2", &mut p.mu2)?;
    Ok(p)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let f = tokenize(text)?;

    let spec = PatternSpec {
        interval: f.req("pattern", "interval", parse_duration)?,
        mode: f
            .opt("pattern", "mode", |l, v| match v {
                "blocking" => Ok(OpMode::Blocking),
                "nonblocking" => Ok(OpMode::NonBlocking),
                _ => Err(ScenarioError::parse(
                    l,
                    format!("mode `{v}` is not blocking|nonblocking"),
                )),
            })?
            .unwrap_or(OpMode::Blocking),
        buffered: f.opt("pattern", "buffered", parse_bool)?.unwrap_or(false),
        wait_mode: f
            .opt("pattern", "wait_mode", |l, v| match v {
                "active" => Ok(WaitMode::Active),
                "idle" => Ok(WaitMode::Idle),
                _ => Err(ScenarioError::parse(l, format!("wait_mode `{v}` is not active|idle"))),
            })?
            .unwrap_or(WaitMode::Active),
        wait_lag: f.opt("pattern", "wait_lag", parse_duration)?.unwrap_or(0.0),
        message_size: f
            .opt("pattern", "message_size", |l, v| {
                v.parse::<u64>()
                    .map_err(|_| ScenarioError::parse(l, format!("`{v}` is not a byte count")))
            })?
            .unwrap_or(0),
        messages: f.req("pattern", "messages", parse_messages)?,
    };

    let duration = f.req("checkpoint", "duration", parse_duration)?;
    let ckpt = CheckpointPolicy {
        interval: f.req("checkpoint", "interval", parse_duration)?,
        duration,
        anticipation_enabled: f.opt("checkpoint", "anticipation", parse_bool)?.unwrap_or(false),
        alpha: f.opt("checkpoint", "alpha", parse_f64)?.unwrap_or(0.5),
        phase_offsets: f.req("checkpoint", "offsets", |l, v| parse_list(l, v, parse_duration))?,
    };
    let profile = parse_profile(&f, duration)?;

    let failure = FailureSpec {
        node: f.req("failure", "node", parse_usize)?,
        time: f.req("failure", "time", parse_duration)?,
        restart_duration: f.req("failure", "restart", parse_duration)?,
    };

    let name = f
        .get("run", "name")
        .map(|(_, v)| v.to_string())
        .unwrap_or_else(|| "scenario".to_string());
    let nodes = f.req("run", "nodes", parse_usize)?;
    let depth = f
        .opt("run", "depth", |l, v| {
            if v == "auto" {
                Ok(None)
            } else {
                parse_usize(l, v).map(Some)
            }
        })?
        .flatten();
    let horizon = f.req("run", "horizon", parse_duration)?;
    let strategies = f.opt("run", "strategies", parse_bool)?.unwrap_or(true);

    Scenario::build(name, nodes, profile, spec, ckpt, failure, depth, horizon, strategies)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
[pattern]
interval = 21.6min
messages = 0->1@600s, 1->0@600.9s

[checkpoint]
interval = 3600s
duration = 2min
offsets = 0 100s 200s 300s

[failure]
node = 0
time = 2588.5s
restart = 199.4s

[run]
name = basic
nodes = 4
horizon = 4000s
";

    #[test]
    fn parses_minutes_and_defaults() {
        let s = parse_scenario(BASIC).unwrap();
        assert_eq!(s.spec.interval, 1296.0);
        assert_eq!(s.nodes, 4);
        assert_eq!(s.spec.wait_mode, WaitMode::Active);
        assert_eq!(s.spec.mode, OpMode::Blocking);
        assert_eq!(s.profile.t_ckpt, 120.0);
        assert!(s.depth_auto);
        assert_eq!(s.depth.depth, 2);
        assert!(s.strategies_enabled);
    }

    #[test]
    fn failure_node_out_of_range() {
        let text = BASIC.replace("node = 0", "node = 7");
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn duplicate_key_is_parse_error() {
        let text = BASIC.replace("nodes = 4", "nodes = 4\nnodes = 4");
        match parse_scenario(&text) {
            Err(ScenarioError::Parse { line, msg }) => {
                assert_eq!(line, 18);
                assert!(msg.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_values_report_lines() {
        let text = BASIC.replace("time = 2588.5s", "time = soon");
        assert!(matches!(
            parse_scenario(&text),
            Err(ScenarioError::Parse { line: 12, .. })
        ));
        let text = BASIC.replace("[run]", "[runs]");
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn horizon_must_follow_failure() {
        let text = BASIC.replace("horizon = 4000s", "horizon = 2000s");
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn canonical_round_trip() {
        let s = parse_scenario(BASIC).unwrap();
        let again = parse_scenario(&s.to_canonical()).unwrap();
        assert_eq!(s, again);
        let fixed = s.with_depth(Some(3)).unwrap().with_strategies(false);
        assert_eq!(parse_scenario(&fixed.to_canonical()).unwrap(), fixed);
    }

    #[test]
    fn durations() {
        assert_eq!(parse_duration(1, "90").unwrap(), 90.0);
        assert_eq!(parse_duration(1, "1.5min").unwrap(), 90.0);
        assert_eq!(parse_duration(1, "2s").unwrap(), 2.0);
        assert!(parse_duration(1, "2h").is_err());
    }
}
