//! Uncoordinated checkpointing, failure injection and recovery timing.

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointPolicy {
    pub interval: f64,
    /// Checkpoint duration at f_max.
    pub duration: f64,
    pub anticipation_enabled: bool,
    pub alpha: f64,
    /// Start of the first checkpoint of each process.
    pub phase_offsets: Vec<f64>,
}

impl CheckpointPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.duration > 0.0 && self.duration < self.interval) {
            return Err("checkpoint duration must satisfy 0 < duration < interval".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err("anticipation alpha must be in (0, 1]".into());
        }
        if self.phase_offsets.iter().any(|o| !o.is_finite() || *o < 0.0) {
            return Err("checkpoint offsets must be >= 0".into());
        }
        Ok(())
    }

    /// Checkpoint windows `[start, end)` of `process` on its program axis
    /// that start before `horizon`.
    pub fn windows(&self, process: usize, horizon: f64) -> Vec<(f64, f64)> {
        checkpoint_times(self, process, horizon)
            .into_iter()
            .map(|s| (s, s + self.duration))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailureSpec {
    pub node: usize,
    pub time: f64,
    pub restart_duration: f64,
}

/// Checkpoint start times `offset, offset + interval, ...` before `horizon`.
pub fn checkpoint_times(policy: &CheckpointPolicy, process: usize, horizon: f64) -> Vec<f64> {
    let offset = policy.phase_offsets.get(process).copied().unwrap_or(0.0);
    if !(policy.interval > 0.0) {
        return if offset < horizon { vec![offset] } else { Vec::new() };
    }
    (0u64..)
        .map(|k| offset + k as f64 * policy.interval)
        .take_while(|&t| t < horizon)
        .collect()
}

/// Whether a process about to block at `block_time` should checkpoint first.
pub fn should_anticipate(policy: &CheckpointPolicy, block_time: f64, last_ckpt: f64) -> bool {
    policy.anticipation_enabled && block_time > last_ckpt && block_time - last_ckpt >= policy.alpha * policy.interval
}

/// End of restart plus re-execution of the work lost since `last_ckpt`.
pub fn recovery_end(spec: &FailureSpec, last_ckpt: f64) -> f64 {
    spec.time + spec.restart_duration + (spec.time - last_ckpt)
}
