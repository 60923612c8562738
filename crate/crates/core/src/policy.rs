//! READ/WRITE decision sources: the fixed wait-k policy, replayable action
//! schedules, and a confidence-threshold policy that produces multi-WRITE
//! chunks.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Read,
    Write,
}

/// Decode-loop state visible to a policy when it is queried.
#[derive(Debug, Clone, Copy)]
pub struct PolicyState {
    pub s_read: usize,
    pub t_written: usize,
    /// True once the engine has observed end-of-stream.
    pub source_exhausted: bool,
    /// Masked argmax log-prob of the candidate next token, probed fresh
    /// immediately before the query. Populated only for policies that
    /// report `needs_score_probe`, since the probe costs a scorer call.
    pub next_argmax_logp: Option<f64>,
}

/// Per-session decision source. The engine enforces the shared contract:
/// a policy must not WRITE before anything has been read, and the tail
/// phase (after end-of-stream) is write-only.
pub trait Policy {
    /// Next action, or `None` when the policy has no further guidance
    /// (an exhausted schedule); the engine then enters the tail phase.
    fn next_action(&mut self, state: &PolicyState) -> Option<Action>;

    /// How many immediately following WRITE actions the policy can promise
    /// beyond the one just issued, consuming them. Lets chunk modes batch a
    /// WRITE run into a single search; policies that discover actions one
    /// at a time return 0.
    fn take_pending_writes(&mut self) -> usize {
        0
    }

    /// True when `next_action` inspects `next_argmax_logp`.
    fn needs_score_probe(&self) -> bool {
        false
    }
}

/// Read k source tokens up front, then alternate one WRITE per newly read
/// token; write-only once the source ends.
#[derive(Debug, Clone, Copy)]
pub struct WaitK {
    pub k: usize,
}

impl WaitK {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Contract("wait-k requires k >= 1".into()));
        }
        Ok(Self { k })
    }
}

impl Policy for WaitK {
    fn next_action(&mut self, state: &PolicyState) -> Option<Action> {
        if state.source_exhausted || state.s_read >= state.t_written + self.k {
            Some(Action::Write)
        } else {
            Some(Action::Read)
        }
    }
}

/// WRITE while the scorer's current argmax log-prob clears the threshold,
/// READ otherwise. A deliberately simple stand-in for learned adaptive
/// policies; its job is generating multi-WRITE chunks.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdAdaptive {
    pub rho: f64,
}

impl ThresholdAdaptive {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 {
            return Err(Error::Contract(format!(
                "threshold rho must be a log-prob <= 0, got {rho}"
            )));
        }
        Ok(Self { rho })
    }
}

impl Policy for ThresholdAdaptive {
    fn next_action(&mut self, state: &PolicyState) -> Option<Action> {
        if state.source_exhausted {
            return Some(Action::Write);
        }
        if state.s_read == 0 && state.t_written == 0 {
            return Some(Action::Read);
        }
        match state.next_argmax_logp {
            Some(logp) if logp >= self.rho => Some(Action::Write),
            _ => Some(Action::Read),
        }
    }

    fn needs_score_probe(&self) -> bool {
        true
    }
}

/// Replays a fixed action list (for externally trained policies).
#[derive(Debug, Clone)]
pub struct SchedulePolicy {
    actions: Vec<Action>,
    pos: usize,
}

impl SchedulePolicy {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions, pos: 0 }
    }
}

impl Policy for SchedulePolicy {
    fn next_action(&mut self, _state: &PolicyState) -> Option<Action> {
        let action = self.actions.get(self.pos).copied();
        if action.is_some() {
            self.pos += 1;
        }
        action
    }

    fn take_pending_writes(&mut self) -> usize {
        let mut count = 0;
        while self.actions.get(self.pos) == Some(&Action::Write) {
            self.pos += 1;
            count += 1;
        }
        count
    }
}

/// The full wait-k action sequence for known source length `m` and target
/// length `n`: the t-th WRITE is preceded by exactly `min(t + k - 1, m)`
/// READs, and the sequence contains exactly m READs and n WRITEs.
pub fn wait_k_actions(k: usize, m: usize, n: usize) -> Result<Vec<Action>> {
    if k == 0 || m == 0 || n == 0 {
        return Err(Error::Contract(
            "wait_k_actions requires k, m, n >= 1".into(),
        ));
    }
    let mut actions = Vec::with_capacity(m + n);
    let mut reads = 0;
    for t in 1..=n {
        let needed = (t + k - 1).min(m);
        while reads < needed {
            actions.push(Action::Read);
            reads += 1;
        }
        actions.push(Action::Write);
    }
    while reads < m {
        actions.push(Action::Read);
        reads += 1;
    }
    Ok(actions)
}

/// Parses a schedule file: characters `R` and `W`, whitespace ignored.
pub fn load_schedule(path: &Path) -> Result<Vec<Action>> {
    parse_schedule(&fs::read_to_string(path)?)
}

pub fn parse_schedule(text: &str) -> Result<Vec<Action>> {
    let mut actions = Vec::new();
    for (offset, ch) in text.char_indices() {
        match ch {
            'R' => actions.push(Action::Read),
            'W' => actions.push(Action::Write),
            c if c.is_whitespace() => {}
            c => return Err(Error::ScheduleParse { offset, ch: c }),
        }
    }
    Ok(actions)
}

/// Maximal-run-length encodings of READ runs and WRITE runs, in order.
pub fn chunk_lengths(actions: &[Action]) -> (Vec<usize>, Vec<usize>) {
    let mut read_runs = Vec::new();
    let mut write_runs = Vec::new();
    let mut iter = actions.iter().peekable();
    while let Some(&action) = iter.next() {
        let mut run = 1;
        while iter.peek() == Some(&&action) {
            iter.next();
            run += 1;
        }
        match action {
            Action::Read => read_runs.push(run),
            Action::Write => write_runs.push(run),
        }
    }
    (read_runs, write_runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::{Read as R, Write as W};

    #[test]
    fn wait_k_small_examples() {
        assert_eq!(wait_k_actions(1, 2, 2).unwrap(), vec![R, W, R, W]);
        assert_eq!(
            wait_k_actions(3, 5, 5).unwrap(),
            vec![R, R, R, W, R, W, R, W, W, W]
        );
        assert_eq!(wait_k_actions(9, 4, 3).unwrap(), vec![R, R, R, R, W, W, W]);
    }

    #[test]
    fn wait_k_counts_and_g_law() {
        for k in 1..=8 {
            for m in 1..=10 {
                for n in 1..=10 {
                    let actions = wait_k_actions(k, m, n).unwrap();
                    let reads = actions.iter().filter(|&&a| a == R).count();
                    let writes = actions.len() - reads;
                    assert_eq!(reads, m);
                    assert_eq!(writes, n);
                    let mut seen_reads = 0;
                    let mut t = 0;
                    for a in &actions {
                        match a {
                            R => seen_reads += 1,
                            W => {
                                t += 1;
                                assert_eq!(seen_reads, (t + k - 1).min(m), "k={k} m={m} n={n} t={t}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!(parse_schedule("RRWW").unwrap(), vec![R, R, W, W]);
        assert_eq!(parse_schedule("R W\nR W").unwrap(), vec![R, W, R, W]);
        match parse_schedule("RXW") {
            Err(Error::ScheduleParse { offset, ch }) => {
                assert_eq!(offset, 1);
                assert_eq!(ch, 'X');
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn chunk_lengths_examples() {
        let actions = wait_k_actions(3, 5, 5).unwrap();
        assert_eq!(chunk_lengths(&actions), (vec![3, 1, 1], vec![1, 1, 3]));
        assert_eq!(chunk_lengths(&[R, R, R]), (vec![3], vec![]));
        assert_eq!(chunk_lengths(&[R, W, R, W]), (vec![1, 1], vec![1, 1]));
    }

    #[test]
    fn wait_k_policy_alternates_after_k() {
        let mut policy = WaitK::new(2).unwrap();
        let mut state = PolicyState {
            s_read: 0,
            t_written: 0,
            source_exhausted: false,
            next_argmax_logp: None,
        };
        assert_eq!(policy.next_action(&state), Some(R));
        state.s_read = 1;
        assert_eq!(policy.next_action(&state), Some(R));
        state.s_read = 2;
        assert_eq!(policy.next_action(&state), Some(W));
        state.t_written = 1;
        assert_eq!(policy.next_action(&state), Some(R));
        state.source_exhausted = true;
        assert_eq!(policy.next_action(&state), Some(W));
    }

    #[test]
    fn threshold_policy_reads_first_and_tracks_probe() {
        let mut policy = ThresholdAdaptive::new(-1.0).unwrap();
        let mut state = PolicyState {
            s_read: 0,
            t_written: 0,
            source_exhausted: false,
            next_argmax_logp: Some(-0.1),
        };
        assert_eq!(policy.next_action(&state), Some(R));
        state.s_read = 1;
        assert_eq!(policy.next_action(&state), Some(W));
        state.next_argmax_logp = Some(-3.0);
        assert_eq!(policy.next_action(&state), Some(R));
    }

    #[test]
    fn schedule_policy_batches_write_runs() {
        let mut policy = SchedulePolicy::new(vec![R, W, W, W, R]);
        let state = PolicyState {
            s_read: 0,
            t_written: 0,
            source_exhausted: false,
            next_argmax_logp: None,
        };
        assert_eq!(policy.next_action(&state), Some(R));
        assert_eq!(policy.next_action(&state), Some(W));
        assert_eq!(policy.take_pending_writes(), 2);
        assert_eq!(policy.next_action(&state), Some(R));
        assert_eq!(policy.next_action(&state), None);
    }
}
