//! Replays an event trace and checks it against the controller invariants,
//! the oracle, the safety predicate and the gate's physical limits.
//!
//! How strictly controller occupancy must track the oracle depends on the
//! channel recorded in the header: exactly on a perfect link, within the
//! link delay on a delayed one, and not at all on a lossy one (where a lost
//! tail legitimately keeps the controller occupied).

use thiserror::Error;

use crate::controller::{GateCommand, GateFeedback, SignalState};
use crate::trace::{Record, StepRecord, Trace, TraceEntry, TraceError, TraceHeader};

// Trace times are written with millisecond resolution.
const TIME_TOL: f64 = 1.5e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMode {
    /// Controller occupancy must equal the oracle at every step.
    Exact,
    /// Disagreement allowed until this long after each oracle edge.
    Delayed(f64),
    /// Lossy link: occupancy is not compared with the oracle.
    Unchecked,
}

impl OracleMode {
    fn from_header(h: Option<&TraceHeader>) -> Self {
        match h {
            None => OracleMode::Exact,
            Some(h) if h.loss_prob > 0.0 => OracleMode::Unchecked,
            Some(h) if h.delay_s > 0.0 => OracleMode::Delayed(h.delay_s),
            Some(_) => OracleMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub records: usize,
    pub steps: usize,
    pub mode: OracleMode,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, t={time:.3}: {message}")]
pub struct Violation {
    /// 1-based line of the offending record in the trace text, or its
    /// 1-based position when checking an in-memory trace.
    pub line: usize,
    pub time: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("malformed trace: {0}")]
    Malformed(#[from] TraceError),
    #[error("violation at {0}")]
    Violation(#[from] Violation),
}

/// Parses and checks trace text. Blank lines are ignored.
pub fn verify_text(text: &str) -> Result<VerifyReport, VerifyError> {
    let trace = Trace::parse(text)?;
    let lines: Vec<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, _)| i + 1)
        .collect();
    verify_entries(&trace.entries).map_err(|mut v| {
        v.line = lines[v.line - 1];
        VerifyError::Violation(v)
    })
}

pub fn verify_entries(entries: &[TraceEntry]) -> Result<VerifyReport, Violation> {
    let header = entries.iter().find_map(|e| match &e.record {
        Record::Scenario(h) => Some(h),
        _ => None,
    });
    let mode = OracleMode::from_header(header);
    let mut checker = Checker {
        mode,
        transit_s: header.map(|h| h.transit_time_s),
        step_s: header.map_or(0.0, |h| h.time_step_s),
        prev_time: f64::NEG_INFINITY,
        prev_step: None,
        last_oracle_edge: f64::NEG_INFINITY,
        open_since: None,
        steps: 0,
    };
    for (idx, entry) in entries.iter().enumerate() {
        checker.entry(entry).map_err(|message| Violation {
            line: idx + 1,
            time: entry.time,
            message,
        })?;
    }
    Ok(VerifyReport {
        records: entries.len(),
        steps: checker.steps,
        mode,
    })
}

struct Checker {
    mode: OracleMode,
    transit_s: Option<f64>,
    step_s: f64,
    prev_time: f64,
    prev_step: Option<StepRecord>,
    last_oracle_edge: f64,
    /// Step time at which the current uninterrupted Open command was first seen.
    open_since: Option<f64>,
    steps: usize,
}

impl Checker {
    fn entry(&mut self, e: &TraceEntry) -> Result<(), String> {
        if !e.time.is_finite() || e.time < 0.0 {
            return Err(format!("invalid time {}", e.time));
        }
        if e.time < self.prev_time {
            return Err(format!(
                "time goes backwards (previous record at {:.3})",
                self.prev_time
            ));
        }
        self.prev_time = e.time;
        match &e.record {
            Record::Collision { vehicle, train } => Err(format!(
                "collision between vehicle {vehicle} and train {train}"
            )),
            Record::Step(s) => self.step(e.time, s),
            _ => Ok(()),
        }
    }

    fn step(&mut self, t: f64, s: &StepRecord) -> Result<(), String> {
        self.steps += 1;
        let closing = s.gate_cmd == GateCommand::Close;

        if !(0.0..=1.0).contains(&s.gate_pos) {
            return Err(format!("gate position {} out of range", s.gate_pos));
        }
        if (s.gate_fb == GateFeedback::Closed) != (s.gate_pos == 1.0) {
            return Err(format!(
                "gate feedback {:?} inconsistent with position {}",
                s.gate_fb, s.gate_pos
            ));
        }
        if s.occupied && !closing {
            return Err("gate command Open while the controller holds a train".into());
        }
        if closing != (s.occupied || s.alarm.is_some()) {
            return Err("gate command Close with empty memory and no alarm".into());
        }
        if closing != (s.street == SignalState::Red) {
            return Err(format!(
                "street signal {:?} with gate command {:?}",
                s.street, s.gate_cmd
            ));
        }
        if s.audio != closing {
            return Err(format!(
                "audio {} with gate command {:?}",
                s.audio, s.gate_cmd
            ));
        }
        if s.train == SignalState::Green && s.gate_fb != GateFeedback::Closed {
            return Err("train signal Green before the gate reported Closed".into());
        }
        if s.train == SignalState::Green && !s.occupied {
            return Err("train signal Green with no train registered".into());
        }
        if s.danger > 0 && s.gate_pos < 1.0 {
            return Err(format!(
                "{} train(s) in the danger zone with gate position {}",
                s.danger, s.gate_pos
            ));
        }
        if let Some(prev) = &self.prev_step {
            if let (Some(a), b) = (prev.alarm, s.alarm) {
                if b != Some(a) {
                    return Err(format!(
                        "latched alarm {a} changed to {}",
                        b.map_or("none".to_string(), |b| b.to_string())
                    ));
                }
            }
            if prev.oracle != s.oracle {
                self.last_oracle_edge = t;
            }
        } else if s.oracle {
            self.last_oracle_edge = t;
        }

        self.check_oracle(t, s)?;
        self.check_liveness(t, s)?;
        self.prev_step = Some(*s);
        Ok(())
    }

    fn check_oracle(&self, t: f64, s: &StepRecord) -> Result<(), String> {
        let within_lag = match self.mode {
            OracleMode::Exact => false,
            OracleMode::Delayed(d) => t < self.last_oracle_edge + d + TIME_TOL,
            OracleMode::Unchecked => return Ok(()),
        };
        if within_lag {
            return Ok(());
        }
        if s.oracle && s.gate_cmd != GateCommand::Close {
            return Err("gate command Open while the oracle reports a train inside".into());
        }
        // Once an alarm latches, memory may legitimately disagree (an
        // unregistered overflow train, a stuck slot); the alarm holds the gate.
        if s.oracle != s.occupied && s.alarm.is_none() {
            return Err(format!(
                "controller occupancy {} differs from oracle {}",
                s.occupied, s.oracle
            ));
        }
        Ok(())
    }

    fn check_liveness(&mut self, t: f64, s: &StepRecord) -> Result<(), String> {
        if s.gate_cmd != GateCommand::Open {
            self.open_since = None;
            return Ok(());
        }
        let since = *self.open_since.get_or_insert(t);
        let Some(transit) = self.transit_s else {
            return Ok(());
        };
        let deadline = since + transit + self.step_s + TIME_TOL;
        if t > deadline && s.gate_pos > 0.0 {
            return Err(format!(
                "gate still at {} more than {transit} s after being commanded Open at {since:.3}",
                s.gate_pos
            ));
        }
        Ok(())
    }
}
