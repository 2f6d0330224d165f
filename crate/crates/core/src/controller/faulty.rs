//! Controller trait used by the simulator, and deliberately broken variants
//! that the verification harness must be able to catch.

use std::fmt;
use std::str::FromStr;

use super::{
    Anomaly, ControllerOutput, ControllerState, Decision, EventOutcome, GateCommand, GateFeedback,
    SensorEvent, SignalState,
};
use crate::error::ConfigError;
use crate::protocol::Phase;

pub trait CrossingController: Send {
    fn on_sensor_event(&mut self, event: &SensorEvent) -> EventOutcome;
    fn on_gate_feedback(&mut self, fb: GateFeedback) -> ControllerOutput;
    fn tick(&mut self, now: f64) -> (ControllerOutput, Vec<Anomaly>);
    fn output(&self) -> ControllerOutput;
    fn system_occupied(&self) -> bool;
}

impl CrossingController for ControllerState {
    fn on_sensor_event(&mut self, event: &SensorEvent) -> EventOutcome {
        ControllerState::on_sensor_event(self, event)
    }

    fn on_gate_feedback(&mut self, fb: GateFeedback) -> ControllerOutput {
        ControllerState::on_gate_feedback(self, fb)
    }

    fn tick(&mut self, now: f64) -> (ControllerOutput, Vec<Anomaly>) {
        ControllerState::tick(self, now)
    }

    fn output(&self) -> ControllerOutput {
        ControllerState::output(self)
    }

    fn system_occupied(&self) -> bool {
        ControllerState::system_occupied(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ControllerKind {
    #[default]
    Correct,
    /// Tracks trains but never lowers the gate.
    AlwaysOpen,
    /// Gives the train a green signal without waiting for the gate.
    NoFeedback,
    /// Closes on any head packet and opens on any tail packet.
    NoMemory,
}

impl ControllerKind {
    pub const FAULTY: [ControllerKind; 3] = [
        ControllerKind::AlwaysOpen,
        ControllerKind::NoFeedback,
        ControllerKind::NoMemory,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerKind::Correct => "correct",
            ControllerKind::AlwaysOpen => "always-open",
            ControllerKind::NoFeedback => "no-feedback",
            ControllerKind::NoMemory => "no-memory",
        }
    }

    pub fn build(
        self,
        memory_capacity: usize,
        watchdog_timeout_s: f64,
    ) -> Result<Box<dyn CrossingController>, ConfigError> {
        let inner = ControllerState::new(memory_capacity, watchdog_timeout_s)?;
        Ok(match self {
            ControllerKind::Correct => Box::new(inner),
            ControllerKind::AlwaysOpen => Box::new(AlwaysOpen(inner)),
            ControllerKind::NoFeedback => Box::new(NoFeedback(inner)),
            ControllerKind::NoMemory => Box::new(NoMemory::default()),
        })
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "correct" => Ok(ControllerKind::Correct),
            "always-open" => Ok(ControllerKind::AlwaysOpen),
            "no-feedback" => Ok(ControllerKind::NoFeedback),
            "no-memory" => Ok(ControllerKind::NoMemory),
            other => Err(format!(
                "unknown controller '{other}' (expected always-open, no-feedback or no-memory)"
            )),
        }
    }
}

struct AlwaysOpen(ControllerState);

impl AlwaysOpen {
    fn rewrite(mut out: ControllerOutput) -> ControllerOutput {
        out.gate_cmd = GateCommand::Open;
        out.street_signal = SignalState::Green;
        out.audio_on = false;
        out
    }
}

impl CrossingController for AlwaysOpen {
    fn on_sensor_event(&mut self, event: &SensorEvent) -> EventOutcome {
        let mut outcome = self.0.on_sensor_event(event);
        outcome.output = Self::rewrite(outcome.output);
        outcome
    }

    fn on_gate_feedback(&mut self, fb: GateFeedback) -> ControllerOutput {
        Self::rewrite(self.0.on_gate_feedback(fb))
    }

    fn tick(&mut self, now: f64) -> (ControllerOutput, Vec<Anomaly>) {
        let (out, anomalies) = self.0.tick(now);
        (Self::rewrite(out), anomalies)
    }

    fn output(&self) -> ControllerOutput {
        Self::rewrite(self.0.output())
    }

    fn system_occupied(&self) -> bool {
        self.0.system_occupied()
    }
}

struct NoFeedback(ControllerState);

impl NoFeedback {
    fn rewrite(&self, mut out: ControllerOutput) -> ControllerOutput {
        if self.0.system_occupied() {
            out.train_signal = SignalState::Green;
        }
        out
    }
}

impl CrossingController for NoFeedback {
    fn on_sensor_event(&mut self, event: &SensorEvent) -> EventOutcome {
        let mut outcome = self.0.on_sensor_event(event);
        outcome.output = self.rewrite(outcome.output);
        outcome
    }

    fn on_gate_feedback(&mut self, fb: GateFeedback) -> ControllerOutput {
        let out = self.0.on_gate_feedback(fb);
        self.rewrite(out)
    }

    fn tick(&mut self, now: f64) -> (ControllerOutput, Vec<Anomaly>) {
        let (out, anomalies) = self.0.tick(now);
        (self.rewrite(out), anomalies)
    }

    fn output(&self) -> ControllerOutput {
        self.rewrite(self.0.output())
    }

    fn system_occupied(&self) -> bool {
        self.0.system_occupied()
    }
}

#[derive(Default)]
struct NoMemory {
    closed: bool,
    gate_fb: Option<GateFeedback>,
}

impl CrossingController for NoMemory {
    fn on_sensor_event(&mut self, event: &SensorEvent) -> EventOutcome {
        self.closed = event.packet.phase == Phase::Head;
        EventOutcome {
            output: self.output(),
            decision: Decision::Ignored,
            anomaly: None,
        }
    }

    fn on_gate_feedback(&mut self, fb: GateFeedback) -> ControllerOutput {
        self.gate_fb = Some(fb);
        self.output()
    }

    fn tick(&mut self, _now: f64) -> (ControllerOutput, Vec<Anomaly>) {
        (self.output(), Vec::new())
    }

    fn output(&self) -> ControllerOutput {
        let barred = self.closed && self.gate_fb == Some(GateFeedback::Closed);
        ControllerOutput {
            gate_cmd: if self.closed {
                GateCommand::Close
            } else {
                GateCommand::Open
            },
            street_signal: if self.closed {
                SignalState::Red
            } else {
                SignalState::Green
            },
            train_signal: if barred {
                SignalState::Green
            } else {
                SignalState::Red
            },
            audio_on: self.closed,
            alarm: None,
        }
    }

    fn system_occupied(&self) -> bool {
        self.closed
    }
}
