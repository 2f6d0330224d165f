//! Motor-driven half-barrier pair, modelled as one aggregate barrier that
//! travels linearly between fully open (0) and fully closed (1).

use crate::controller::{GateCommand, GateFeedback};
use crate::error::ConfigError;

// Positions this close to an endpoint are snapped onto it, so that summing
// many small steps lands exactly on 0 or 1.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateActuator {
    commanded: GateCommand,
    position: f64,
    transit_time_s: f64,
}

impl GateActuator {
    /// Fully open gate with an `Open` command.
    pub fn new(transit_time_s: f64) -> Result<Self, ConfigError> {
        if !(transit_time_s.is_finite() && transit_time_s > 0.0) {
            return Err(ConfigError::new(format!(
                "gate transit time {transit_time_s} must be > 0"
            )));
        }
        Ok(GateActuator {
            commanded: GateCommand::Open,
            position: 0.0,
            transit_time_s,
        })
    }

    pub fn commanded(&self) -> GateCommand {
        self.commanded
    }

    /// 0 = fully open, 1 = fully closed.
    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn transit_time_s(&self) -> f64 {
        self.transit_time_s
    }

    /// Closed only at full closure; every intermediate position reads Open.
    pub fn feedback(&self) -> GateFeedback {
        if self.position == 1.0 {
            GateFeedback::Closed
        } else {
            GateFeedback::Open
        }
    }

    /// Replaces the command. The barrier does not move until stepped.
    pub fn command(&mut self, cmd: GateCommand) {
        self.commanded = cmd;
    }

    pub fn step(&mut self, dt: f64) -> GateFeedback {
        debug_assert!(dt > 0.0, "gate stepped by {dt}");
        let travel = dt / self.transit_time_s;
        let target = match self.commanded {
            GateCommand::Close => 1.0,
            GateCommand::Open => 0.0,
        };
        let next = if self.position < target {
            (self.position + travel).min(target)
        } else {
            (self.position - travel).max(target)
        };
        self.position = if (next - target).abs() < SNAP {
            target
        } else {
            next
        };
        self.feedback()
    }
}

pub fn command_gate(mut actuator: GateActuator, cmd: GateCommand) -> GateActuator {
    actuator.command(cmd);
    actuator
}

pub fn step_gate(mut actuator: GateActuator, dt: f64) -> (GateActuator, GateFeedback) {
    let fb = actuator.step(dt);
    (actuator, fb)
}
