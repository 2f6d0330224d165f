//! Crossing controller: keeps a bounded table of the trains currently inside
//! the protected section and derives the gate command, street signal, train
//! signal and audio warning from that table and the gate's real position.
//!
//! Every anomaly (memory overflow, unknown tail, overdue train) biases the
//! outputs toward a closed road; the controller never opens on a timeout.

mod faulty;

use std::fmt;

use crate::error::ConfigError;
use crate::protocol::{Phase, TrainId, TrainPacket};

pub use faulty::{ControllerKind, CrossingController};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalState {
    Green,
    Red,
}

/// Gate command issued by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateCommand {
    Open,
    Close,
}

/// Real gate state reported by the actuator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateFeedback {
    Open,
    Closed,
}

/// Which side of the crossing a sensor sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SensorId {
    pub side: Side,
    pub track: u32,
}

impl SensorId {
    pub fn new(side: Side, track: u32) -> Self {
        SensorId { side, track }
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}/{}", self.side, self.track)
    }
}

/// A decoded packet stamped with the receiving sensor and the receive time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorEvent {
    pub packet: TrainPacket,
    pub sensor: SensorId,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemorySlot {
    pub train_id: TrainId,
    pub entry_sensor: SensorId,
    pub registered_at: f64,
    overdue: bool,
}

/// Bounded table of registered trains, at most one slot per train id.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerMemory {
    slots: Vec<MemorySlot>,
    capacity: usize,
}

impl ControllerMemory {
    fn new(capacity: usize) -> Self {
        ControllerMemory {
            slots: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.slots.len() >= self.capacity
    }

    pub fn slots(&self) -> &[MemorySlot] {
        &self.slots
    }

    pub fn get(&self, id: TrainId) -> Option<&MemorySlot> {
        self.slots.iter().find(|s| s.train_id == id)
    }

    pub fn contains(&self, id: TrainId) -> bool {
        self.get(id).is_some()
    }

    fn remove(&mut self, id: TrainId) -> Option<MemorySlot> {
        let idx = self.slots.iter().position(|s| s.train_id == id)?;
        Some(self.slots.remove(idx))
    }
}

/// Latched alarm; only an operator reset (not modelled) clears it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alarm {
    MemoryOverflow(TrainId),
    StuckTrain(TrainId),
}

impl fmt::Display for Alarm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alarm::MemoryOverflow(id) => write!(f, "memory-overflow:{id}"),
            Alarm::StuckTrain(id) => write!(f, "stuck-train:{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnomalyKind {
    UnknownTail,
    MemoryOverflow,
    StuckTrain,
}

impl AnomalyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::UnknownTail => "unknown-tail",
            AnomalyKind::MemoryOverflow => "memory-overflow",
            AnomalyKind::StuckTrain => "stuck-train",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the anomaly log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anomaly {
    pub time: f64,
    pub kind: AnomalyKind,
    pub train_id: TrainId,
}

/// What the controller did with a sensor event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Registered,
    AlreadyRegistered,
    Deregistered,
    /// Tail seen on the registration side: the train is still inside.
    TailInside,
    UnknownTail,
    Overflow,
    /// Used by the faulty stubs, which do not consult a memory table.
    Ignored,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Registered => "registered",
            Decision::AlreadyRegistered => "already-registered",
            Decision::Deregistered => "deregistered",
            Decision::TailInside => "tail-inside",
            Decision::UnknownTail => "unknown-tail",
            Decision::Overflow => "overflow",
            Decision::Ignored => "ignored",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControllerOutput {
    pub gate_cmd: GateCommand,
    pub street_signal: SignalState,
    pub train_signal: SignalState,
    pub audio_on: bool,
    pub alarm: Option<Alarm>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOutcome {
    pub output: ControllerOutput,
    pub decision: Decision,
    pub anomaly: Option<Anomaly>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    memory: ControllerMemory,
    gate_cmd: GateCommand,
    gate_fb: GateFeedback,
    street_signal: SignalState,
    train_signal: SignalState,
    audio_on: bool,
    alarm: Option<Alarm>,
    watchdog_timeout_s: f64,
}

impl ControllerState {
    /// Quiescent controller: empty memory, gate open, street green, train red.
    pub fn new(memory_capacity: usize, watchdog_timeout_s: f64) -> Result<Self, ConfigError> {
        if memory_capacity == 0 {
            return Err(ConfigError::new("memory capacity must be at least 1"));
        }
        if !(watchdog_timeout_s.is_finite() && watchdog_timeout_s > 0.0) {
            return Err(ConfigError::new(format!(
                "watchdog timeout {watchdog_timeout_s} must be > 0"
            )));
        }
        Ok(ControllerState {
            memory: ControllerMemory::new(memory_capacity),
            gate_cmd: GateCommand::Open,
            gate_fb: GateFeedback::Open,
            street_signal: SignalState::Green,
            train_signal: SignalState::Red,
            audio_on: false,
            alarm: None,
            watchdog_timeout_s,
        })
    }

    pub fn memory(&self) -> &ControllerMemory {
        &self.memory
    }

    pub fn gate_cmd(&self) -> GateCommand {
        self.gate_cmd
    }

    pub fn gate_feedback(&self) -> GateFeedback {
        self.gate_fb
    }

    pub fn street_signal(&self) -> SignalState {
        self.street_signal
    }

    pub fn train_signal(&self) -> SignalState {
        self.train_signal
    }

    pub fn audio_on(&self) -> bool {
        self.audio_on
    }

    pub fn alarm(&self) -> Option<Alarm> {
        self.alarm
    }

    pub fn watchdog_timeout_s(&self) -> f64 {
        self.watchdog_timeout_s
    }

    pub fn system_occupied(&self) -> bool {
        !self.memory.is_empty()
    }

    pub fn output(&self) -> ControllerOutput {
        ControllerOutput {
            gate_cmd: self.gate_cmd,
            street_signal: self.street_signal,
            train_signal: self.train_signal,
            audio_on: self.audio_on,
            alarm: self.alarm,
        }
    }

    fn derive_outputs(&mut self) {
        let occupied = self.system_occupied();
        self.gate_cmd = if occupied || self.alarm.is_some() {
            GateCommand::Close
        } else {
            GateCommand::Open
        };
        self.street_signal = match self.gate_cmd {
            GateCommand::Close => SignalState::Red,
            GateCommand::Open => SignalState::Green,
        };
        self.train_signal = if occupied && self.gate_fb == GateFeedback::Closed {
            SignalState::Green
        } else {
            SignalState::Red
        };
        self.audio_on = self.gate_cmd == GateCommand::Close;
    }

    fn raise(&mut self, alarm: Alarm) {
        if self.alarm.is_none() {
            self.alarm = Some(alarm);
        }
    }

    pub fn on_sensor_event(&mut self, event: &SensorEvent) -> EventOutcome {
        let id = event.packet.train_id;
        let mut anomaly = None;
        let decision = match event.packet.phase {
            Phase::Head if self.memory.contains(id) => Decision::AlreadyRegistered,
            Phase::Head if self.memory.is_full() => {
                self.raise(Alarm::MemoryOverflow(id));
                anomaly = Some(Anomaly {
                    time: event.time,
                    kind: AnomalyKind::MemoryOverflow,
                    train_id: id,
                });
                Decision::Overflow
            }
            Phase::Head => {
                self.memory.slots.push(MemorySlot {
                    train_id: id,
                    entry_sensor: event.sensor,
                    registered_at: event.time,
                    overdue: false,
                });
                Decision::Registered
            }
            Phase::Tail => match self.memory.get(id) {
                Some(slot) if slot.entry_sensor.side != event.sensor.side => {
                    self.memory.remove(id);
                    Decision::Deregistered
                }
                Some(_) => Decision::TailInside,
                None => {
                    anomaly = Some(Anomaly {
                        time: event.time,
                        kind: AnomalyKind::UnknownTail,
                        train_id: id,
                    });
                    Decision::UnknownTail
                }
            },
        };
        self.derive_outputs();
        EventOutcome {
            output: self.output(),
            decision,
            anomaly,
        }
    }

    pub fn on_gate_feedback(&mut self, fb: GateFeedback) -> ControllerOutput {
        self.gate_fb = fb;
        self.derive_outputs();
        self.output()
    }

    /// Watchdog pass. Overdue slots raise `StuckTrain` and stay registered.
    /// Each slot is reported at most once.
    pub fn tick(&mut self, now: f64) -> (ControllerOutput, Vec<Anomaly>) {
        let timeout = self.watchdog_timeout_s;
        let mut anomalies = Vec::new();
        for slot in self.memory.slots.iter_mut() {
            if !slot.overdue && now - slot.registered_at > timeout {
                slot.overdue = true;
                anomalies.push(Anomaly {
                    time: now,
                    kind: AnomalyKind::StuckTrain,
                    train_id: slot.train_id,
                });
            }
        }
        if let Some(first) = anomalies.first() {
            self.raise(Alarm::StuckTrain(first.train_id));
        }
        self.derive_outputs();
        (self.output(), anomalies)
    }
}
