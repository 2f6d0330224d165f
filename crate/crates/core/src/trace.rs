//! Event trace: the replay and verification contract between a simulation
//! run and `verify`.
//!
//! One record per line, tab-separated: time with three decimals, record
//! kind, then `key=value` payload fields. Real-valued payloads use the
//! shortest round-trip representation so a parsed trace is exact.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::controller::{
    Alarm, AnomalyKind, Decision, GateCommand, GateFeedback, SensorId, Side, SignalState,
};
use crate::protocol::{Phase, TrainId};

/// Run parameters written as the first record so a trace can be verified
/// without its scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceHeader {
    pub controller: String,
    pub tracks: u32,
    pub sensor_offset_m: f64,
    pub crossing_half_width_m: f64,
    pub transit_time_s: f64,
    pub loss_prob: f64,
    pub dup_prob: f64,
    pub delay_s: f64,
    pub seed: u64,
    pub memory_slots: usize,
    pub watchdog_timeout_s: f64,
    pub burst: u32,
    pub burst_spacing_s: f64,
    pub time_step_s: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub gate_cmd: GateCommand,
    pub street: SignalState,
    pub train: SignalState,
    pub audio: bool,
    pub alarm: Option<Alarm>,
    /// Controller's view: at least one registered train.
    pub occupied: bool,
    /// Ground truth: some train between its near sensor and clear of the far one.
    pub oracle: bool,
    /// Number of trains inside the road danger zone.
    pub danger: u32,
    pub gate_pos: f64,
    pub gate_fb: GateFeedback,
    pub in_zone: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VehicleAction {
    Arrive,
    Enter,
    Exit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Scenario(TraceHeader),
    /// A transmitter passed a sensor (geometry, before the radio link).
    Pass {
        train: TrainId,
        phase: Phase,
        sensor: SensorId,
    },
    /// A frame was delivered to the controller.
    Rx {
        train: TrainId,
        phase: Phase,
        sensor: SensorId,
        decision: Decision,
    },
    Anomaly {
        kind: AnomalyKind,
        train: TrainId,
    },
    Vehicle {
        id: u32,
        action: VehicleAction,
    },
    Collision {
        vehicle: u32,
        train: TrainId,
    },
    Step(StepRecord),
}

impl Record {
    pub fn kind(&self) -> &'static str {
        match self {
            Record::Scenario(_) => "scenario",
            Record::Pass { .. } => "pass",
            Record::Rx { .. } => "rx",
            Record::Anomaly { .. } => "anomaly",
            Record::Vehicle { .. } => "vehicle",
            Record::Collision { .. } => "collision",
            Record::Step(_) => "step",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub time: f64,
    pub record: Record,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn push(&mut self, time: f64, record: Record) {
        self.entries.push(TraceEntry { time, record });
    }

    pub fn header(&self) -> Option<&TraceHeader> {
        self.entries.iter().find_map(|e| match &e.record {
            Record::Scenario(h) => Some(h),
            _ => None,
        })
    }

    pub fn steps(&self) -> impl Iterator<Item = (f64, &StepRecord)> {
        self.entries.iter().filter_map(|e| match &e.record {
            Record::Step(s) => Some((e.time, s)),
            _ => None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(out, "{e}").expect("writing to a String");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut trace = Trace::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry = parse_line(line).map_err(|reason| TraceError {
                line: idx + 1,
                reason,
            })?;
            trace.entries.push(entry);
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("trace line {line}: {reason}")]
pub struct TraceError {
    pub line: usize,
    pub reason: String,
}

fn side_str(side: Side) -> &'static str {
    match side {
        Side::A => "A",
        Side::B => "B",
    }
}

fn signal_str(s: SignalState) -> &'static str {
    match s {
        SignalState::Green => "green",
        SignalState::Red => "red",
    }
}

fn cmd_str(c: GateCommand) -> &'static str {
    match c {
        GateCommand::Open => "open",
        GateCommand::Close => "close",
    }
}

fn fb_str(f: GateFeedback) -> &'static str {
    match f {
        GateFeedback::Open => "open",
        GateFeedback::Closed => "closed",
    }
}

fn alarm_str(a: Option<Alarm>) -> String {
    a.map_or_else(|| "none".to_string(), |a| a.to_string())
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}\t{}", self.time, self.record.kind())?;
        match &self.record {
            Record::Scenario(h) => write!(
                f,
                "\tcontroller={}\ttracks={}\tsensor_offset_m={}\tcrossing_half_width_m={}\
                 \ttransit_time_s={}\tloss_prob={}\tdup_prob={}\tdelay_s={}\tseed={}\
                 \tmemory_slots={}\twatchdog_timeout_s={}\tburst={}\tburst_spacing_s={}\
                 \ttime_step_s={}\tduration_s={}",
                h.controller,
                h.tracks,
                h.sensor_offset_m,
                h.crossing_half_width_m,
                h.transit_time_s,
                h.loss_prob,
                h.dup_prob,
                h.delay_s,
                h.seed,
                h.memory_slots,
                h.watchdog_timeout_s,
                h.burst,
                h.burst_spacing_s,
                h.time_step_s,
                h.duration_s,
            ),
            Record::Pass {
                train,
                phase,
                sensor,
            } => write!(
                f,
                "\ttrain={train}\tphase={phase}\tside={}\ttrack={}",
                side_str(sensor.side),
                sensor.track
            ),
            Record::Rx {
                train,
                phase,
                sensor,
                decision,
            } => write!(
                f,
                "\ttrain={train}\tphase={phase}\tside={}\ttrack={}\tdecision={}",
                side_str(sensor.side),
                sensor.track,
                decision.as_str()
            ),
            Record::Anomaly { kind, train } => write!(f, "\tkind={kind}\ttrain={train}"),
            Record::Vehicle { id, action } => {
                let action = match action {
                    VehicleAction::Arrive => "arrive",
                    VehicleAction::Enter => "enter",
                    VehicleAction::Exit => "exit",
                };
                write!(f, "\tvehicle={id}\taction={action}")
            }
            Record::Collision { vehicle, train } => write!(f, "\tvehicle={vehicle}\ttrain={train}"),
            Record::Step(s) => write!(
                f,
                "\tgate_cmd={}\tstreet={}\ttrain={}\taudio={}\talarm={}\toccupied={}\
                 \toracle={}\tdanger={}\tgate_pos={}\tgate_fb={}\tin_zone={}",
                cmd_str(s.gate_cmd),
                signal_str(s.street),
                signal_str(s.train),
                if s.audio { "on" } else { "off" },
                alarm_str(s.alarm),
                u8::from(s.occupied),
                u8::from(s.oracle),
                s.danger,
                s.gate_pos,
                fb_str(s.gate_fb),
                s.in_zone,
            ),
        }
    }
}

struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn new<I: Iterator<Item = &'a str>>(parts: I) -> Result<Self, String> {
        let mut pairs = Vec::new();
        for part in parts {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("field '{part}' is not key=value"))?;
            if pairs.iter().any(|(existing, _)| *existing == k) {
                return Err(format!("duplicate field '{k}'"));
            }
            pairs.push((k, v));
        }
        Ok(Fields { pairs })
    }

    fn raw(&self, key: &str) -> Result<&'a str, String> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| format!("missing field '{key}'"))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, String> {
        let raw = self.raw(key)?;
        raw.parse()
            .map_err(|_| format!("field '{key}' has bad value '{raw}'"))
    }

    fn with<T>(&self, key: &str, f: impl Fn(&str) -> Option<T>) -> Result<T, String> {
        let raw = self.raw(key)?;
        f(raw).ok_or_else(|| format!("field '{key}' has bad value '{raw}'"))
    }

    fn finish(&self, expected: &[&str]) -> Result<(), String> {
        match self.pairs.iter().find(|(k, _)| !expected.contains(k)) {
            Some((k, _)) => Err(format!("unexpected field '{k}'")),
            None => Ok(()),
        }
    }
}

fn parse_side(s: &str) -> Option<Side> {
    match s {
        "A" => Some(Side::A),
        "B" => Some(Side::B),
        _ => None,
    }
}

fn parse_phase(s: &str) -> Option<Phase> {
    match s {
        "head" => Some(Phase::Head),
        "tail" => Some(Phase::Tail),
        _ => None,
    }
}

fn parse_signal(s: &str) -> Option<SignalState> {
    match s {
        "green" => Some(SignalState::Green),
        "red" => Some(SignalState::Red),
        _ => None,
    }
}

fn parse_bit(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

fn parse_alarm(s: &str) -> Option<Option<Alarm>> {
    if s == "none" {
        return Some(None);
    }
    let (kind, id) = s.split_once(':')?;
    let id = TrainId(id.parse().ok()?);
    match kind {
        "memory-overflow" => Some(Some(Alarm::MemoryOverflow(id))),
        "stuck-train" => Some(Some(Alarm::StuckTrain(id))),
        _ => None,
    }
}

fn parse_decision(s: &str) -> Option<Decision> {
    [
        Decision::Registered,
        Decision::AlreadyRegistered,
        Decision::Deregistered,
        Decision::TailInside,
        Decision::UnknownTail,
        Decision::Overflow,
        Decision::Ignored,
    ]
    .into_iter()
    .find(|d| d.as_str() == s)
}

fn parse_anomaly_kind(s: &str) -> Option<AnomalyKind> {
    [
        AnomalyKind::UnknownTail,
        AnomalyKind::MemoryOverflow,
        AnomalyKind::StuckTrain,
    ]
    .into_iter()
    .find(|k| k.as_str() == s)
}

fn parse_line(line: &str) -> Result<TraceEntry, String> {
    let mut parts = line.split('\t');
    let time_raw = parts.next().unwrap_or_default();
    let time: f64 = time_raw
        .parse()
        .ok()
        .filter(|t: &f64| t.is_finite())
        .ok_or_else(|| format!("bad time '{time_raw}'"))?;
    let kind = parts.next().ok_or("missing record kind")?;
    let fields = Fields::new(parts)?;
    let train = |f: &Fields| f.get::<u16>("train").map(TrainId);
    let sensor = |f: &Fields| -> Result<SensorId, String> {
        Ok(SensorId::new(f.with("side", parse_side)?, f.get("track")?))
    };
    let record = match kind {
        "scenario" => {
            fields.finish(&[
                "controller",
                "tracks",
                "sensor_offset_m",
                "crossing_half_width_m",
                "transit_time_s",
                "loss_prob",
                "dup_prob",
                "delay_s",
                "seed",
                "memory_slots",
                "watchdog_timeout_s",
                "burst",
                "burst_spacing_s",
                "time_step_s",
                "duration_s",
            ])?;
            Record::Scenario(TraceHeader {
                controller: fields.raw("controller")?.to_string(),
                tracks: fields.get("tracks")?,
                sensor_offset_m: fields.get("sensor_offset_m")?,
                crossing_half_width_m: fields.get("crossing_half_width_m")?,
                transit_time_s: fields.get("transit_time_s")?,
                loss_prob: fields.get("loss_prob")?,
                dup_prob: fields.get("dup_prob")?,
                delay_s: fields.get("delay_s")?,
                seed: fields.get("seed")?,
                memory_slots: fields.get("memory_slots")?,
                watchdog_timeout_s: fields.get("watchdog_timeout_s")?,
                burst: fields.get("burst")?,
                burst_spacing_s: fields.get("burst_spacing_s")?,
                time_step_s: fields.get("time_step_s")?,
                duration_s: fields.get("duration_s")?,
            })
        }
        "pass" => {
            fields.finish(&["train", "phase", "side", "track"])?;
            Record::Pass {
                train: train(&fields)?,
                phase: fields.with("phase", parse_phase)?,
                sensor: sensor(&fields)?,
            }
        }
        "rx" => {
            fields.finish(&["train", "phase", "side", "track", "decision"])?;
            Record::Rx {
                train: train(&fields)?,
                phase: fields.with("phase", parse_phase)?,
                sensor: sensor(&fields)?,
                decision: fields.with("decision", parse_decision)?,
            }
        }
        "anomaly" => {
            fields.finish(&["kind", "train"])?;
            Record::Anomaly {
                kind: fields.with("kind", parse_anomaly_kind)?,
                train: train(&fields)?,
            }
        }
        "vehicle" => {
            fields.finish(&["vehicle", "action"])?;
            Record::Vehicle {
                id: fields.get("vehicle")?,
                action: fields.with("action", |s| match s {
                    "arrive" => Some(VehicleAction::Arrive),
                    "enter" => Some(VehicleAction::Enter),
                    "exit" => Some(VehicleAction::Exit),
                    _ => None,
                })?,
            }
        }
        "collision" => {
            fields.finish(&["vehicle", "train"])?;
            Record::Collision {
                vehicle: fields.get("vehicle")?,
                train: train(&fields)?,
            }
        }
        "step" => {
            fields.finish(&[
                "gate_cmd", "street", "train", "audio", "alarm", "occupied", "oracle", "danger",
                "gate_pos", "gate_fb", "in_zone",
            ])?;
            let gate_pos: f64 = fields.get("gate_pos")?;
            if !(0.0..=1.0).contains(&gate_pos) {
                return Err(format!("gate_pos {gate_pos} outside [0, 1]"));
            }
            Record::Step(StepRecord {
                gate_cmd: fields.with("gate_cmd", |s| match s {
                    "open" => Some(GateCommand::Open),
                    "close" => Some(GateCommand::Close),
                    _ => None,
                })?,
                street: fields.with("street", parse_signal)?,
                train: fields.with("train", parse_signal)?,
                audio: fields.with("audio", |s| match s {
                    "on" => Some(true),
                    "off" => Some(false),
                    _ => None,
                })?,
                alarm: fields.with("alarm", parse_alarm)?,
                occupied: fields.with("occupied", parse_bit)?,
                oracle: fields.with("oracle", parse_bit)?,
                danger: fields.get("danger")?,
                gate_pos,
                gate_fb: fields.with("gate_fb", |s| match s {
                    "open" => Some(GateFeedback::Open),
                    "closed" => Some(GateFeedback::Closed),
                    _ => None,
                })?,
                in_zone: fields.get("in_zone")?,
            })
        }
        other => return Err(format!("unknown record kind '{other}'")),
    };
    Ok(TraceEntry { time, record })
}
