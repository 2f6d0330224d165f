//! Scenario description and its sectioned `key = value` file format.
//!
//! ```text
//! [layout]
//! tracks = 2
//! sensor_offset_m = 400
//! crossing_half_width_m = 8
//!
//! [gate]
//! transit_time_s = 8
//!
//! [train]            # repeatable
//! id = 7
//! track = 0
//! direction = AtoB
//! speed_mps = 10..40 # numeric train and vehicle timing keys accept lo..hi
//! length_m = 200
//! ```
//!
//! Ranges are drawn per seed by [`Scenario::realize`]; until then the
//! concrete value is the lower bound.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::ChannelConfig;
use crate::protocol::TrainId;
use crate::sim::{Direction, RoadVehicleSpec, TrackLayout, TrainSpec};

pub const DEFAULT_TIME_STEP_S: f64 = 0.1;
pub const DEFAULT_MEMORY_SLOTS: usize = 16;
pub const DEFAULT_WATCHDOG_S: f64 = 600.0;
pub const DEFAULT_DURATION_S: f64 = 300.0;
pub const DEFAULT_BURST: u32 = 16;
pub const DEFAULT_BURST_SPACING_S: f64 = 0.01;

/// How many copies of a packet a transmitter sends each time it passes a
/// sensor, and how far apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmitterConfig {
    pub burst: u32,
    pub burst_spacing_s: f64,
}

impl Default for TransmitterConfig {
    fn default() -> Self {
        TransmitterConfig {
            burst: DEFAULT_BURST,
            burst_spacing_s: DEFAULT_BURST_SPACING_S,
        }
    }
}

impl TransmitterConfig {
    /// Time between the first and last copy of a burst.
    pub fn window_s(&self) -> f64 {
        f64::from(self.burst.saturating_sub(1)) * self.burst_spacing_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub memory_slots: usize,
    pub watchdog_timeout_s: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            memory_slots: DEFAULT_MEMORY_SLOTS,
            watchdog_timeout_s: DEFAULT_WATCHDOG_S,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrainKey {
    Speed,
    Length,
    Entry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VehicleKey {
    Arrival,
    Transit,
}

/// A numeric field drawn uniformly from `[lo, hi]` for every seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Randomized {
    Train {
        index: usize,
        key: TrainKey,
        lo: f64,
        hi: f64,
    },
    Vehicle {
        index: usize,
        key: VehicleKey,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub layout: TrackLayout,
    pub gate_transit_s: f64,
    pub channel: ChannelConfig,
    pub transmitter: TransmitterConfig,
    pub controller: ControllerConfig,
    pub trains: Vec<TrainSpec>,
    pub vehicles: Vec<RoadVehicleSpec>,
    pub duration_s: f64,
    pub time_step_s: f64,
    pub randomized: Vec<Randomized>,
}

/// Where in a scenario a problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Location {
    Layout(&'static str),
    Gate(&'static str),
    Channel(&'static str),
    Transmitter(&'static str),
    Controller(&'static str),
    Train(usize, &'static str),
    Vehicle(usize, &'static str),
    Run(&'static str),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Layout(k) => write!(f, "[layout] {k}"),
            Location::Gate(k) => write!(f, "[gate] {k}"),
            Location::Channel(k) => write!(f, "[channel] {k}"),
            Location::Transmitter(k) => write!(f, "[transmitter] {k}"),
            Location::Controller(k) => write!(f, "[controller] {k}"),
            Location::Train(i, k) => write!(f, "train #{} {k}", i + 1),
            Location::Vehicle(i, k) => write!(f, "vehicle #{} {k}", i + 1),
            Location::Run(k) => write!(f, "[run] {k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{at}: {reason}")]
pub struct ScenarioInvalid {
    pub at: Location,
    pub reason: String,
}

fn invalid(at: Location, reason: impl Into<String>) -> ScenarioInvalid {
    ScenarioInvalid {
        at,
        reason: reason.into(),
    }
}

fn positive(at: Location, v: f64) -> Result<(), ScenarioInvalid> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(at, format!("must be > 0 (got {v})")))
    }
}

fn non_negative(at: Location, v: f64) -> Result<(), ScenarioInvalid> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(at, format!("must be >= 0 (got {v})")))
    }
}

fn train_key_name(key: TrainKey) -> &'static str {
    match key {
        TrainKey::Speed => "speed_mps",
        TrainKey::Length => "length_m",
        TrainKey::Entry => "entry_time_s",
    }
}

fn vehicle_key_name(key: VehicleKey) -> &'static str {
    match key {
        VehicleKey::Arrival => "arrival_time_s",
        VehicleKey::Transit => "crossing_transit_s",
    }
}

fn check_train_value(index: usize, key: TrainKey, v: f64) -> Result<(), ScenarioInvalid> {
    let at = Location::Train(index, train_key_name(key));
    match key {
        TrainKey::Speed | TrainKey::Length => positive(at, v),
        TrainKey::Entry => non_negative(at, v),
    }
}

fn check_vehicle_value(index: usize, key: VehicleKey, v: f64) -> Result<(), ScenarioInvalid> {
    let at = Location::Vehicle(index, vehicle_key_name(key));
    match key {
        VehicleKey::Arrival => non_negative(at, v),
        VehicleKey::Transit => positive(at, v),
    }
}

impl Scenario {
    pub fn seed(&self) -> u64 {
        self.channel.seed
    }

    /// Default spawn point: one sensor offset before the near sensor.
    pub fn default_head_position(layout: &TrackLayout) -> f64 {
        -2.0 * layout.sensor_offset_m
    }

    pub fn validate(&self) -> Result<(), ScenarioInvalid> {
        let l = &self.layout;
        if l.track_count == 0 {
            return Err(invalid(Location::Layout("tracks"), "must be at least 1"));
        }
        positive(Location::Layout("sensor_offset_m"), l.sensor_offset_m)?;
        positive(
            Location::Layout("crossing_half_width_m"),
            l.crossing_half_width_m,
        )?;
        if l.sensor_offset_m <= l.crossing_half_width_m {
            return Err(invalid(
                Location::Layout("sensor_offset_m"),
                format!(
                    "sensors must lie outside the danger zone ({} <= {})",
                    l.sensor_offset_m, l.crossing_half_width_m
                ),
            ));
        }
        positive(Location::Gate("transit_time_s"), self.gate_transit_s)?;

        let ch = &self.channel;
        for (key, p) in [("loss_prob", ch.loss_prob), ("dup_prob", ch.dup_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(
                    Location::Channel(key),
                    format!("{p} not in [0, 1]"),
                ));
            }
        }
        non_negative(Location::Channel("delay_s"), ch.delay_s)?;

        if self.transmitter.burst == 0 {
            return Err(invalid(
                Location::Transmitter("burst"),
                "must be at least 1",
            ));
        }
        non_negative(
            Location::Transmitter("burst_spacing_s"),
            self.transmitter.burst_spacing_s,
        )?;

        if self.controller.memory_slots == 0 {
            return Err(invalid(
                Location::Controller("memory_slots"),
                "must be at least 1",
            ));
        }
        positive(
            Location::Controller("watchdog_timeout_s"),
            self.controller.watchdog_timeout_s,
        )?;

        positive(Location::Run("duration_s"), self.duration_s)?;
        positive(Location::Run("time_step_s"), self.time_step_s)?;

        let mut seen: HashMap<TrainId, usize> = HashMap::new();
        for (i, t) in self.trains.iter().enumerate() {
            if let Some(first) = seen.insert(t.id, i) {
                return Err(invalid(
                    Location::Train(i, "id"),
                    format!("duplicate train id {} (also train #{})", t.id, first + 1),
                ));
            }
            if t.track >= l.track_count {
                return Err(invalid(
                    Location::Train(i, "track"),
                    format!(
                        "track {} out of range (tracks = {})",
                        t.track, l.track_count
                    ),
                ));
            }
            check_train_value(i, TrainKey::Speed, t.speed_mps)?;
            check_train_value(i, TrainKey::Length, t.length_m)?;
            check_train_value(i, TrainKey::Entry, t.entry_time_s)?;
            if !(t.head_position_m.is_finite() && t.head_position_m < -l.sensor_offset_m) {
                return Err(invalid(
                    Location::Train(i, "head_position_m"),
                    format!(
                        "train must start before its near sensor ({} >= {})",
                        t.head_position_m, -l.sensor_offset_m
                    ),
                ));
            }
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            check_vehicle_value(i, VehicleKey::Arrival, v.arrival_time_s)?;
            check_vehicle_value(i, VehicleKey::Transit, v.crossing_transit_s)?;
        }
        for r in &self.randomized {
            match *r {
                Randomized::Train { index, key, lo, hi } => {
                    check_train_value(index, key, lo)?;
                    check_train_value(index, key, hi)?;
                    if lo > hi {
                        return Err(invalid(
                            Location::Train(index, train_key_name(key)),
                            "empty range",
                        ));
                    }
                }
                Randomized::Vehicle { index, key, lo, hi } => {
                    check_vehicle_value(index, key, lo)?;
                    check_vehicle_value(index, key, hi)?;
                    if lo > hi {
                        return Err(invalid(
                            Location::Vehicle(index, vehicle_key_name(key)),
                            "empty range",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Concrete instance for one seed: every ranged field drawn uniformly and
    /// the channel reseeded. Scenarios without ranges only change seed.
    pub fn realize(&self, seed: u64) -> Scenario {
        let mut out = self.clone();
        out.channel.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce7_a21e_0000_0000);
        for r in &self.randomized {
            match *r {
                Randomized::Train { index, key, lo, hi } => {
                    let v = draw(&mut rng, lo, hi);
                    let t = &mut out.trains[index];
                    match key {
                        TrainKey::Speed => t.speed_mps = v,
                        TrainKey::Length => t.length_m = v,
                        TrainKey::Entry => t.entry_time_s = v,
                    }
                }
                Randomized::Vehicle { index, key, lo, hi } => {
                    let v = draw(&mut rng, lo, hi);
                    let veh = &mut out.vehicles[index];
                    match key {
                        VehicleKey::Arrival => veh.arrival_time_s = v,
                        VehicleKey::Transit => veh.crossing_transit_s = v,
                    }
                }
            }
        }
        out
    }
}

fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

fn perr(line: usize, reason: impl Into<String>) -> ParseError {
    ParseError {
        line,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SectionKind {
    Layout,
    Gate,
    Channel,
    Transmitter,
    Controller,
    Train,
    Vehicle,
    Run,
}

impl SectionKind {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "layout" => SectionKind::Layout,
            "gate" => SectionKind::Gate,
            "channel" => SectionKind::Channel,
            "transmitter" => SectionKind::Transmitter,
            "controller" => SectionKind::Controller,
            "train" => SectionKind::Train,
            "vehicle" => SectionKind::Vehicle,
            "run" => SectionKind::Run,
            _ => return None,
        })
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            SectionKind::Layout => &["tracks", "sensor_offset_m", "crossing_half_width_m"],
            SectionKind::Gate => &["transit_time_s"],
            SectionKind::Channel => &["loss_prob", "dup_prob", "delay_s", "seed"],
            SectionKind::Transmitter => &["burst", "burst_spacing_s"],
            SectionKind::Controller => &["memory_slots", "watchdog_timeout_s"],
            SectionKind::Train => &[
                "id",
                "track",
                "direction",
                "speed_mps",
                "length_m",
                "entry_time_s",
                "head_position_m",
            ],
            SectionKind::Vehicle => &["arrival_time_s", "crossing_transit_s", "obeys_signals"],
            SectionKind::Run => &["duration_s", "time_step_s"],
        }
    }

    fn repeatable(self) -> bool {
        matches!(self, SectionKind::Train | SectionKind::Vehicle)
    }
}

struct Section<'a> {
    kind: SectionKind,
    header_line: usize,
    entries: Vec<(&'static str, &'a str, usize)>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<(&'a str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| *k == key)
            .map(|(_, v, line)| (*v, *line))
    }

    fn require(&self, key: &'static str) -> Result<(&'a str, usize), ParseError> {
        self.get(key).ok_or_else(|| {
            perr(
                self.header_line,
                format!("section starting here is missing required key '{key}'"),
            )
        })
    }

    fn line_of(&self, key: &str) -> usize {
        self.get(key).map_or(self.header_line, |(_, line)| line)
    }
}

fn number(value: &str, line: usize, key: &str) -> Result<f64, ParseError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| perr(line, format!("'{key}': bad number '{value}'")))
}

fn integer<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T, ParseError> {
    value
        .parse::<T>()
        .map_err(|_| perr(line, format!("'{key}': bad integer '{value}'")))
}

/// A plain number or an inclusive `lo..hi` range.
fn number_or_range(value: &str, line: usize, key: &str) -> Result<(f64, Option<f64>), ParseError> {
    match value.split_once("..") {
        Some((lo, hi)) => {
            let lo = number(lo.trim(), line, key)?;
            let hi = number(hi.trim(), line, key)?;
            if lo > hi {
                return Err(perr(line, format!("'{key}': empty range {lo}..{hi}")));
            }
            Ok((lo, Some(hi)))
        }
        None => Ok((number(value, line, key)?, None)),
    }
}

fn split_sections(text: &str) -> Result<(Vec<Section<'_>>, usize), ParseError> {
    let mut sections: Vec<Section> = Vec::new();
    let mut line_count = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        line_count = line_no;
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| perr(line_no, format!("malformed section header '{line}'")))?
                .trim();
            let kind = SectionKind::from_name(name)
                .ok_or_else(|| perr(line_no, format!("unknown section [{name}]")))?;
            if !kind.repeatable() {
                if let Some(prev) = sections.iter().find(|s| s.kind == kind) {
                    return Err(perr(
                        line_no,
                        format!(
                            "duplicate section [{name}] (first at line {})",
                            prev.header_line
                        ),
                    ));
                }
            }
            sections.push(Section {
                kind,
                header_line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| perr(line_no, format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = sections
            .last_mut()
            .ok_or_else(|| perr(line_no, format!("key '{key}' outside any section")))?;
        let known = section
            .kind
            .keys()
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| perr(line_no, format!("unknown key '{key}'")))?;
        if let Some((_, first)) = section.get(known) {
            return Err(perr(
                line_no,
                format!("duplicate key '{key}' (first at line {first})"),
            ));
        }
        if value.is_empty() {
            return Err(perr(line_no, format!("'{key}' has no value")));
        }
        section.entries.push((known, value, line_no));
    }
    Ok((sections, line_count))
}

/// Parses and validates a scenario document. Never panics; every failure is
/// reported with the line it concerns.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let (sections, line_count) = split_sections(text)?;
    let end_line = line_count.max(1);
    let single = |kind: SectionKind| sections.iter().find(|s| s.kind == kind);
    // Line numbers for every value, keyed by the location validate() reports.
    let mut lines: HashMap<Location, usize> = HashMap::new();

    let layout_sec =
        single(SectionKind::Layout).ok_or_else(|| perr(end_line, "missing [layout] section"))?;
    let (v, ln) = layout_sec.require("tracks")?;
    let track_count: u32 = integer(v, ln, "tracks")?;
    let (v, ln) = layout_sec.require("sensor_offset_m")?;
    let sensor_offset_m = number(v, ln, "sensor_offset_m")?;
    let (v, ln) = layout_sec.require("crossing_half_width_m")?;
    let crossing_half_width_m = number(v, ln, "crossing_half_width_m")?;
    for key in SectionKind::Layout.keys() {
        lines.insert(Location::Layout(key), layout_sec.line_of(key));
    }
    let layout = TrackLayout {
        track_count,
        sensor_offset_m,
        crossing_half_width_m,
    };

    let gate_sec =
        single(SectionKind::Gate).ok_or_else(|| perr(end_line, "missing [gate] section"))?;
    let (v, ln) = gate_sec.require("transit_time_s")?;
    let gate_transit_s = number(v, ln, "transit_time_s")?;
    lines.insert(Location::Gate("transit_time_s"), ln);

    let mut channel = ChannelConfig::default();
    if let Some(sec) = single(SectionKind::Channel) {
        for &(key, v, ln) in &sec.entries {
            lines.insert(Location::Channel(key), ln);
            match key {
                "loss_prob" => channel.loss_prob = number(v, ln, key)?,
                "dup_prob" => channel.dup_prob = number(v, ln, key)?,
                "delay_s" => channel.delay_s = number(v, ln, key)?,
                "seed" => channel.seed = integer(v, ln, key)?,
                _ => unreachable!("key list checked while splitting"),
            }
        }
    }

    let mut transmitter = TransmitterConfig::default();
    if let Some(sec) = single(SectionKind::Transmitter) {
        for &(key, v, ln) in &sec.entries {
            lines.insert(Location::Transmitter(key), ln);
            match key {
                "burst" => transmitter.burst = integer(v, ln, key)?,
                "burst_spacing_s" => transmitter.burst_spacing_s = number(v, ln, key)?,
                _ => unreachable!("key list checked while splitting"),
            }
        }
    }

    let mut controller = ControllerConfig::default();
    if let Some(sec) = single(SectionKind::Controller) {
        for &(key, v, ln) in &sec.entries {
            lines.insert(Location::Controller(key), ln);
            match key {
                "memory_slots" => controller.memory_slots = integer(v, ln, key)?,
                "watchdog_timeout_s" => controller.watchdog_timeout_s = number(v, ln, key)?,
                _ => unreachable!("key list checked while splitting"),
            }
        }
    }

    let mut duration_s = DEFAULT_DURATION_S;
    let mut time_step_s = DEFAULT_TIME_STEP_S;
    if let Some(sec) = single(SectionKind::Run) {
        for &(key, v, ln) in &sec.entries {
            lines.insert(Location::Run(key), ln);
            match key {
                "duration_s" => duration_s = number(v, ln, key)?,
                "time_step_s" => time_step_s = number(v, ln, key)?,
                _ => unreachable!("key list checked while splitting"),
            }
        }
    }

    let mut randomized = Vec::new();
    let mut trains = Vec::new();
    for (index, sec) in sections
        .iter()
        .filter(|s| s.kind == SectionKind::Train)
        .enumerate()
    {
        for key in SectionKind::Train.keys() {
            lines.insert(Location::Train(index, key), sec.line_of(key));
        }
        let (v, ln) = sec.require("id")?;
        let id = TrainId(integer(v, ln, "id")?);
        let (v, ln) = sec.require("track")?;
        let track: u32 = integer(v, ln, "track")?;
        let (v, ln) = sec.require("direction")?;
        let direction = match v {
            "AtoB" => Direction::AtoB,
            "BtoA" => Direction::BtoA,
            other => {
                return Err(perr(
                    ln,
                    format!("'direction': expected AtoB or BtoA, got '{other}'"),
                ))
            }
        };
        let mut ranged = |key: TrainKey, default: Option<f64>| -> Result<f64, ParseError> {
            let name = train_key_name(key);
            let Some((v, ln)) = sec.get(name) else {
                return match default {
                    Some(d) => Ok(d),
                    None => Err(sec.require(name).unwrap_err()),
                };
            };
            let (lo, hi) = number_or_range(v, ln, name)?;
            if let Some(hi) = hi {
                randomized.push(Randomized::Train { index, key, lo, hi });
            }
            Ok(lo)
        };
        let speed_mps = ranged(TrainKey::Speed, None)?;
        let length_m = ranged(TrainKey::Length, None)?;
        let entry_time_s = ranged(TrainKey::Entry, Some(0.0))?;
        let head_position_m = match sec.get("head_position_m") {
            Some((v, ln)) => number(v, ln, "head_position_m")?,
            None => Scenario::default_head_position(&layout),
        };
        trains.push(TrainSpec {
            id,
            track,
            direction,
            speed_mps,
            length_m,
            entry_time_s,
            head_position_m,
        });
    }

    let mut vehicles = Vec::new();
    for (index, sec) in sections
        .iter()
        .filter(|s| s.kind == SectionKind::Vehicle)
        .enumerate()
    {
        for key in SectionKind::Vehicle.keys() {
            lines.insert(Location::Vehicle(index, key), sec.line_of(key));
        }
        let mut ranged = |key: VehicleKey| -> Result<f64, ParseError> {
            let name = vehicle_key_name(key);
            let (v, ln) = sec.require(name)?;
            let (lo, hi) = number_or_range(v, ln, name)?;
            if let Some(hi) = hi {
                randomized.push(Randomized::Vehicle { index, key, lo, hi });
            }
            Ok(lo)
        };
        let arrival_time_s = ranged(VehicleKey::Arrival)?;
        let crossing_transit_s = ranged(VehicleKey::Transit)?;
        let obeys_signals = match sec.get("obeys_signals") {
            None | Some(("true", _)) => true,
            Some(("false", _)) => false,
            Some((other, ln)) => {
                return Err(perr(
                    ln,
                    format!("'obeys_signals': expected true or false, got '{other}'"),
                ))
            }
        };
        vehicles.push(RoadVehicleSpec {
            arrival_time_s,
            crossing_transit_s,
            obeys_signals,
        });
    }

    let scenario = Scenario {
        layout,
        gate_transit_s,
        channel,
        transmitter,
        controller,
        trains,
        vehicles,
        duration_s,
        time_step_s,
        randomized,
    };
    scenario.validate().map_err(|e| {
        let line = lines.get(&e.at).copied().unwrap_or(end_line);
        perr(line, e.to_string())
    })?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = "\
[layout]
tracks = 2
sensor_offset_m = 400
crossing_half_width_m = 8

[gate]
transit_time_s = 8

[train]
id = 7
track = 0
direction = AtoB
speed_mps = 20
length_m = 150
";

    #[test]
    fn minimal_document_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.time_step_s, 0.1);
        assert_eq!(s.controller.memory_slots, 16);
        assert_eq!(s.controller.watchdog_timeout_s, 600.0);
        assert_eq!(s.duration_s, DEFAULT_DURATION_S);
        assert_eq!(s.channel, ChannelConfig::default());
        assert_eq!(s.transmitter, TransmitterConfig::default());
        assert_eq!(s.trains.len(), 1);
        let t = &s.trains[0];
        assert_eq!(t.id, TrainId(7));
        assert_eq!(t.entry_time_s, 0.0);
        assert_eq!(t.head_position_m, -800.0);
        assert!(s.vehicles.is_empty());
        assert!(s.randomized.is_empty());
    }

    #[test]
    fn full_document() {
        let text = format!(
            "{MINIMAL}
# comment line
[channel]
loss_prob = 0.2   # trailing comment
dup_prob = 0.05
delay_s = 0.5
seed = 42

[transmitter]
burst = 4
burst_spacing_s = 0.02

[controller]
memory_slots = 4
watchdog_timeout_s = 120

[train]
id = 9
track = 1
direction = BtoA
speed_mps = 10..40
length_m = 50..400
entry_time_s = 5
head_position_m = -1000

[vehicle]
arrival_time_s = 12
crossing_transit_s = 3
obeys_signals = false

[run]
duration_s = 500
time_step_s = 0.05
"
        );
        let s = parse_scenario(&text).unwrap();
        assert_eq!(s.channel.loss_prob, 0.2);
        assert_eq!(s.channel.seed, 42);
        assert_eq!(s.transmitter.burst, 4);
        assert_eq!(s.controller.memory_slots, 4);
        assert_eq!(s.trains[1].direction, Direction::BtoA);
        assert_eq!(s.trains[1].speed_mps, 10.0);
        assert_eq!(s.trains[1].head_position_m, -1000.0);
        assert!(!s.vehicles[0].obeys_signals);
        assert_eq!(s.duration_s, 500.0);
        assert_eq!(s.randomized.len(), 2);

        let a = s.realize(3);
        let b = s.realize(3);
        assert_eq!(a, b);
        assert_eq!(a.channel.seed, 3);
        assert!((10.0..=40.0).contains(&a.trains[1].speed_mps));
        assert!((50.0..=400.0).contains(&a.trains[1].length_m));
        assert_eq!(a.trains[0], s.trains[0]);
        assert_ne!(s.realize(4).trains[1].speed_mps, a.trains[1].speed_mps);
    }

    #[test]
    fn duplicate_train_id_is_named() {
        let text = format!("{MINIMAL}\n[train]\nid = 7\ntrack = 1\ndirection = BtoA\nspeed_mps = 10\nlength_m = 60\n");
        let err = parse_scenario(&text).unwrap_err();
        assert!(err.reason.contains("duplicate train id 7"), "{err}");
        assert_eq!(err.line, 17);
    }

    #[test]
    fn track_out_of_range_is_located() {
        let text = MINIMAL.replace("track = 0", "track = 5");
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.line, 11);
        assert!(err.reason.contains("out of range"), "{err}");
    }

    #[test]
    fn located_errors() {
        let cases: &[(&str, usize, &str)] = &[
            ("[layout]\ntracks = 1\nbogus = 2\n", 3, "unknown key"),
            ("[layout]\ntracks = x\n", 2, "bad integer"),
            ("[nowhere]\n", 1, "unknown section"),
            ("tracks = 1\n", 1, "outside any section"),
            ("[layout]\ntracks 1\n", 2, "expected 'key = value'"),
            ("[layout]\ntracks = 1\ntracks = 2\n", 3, "duplicate key"),
            ("[layout]\n[layout]\n", 2, "duplicate section"),
            ("[gate]\ntransit_time_s = 3\n", 2, "missing [layout]"),
            ("[layout\n", 1, "malformed section"),
        ];
        for (text, line, needle) in cases {
            let err = parse_scenario(text).unwrap_err();
            assert_eq!(err.line, *line, "{text:?} -> {err}");
            assert!(err.reason.contains(needle), "{text:?} -> {err}");
        }
    }

    #[test]
    fn invariant_violations_are_located() {
        let err = parse_scenario(&MINIMAL.replace("sensor_offset_m = 400", "sensor_offset_m = 5"))
            .unwrap_err();
        assert_eq!(err.line, 3);
        let err = parse_scenario(&format!("{MINIMAL}[channel]\nloss_prob = 1.5\n")).unwrap_err();
        assert_eq!(err.line, 16);
        let err = parse_scenario(&format!("{MINIMAL}[run]\nduration_s = 0\n")).unwrap_err();
        assert_eq!(err.line, 16);
        let err =
            parse_scenario(&MINIMAL.replace("speed_mps = 20", "speed_mps = 40..10")).unwrap_err();
        assert!(err.reason.contains("empty range"));
        let err = parse_scenario(&MINIMAL.replace("length_m = 150", "length_m = -3")).unwrap_err();
        assert_eq!(err.line, 14);
        let err = parse_scenario(&format!("{MINIMAL}head_position_m = -100\n")).unwrap_err();
        assert_eq!(err.line, 15);
        let err = parse_scenario(&MINIMAL.replace("[train]\nid = 7\n", "[train]\n")).unwrap_err();
        assert_eq!(err.line, 9);
        assert!(err.reason.contains("'id'"));
    }

    proptest! {
        #[test]
        fn parse_is_total(text in ".{0,400}") {
            let _ = parse_scenario(&text);
        }

        #[test]
        fn parse_is_total_on_structured_noise(
            lines in proptest::collection::vec(
                prop_oneof![
                    Just("[layout]".to_string()),
                    Just("[train]".to_string()),
                    Just("[gate]".to_string()),
                    "[a-z_]{1,20} = [-0-9.a-z]{0,8}",
                    ".{0,30}",
                ],
                0..30,
            )
        ) {
            let text = lines.join("\n");
            if let Err(e) = parse_scenario(&text) {
                prop_assert!(e.line >= 1 && e.line <= lines.len().max(1));
            }
        }
    }
}
