//! Fixed-step world simulation: trains carrying head and tail transmitters,
//! trackside sensors, the radio link, the controller, the gate and road
//! vehicles, judged against the omniscient occupancy oracle.
//!
//! Within a step, sensor passes fire at their exact crossing instants and
//! deliveries reach the controller at their exact arrival times; the gate is
//! integrated piecewise between those instants so a command takes effect when
//! it is issued, not at the next step boundary. Road vehicles act and the
//! world is recorded at step boundaries.

mod world;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::channel::Channel;
use crate::controller::{
    Alarm, Anomaly, AnomalyKind, ControllerKind, CrossingController, GateCommand, SensorEvent,
    SensorId,
};
use crate::gate::GateActuator;
use crate::protocol::{decode_frame, encode_packet, TrainId, TrainPacket};
use crate::scenario::{Scenario, ScenarioInvalid};
use crate::trace::{Record, StepRecord, Trace, TraceHeader, VehicleAction};

pub use world::{Direction, RoadVehicleSpec, SensorPass, TrackLayout, TrainPath, TrainSpec, World};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario invalid: {0}")]
    ScenarioInvalid(#[from] ScenarioInvalid),
}

/// A road vehicle and a train inside the danger zone at the same time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub time: f64,
    pub vehicle: u32,
    pub train: TrainId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VehicleState {
    Pending,
    Waiting,
    InZone { entered: f64, exit: f64 },
    Done { entered: f64, exit: f64 },
}

#[derive(Debug, Clone)]
struct Vehicle {
    id: u32,
    spec: RoadVehicleSpec,
    state: VehicleState,
}

/// Decides whether a vehicle at the stop line may drive onto the crossing.
/// Obedient drivers need a green street signal and a gate at most half
/// lowered; others only need a gap under a gate that is not fully down.
pub fn may_enter(spec: &RoadVehicleSpec, street_green: bool, gate_position: f64) -> bool {
    if spec.obeys_signals {
        street_green && gate_position < 0.5
    } else {
        gate_position < 1.0
    }
}

/// Collisions at the step ending at `to`: every vehicle whose zone
/// occupancy intersects `[from, to]` against every train whose danger window
/// intersects the same stretch.
fn collision_check(world: &World, vehicles: &[Vehicle], from: f64, to: f64) -> Vec<(u32, TrainId)> {
    let mut hits = Vec::new();
    for v in vehicles {
        let (entered, exit) = match v.state {
            VehicleState::InZone { entered, exit } | VehicleState::Done { entered, exit } => {
                (entered, exit)
            }
            _ => continue,
        };
        let lo = entered.max(from);
        let hi = exit.min(to);
        if lo > hi {
            continue;
        }
        for p in world.paths.iter().filter(|p| p.in_danger_during(lo, hi)) {
            hits.push((v.id, p.spec.id));
        }
    }
    hits
}

/// Optional hook that can suppress individual sent copies before they reach
/// the channel. Used to model targeted losses in tests.
pub type LinkFilter = Box<dyn FnMut(&TrainPacket, SensorId, f64) -> bool + Send>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    /// Trains deregistered by the controller.
    pub trains_served: usize,
    pub gate_closed_s: f64,
    pub anomalies: Vec<Anomaly>,
    pub collisions: Vec<Collision>,
    pub alarm: Option<Alarm>,
    /// One sample per occupancy stretch that ended and was followed by the
    /// gate command returning to Open before the next train arrived.
    pub reopen_latencies: Vec<f64>,
    /// Trace-step instants at which a train was in the danger zone while the
    /// gate was not fully down.
    pub unprotected_steps: usize,
}

impl RunSummary {
    pub fn max_reopen_latency(&self) -> Option<f64> {
        self.reopen_latencies.iter().copied().reduce(f64::max)
    }

    pub fn anomaly_histogram(&self) -> BTreeMap<AnomalyKind, usize> {
        let mut h = BTreeMap::new();
        for a in &self.anomalies {
            *h.entry(a.kind).or_default() += 1;
        }
        h
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: Trace,
    pub summary: RunSummary,
    /// Merged `[start, end)` intervals where the oracle was true.
    pub occupancy: Vec<(f64, f64)>,
    /// Every gate command change, with the exact instant it was issued.
    pub gate_commands: Vec<(f64, GateCommand)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    deliver_at: f64,
    seq: u64,
    frame: crate::protocol::EncodedFrame,
    sensor: SensorId,
}

pub struct Simulation {
    scenario: Scenario,
    kind: ControllerKind,
    filter: Option<LinkFilter>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, kind: ControllerKind) -> Result<Self, SimError> {
        scenario.validate()?;
        Ok(Simulation {
            scenario: scenario.clone(),
            kind,
            filter: None,
        })
    }

    pub fn with_link_filter(
        mut self,
        filter: impl FnMut(&TrainPacket, SensorId, f64) -> bool + Send + 'static,
    ) -> Self {
        self.filter = Some(Box::new(filter));
        self
    }

    fn header(&self) -> TraceHeader {
        let s = &self.scenario;
        TraceHeader {
            controller: self.kind.as_str().to_string(),
            tracks: s.layout.track_count,
            sensor_offset_m: s.layout.sensor_offset_m,
            crossing_half_width_m: s.layout.crossing_half_width_m,
            transit_time_s: s.gate_transit_s,
            loss_prob: s.channel.loss_prob,
            dup_prob: s.channel.dup_prob,
            delay_s: s.channel.delay_s,
            seed: s.channel.seed,
            memory_slots: s.controller.memory_slots,
            watchdog_timeout_s: s.controller.watchdog_timeout_s,
            burst: s.transmitter.burst,
            burst_spacing_s: s.transmitter.burst_spacing_s,
            time_step_s: s.time_step_s,
            duration_s: s.duration_s,
        }
    }

    pub fn run(mut self) -> RunResult {
        let header = self.header();
        let s = &self.scenario;
        let world = World::new(s.layout, &s.trains);
        let passes = world.sensor_passes();
        let dt = s.time_step_s;
        let n_steps = ((s.duration_s / dt) - 1e-9).ceil().max(0.0) as u64;

        // Validated scenario guarantees these constructors succeed.
        let mut controller = self
            .kind
            .build(s.controller.memory_slots, s.controller.watchdog_timeout_s)
            .expect("validated controller config");
        let mut channel = Channel::new(s.channel).expect("validated channel config");
        let mut gate = GateActuator::new(s.gate_transit_s).expect("validated gate config");

        let mut vehicles: Vec<Vehicle> = s
            .vehicles
            .iter()
            .enumerate()
            .map(|(i, spec)| Vehicle {
                id: i as u32,
                spec: *spec,
                state: VehicleState::Pending,
            })
            .collect();

        let mut trace = Trace::default();
        let mut summary = RunSummary::default();
        let mut gate_commands: Vec<(f64, GateCommand)> = Vec::new();
        let mut pending: Vec<Pending> = Vec::new();
        let mut seq = 0u64;
        let mut next_pass = 0usize;
        let mut reported: BTreeSet<(u32, TrainId)> = BTreeSet::new();

        trace.push(0.0, Record::Scenario(header));
        let mut current_cmd = controller.output().gate_cmd;
        gate.command(current_cmd);
        gate_commands.push((0.0, current_cmd));
        trace.push(
            0.0,
            Record::Step(snapshot(&world, &*controller, &gate, &vehicles, 0.0)),
        );

        for k in 0..n_steps {
            let t0 = k as f64 * dt;
            let t1 = (k + 1) as f64 * dt;
            let mut step_records: Vec<(f64, Record)> = Vec::new();

            while next_pass < passes.len() && passes[next_pass].time <= t1 {
                let pass = passes[next_pass];
                next_pass += 1;
                step_records.push((
                    pass.time,
                    Record::Pass {
                        train: pass.train,
                        phase: pass.phase,
                        sensor: pass.sensor,
                    },
                ));
                let packet = TrainPacket {
                    train_id: pass.train,
                    phase: pass.phase,
                };
                let frame = encode_packet(packet);
                for copy in 0..s.transmitter.burst {
                    let send = pass.time + f64::from(copy) * s.transmitter.burst_spacing_s;
                    if let Some(filter) = self.filter.as_mut() {
                        if !filter(&packet, pass.sensor, send) {
                            continue;
                        }
                    }
                    for d in channel.transmit(frame, pass.sensor, send) {
                        pending.push(Pending {
                            deliver_at: d.deliver_at,
                            seq,
                            frame: d.frame,
                            sensor: d.sensor,
                        });
                        seq += 1;
                    }
                }
            }

            let mut due: Vec<Pending> = Vec::new();
            pending.retain(|p| {
                if p.deliver_at <= t1 {
                    due.push(*p);
                    false
                } else {
                    true
                }
            });
            due.sort_by(|a, b| {
                a.deliver_at
                    .total_cmp(&b.deliver_at)
                    .then(a.seq.cmp(&b.seq))
            });

            let mut cursor = t0;
            for d in due {
                let at = d.deliver_at;
                debug_assert!(at > t0, "delivery at {at} belongs to an earlier step");
                if at > cursor {
                    let fb = gate.step(at - cursor);
                    controller.on_gate_feedback(fb);
                    cursor = at;
                }
                // The link never corrupts, but the controller only ever sees
                // what decodes.
                let Ok(packet) = decode_frame(d.frame.as_ref()) else {
                    continue;
                };
                let event = SensorEvent {
                    packet,
                    sensor: d.sensor,
                    time: at,
                };
                let outcome = controller.on_sensor_event(&event);
                if outcome.decision == crate::controller::Decision::Deregistered {
                    summary.trains_served += 1;
                }
                step_records.push((
                    at,
                    Record::Rx {
                        train: packet.train_id,
                        phase: packet.phase,
                        sensor: d.sensor,
                        decision: outcome.decision,
                    },
                ));
                if let Some(a) = outcome.anomaly {
                    summary.anomalies.push(a);
                    step_records.push((
                        at,
                        Record::Anomaly {
                            kind: a.kind,
                            train: a.train_id,
                        },
                    ));
                }
                if outcome.output.gate_cmd != current_cmd {
                    current_cmd = outcome.output.gate_cmd;
                    gate_commands.push((at, current_cmd));
                }
                gate.command(current_cmd);
            }
            if t1 > cursor {
                let fb = gate.step(t1 - cursor);
                controller.on_gate_feedback(fb);
            }
            let (out, anomalies) = controller.tick(t1);
            for a in anomalies {
                summary.anomalies.push(a);
                step_records.push((
                    t1,
                    Record::Anomaly {
                        kind: a.kind,
                        train: a.train_id,
                    },
                ));
            }
            if out.gate_cmd != current_cmd {
                current_cmd = out.gate_cmd;
                gate_commands.push((t1, current_cmd));
            }
            gate.command(current_cmd);

            let street_green = out.street_signal == crate::controller::SignalState::Green;
            for v in vehicles.iter_mut() {
                if let VehicleState::InZone { entered, exit } = v.state {
                    if t1 >= exit {
                        v.state = VehicleState::Done { entered, exit };
                        step_records.push((
                            t1,
                            Record::Vehicle {
                                id: v.id,
                                action: VehicleAction::Exit,
                            },
                        ));
                    }
                }
                if v.state == VehicleState::Pending && v.spec.arrival_time_s <= t1 {
                    v.state = VehicleState::Waiting;
                    step_records.push((
                        t1,
                        Record::Vehicle {
                            id: v.id,
                            action: VehicleAction::Arrive,
                        },
                    ));
                }
                if v.state == VehicleState::Waiting
                    && may_enter(&v.spec, street_green, gate.position())
                {
                    v.state = VehicleState::InZone {
                        entered: t1,
                        exit: t1 + v.spec.crossing_transit_s,
                    };
                    step_records.push((
                        t1,
                        Record::Vehicle {
                            id: v.id,
                            action: VehicleAction::Enter,
                        },
                    ));
                }
            }

            for (vehicle, train) in collision_check(&world, &vehicles, t0, t1) {
                if reported.insert((vehicle, train)) {
                    summary.collisions.push(Collision {
                        time: t1,
                        vehicle,
                        train,
                    });
                    step_records.push((t1, Record::Collision { vehicle, train }));
                }
            }

            let snap = snapshot(&world, &*controller, &gate, &vehicles, t1);
            if snap.danger > 0 && snap.gate_pos < 1.0 {
                summary.unprotected_steps += 1;
            }
            step_records.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (t, r) in step_records {
                trace.push(t, r);
            }
            trace.push(t1, Record::Step(snap));
        }

        let end = n_steps as f64 * dt;
        summary.alarm = controller.output().alarm;
        summary.gate_closed_s = closed_time(&gate_commands, end);
        let occupancy = world.occupancy_intervals();
        summary.reopen_latencies = reopen_latencies(&occupancy, &gate_commands);

        RunResult {
            trace,
            summary,
            occupancy,
            gate_commands,
        }
    }
}

fn snapshot(
    world: &World,
    controller: &dyn CrossingController,
    gate: &GateActuator,
    vehicles: &[Vehicle],
    t: f64,
) -> StepRecord {
    let out = controller.output();
    StepRecord {
        gate_cmd: out.gate_cmd,
        street: out.street_signal,
        train: out.train_signal,
        audio: out.audio_on,
        alarm: out.alarm,
        occupied: controller.system_occupied(),
        oracle: world.occupancy_oracle(t),
        danger: world.trains_in_danger(t).count() as u32,
        gate_pos: gate.position(),
        gate_fb: gate.feedback(),
        in_zone: vehicles
            .iter()
            .filter(|v| matches!(v.state, VehicleState::InZone { .. }))
            .count() as u32,
    }
}

fn closed_time(commands: &[(f64, GateCommand)], end: f64) -> f64 {
    let mut total = 0.0;
    for (i, (t, cmd)) in commands.iter().enumerate() {
        if *cmd == GateCommand::Close {
            let until = commands.get(i + 1).map_or(end, |(next, _)| *next).min(end);
            total += (until - t).max(0.0);
        }
    }
    total
}

/// Delay from the end of each occupancy stretch to the next Open command,
/// provided that Open comes before the following stretch begins.
fn reopen_latencies(occupancy: &[(f64, f64)], commands: &[(f64, GateCommand)]) -> Vec<f64> {
    let mut out = Vec::new();
    for (i, &(_, end)) in occupancy.iter().enumerate() {
        let next_start = occupancy.get(i + 1).map_or(f64::INFINITY, |n| n.0);
        // Last command issued at or before the end of the stretch.
        let before = commands
            .iter()
            .rev()
            .find(|(t, _)| *t <= end)
            .map(|(_, c)| *c);
        if before == Some(GateCommand::Open) {
            // Already open (only a faulty controller gets here).
            out.push(0.0);
            continue;
        }
        if let Some((t, _)) = commands
            .iter()
            .find(|(t, c)| *t > end && *c == GateCommand::Open)
        {
            if *t < next_start {
                out.push(t - end);
            }
        }
    }
    out
}

/// Runs a scenario with the correct controller.
pub fn run_scenario(scenario: &Scenario) -> Result<RunResult, SimError> {
    Ok(Simulation::new(scenario, ControllerKind::Correct)?.run())
}

/// Whether any train is inside its protected window at `t`.
pub fn occupancy_oracle(world: &World, t: f64) -> bool {
    world.occupancy_oracle(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    #[test]
    fn closed_time_sums_close_spans() {
        let cmds = [
            (0.0, GateCommand::Open),
            (2.0, GateCommand::Close),
            (5.0, GateCommand::Open),
            (9.0, GateCommand::Close),
        ];
        assert_eq!(closed_time(&cmds, 10.0), 4.0);
    }

    #[test]
    fn latency_is_measured_to_the_next_open() {
        let occ = [(1.0, 4.0), (10.0, 12.0)];
        let cmds = [
            (0.0, GateCommand::Open),
            (1.0, GateCommand::Close),
            (4.5, GateCommand::Open),
            (10.0, GateCommand::Close),
            (12.0, GateCommand::Open),
        ];
        assert_eq!(reopen_latencies(&occ, &cmds), vec![0.5, 0.0]);
        // Reopening only after the next stretch started yields no sample for
        // the first stretch; the second ends with the gate already open.
        let cmds = [
            (0.0, GateCommand::Open),
            (1.0, GateCommand::Close),
            (11.0, GateCommand::Open),
        ];
        assert_eq!(reopen_latencies(&occ, &cmds), vec![0.0]);
    }

    #[test]
    fn entry_rules() {
        let obedient = RoadVehicleSpec {
            arrival_time_s: 0.0,
            crossing_transit_s: 2.0,
            obeys_signals: true,
        };
        let reckless = RoadVehicleSpec {
            obeys_signals: false,
            ..obedient
        };
        assert!(may_enter(&obedient, true, 0.0));
        assert!(may_enter(&obedient, true, 0.49));
        assert!(!may_enter(&obedient, true, 0.5));
        assert!(!may_enter(&obedient, false, 0.0));
        assert!(may_enter(&reckless, false, 0.99));
        assert!(!may_enter(&reckless, false, 1.0));
    }

    #[test]
    fn rejects_invalid_scenario() {
        let mut s = parse_scenario(
            "[layout]\ntracks = 1\nsensor_offset_m = 300\ncrossing_half_width_m = 5\n[gate]\ntransit_time_s = 5\n",
        )
        .unwrap();
        s.time_step_s = 0.0;
        assert!(matches!(
            Simulation::new(&s, ControllerKind::Correct),
            Err(SimError::ScenarioInvalid(_))
        ));
    }
}
