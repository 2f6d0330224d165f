//! Random scenario generator for property runs.
//!
//! Sensors are always placed far enough out for the fastest train not to
//! reach the danger zone before the gate is down, counting the gate transit
//! time, the link delay and the transmitter burst. Road vehicles obey the
//! signals and clear the zone no slower than the gate closes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelConfig;
use crate::protocol::TrainId;
use crate::scenario::{
    ControllerConfig, Scenario, TransmitterConfig, DEFAULT_TIME_STEP_S, DEFAULT_WATCHDOG_S,
};
use crate::sim::{Direction, RoadVehicleSpec, TrackLayout, TrainSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub max_tracks: u32,
    pub max_trains: usize,
    pub speed_mps: (f64, f64),
    pub length_m: (f64, f64),
    pub gate_transit_s: (f64, f64),
    /// Chance that a train's occupancy starts inside the previous train's.
    pub overlap_prob: f64,
    pub max_vehicles: usize,
    /// Seed is replaced by the scenario seed.
    pub channel: ChannelConfig,
    pub watchdog_timeout_s: f64,
    /// Run time after the last train clears its far sensor.
    pub tail_s: f64,
    pub time_step_s: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_tracks: 4,
            max_trains: 6,
            speed_mps: (10.0, 40.0),
            length_m: (50.0, 400.0),
            gate_transit_s: (2.0, 8.0),
            overlap_prob: 0.75,
            max_vehicles: 8,
            channel: ChannelConfig::default(),
            watchdog_timeout_s: DEFAULT_WATCHDOG_S,
            tail_s: 30.0,
            time_step_s: DEFAULT_TIME_STEP_S,
        }
    }
}

/// Smallest sensor offset that keeps the gate ahead of a train at `v_max`.
pub fn required_offset(v_max: f64, gate_transit_s: f64, half_width_m: f64) -> f64 {
    v_max * gate_transit_s + half_width_m
}

pub fn generate_scenario(seed: u64, cfg: &GeneratorConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transmitter = TransmitterConfig::default();

    let tracks = rng.random_range(1..=cfg.max_tracks);
    let half_width = 2.5 * f64::from(tracks) + rng.random_range(1.0..5.0);
    let transit = rng.random_range(cfg.gate_transit_s.0..=cfg.gate_transit_s.1);
    let warning_s = transit + transmitter.window_s() + cfg.channel.delay_s;
    let offset =
        required_offset(cfg.speed_mps.1, warning_s, half_width) + rng.random_range(0.0..60.0);
    let layout = TrackLayout {
        track_count: tracks,
        sensor_offset_m: offset,
        crossing_half_width_m: half_width,
    };
    let head0 = Scenario::default_head_position(&layout);

    let n_trains = rng.random_range(1..=cfg.max_trains);
    let mut ids: Vec<u16> = Vec::with_capacity(n_trains);
    while ids.len() < n_trains {
        let id = rng.random::<u16>();
        if !ids.contains(&id) {
            ids.push(id);
        }
    }

    let mut trains = Vec::with_capacity(n_trains);
    // (head_near, tail_far) of the previous train, and the last tail_far per track.
    let mut prev: Option<(f64, f64)> = None;
    let mut track_free = vec![0.0f64; tracks as usize];
    let mut last_clear = 0.0f64;
    for id in ids {
        let track = rng.random_range(0..tracks);
        let speed = rng.random_range(cfg.speed_mps.0..=cfg.speed_mps.1);
        let length = rng.random_range(cfg.length_m.0..=cfg.length_m.1);
        let direction = if rng.random_bool(0.5) {
            Direction::AtoB
        } else {
            Direction::BtoA
        };
        let approach = offset / speed;
        let wanted = match prev {
            None => approach + rng.random_range(0.0..20.0),
            Some((start, end)) if rng.random_bool(cfg.overlap_prob) => rng.random_range(start..end),
            Some((_, end)) => end + rng.random_range(5.0..60.0),
        };
        // Trains on one track follow each other through the section.
        let head_near = wanted.max(track_free[track as usize] + 1.0).max(approach);
        let entry = head_near - approach;
        let tail_far = head_near + (2.0 * offset + length) / speed;
        track_free[track as usize] = tail_far;
        last_clear = last_clear.max(tail_far);
        prev = Some((head_near, tail_far));
        trains.push(TrainSpec {
            id: TrainId(id),
            track,
            direction,
            speed_mps: speed,
            length_m: length,
            entry_time_s: entry,
            head_position_m: head0,
        });
    }

    let duration = last_clear + cfg.tail_s;
    let n_vehicles = rng.random_range(0..=cfg.max_vehicles);
    let mut vehicles = Vec::with_capacity(n_vehicles);
    for _ in 0..n_vehicles {
        // Half of the vehicles turn up around a train's arrival, when the
        // crossing is about to close.
        let arrival = if rng.random_bool(0.5) {
            let t = &trains[rng.random_range(0..trains.len())];
            let head_near = t.entry_time_s + offset / t.speed_mps;
            (head_near + rng.random_range(-10.0..10.0)).max(0.0)
        } else {
            rng.random_range(0.0..duration)
        };
        vehicles.push(RoadVehicleSpec {
            arrival_time_s: arrival,
            crossing_transit_s: rng.random_range(0.5..=transit),
            obeys_signals: true,
        });
    }

    Scenario {
        layout,
        gate_transit_s: transit,
        channel: ChannelConfig {
            seed,
            ..cfg.channel
        },
        transmitter,
        controller: ControllerConfig {
            watchdog_timeout_s: cfg.watchdog_timeout_s,
            ..ControllerConfig::default()
        },
        trains,
        vehicles,
        duration_s: duration,
        time_step_s: cfg.time_step_s,
        randomized: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::World;

    #[test]
    fn generated_scenarios_are_valid_and_safe_by_construction() {
        let cfg = GeneratorConfig::default();
        for seed in 0..300 {
            let s = generate_scenario(seed, &cfg);
            s.validate().unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!((1..=4).contains(&s.layout.track_count));
            assert!((1..=6).contains(&s.trains.len()));
            let v_max = s.trains.iter().map(|t| t.speed_mps).fold(0.0, f64::max);
            assert!(
                s.layout.sensor_offset_m
                    >= required_offset(v_max, s.gate_transit_s, s.layout.crossing_half_width_m)
            );
            for t in &s.trains {
                assert!((10.0..=40.0).contains(&t.speed_mps));
                assert!((50.0..=400.0).contains(&t.length_m));
            }
            for v in &s.vehicles {
                assert!(v.obeys_signals);
                assert!(v.crossing_transit_s <= s.gate_transit_s);
            }
            assert_eq!(s.seed(), seed);
        }
    }

    #[test]
    fn same_track_trains_do_not_share_the_section() {
        let cfg = GeneratorConfig::default();
        for seed in 0..300 {
            let s = generate_scenario(seed, &cfg);
            let w = World::new(s.layout, &s.trains);
            for (i, a) in w.paths.iter().enumerate() {
                for b in &w.paths[i + 1..] {
                    if a.spec.track == b.spec.track {
                        assert!(
                            a.tail_far <= b.head_near || b.tail_far <= a.head_near,
                            "seed {seed}"
                        );
                    }
                }
            }
            let end = w.occupancy_intervals().last().unwrap().1;
            assert!(s.duration_s >= end + cfg.tail_s - 1e-9);
        }
    }

    #[test]
    fn overlap_is_common() {
        let cfg = GeneratorConfig::default();
        let overlapping = (0..200)
            .filter(|seed| {
                let s = generate_scenario(*seed, &cfg);
                let w = World::new(s.layout, &s.trains);
                w.occupancy_intervals().len() < s.trains.len()
            })
            .count();
        assert!(overlapping > 100, "{overlapping}");
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig::default();
        assert_eq!(generate_scenario(42, &cfg), generate_scenario(42, &cfg));
        assert_ne!(generate_scenario(42, &cfg), generate_scenario(43, &cfg));
    }
}
