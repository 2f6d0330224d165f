//! Geometry of the crossing and the omniscient view of where every train is.
//!
//! Each train moves at constant speed along its own track coordinate, with
//! the crossing centre at 0 and positions growing in the direction of travel.
//! Because motion is linear, every instant of interest (a transmitter passing
//! a sensor, the train entering or clearing the danger zone) has a closed
//! form, and both the sensor firings and the oracle are derived from those
//! same instants.

use crate::controller::{SensorId, Side};
use crate::protocol::{Phase, TrainId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackLayout {
    pub track_count: u32,
    /// Distance from the crossing centre to each sensor.
    pub sensor_offset_m: f64,
    /// Half extent of the road danger zone, which spans every track.
    pub crossing_half_width_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AtoB,
    BtoA,
}

impl Direction {
    pub fn near_side(self) -> Side {
        match self {
            Direction::AtoB => Side::A,
            Direction::BtoA => Side::B,
        }
    }

    pub fn far_side(self) -> Side {
        self.near_side().opposite()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::AtoB => "AtoB",
            Direction::BtoA => "BtoA",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSpec {
    pub id: TrainId,
    pub track: u32,
    pub direction: Direction,
    pub speed_mps: f64,
    pub length_m: f64,
    pub entry_time_s: f64,
    /// Head coordinate at `entry_time_s`; negative is before the crossing.
    pub head_position_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadVehicleSpec {
    pub arrival_time_s: f64,
    pub crossing_transit_s: f64,
    pub obeys_signals: bool,
}

/// A transmitter passing a sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPass {
    pub time: f64,
    pub train: TrainId,
    pub phase: Phase,
    pub sensor: SensorId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainPath {
    pub spec: TrainSpec,
    /// Head reaches the near sensor.
    pub head_near: f64,
    /// Tail reaches the near sensor.
    pub tail_near: f64,
    /// Head reaches the far sensor.
    pub head_far: f64,
    /// Tail clears the far sensor.
    pub tail_far: f64,
    /// Head reaches the near edge of the danger zone.
    pub danger_in: f64,
    /// Tail clears the far edge of the danger zone.
    pub danger_out: f64,
}

impl TrainPath {
    pub fn new(spec: TrainSpec, layout: &TrackLayout) -> Self {
        // Instant at which the head is at coordinate x.
        let at = |x: f64| spec.entry_time_s + (x - spec.head_position_m) / spec.speed_mps;
        let off = layout.sensor_offset_m;
        let hw = layout.crossing_half_width_m;
        let len = spec.length_m;
        TrainPath {
            spec,
            head_near: at(-off),
            tail_near: at(-off + len),
            head_far: at(off),
            tail_far: at(off + len),
            danger_in: at(-hw),
            danger_out: at(hw + len),
        }
    }

    /// Head coordinate, or `None` before the train has entered the world.
    pub fn head_at(&self, t: f64) -> Option<f64> {
        (t >= self.spec.entry_time_s).then_some(
            self.spec.head_position_m + self.spec.speed_mps * (t - self.spec.entry_time_s),
        )
    }

    /// Between its near sensor and clear of its far sensor: `[head_near, tail_far)`.
    pub fn occupies(&self, t: f64) -> bool {
        self.head_near <= t && t < self.tail_far
    }

    /// Some part of the train inside `[-hw, hw]`.
    pub fn in_danger(&self, t: f64) -> bool {
        self.danger_in <= t && t <= self.danger_out
    }

    /// Whether the danger window intersects the closed interval `[from, to]`.
    pub fn in_danger_during(&self, from: f64, to: f64) -> bool {
        self.danger_in <= to && from <= self.danger_out
    }

    /// The four sensor passes in time order.
    pub fn passes(&self) -> [SensorPass; 4] {
        let near = SensorId::new(self.spec.direction.near_side(), self.spec.track);
        let far = SensorId::new(self.spec.direction.far_side(), self.spec.track);
        let mk = |time, phase, sensor| SensorPass {
            time,
            train: self.spec.id,
            phase,
            sensor,
        };
        let mut passes = [
            mk(self.head_near, Phase::Head, near),
            mk(self.tail_near, Phase::Tail, near),
            mk(self.head_far, Phase::Head, far),
            mk(self.tail_far, Phase::Tail, far),
        ];
        passes.sort_by(|a, b| a.time.total_cmp(&b.time));
        passes
    }
}

/// Ground truth about the trains, independent of anything the controller saw.
#[derive(Debug, Clone)]
pub struct World {
    pub layout: TrackLayout,
    pub paths: Vec<TrainPath>,
}

impl World {
    pub fn new(layout: TrackLayout, trains: &[TrainSpec]) -> Self {
        World {
            layout,
            paths: trains.iter().map(|t| TrainPath::new(*t, &layout)).collect(),
        }
    }

    pub fn occupancy_oracle(&self, t: f64) -> bool {
        self.paths.iter().any(|p| p.occupies(t))
    }

    pub fn trains_in_danger(&self, t: f64) -> impl Iterator<Item = &TrainPath> {
        self.paths.iter().filter(move |p| p.in_danger(t))
    }

    /// Maximal intervals during which the oracle is true, as `[start, end)`.
    pub fn occupancy_intervals(&self) -> Vec<(f64, f64)> {
        let mut spans: Vec<(f64, f64)> = self
            .paths
            .iter()
            .map(|p| (p.head_near, p.tail_far))
            .collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (s, e) in spans {
            match merged.last_mut() {
                // [a, b) followed by [b, c) leaves no unoccupied instant.
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        merged
    }

    /// All sensor passes of all trains, ordered by time then by train order.
    pub fn sensor_passes(&self) -> Vec<SensorPass> {
        let mut all: Vec<SensorPass> = self.paths.iter().flat_map(|p| p.passes()).collect();
        all.sort_by(|a, b| a.time.total_cmp(&b.time));
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> TrackLayout {
        TrackLayout {
            track_count: 2,
            sensor_offset_m: 400.0,
            crossing_half_width_m: 10.0,
        }
    }

    fn train(id: u16, speed: f64, length: f64, entry: f64) -> TrainSpec {
        TrainSpec {
            id: TrainId(id),
            track: 0,
            direction: Direction::AtoB,
            speed_mps: speed,
            length_m: length,
            entry_time_s: entry,
            head_position_m: -800.0,
        }
    }

    #[test]
    fn closed_form_instants() {
        let p = TrainPath::new(train(1, 20.0, 100.0, 5.0), &layout());
        // head travels 400 m to the near sensor at 20 m/s
        assert_eq!(p.head_near, 25.0);
        assert_eq!(p.tail_near, 30.0);
        assert_eq!(p.head_far, 65.0);
        assert_eq!(p.tail_far, 70.0);
        assert_eq!(p.danger_in, 44.5);
        assert_eq!(p.danger_out, 50.5);
    }

    #[test]
    fn oracle_agrees_with_positions() {
        let l = layout();
        let p = TrainPath::new(train(1, 17.0, 230.0, 3.0), &l);
        let mut t = 0.0;
        while t < 120.0 {
            // Direct geometric definition, sampled away from the boundaries.
            let by_position = p.head_at(t).is_some_and(|h| {
                h >= -l.sensor_offset_m && h - p.spec.length_m < l.sensor_offset_m
            });
            let near_edge = [p.head_near, p.tail_far]
                .iter()
                .any(|e| (t - e).abs() < 1e-6);
            if !near_edge {
                assert_eq!(p.occupies(t), by_position, "t = {t}");
            }
            let in_danger_by_pos = p.head_at(t).is_some_and(|h| {
                h >= -l.crossing_half_width_m && h - p.spec.length_m <= l.crossing_half_width_m
            });
            let near_danger_edge = [p.danger_in, p.danger_out]
                .iter()
                .any(|e| (t - e).abs() < 1e-6);
            if !near_danger_edge {
                assert_eq!(p.in_danger(t), in_danger_by_pos, "t = {t}");
            }
            t += 0.05;
        }
    }

    #[test]
    fn head_at_crossing_centre_is_occupied() {
        let l = layout();
        let p = TrainPath::new(train(1, 10.0, 50.0, 0.0), &l);
        let t = 80.0; // head at 0
        assert_eq!(p.head_at(t), Some(0.0));
        assert!(p.occupies(t));
        assert!(p.in_danger(t));
    }

    #[test]
    fn empty_world_is_never_occupied() {
        let w = World::new(layout(), &[]);
        assert!(!w.occupancy_oracle(0.0));
        assert!(!w.occupancy_oracle(1e6));
        assert!(w.occupancy_intervals().is_empty());
    }

    #[test]
    fn passes_in_geometric_order() {
        let l = layout();
        let short = TrainPath::new(train(1, 20.0, 100.0, 0.0), &l);
        let phases: Vec<(Phase, Side)> = short
            .passes()
            .iter()
            .map(|p| (p.phase, p.sensor.side))
            .collect();
        assert_eq!(
            phases,
            vec![
                (Phase::Head, Side::A),
                (Phase::Tail, Side::A),
                (Phase::Head, Side::B),
                (Phase::Tail, Side::B)
            ]
        );
        // Longer than the sensor spacing: head reaches the far sensor first.
        let long = TrainPath::new(
            TrainSpec {
                direction: Direction::BtoA,
                ..train(2, 20.0, 900.0, 0.0)
            },
            &l,
        );
        let phases: Vec<(Phase, Side)> = long
            .passes()
            .iter()
            .map(|p| (p.phase, p.sensor.side))
            .collect();
        assert_eq!(
            phases,
            vec![
                (Phase::Head, Side::B),
                (Phase::Head, Side::A),
                (Phase::Tail, Side::B),
                (Phase::Tail, Side::A)
            ]
        );
    }

    #[test]
    fn overlapping_trains_merge_into_one_interval() {
        let l = layout();
        let w = World::new(
            l,
            &[
                train(1, 20.0, 100.0, 0.0),
                train(2, 20.0, 100.0, 30.0),
                train(3, 20.0, 100.0, 200.0),
            ],
        );
        assert_eq!(w.occupancy_intervals(), vec![(20.0, 95.0), (220.0, 265.0)]);
    }
}
