//! Many independent runs over a range of seeds, checked and summarised.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::controller::{Alarm, AnomalyKind, ControllerKind};
use crate::scenario::Scenario;
use crate::sim::{RunSummary, SimError, Simulation};
use crate::verify::{verify_entries, Violation};

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Ok,
    /// Latched alarm with the crossing kept safe.
    Alarm(Alarm),
    /// The trace broke an invariant without a collision.
    Violation(Violation),
    Collision(usize),
}

impl Verdict {
    pub fn is_unsafe(&self) -> bool {
        matches!(self, Verdict::Violation(_) | Verdict::Collision(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Ok => f.write_str("ok"),
            Verdict::Alarm(a) => write!(f, "alarm({a})"),
            Verdict::Violation(v) => write!(f, "violation(t={:.3}: {})", v.time, v.message),
            Verdict::Collision(n) => write!(f, "collision({n})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub verdict: Verdict,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Default)]
pub struct BatchReport {
    /// Ordered by seed.
    pub results: Vec<SeedResult>,
}

impl BatchReport {
    pub fn collisions(&self) -> usize {
        self.results
            .iter()
            .map(|r| r.summary.collisions.len())
            .sum()
    }

    pub fn violating_seeds(&self) -> Vec<u64> {
        self.results
            .iter()
            .filter(|r| matches!(r.verdict, Verdict::Violation(_)))
            .map(|r| r.seed)
            .collect()
    }

    pub fn unsafe_seeds(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.verdict.is_unsafe())
            .count()
    }

    pub fn max_reopen_latency(&self) -> Option<f64> {
        self.results
            .iter()
            .filter_map(|r| r.summary.max_reopen_latency())
            .reduce(f64::max)
    }

    pub fn anomaly_histogram(&self) -> BTreeMap<AnomalyKind, usize> {
        let mut h = BTreeMap::new();
        for r in &self.results {
            for (k, n) in r.summary.anomaly_histogram() {
                *h.entry(k).or_default() += n;
            }
        }
        h
    }

    /// One `seed=` line per run, then the aggregate.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            writeln!(
                out,
                "seed={}\tverdict={}\ttrains_served={}\tcollisions={}\tmax_reopen_latency_s={}",
                r.seed,
                r.verdict,
                r.summary.trains_served,
                r.summary.collisions.len(),
                fmt_latency(r.summary.max_reopen_latency()),
            )
            .expect("writing to a String");
        }
        let hist = self.anomaly_histogram();
        let hist = if hist.is_empty() {
            "none".to_string()
        } else {
            hist.iter()
                .map(|(k, n)| format!("{k}:{n}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let violating = self.violating_seeds();
        let violating = if violating.is_empty() {
            "none".to_string()
        } else {
            violating
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(
            out,
            "total\tseeds={}\tcollisions={}\tviolating_seeds={}\tmax_reopen_latency_s={}\tanomalies={}",
            self.results.len(),
            self.collisions(),
            violating,
            fmt_latency(self.max_reopen_latency()),
            hist,
        )
        .expect("writing to a String");
        out
    }
}

fn fmt_latency(l: Option<f64>) -> String {
    l.map_or_else(|| "none".to_string(), |l| format!("{l:.3}"))
}

/// Runs one scenario and judges its trace.
pub fn run_one(scenario: &Scenario, kind: ControllerKind) -> Result<SeedResult, SimError> {
    let result = Simulation::new(scenario, kind)?.run();
    let summary = result.summary;
    let verdict = if !summary.collisions.is_empty() {
        Verdict::Collision(summary.collisions.len())
    } else if let Err(v) = verify_entries(&result.trace.entries) {
        Verdict::Violation(v)
    } else if let Some(a) = summary.alarm {
        Verdict::Alarm(a)
    } else {
        Verdict::Ok
    };
    Ok(SeedResult {
        seed: scenario.seed(),
        verdict,
        summary,
    })
}

/// Runs `make(seed)` for seeds `0..n_seeds` in parallel.
pub fn run_seeds<F>(n_seeds: u64, kind: ControllerKind, make: F) -> Result<BatchReport, SimError>
where
    F: Fn(u64) -> Scenario + Sync,
{
    let results = (0..n_seeds)
        .into_par_iter()
        .map(|seed| run_one(&make(seed), kind))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BatchReport { results })
}

/// Runs a template with its ranged fields drawn afresh for every seed.
pub fn run_batch(
    template: &Scenario,
    n_seeds: u64,
    kind: ControllerKind,
) -> Result<BatchReport, SimError> {
    template.validate()?;
    run_seeds(n_seeds, kind, |seed| template.realize(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    const TEMPLATE: &str = "\
[layout]
tracks = 1
sensor_offset_m = 400
crossing_half_width_m = 5
[gate]
transit_time_s = 5
[train]
id = 1
track = 0
direction = AtoB
speed_mps = 10..40
length_m = 100..300
entry_time_s = 0..20
[run]
duration_s = 150
";

    #[test]
    fn batch_is_ordered_and_clean() {
        let t = parse_scenario(TEMPLATE).unwrap();
        let r = run_batch(&t, 8, ControllerKind::Correct).unwrap();
        let seeds: Vec<u64> = r.results.iter().map(|r| r.seed).collect();
        assert_eq!(seeds, (0..8).collect::<Vec<_>>());
        assert_eq!(r.collisions(), 0);
        assert!(r.results.iter().all(|r| r.verdict == Verdict::Ok));
        assert_eq!(r.max_reopen_latency(), Some(0.0));
    }

    #[test]
    fn render_has_one_line_per_seed_and_a_total() {
        let t = parse_scenario(TEMPLATE).unwrap();
        let text = run_batch(&t, 3, ControllerKind::Correct).unwrap().render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[..3].iter().all(|l| l.starts_with("seed=")));
        assert!(lines[3].starts_with("total\tseeds=3\tcollisions=0"));
    }

    #[test]
    fn faulty_controller_is_flagged() {
        let t = parse_scenario(TEMPLATE).unwrap();
        let r = run_batch(&t, 4, ControllerKind::AlwaysOpen).unwrap();
        assert_eq!(r.unsafe_seeds(), 4);
    }
}
