//! Command-line front end. Each command returns its exit status so it can be
//! driven from tests without spawning a process.
//!
//! | status | `run`          | `batch`           | `verify`        |
//! |--------|----------------|-------------------|-----------------|
//! | 0      | clean run      | no collisions     | trace consistent|
//! | 1      | parse/IO error | parse/IO error    | malformed/IO    |
//! | 2      | collision      | some collision    | violation       |
//! | 3      | alarm only     |                   |                 |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::batch::run_batch;
use crate::controller::ControllerKind;
use crate::scenario::{parse_scenario, Scenario};
use crate::sim::Simulation;
use crate::verify::{verify_text, VerifyError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNSAFE: i32 = 2;
pub const EXIT_ALARM: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "grade-crossing",
    version,
    about = "Level crossing controller simulator"
)]
pub struct Cli {
    /// Replace the controller with a deliberately broken one
    /// (always-open, no-feedback, no-memory).
    #[arg(long, global = true, value_name = "STUB")]
    pub faulty_controller: Option<ControllerKind>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and print a summary.
    Run {
        scenario: PathBuf,
        /// Write the event trace here.
        #[arg(short = 'o', value_name = "TRACE")]
        output: Option<PathBuf>,
    },
    /// Simulate a scenario template over seeds 0..N.
    Batch {
        scenario: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
        /// Write the report here instead of standard output.
        #[arg(short = 'o', value_name = "REPORT")]
        output: Option<PathBuf>,
    },
    /// Check a trace against the controller and safety invariants.
    Verify { trace: PathBuf },
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let kind = cli.faulty_controller.unwrap_or_default();
    match &cli.command {
        Command::Run { scenario, output } => cmd_run(scenario, output.as_deref(), kind, out, err),
        Command::Batch {
            scenario,
            seeds,
            output,
        } => cmd_batch(scenario, *seeds, output.as_deref(), kind, out, err),
        Command::Verify { trace } => cmd_verify(trace, out, err),
    }
}

fn load_scenario(path: &Path, err: &mut dyn Write) -> Option<Scenario> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return None;
        }
    };
    match parse_scenario(&text) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            None
        }
    }
}

pub fn cmd_run(
    path: &Path,
    trace_path: Option<&Path>,
    kind: ControllerKind,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(scenario) = load_scenario(path, err) else {
        return EXIT_INPUT;
    };
    let result = match Simulation::new(&scenario, kind) {
        Ok(sim) => sim.run(),
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    if let Some(tp) = trace_path {
        if let Err(e) = fs::write(tp, result.trace.to_text()) {
            let _ = writeln!(err, "error: {}: {e}", tp.display());
            return EXIT_INPUT;
        }
    }
    let s = &result.summary;
    let _ = writeln!(
        out,
        "trains_served={} gate_closed_s={:.3} anomalies={} collisions={} alarm={}",
        s.trains_served,
        s.gate_closed_s,
        s.anomalies.len(),
        s.collisions.len(),
        s.alarm
            .map_or_else(|| "none".to_string(), |a| a.to_string()),
    );
    for c in &s.collisions {
        let _ = writeln!(
            out,
            "collision t={:.3} vehicle={} train={}",
            c.time, c.vehicle, c.train
        );
    }
    if !s.collisions.is_empty() {
        EXIT_UNSAFE
    } else if s.alarm.is_some() {
        EXIT_ALARM
    } else {
        EXIT_OK
    }
}

pub fn cmd_batch(
    path: &Path,
    n_seeds: u64,
    report_path: Option<&Path>,
    kind: ControllerKind,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(template) = load_scenario(path, err) else {
        return EXIT_INPUT;
    };
    let report = match run_batch(&template, n_seeds, kind) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    let text = report.render();
    match report_path {
        Some(rp) => {
            if let Err(e) = fs::write(rp, &text) {
                let _ = writeln!(err, "error: {}: {e}", rp.display());
                return EXIT_INPUT;
            }
            // Echo the aggregate line.
            if let Some(total) = text.lines().last() {
                let _ = writeln!(out, "{total}");
            }
        }
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    if report.collisions() == 0 {
        EXIT_OK
    } else {
        EXIT_UNSAFE
    }
}

pub fn cmd_verify(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    match verify_text(&text) {
        Ok(r) => {
            let _ = writeln!(out, "ok: {} records, {} steps", r.records, r.steps);
            EXIT_OK
        }
        Err(e @ VerifyError::Malformed(_)) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            EXIT_INPUT
        }
        Err(VerifyError::Violation(v)) => {
            let _ = writeln!(out, "violation at {v}");
            EXIT_UNSAFE
        }
    }
}
