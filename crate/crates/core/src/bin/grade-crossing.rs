use std::io;
use std::process::ExitCode;

use clap::Parser;
use grade_crossing::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = execute(&cli, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(status as u8)
}
