//! `defectgeo <command> <scenario> [flags]`
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 the scenario (or an
//! output path) is unusable.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use defectgeo::commands::{exit_code, run_file, Command, Options};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Check,
    Defects,
    Kinematics,
    Elastic,
    Energy,
    Calibrate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Command {
        match c {
            Cmd::Check => Command::Check,
            Cmd::Defects => Command::Defects,
            Cmd::Kinematics => Command::Kinematics,
            Cmd::Elastic => Command::Elastic,
            Cmd::Energy => Command::Energy,
            Cmd::Calibrate => Command::Calibrate,
        }
    }
}

/// Geometric analysis of crystal defect scenarios.
#[derive(Parser, Debug)]
#[command(name = "defectgeo", version)]
struct Cli {
    command: Cmd,
    scenario: PathBuf,
    /// Grid nodes per axis (overrides numerics.grid_n).
    #[arg(long)]
    grid: Option<usize>,
    /// Write the sampled defect fields here (defects command).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Omit wall-clock timing so reports are byte-identical across runs.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Finite-difference step (overrides numerics.h).
    #[arg(long = "fd-step")]
    fd_step: Option<f64>,
}

fn init_threads() {
    let Ok(v) = std::env::var("DEFECTGEO_THREADS") else { return };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            // only fails if a pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("ignoring DEFECTGEO_THREADS={v}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let opts = Options {
        grid: cli.grid,
        tolerance: cli.tolerance,
        fd_step: cli.fd_step,
        deterministic: cli.deterministic,
        csv: cli.csv.clone(),
    };
    let report = match run_file(cli.command.into(), &cli.scenario, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let json = report.to_json();
    match &cli.json {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
            for c in &report.checks {
                let tag = match (c.pass, c.asserted) {
                    (true, _) => "pass",
                    (false, true) => "FAIL",
                    (false, false) => "info",
                };
                println!("{tag:4}  {:<40} {:.3e} <= {:.1e}", c.name, c.max_residual, c.tolerance);
            }
        }
        None => print!("{json}"),
    }
    if let Some(c) = report.first_failure() {
        eprintln!(
            "check failed: {} (max residual {:e} > tolerance {:e})",
            c.name, c.max_residual, c.tolerance
        );
    }
    ExitCode::from(exit_code(&report) as u8)
}
