//! Command-line front end: `run`, `sweep` and `verify`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{parse_scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::io::{verify_run_dir, write_sweep_report, RunWriter};
use crate::stepper::{sweep_epsilon_with, worker_threads, Simulation, Verification};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "chdamage", version, about = "Phase separation with complete damage in 2D")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write ledger, snapshots, masks and events.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario once per epsilon and report the monitored quantities.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated, strictly decreasing.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check the outputs of a finished run.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parse `args` (including the program name) and execute; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out),
        Command::Sweep { config, epsilons, out } => cmd_sweep(&config, &epsilons, &out),
        Command::Verify { out } => cmd_verify(&out),
    }
}

fn load(path: &Path) -> std::result::Result<ScenarioConfig, i32> {
    parse_scenario(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })
}

/// Run `config` into `dir`, writing masks every step and fields at the
/// output cadence. On failure the partial ledger and events are flushed.
pub fn run_to_dir(config: &ScenarioConfig, dir: &Path) -> Result<(Simulation, Verification)> {
    let writer = RunWriter::create(dir, config)?;
    let mut sim = Simulation::new(config)?;
    writer.write_snapshot(sim.grid(), &sim.snapshot())?;
    writer.write_mask(0, 0.0, &sim.state().region)?;
    while !sim.is_finished() {
        if let Err(e) = sim.step() {
            sim.verify();
            writer.write_summary(&sim)?;
            return Err(e);
        }
        let s = sim.state();
        writer.write_mask(s.step, s.t, &s.region)?;
        if sim.is_output_step(s.step) {
            writer.write_snapshot(sim.grid(), &sim.snapshot())?;
        }
    }
    let verification = sim.verify();
    writer.write_summary(&sim)?;
    Ok((sim, verification))
}

fn report_failure(e: &Error) -> i32 {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::Inadmissible(_) | Error::InvalidGrid(_) | Error::InvalidMaterial(_) => EXIT_USAGE,
        _ => EXIT_SOLVER,
    }
}

fn cmd_run(config: &Path, out: &Path) -> i32 {
    let config = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match run_to_dir(&config, out) {
        Ok((sim, v)) => {
            let last = sim.ledger().rows.last();
            eprintln!(
                "{} steps, E = {:.6e}, {} exclusion event(s), verification {}",
                sim.state().step,
                last.map_or(sim.ledger().e0, |r| r.energy),
                sim.events().len(),
                if v.ok() { "passed" } else { "FAILED" }
            );
            if v.ok() {
                EXIT_OK
            } else {
                eprintln!("verification: {v:?}");
                EXIT_VERIFY
            }
        }
        Err(e) => report_failure(&e),
    }
}

fn eps_dir(out: &Path, eps: f64) -> PathBuf {
    out.join(format!("eps_{eps:e}"))
}

fn cmd_sweep(config: &Path, epsilons: &[f64], out: &Path) -> i32 {
    let config = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report = sweep_epsilon_with(&config, epsilons, worker_threads(), |cfg| {
        let (sim, _) = run_to_dir(cfg, &eps_dir(out, cfg.regularization.epsilon))?;
        let monitors = sim.ledger().rows.last().map_or([0.0; 7], |r| r.apriori);
        Ok((monitors, sim.ledger().verdict))
    });
    let report = match report {
        Ok(r) => r,
        Err(e) => return report_failure(&e),
    };
    if let Err(e) = std::fs::create_dir_all(out).map_err(Error::from).and_then(|_| write_sweep_report(&out.join("sweep_report.json"), &report)) {
        return report_failure(&e);
    }
    for r in &report.runs {
        match (&r.monitors, &r.error) {
            (Some(m), _) => eprintln!("eps = {:e}: {:?} verdict {:?}", r.epsilon, m, r.verdict),
            (None, Some(e)) => eprintln!("eps = {:e}: failed: {e}", r.epsilon),
            _ => {}
        }
    }
    eprintln!("spread (max/min): {:?}", report.spread);
    if !report.all_succeeded() {
        EXIT_SOLVER
    } else if report.runs.iter().any(|r| r.verdict != Some(true)) {
        EXIT_VERIFY
    } else {
        EXIT_OK
    }
}

fn cmd_verify(out: &Path) -> i32 {
    match verify_run_dir(out) {
        Ok(v) if v.ok() => {
            eprintln!("all checks passed");
            EXIT_OK
        }
        Ok(v) => {
            for m in &v.messages {
                eprintln!("verification: {m}");
            }
            EXIT_VERIFY
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => EXIT_USAGE,
                _ => EXIT_VERIFY,
            }
        }
    }
}
