use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qsh_core::io::{load_config_with, run, RunConfig, RunMode, RunOutcome};
use qsh_core::QshError;

/// Exit status for configuration and I/O errors.
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "qsh", version, about = "Batch runs of the inertial Qian-Sheng Q-tensor solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file.
    config: PathBuf,
    /// Directory for CSV, snapshot and summary output (overrides `run.output_dir`).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads for the stepper.
    #[arg(long, env = "QSH_THREADS")]
    threads: Option<usize>,
    /// `section.key=value` applied on top of the file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mode selected in the configuration.
    Run(Common),
    /// Check the coefficients against the configured regime.
    Validate(Common),
    /// Evolve a radial twist wave and compare it with the full solver.
    CompareTwistwave(Common),
}

fn load(common: &Common, mode: Option<RunMode>) -> Result<RunConfig, QshError> {
    let mut config = load_config_with(&common.config, &common.overrides)?;
    if let Some(dir) = &common.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(mode) = mode {
        config.mode = mode;
    }
    Ok(config)
}

fn report(outcome: &RunOutcome) {
    let s = &outcome.summary;
    if s.mode == RunMode::Validate {
        match serde_json::to_string_pretty(&s.validation) {
            Ok(text) => println!("{text}"),
            Err(e) => eprintln!("qsh: cannot print validation report: {e}"),
        }
    } else {
        println!("mode {:?}: {:?} at t = {} after {} steps", s.mode, s.status, s.t_final, s.steps);
        if let Some(m) = s.monotone {
            println!("energy monotone: {m}");
        }
        if let Some(c) = &s.compare {
            println!(
                "twist-wave discrepancy {:.3e}, constraint residual {:.3e}",
                c.final_discrepancy, c.max_constraint_residual
            );
        }
        if let Some(f) = &s.failure {
            eprintln!("qsh: {f}");
        }
    }
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    println!("summary: {}", outcome.output_dir.join("summary.json").display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, mode) = match &cli.command {
        Command::Run(c) => (c, None),
        Command::Validate(c) => (c, Some(RunMode::Validate)),
        Command::CompareTwistwave(c) => (c, Some(RunMode::TwistwaveCompare)),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("qsh: cannot set up {n} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let outcome = load(common, mode).and_then(|config| run(&config));
    match outcome {
        Ok(outcome) => {
            report(&outcome);
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(QshError::NonFinite { t }) => {
            eprintln!("qsh: numerical failure at t = {t}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("qsh: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
