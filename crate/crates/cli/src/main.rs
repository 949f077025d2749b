//! `spinqudit`: spectra, calibrations, pulse compilation and quantum
//! simulations on the simulated spin qudit.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, Parser, Subcommand};
use spinqudit::experiments::Backend;

use commands::{Model, Outcome, Protocol};
use config::RunConfig;
use error::CliError;
use output::RunInfo;

#[derive(Debug, Parser)]
#[command(
    name = "spinqudit",
    version,
    about = "Pulse-level simulator of an electro-nuclear spin qudit"
)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dynamics backend for simulations.
    #[arg(long, global = true, value_parser = parse_backend)]
    backend: Option<Backend>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the drive-amplitude ensemble.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trotter step count.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Print the full default configuration and exit.
    #[arg(long)]
    print_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Thermal NMR spectrum and peak table.
    Spectrum,
    /// Virtual calibration experiments with decay fits.
    Calibrate {
        #[arg(value_enum)]
        which: Protocol,
    },
    /// Pulse schedule for a target model, with a fidelity report.
    Compile {
        #[arg(value_enum)]
        model: Model,
    },
    /// Quantum simulation of a target model.
    Simulate {
        #[arg(value_enum)]
        model: Model,
    },
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    [
        Backend::Ideal,
        Backend::Lindblad,
        Backend::LindbladEnsemble,
        Backend::ExactTarget,
    ]
    .into_iter()
    .find(|b| b.name() == s)
    .ok_or_else(|| format!("unknown backend {s:?}; expected ideal, lindblad, lindblad-ensemble or exact-target"))
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(b) = cli.backend {
        cfg.backend = b;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.ensemble.seed = seed;
    }
    if let Some(n) = cli.n {
        let tim = cfg
            .tim
            .as_mut()
            .ok_or_else(|| CliError::Config("--n needs a [tim] block".into()))?;
        tim.trotter_steps = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, command: &Command) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let start = Instant::now();
    let (name, outcome): (String, Outcome) = match command {
        Command::Spectrum => ("spectrum".into(), commands::spectrum(&cfg)?),
        Command::Calibrate { which } => (
            format!("calibrate {which:?}").to_lowercase(),
            commands::calibrate(&cfg, *which)?,
        ),
        Command::Compile { model } => (
            format!("compile {model:?}").to_lowercase(),
            commands::compile(&cfg, *model)?,
        ),
        Command::Simulate { model } => (
            format!("simulate {model:?}").to_lowercase(),
            commands::simulate(&cfg, *model)?,
        ),
    };
    let toml = cfg.to_toml();
    let info = RunInfo {
        subcommand: name,
        config_toml: &toml,
        backend: cfg.backend.name().into(),
        seed: cfg.ensemble.seed,
        elapsed: start.elapsed(),
    };
    let manifest = output::write_run(&cfg.output_dir, &outcome.artifacts, info)?;
    for f in &manifest.files {
        println!("{}", cfg.output_dir.join(&f.name).display());
    }
    if outcome.fit_failures > 0 {
        return Err(CliError::PartialFit {
            failed: outcome.fit_failures,
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // value errors omit the usage block by default
            let _ = e.print();
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    if cli.print_default_config {
        print!("{}", RunConfig::default().to_toml());
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        eprintln!("error: a subcommand is required (spectrum, calibrate, compile, simulate)");
        return ExitCode::from(2);
    };
    match run(&cli, command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
