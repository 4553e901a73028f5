use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dipolar::commands::{execute, Command};
use dipolar::config::{RunConfig, OUT_DIR_ENV};
use dipolar::Error;

/// Dipole-coupled emitter ensembles: linear and double-quantum 2D spectra,
/// pump sweeps, fits and validation oracles.
#[derive(Debug, Parser)]
#[command(name = "dipolar", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory. Overrides the config and the DIPOLAR_OUT variable.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Reject unknown config keys instead of warning.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Sample one emitter configuration.
    Ensemble,
    /// Realization-averaged linear spectrum, optionally overlaid on a measurement.
    Linear,
    /// Double-quantum 2D spectrum and peak-box integrals.
    Dq2d,
    /// Box intensities and slices across pump fields.
    PumpSweep,
    /// Fit the pump model to a slice manifest or a synthetic sweep.
    Fit {
        /// Sweep manifest (overrides fit.manifest).
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        /// Starting parameters (overrides fit.initial).
        #[arg(long, value_name = "PATH")]
        initial: Option<PathBuf>,
    },
    /// Time-domain oracles and their comparison with the closed forms.
    Oracle,
    /// Run the built-in invariant suites.
    Selfcheck,
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let (mut config, warnings) = match &cli.config {
        Some(path) => match RunConfig::load(path, cli.strict) {
            Ok(c) => c,
            Err(e) => return fail(&e),
        },
        None => (RunConfig::default(), Vec::new()),
    };
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if let Some(seed) = cli.seed {
        config.ensemble.seed = seed;
        config.fit.seed = seed;
    }
    let command = match cli.command {
        Cmd::Ensemble => Command::Ensemble,
        Cmd::Linear => Command::Linear,
        Cmd::Dq2d => Command::Dq2d,
        Cmd::PumpSweep => Command::PumpSweep,
        Cmd::Fit { manifest, initial } => {
            if manifest.is_some() {
                config.fit.manifest = manifest;
            }
            if initial.is_some() {
                config.fit.initial = initial;
            }
            Command::Fit
        }
        Cmd::Oracle => Command::Oracle,
        Cmd::Selfcheck => Command::Selfcheck,
    };
    if let Err(e) = config.validate() {
        return fail(&e);
    }
    let out = cli
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| config.output.dir.clone());
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(&Error::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&Error::Config(format!("cannot start {n} threads: {e}")));
        }
    }

    let summary = match execute(command, &config, &out) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    for note in &summary.notes {
        eprintln!("{note}");
    }
    for f in &summary.files {
        println!("{}", f.display());
    }
    if summary.failed_checks > 0 {
        eprintln!("{} check(s) failed", summary.failed_checks);
        return ExitCode::from(3);
    }
    if !summary.converged {
        return ExitCode::from(4);
    }
    ExitCode::SUCCESS
}
