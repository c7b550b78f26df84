//! `fbmac` command line: run bound/analysis/simulation sweeps and check
//! sweep artifacts for consistency.
//!
//! Exit codes: 0 success; 1 I/O or internal failure; 2 configuration error;
//! 3 infeasible simulation points under `--strict`; 4 consistency violations
//! under `--strict`.

use clap::{Parser, Subcommand};
use fbmac_cli::{config::Mode, consistency_report_from_path, run_sweep, ConfigError, SweepConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fbmac", version, about = "Distortion bounds and a two-round feedback protocol simulator for sensing over a non-coherent Gaussian MAC")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write a CSV artifact.
    Sweep {
        /// Sweep configuration file (flat key=value text).
        #[arg(long)]
        config: PathBuf,
        /// Override the configured mode.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        /// Override the configured Monte Carlo trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fail on infeasible points (exit 3) and, in simulate mode, on
        /// bound-consistency violations (exit 4).
        #[arg(long)]
        strict: bool,
    },
    /// Check a sweep artifact: bound sandwich per simulated row plus the
    /// two-round vs one-shot dB gap at matched distortion.
    Check {
        /// CSV artifact produced by `fbmac sweep`.
        #[arg(long)]
        csv: PathBuf,
        /// Exit 4 when any row violates the bound sandwich.
        #[arg(long)]
        strict: bool,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    Mode::parse(s).ok_or_else(|| format!("expected bounds, analysis or simulate, got '{s}'"))
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

fn sweep_command(
    config: PathBuf,
    mode: Option<Mode>,
    trials: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    strict: bool,
) -> anyhow::Result<u8> {
    let mut cfg = match SweepConfig::from_file(&config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{}: {e}", config.display());
            return Ok(EXIT_CONFIG);
        }
    };
    if let Some(m) = mode {
        cfg.mode = m;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    cfg.strict = strict;
    if let Ok(cap) = std::env::var("FBMAC_DETECT_CAP") {
        cfg.detect_cap = cap
            .parse()
            .map_err(|_| anyhow::anyhow!("FBMAC_DETECT_CAP must be an integer, got '{cap}'"))?;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{}: {e}", config.display());
        return Ok(EXIT_CONFIG);
    }

    let outcome = run_sweep(&cfg)?;
    eprintln!(
        "wrote {} rows to {} ({} infeasible)",
        outcome.rows.len(),
        outcome.csv_path.display(),
        outcome.infeasible
    );
    if strict && outcome.infeasible > 0 {
        eprintln!("strict mode: {} infeasible point(s)", outcome.infeasible);
        return Ok(EXIT_INFEASIBLE);
    }
    if strict && cfg.mode == Mode::Simulate {
        let report = consistency_report_from_path(&cfg.out)?;
        eprint!("{}", report.render());
        if !report.violations.is_empty() {
            return Ok(EXIT_VIOLATION);
        }
    }
    Ok(0)
}

fn check_command(csv: PathBuf, strict: bool) -> anyhow::Result<u8> {
    let report = consistency_report_from_path(&csv)?;
    print!("{}", report.render());
    if strict && !report.violations.is_empty() {
        return Ok(EXIT_VIOLATION);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep {
            config,
            mode,
            trials,
            seed,
            out,
            strict,
        } => sweep_command(config, mode, trials, seed, out, strict),
        Command::Check { csv, strict } => check_command(csv, strict),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if let Some(cfg_err) = e.downcast_ref::<ConfigError>() {
                eprintln!("config error: {cfg_err}");
                return ExitCode::from(EXIT_CONFIG);
            }
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
