//! Command-line front end: load a TOML system definition, dispatch one of
//! the check/solve/evolve verbs, and write a JSON report (plus CSV curves
//! where applicable) with stable bytes and exit codes:
//! 0 = all checks pass, 1 = a check failed, 2 = inconclusive, 3 = config
//! or parse error.

mod config;
mod report;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};

use config::RunConfig;
use report::{config_digest, Report};
use run::RunOptions;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Verb {
    CheckHj,
    CheckLagHj,
    Reconstruct,
    Complete,
    Canonical,
    Higher,
    FieldCheck,
    FieldEvolve,
    Legendre,
}

impl Verb {
    fn name(self) -> &'static str {
        match self {
            Verb::CheckHj => "check-hj",
            Verb::CheckLagHj => "check-lag-hj",
            Verb::Reconstruct => "reconstruct",
            Verb::Complete => "complete",
            Verb::Canonical => "canonical",
            Verb::Higher => "higher",
            Verb::FieldCheck => "field-check",
            Verb::FieldEvolve => "field-evolve",
            Verb::Legendre => "legendre",
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hjtk",
    about = "Residual checks and flows for Hamilton-Jacobi structures of mechanical systems"
)]
struct Cli {
    /// What to run against the configuration.
    #[arg(value_enum)]
    verb: Verb,
    /// TOML system definition.
    config: PathBuf,
    /// Directory for report.json and CSV output.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the tolerance from the [check] block.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Override the PRNG seed from the [check] block.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of extra random samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Suppress console output (files are still written).
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();

    let bytes = match fs::read(&cli.config) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(3);
        }
    };
    let text = match std::str::from_utf8(&bytes) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {} is not UTF-8: {e}", cli.config.display());
            return ExitCode::from(3);
        }
    };
    let cfg: RunConfig = match toml::from_str(text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", cli.config.display());
            return ExitCode::from(3);
        }
    };
    if let Err(e) = fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create {}: {e}", cli.out.display());
        return ExitCode::from(3);
    }

    let opts = RunOptions {
        tolerance: cli.tolerance,
        seed: cli.seed,
        samples: cli.samples,
    };
    let seed = cli.seed.unwrap_or(cfg.check.seed);
    let mut rep = Report::new(cli.verb.name(), config_digest(&bytes), seed);

    let outcome = match cli.verb {
        Verb::CheckHj => run::run_check_hj(&cfg, &opts, &mut rep),
        Verb::CheckLagHj => run::run_check_lag_hj(&cfg, &opts, &mut rep),
        Verb::Reconstruct => run::run_reconstruct(&cfg, &opts, &cli.out, &mut rep),
        Verb::Complete => run::run_complete(&cfg, &opts, &mut rep),
        Verb::Canonical => run::run_canonical(&cfg, &opts, &mut rep),
        Verb::Higher => run::run_higher(&cfg, &opts, &mut rep),
        Verb::FieldCheck => run::run_field_check(&cfg, &opts, &mut rep),
        Verb::FieldEvolve => run::run_field_evolve(&cfg, &opts, &cli.out, &mut rep),
        Verb::Legendre => run::run_legendre(&cfg, &opts, &mut rep),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }

    let json = rep.to_json();
    if let Err(e) = fs::write(cli.out.join("report.json"), &json) {
        eprintln!("error: cannot write report.json: {e}");
        return ExitCode::from(3);
    }

    if !cli.quiet {
        for c in &rep.checks {
            println!(
                "{:<34} {:>12}  (max defect {:.3e}, tolerance {:.3e}, samples {}, skipped {})",
                c.name,
                format!("{:?}", c.status).to_lowercase(),
                c.max_defect,
                c.tolerance,
                c.n_samples,
                c.n_skipped
            );
        }
        for n in &rep.notes {
            println!("note: {n}");
        }
        println!("overall: {:?}", rep.overall());
        eprintln!("elapsed: {:.3}s", started.elapsed().as_secs_f64());
    }
    ExitCode::from(u8::try_from(rep.exit_code()).unwrap_or(3))
}
