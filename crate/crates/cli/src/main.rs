use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use vkp_core::adversary::{Attack, Scheme};
use vkp_core::conformance;
use vkp_core::sim::{self, MetricsRow};

#[derive(Parser)]
#[command(name = "simctl", version, about = "Variable k-pseudonym simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write one metrics row per parameter combination.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hex message log of the first trial.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo attack estimate over a grid of k and marked fractions.
    AttackSweep {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        attack: String,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        marked: Vec<f64>,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        pool: usize,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check ZUC, Milenage and HMAC against published vectors.
    Vectors,
}

fn all_ok(rows: &[MetricsRow]) -> bool {
    rows.iter().all(MetricsRow::is_ok)
}

fn report(rows: &[MetricsRow]) {
    for r in rows.iter().filter(|r| !r.is_ok()) {
        eprintln!("k={} marked={}: {}", r.k, r.marked_fraction, r.status);
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            transcript,
            seed,
        } => {
            let mut s = sim::load_scenario(&scenario)
                .with_context(|| format!("loading {}", scenario.display()))?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let run = sim::run_scenario(&s)?;
            sim::emit_metrics(&run.rows, &out).with_context(|| format!("writing {}", out.display()))?;
            if let Some(path) = transcript {
                sim::emit_transcript(&run, &path)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            report(&run.rows);
            Ok(all_ok(&run.rows))
        }
        Command::AttackSweep {
            scheme,
            attack,
            k,
            marked,
            trials,
            out,
            pool,
            rounds,
            seed,
        } => {
            let scheme = Scheme::parse(&scheme)?;
            let attack = Attack::parse(&attack)?;
            let rows = sim::attack_sweep(scheme, attack, &k, &marked, pool, rounds, trials, seed);
            sim::emit_metrics(&rows, &out).with_context(|| format!("writing {}", out.display()))?;
            report(&rows);
            Ok(all_ok(&rows))
        }
        Command::Vectors => {
            let checks = conformance::run_all();
            for c in &checks {
                println!("{} {}", if c.pass { "pass" } else { "FAIL" }, c.name);
            }
            Ok(checks.iter().all(|c| c.pass))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
