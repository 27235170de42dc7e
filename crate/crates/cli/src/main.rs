//! `stlmarl`: train, evaluate, summarise and monitor.
//!
//! Log verbosity follows `RUST_LOG` (default `info`).

use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use stlmarl_core::harness::{self, ExperimentConfig, PhaseRows, SummaryRow};

#[derive(Parser)]
#[command(name = "stlmarl", version, about = "STL-guided multi-agent RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every variant and seed of an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; must be empty or absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Greedy evaluation of a saved checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
    },
    /// Robustness of a formula on a trace CSV. Exit 0 satisfied, 1 violated, 2 error.
    Monitor {
        #[arg(long)]
        formula: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value_t = 0)]
        t: usize,
    },
    /// Recompute the summary of a finished experiment directory.
    Summarize {
        #[arg(long)]
        runs: PathBuf,
    },
}

fn print_summary(rows: &[SummaryRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn train(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let mut cfg = ExperimentConfig::from_file(&config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let Some(out) = out.or_else(|| cfg.output_dir.clone()) else {
        bail!("no output directory: pass --out or set output_dir in the config");
    };
    let report = harness::run_experiment(&cfg, &out)?;
    print_summary(&report.summary)?;
    for f in &report.failures {
        eprintln!("run {} seed {} failed: {}", f.variant, f.seed, f.error);
    }
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn eval(checkpoint: PathBuf, episodes: usize) -> anyhow::Result<ExitCode> {
    if episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let mut trainer = harness::load_trainer(&checkpoint)
        .with_context(|| format!("loading {}", checkpoint.display()))?;
    let seed = trainer.config().seed;
    let metrics = trainer.evaluate(episodes, &mut |_| Ok(()))?;
    let rows = harness::summarize(&[PhaseRows {
        variant: "checkpoint".into(),
        seed,
        phase: "eval".into(),
        rows: harness::rows_of(&metrics),
    }])?;
    // The pooled rows repeat the single run.
    let rows: Vec<SummaryRow> = rows.into_iter().filter(|r| r.seed != "all").collect();
    print_summary(&rows)?;
    Ok(ExitCode::SUCCESS)
}

fn monitor(formula: PathBuf, trace: PathBuf, t: usize) -> ExitCode {
    match harness::monitor(&formula, &trace, t) {
        Ok(o) => {
            let verdict = if o.satisfied { "satisfied" } else { "violated" };
            println!("robustness {} {verdict}", o.robustness);
            ExitCode::from(o.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out, seed } => train(config, out, seed),
        Command::Eval { checkpoint, episodes } => eval(checkpoint, episodes),
        Command::Monitor { formula, trace, t } => return monitor(formula, trace, t),
        Command::Summarize { runs } => harness::summarize_dir(&runs)
            .map_err(anyhow::Error::from)
            .and_then(|rows| print_summary(&rows))
            .map(|()| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
