//! Orchestration of (variant, seed) runs and their artifact files.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use stlmarl_nn::Checkpoint;

use super::config::{EnvConfig, ExperimentConfig, Variant};
use super::metrics::{
    read_metrics, rows_of, summarize, write_curves, write_metrics, write_summary, PhaseRows, SummaryRow,
};
use crate::error::{CoreError, Result};
use crate::marl::{EpisodeLog, EpisodeMetrics, TrainConfig, Trainer};

pub const TRAIN_METRICS: &str = "metrics.csv";
pub const EVAL_METRICS: &str = "eval_metrics.csv";
pub const CURVES: &str = "curves.csv";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const FORMULAS: &str = "formulas.csv";
pub const REWARDS: &str = "rewards.csv";
pub const AUDIT: &str = "shield_audit.csv";
pub const TRACES: &str = "traces";
pub const SUMMARY: &str = "summary.csv";

pub fn run_dir(out: &Path, variant: &str, seed: u64) -> PathBuf {
    out.join(variant).join(format!("seed_{seed}"))
}

pub fn trace_path(run: &Path, episode: usize) -> PathBuf {
    run.join(TRACES).join(format!("episode_{episode:05}.csv"))
}

/// Creates `dir`, refusing one that already has contents.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| CoreError::io(dir, e))?;
        if entries.next().is_some() {
            return Err(CoreError::OutputExists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub variant: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<RunFailure>,
}

/// Streams per-episode artifacts of a recorded training run.
struct Recorder {
    dir: PathBuf,
    rewards: csv::Writer<BufWriter<File>>,
    audit: Option<csv::Writer<BufWriter<File>>>,
}

impl Recorder {
    fn new(dir: &Path, shield: bool) -> Result<Self> {
        let traces = dir.join(TRACES);
        fs::create_dir_all(&traces).map_err(|e| CoreError::io(&traces, e))?;
        let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
            let p = dir.join(name);
            let f = File::create(&p).map_err(|e| CoreError::io(&p, e))?;
            Ok(csv::Writer::from_writer(BufWriter::new(f)))
        };
        let mut rewards = open(REWARDS)?;
        rewards.write_record(["episode", "step", "agent", "reward_stl", "reward"])?;
        let audit = if shield {
            let mut w = open(AUDIT)?;
            w.write_record([
                "episode",
                "step",
                "agent",
                "requested",
                "applied",
                "feasible",
                "fallback",
                "open_loop",
                "barriers",
                "min_h",
                "min_slack",
            ])?;
            Some(w)
        } else {
            None
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            rewards,
            audit,
        })
    }

    fn record(&mut self, log: &EpisodeLog) -> Result<()> {
        let path = trace_path(&self.dir, log.episode);
        let f = File::create(&path).map_err(|e| CoreError::io(&path, e))?;
        log.trace.write_csv(BufWriter::new(f))?;
        for (t, (stl, used)) in log.stl_rewards.iter().zip(&log.rewards).enumerate() {
            for (i, (s, u)) in stl.iter().zip(used).enumerate() {
                self.rewards.write_record([
                    log.episode.to_string(),
                    t.to_string(),
                    i.to_string(),
                    s.to_string(),
                    u.to_string(),
                ])?;
            }
        }
        if let Some(w) = &mut self.audit {
            for (t, step) in log.audit.iter().enumerate() {
                for a in step {
                    let min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
                    w.write_record([
                        log.episode.to_string(),
                        t.to_string(),
                        a.agent.to_string(),
                        a.requested.to_string(),
                        a.applied.to_string(),
                        a.feasible.to_string(),
                        a.fallback.to_string(),
                        a.open_loop.to_string(),
                        a.h.len().to_string(),
                        min(&a.h).to_string(),
                        min(&a.slacks).to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.rewards.flush().map_err(|e| CoreError::io(&self.dir, e))?;
        if let Some(w) = &mut self.audit {
            w.flush().map_err(|e| CoreError::io(&self.dir, e))?;
        }
        Ok(())
    }
}

fn write_formulas(path: &Path, trainer: &Trainer) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["agent", "spec", "weight", "formula"])?;
    let weights = &trainer.config().stl_weights;
    for (i, specs) in trainer.formulas().iter().enumerate() {
        for (j, f) in specs.iter().enumerate() {
            let c = weights.get(j).copied().unwrap_or(1.0);
            w.write_record([i.to_string(), j.to_string(), c.to_string(), f.to_string()])?;
        }
    }
    w.flush().map_err(|e| CoreError::io(path, e))?;
    Ok(())
}

fn checkpoint_metadata(env: &EnvConfig, variant: &Variant, eval_episodes: usize) -> Result<Map<String, Value>> {
    let mut m = Map::new();
    m.insert("env".into(), serde_json::to_value(env)?);
    m.insert("variant".into(), serde_json::to_value(variant)?);
    m.insert("eval_episodes".into(), json!(eval_episodes));
    Ok(m)
}

/// Artifacts and metrics of one finished run.
pub struct RunResult {
    pub train: Vec<EpisodeMetrics>,
    pub eval: Vec<EpisodeMetrics>,
}

/// Trains, evaluates and writes all per-run files into `dir`.
pub fn run_single(cfg: &ExperimentConfig, variant: &Variant, seed: u64, dir: &Path) -> Result<RunResult> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let train_cfg = cfg.run_config(variant, seed);
    let mut trainer = Trainer::new(train_cfg, cfg.env.build()?)?;
    write_formulas(&dir.join(FORMULAS), &trainer)?;
    let mut recorder = if cfg.record_traces {
        Some(Recorder::new(dir, variant.shield)?)
    } else {
        None
    };
    let out = trainer.train(&mut |log| match &mut recorder {
        Some(r) => r.record(log),
        None => Ok(()),
    })?;
    if let Some(r) = recorder {
        r.finish()?;
    }
    let eval = trainer.evaluate(cfg.eval_episodes, &mut |_| Ok(()))?;
    write_metrics(&dir.join(TRAIN_METRICS), &rows_of(&out.metrics))?;
    write_metrics(&dir.join(EVAL_METRICS), &rows_of(&eval))?;
    write_curves(&dir.join(CURVES), &out.metrics, cfg.curve_window)?;
    let ckpt = trainer.checkpoint(checkpoint_metadata(&cfg.env, variant, cfg.eval_episodes)?)?;
    let path = dir.join(CHECKPOINT);
    let f = File::create(&path).map_err(|e| CoreError::io(&path, e))?;
    ckpt.write(BufWriter::new(f))?;
    Ok(RunResult {
        train: out.metrics,
        eval,
    })
}

/// Runs every (variant, seed) pair into `out`, which must be empty or
/// absent, then writes `summary.csv` from the metrics files on disk.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    prepare_output_dir(out)?;
    let resolved = out.join("config.json");
    fs::write(&resolved, serde_json::to_string_pretty(cfg)?).map_err(|e| CoreError::io(&resolved, e))?;
    let mut failures = Vec::new();
    for variant in &cfg.variants {
        for &seed in &cfg.seeds {
            let dir = run_dir(out, &variant.name, seed);
            log::info!("run {} seed {seed}", variant.name);
            if let Err(e) = run_single(cfg, variant, seed, &dir) {
                log::error!("run {} seed {seed} failed: {e}", variant.name);
                failures.push(RunFailure {
                    variant: variant.name.clone(),
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    let summary = summarize_dir(out)?;
    write_summary(&out.join(SUMMARY), &summary)?;
    Ok(ExperimentReport { summary, failures })
}

/// Recomputes the summary from `<runs>/<variant>/seed_<n>/*metrics.csv`.
pub fn summarize_dir(runs: &Path) -> Result<Vec<SummaryRow>> {
    let mut phases = Vec::new();
    let read = |p: &Path| fs::read_dir(p).map_err(|e| CoreError::io(p, e));
    for variant in read(runs)? {
        let variant = variant.map_err(|e| CoreError::io(runs, e))?;
        if !variant.path().is_dir() {
            continue;
        }
        let name = variant.file_name().to_string_lossy().into_owned();
        for run in read(&variant.path())? {
            let run = run.map_err(|e| CoreError::io(variant.path(), e))?;
            let dir_name = run.file_name().to_string_lossy().into_owned();
            let Some(seed) = dir_name.strip_prefix("seed_").and_then(|s| s.parse::<u64>().ok()) else {
                continue;
            };
            for (phase, file) in [("train", TRAIN_METRICS), ("eval", EVAL_METRICS)] {
                let p = run.path().join(file);
                if p.exists() {
                    phases.push(PhaseRows {
                        variant: name.clone(),
                        seed,
                        phase: phase.into(),
                        rows: read_metrics(&p)?,
                    });
                }
            }
        }
    }
    summarize(&phases)
}

/// Restores a trainer from a run checkpoint.
pub fn load_trainer(path: &Path) -> Result<Trainer> {
    let f = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let ckpt = Checkpoint::read(std::io::BufReader::new(f))?;
    let field = |k: &str| {
        ckpt.metadata
            .get(k)
            .cloned()
            .ok_or_else(|| CoreError::Config(format!("{}: checkpoint lacks `{k}`", path.display())))
    };
    let env: EnvConfig = serde_json::from_value(field("env")?)?;
    let train: TrainConfig = serde_json::from_value(field("train")?)?;
    let mut trainer = Trainer::new(train, env.build()?)?;
    trainer.load_checkpoint(&ckpt)?;
    Ok(trainer)
}

/// Greedy evaluation of a saved policy.
pub fn evaluate_checkpoint(path: &Path, episodes: usize) -> Result<Vec<EpisodeMetrics>> {
    load_trainer(path)?.evaluate(episodes, &mut |_| Ok(()))
}
