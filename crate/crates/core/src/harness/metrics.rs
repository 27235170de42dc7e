//! Metrics files, safety rate and summary statistics.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::marl::EpisodeMetrics;

pub const METRICS_HEADER: [&str; 7] = [
    "episode",
    "agent",
    "return_stl",
    "return_baseline",
    "collisions",
    "reached_dest",
    "shield_fallbacks",
];

/// One row of `metrics.csv`: one agent in one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub agent: usize,
    pub return_stl: f64,
    pub return_baseline: f64,
    pub collisions: usize,
    pub reached_dest: bool,
    pub shield_fallbacks: usize,
}

pub fn rows_of(episodes: &[EpisodeMetrics]) -> Vec<MetricsRow> {
    episodes
        .iter()
        .flat_map(|e| {
            e.agents.iter().enumerate().map(move |(i, a)| MetricsRow {
                episode: e.episode,
                agent: i,
                return_stl: a.return_stl,
                return_baseline: a.return_baseline,
                collisions: a.collisions,
                reached_dest: a.reached_dest,
                shield_fallbacks: a.shield_fallbacks,
            })
        })
        .collect()
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(METRICS_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(CoreError::Config(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    r.deserialize().map(|row| row.map_err(CoreError::from)).collect()
}

/// Fraction of episodes in which no agent was involved in a collision.
/// Rows may come in any order; rows of the same episode are grouped.
pub fn safety_rate(rows: &[MetricsRow]) -> Result<f64> {
    if rows.is_empty() {
        return Err(CoreError::Config("safety rate of zero episodes is undefined".into()));
    }
    let mut unsafe_by_episode: BTreeMap<usize, bool> = BTreeMap::new();
    for r in rows {
        *unsafe_by_episode.entry(r.episode).or_default() |= r.collisions > 0;
    }
    let total = unsafe_by_episode.len();
    let bad = unsafe_by_episode.values().filter(|&&u| u).count();
    Ok(1.0 - bad as f64 / total as f64)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One line of `summary.csv`. `seed` and `agent` are numbers or `all`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub seed: String,
    pub phase: String,
    pub agent: String,
    pub episodes: usize,
    pub mean_return_stl: f64,
    pub std_return_stl: f64,
    pub mean_return_baseline: f64,
    pub std_return_baseline: f64,
    pub safety_rate: f64,
    pub reach_rate: f64,
}

/// Metrics of one run phase, already tagged.
#[derive(Debug, Clone)]
pub struct PhaseRows {
    pub variant: String,
    pub seed: u64,
    pub phase: String,
    pub rows: Vec<MetricsRow>,
}

fn summarize_rows(variant: &str, seed: &str, phase: &str, runs: &[&[MetricsRow]]) -> Result<Vec<SummaryRow>> {
    // Episodes are keyed by (run, episode) so that pooled seeds never merge.
    let mut pooled: Vec<MetricsRow> = Vec::new();
    let mut offset = 0;
    for rows in runs {
        let span = rows.iter().map(|r| r.episode + 1).max().unwrap_or(0);
        pooled.extend(rows.iter().map(|r| MetricsRow {
            episode: r.episode + offset,
            ..r.clone()
        }));
        offset += span;
    }
    let safety = safety_rate(&pooled)?;
    let mut per_agent: BTreeMap<usize, Vec<&MetricsRow>> = BTreeMap::new();
    let mut per_episode: BTreeMap<usize, (f64, f64, bool)> = BTreeMap::new();
    for r in &pooled {
        per_agent.entry(r.agent).or_default().push(r);
        let e = per_episode.entry(r.episode).or_insert((0.0, 0.0, true));
        e.0 += r.return_stl;
        e.1 += r.return_baseline;
        e.2 &= r.reached_dest;
    }
    let row = |agent: String, stl: Vec<f64>, base: Vec<f64>, reached: usize| {
        let (ms, ss) = mean_std(&stl);
        let (mb, sb) = mean_std(&base);
        SummaryRow {
            variant: variant.to_string(),
            seed: seed.to_string(),
            phase: phase.to_string(),
            agent,
            episodes: stl.len(),
            mean_return_stl: ms,
            std_return_stl: ss,
            mean_return_baseline: mb,
            std_return_baseline: sb,
            safety_rate: safety,
            reach_rate: reached as f64 / stl.len() as f64,
        }
    };
    let mut out = Vec::new();
    for (agent, rows) in &per_agent {
        out.push(row(
            agent.to_string(),
            rows.iter().map(|r| r.return_stl).collect(),
            rows.iter().map(|r| r.return_baseline).collect(),
            rows.iter().filter(|r| r.reached_dest).count(),
        ));
    }
    out.push(row(
        "all".into(),
        per_episode.values().map(|e| e.0).collect(),
        per_episode.values().map(|e| e.1).collect(),
        per_episode.values().filter(|e| e.2).count(),
    ));
    Ok(out)
}

/// Per-run rows for every (variant, seed, phase) plus rows pooling all
/// seeds of each (variant, phase). Input order does not matter.
pub fn summarize(phases: &[PhaseRows]) -> Result<Vec<SummaryRow>> {
    let mut sorted: Vec<&PhaseRows> = phases.iter().collect();
    sorted.sort_by(|a, b| (&a.variant, &a.phase, a.seed).cmp(&(&b.variant, &b.phase, b.seed)));
    let mut out = Vec::new();
    let mut groups: BTreeMap<(&str, &str), Vec<&[MetricsRow]>> = BTreeMap::new();
    for p in &sorted {
        if p.rows.is_empty() {
            continue;
        }
        out.extend(summarize_rows(&p.variant, &p.seed.to_string(), &p.phase, &[&p.rows])?);
        groups.entry((&p.variant, &p.phase)).or_default().push(&p.rows);
    }
    for ((variant, phase), runs) in groups {
        out.extend(summarize_rows(variant, "all", phase, &runs)?);
    }
    Ok(out)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(CoreError::from)).collect()
}

/// `curves.csv`: per-episode totals over agents and their trailing mean.
pub fn write_curves(path: &Path, episodes: &[EpisodeMetrics], window: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "episode",
        "return_stl",
        "return_stl_smoothed",
        "return_baseline",
        "return_baseline_smoothed",
        "collision_free",
    ])?;
    let stl: Vec<f64> = episodes.iter().map(|e| e.total_stl_return()).collect();
    let base: Vec<f64> = episodes
        .iter()
        .map(|e| e.agents.iter().map(|a| a.return_baseline).sum())
        .collect();
    let smooth = |xs: &[f64], k: usize| {
        let lo = (k + 1).saturating_sub(window);
        xs[lo..=k].iter().sum::<f64>() / (k + 1 - lo) as f64
    };
    for (k, e) in episodes.iter().enumerate() {
        w.write_record([
            e.episode.to_string(),
            stl[k].to_string(),
            smooth(&stl, k).to_string(),
            base[k].to_string(),
            smooth(&base, k).to_string(),
            u8::from(!e.any_collision()).to_string(),
        ])?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))?;
    Ok(())
}
