//! Sweep orchestration: run the cross product of an axis and a seed range,
//! aggregate per-cell statistics, and fit log-log scaling slopes.
//!
//! Cells execute in parallel (capped by the `SUBFAIR_THREADS` environment
//! variable) but aggregate in deterministic (cell, seed) order, so the
//! sweep report is byte-stable for a given config and axis.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use subfair_core::GroupId;

use crate::config::ExperimentConfig;
use crate::runner::{run_experiment, Result, RunError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Parses `name=v1,v2,...`; supported axes: `t` (horizon) and `eta`.
pub fn parse_axis(text: &str) -> std::result::Result<SweepAxis, String> {
    let (name, rest) = text.split_once('=').ok_or("axis must look like name=v1,v2,...")?;
    let name = name.trim().to_string();
    if name != "t" && name != "eta" {
        return Err(format!("unsupported axis {name:?}; supported: t, eta"));
    }
    let values: Vec<f64> = rest
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad axis value {v:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if values.is_empty() {
        return Err("axis needs at least one value".into());
    }
    Ok(SweepAxis { name, values })
}

fn apply_axis(config: &ExperimentConfig, axis: &SweepAxis, value: f64) -> ExperimentConfig {
    let mut c = config.clone();
    match axis.name.as_str() {
        "t" => {
            c.instance = c.instance.with_t(value as u64);
            c.run.checkpoints = None;
        }
        "eta" => c.learner.eta = Some(value),
        _ => unreachable!("validated in parse_axis"),
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    pub group: u8,
    pub mean_final_regret: f64,
    pub stderr_final_regret: f64,
    pub mean_group_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub seeds: u64,
    pub mean_final_overall: Option<f64>,
    pub stderr_final_overall: Option<f64>,
    pub mean_exploration_cost: f64,
    pub groups: Vec<GroupCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub group: u8,
    /// OLS slope of ln(mean final subgroup regret) against ln(mean T(g)).
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_digest: String,
    pub axis: SweepAxis,
    pub seeds: u64,
    pub cells: Vec<SweepCell>,
    /// Log-log scaling fits of final subgroup regret vs group size; present
    /// when the axis is the horizon.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slopes: Vec<SlopeFit>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// OLS fit y = a + b·x returning (b, stderr of b).
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    if xs.len() <= 2 {
        return (slope, 0.0);
    }
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let fitted = ybar + slope * (x - xbar);
            (y - fitted) * (y - fitted)
        })
        .sum();
    let sigma2 = rss / (n - 2.0);
    (slope, (sigma2 / sxx).sqrt())
}

/// Builds a rayon pool capped by `SUBFAIR_THREADS` when set.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("SUBFAIR_THREADS").ok().and_then(|s| s.parse::<usize>().ok())
    {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().expect("thread pool")
}

/// Runs the sweep: every axis value × seeds 1..=K. Any cell failure aborts
/// the sweep with the failing (value, seed) identified.
pub fn run_sweep(
    config: &ExperimentConfig,
    axis: &SweepAxis,
    n_seeds: u64,
) -> Result<SweepReport> {
    if n_seeds == 0 {
        return Err(RunError::Core(subfair_core::Error::InvalidSpec(
            "sweep needs at least one seed".into(),
        )));
    }
    let n_groups = {
        let (stream, _) = crate::runner::build_instance(config, 1)?;
        stream.n_groups
    };

    let jobs: Vec<(usize, u64)> = (0..axis.values.len())
        .flat_map(|cell| (1..=n_seeds).map(move |seed| (cell, seed)))
        .collect();
    let pool = thread_pool();
    let results: Vec<(usize, u64, std::result::Result<crate::runner::RunArtifacts, String>)> =
        pool.install(|| {
            jobs.par_iter()
                .map(|&(cell, seed)| {
                    let cell_config = apply_axis(config, axis, axis.values[cell]);
                    let run = run_experiment(&cell_config, seed).map_err(|e| e.to_string());
                    (cell, seed, run)
                })
                .collect()
        });

    // Deterministic merge in (cell, seed) order.
    let mut by_cell: Vec<Vec<&crate::runner::RunArtifacts>> =
        vec![Vec::new(); axis.values.len()];
    let mut sorted: Vec<_> = results.iter().collect();
    sorted.sort_by_key(|(cell, seed, _)| (*cell, *seed));
    for (cell, seed, run) in sorted {
        match run {
            Ok(artifacts) => by_cell[*cell].push(artifacts),
            Err(msg) => {
                return Err(RunError::Core(subfair_core::Error::InvalidSpec(format!(
                    "sweep cell {}={} seed {seed} failed: {msg}",
                    axis.name, axis.values[*cell]
                ))));
            }
        }
    }

    let mut cells = Vec::with_capacity(axis.values.len());
    for (i, runs) in by_cell.iter().enumerate() {
        let overall: Vec<f64> =
            runs.iter().filter_map(|r| r.summary.report.final_overall()).collect();
        let (mean_overall, stderr_overall) = if overall.len() == runs.len() {
            let (m, s) = mean_stderr(&overall);
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        let exploration: Vec<f64> =
            runs.iter().map(|r| r.summary.exploration_cost).collect();
        let mut groups = Vec::new();
        for g in 0..n_groups {
            let regrets: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.summary.report.final_subgroup(GroupId(g)))
                .collect();
            if regrets.is_empty() {
                continue;
            }
            let sizes: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.summary.report.final_group_size(GroupId(g)))
                .map(|s| s as f64)
                .collect();
            let (mean, stderr) = mean_stderr(&regrets);
            let (mean_size, _) = mean_stderr(&sizes);
            groups.push(GroupCell {
                group: g,
                mean_final_regret: mean,
                stderr_final_regret: stderr,
                mean_group_size: mean_size,
            });
        }
        cells.push(SweepCell {
            value: axis.values[i],
            seeds: n_seeds,
            mean_final_overall: mean_overall,
            stderr_final_overall: stderr_overall,
            mean_exploration_cost: mean_stderr(&exploration).0,
            groups,
        });
    }

    let mut slopes = Vec::new();
    if axis.name == "t" && cells.len() >= 2 {
        for g in 0..n_groups {
            let points: Vec<(f64, f64)> = cells
                .iter()
                .filter_map(|c| {
                    let gc = c.groups.iter().find(|gc| gc.group == g)?;
                    (gc.mean_final_regret > 0.0 && gc.mean_group_size > 0.0)
                        .then(|| (gc.mean_group_size.ln(), gc.mean_final_regret.ln()))
                })
                .collect();
            if points.len() >= 2 {
                let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
                let (slope, stderr) = ols_slope(&xs, &ys);
                slopes.push(SlopeFit { group: g, slope, stderr, points: points.len() });
            }
        }
    }

    Ok(SweepReport {
        config_digest: config.digest(),
        axis: axis.clone(),
        seeds: n_seeds,
        cells,
        slopes,
    })
}

/// Runs the sweep and writes `sweep.json` under `out`.
pub fn sweep_to_dir(
    config: &ExperimentConfig,
    axis: &SweepAxis,
    n_seeds: u64,
    out: &Path,
) -> Result<std::path::PathBuf> {
    let report = run_sweep(config, axis, n_seeds)?;
    std::fs::create_dir_all(out)?;
    let path = out.join("sweep.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
