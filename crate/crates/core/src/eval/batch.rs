//! Seed batches run in parallel, and their tabular reports.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_episode, EpisodeConfig, LocalizerChoice, PlannerChoice, RunReport};
use crate::crowd_sim::Scenario;
use crate::error::Result;
use crate::flow_map::CrowdFlowMap;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CROWDNAV_THREADS";

/// Runs `f` on a pool sized by `CROWDNAV_THREADS` (default: all cores).
pub fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0);
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Maps `f` over `seeds` in parallel; results come back in seed order.
pub fn par_seeds<T: Send>(seeds: &[u64], f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    with_pool(|| sorted.par_iter().map(|&s| f(s)).collect())
}

/// One episode per seed, reports sorted by seed.
pub fn run_batch(scenario: &Scenario, seeds: &[u64], map: Option<&CrowdFlowMap>, cfg: &EpisodeConfig) -> Result<Vec<RunReport>> {
    par_seeds(seeds, |s| run_episode(scenario, s, map, cfg).map(|o| o.report))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub localizer: LocalizerChoice,
    pub planner: PlannerChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: String,
    pub config: RunConfig,
    pub runs: usize,
    pub success_rate: f64,
    pub ca_mean: f64,
    pub ca_std: f64,
    pub mse_mean: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Aggregates reports of one (scenario, localizer, planner) group.
///
/// # Panics
/// If `reports` is empty.
pub fn summarize(reports: &[RunReport]) -> BatchSummary {
    let first = reports.first().expect("summary of an empty batch");
    let ca: Vec<f64> = reports.iter().map(|r| r.ca_actions as f64).collect();
    let mse: Vec<f64> = reports.iter().map(|r| r.mse).collect();
    let (ca_mean, ca_std) = mean_std(&ca);
    BatchSummary {
        scenario: first.scenario.clone(),
        config: RunConfig {
            localizer: first.localizer,
            planner: first.planner,
        },
        runs: reports.len(),
        success_rate: reports.iter().filter(|r| r.success).count() as f64 / reports.len() as f64,
        ca_mean,
        ca_std,
        mse_mean: mean_std(&mse).0,
    }
}

pub const REPORT_HEADER: &str =
    "scenario,seed,localizer,planner,success,outcome,mse,ca_actions,collisions,sim_time,path_length,replans,expansions,wall_time";

pub fn write_reports_csv<W: Write>(mut out: W, reports: &[RunReport]) -> std::io::Result<()> {
    writeln!(out, "{REPORT_HEADER}")?;
    for r in reports {
        let outcome = serde_json::to_value(r.outcome).ok();
        let outcome = outcome.as_ref().and_then(|v| v.as_str()).unwrap_or("");
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            r.scenario,
            r.seed,
            r.localizer,
            r.planner,
            r.success,
            outcome,
            r.mse,
            r.ca_actions,
            r.collisions,
            r.sim_time,
            r.path_length,
            r.replans,
            r.expansions,
            r.wall_time
        )?;
    }
    Ok(())
}

pub const QUALITY_HEADER: &str = "t,quality";

pub fn write_quality_csv<W: Write>(mut out: W, series: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(out, "{QUALITY_HEADER}")?;
    for (t, q) in series {
        writeln!(out, "{t},{q}")?;
    }
    Ok(())
}

/// Plain-text table with one row per summary, columns as in the usual
/// success-rate / CA-action comparison.
pub fn format_table(summaries: &[BatchSummary]) -> String {
    let mut s = format!(
        "{:<12} {:<10} {:<16} {:>5} {:>8} {:>8} {:>8} {:>9}\n",
        "scenario", "localizer", "planner", "runs", "success", "ca_mean", "ca_std", "mse_mean"
    );
    for b in summaries {
        s.push_str(&format!(
            "{:<12} {:<10} {:<16} {:>5} {:>7.1}% {:>8.2} {:>8.2} {:>9.3}\n",
            b.scenario,
            b.config.localizer,
            b.config.planner,
            b.runs,
            100.0 * b.success_rate,
            b.ca_mean,
            b.ca_std,
            b.mse_mean
        ));
    }
    s
}
