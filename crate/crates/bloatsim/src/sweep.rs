//! Parameter sweeps: one fully isolated simulation per axis value. Runs
//! execute in parallel (rayon) when the `parallel` feature is enabled;
//! reporting order is always the input order, so outputs are identical
//! either way.

use crate::config::{self, ScenarioConfig};
use crate::error::SimError;
use crate::report::{build_summary, Summary};
use crate::sim::{run_scenario, CompletedRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Every run uses the base config's seed.
    Shared,
    /// Run i uses base seed + i.
    PerValue,
}

/// One sweep point: the axis value label and its fully resolved config.
pub struct SweepPoint {
    pub label: String,
    pub config: ScenarioConfig,
}

/// Expand a base config into one point per axis value.
pub fn expand(
    base_toml: &str,
    axis: &str,
    values: &[String],
    seed_policy: SeedPolicy,
    extra_overrides: &[(String, String)],
) -> Result<Vec<SweepPoint>, SimError> {
    if values.is_empty() {
        return Err(SimError::Config("sweep needs at least one value".into()));
    }
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut overrides: Vec<(String, String)> = extra_overrides.to_vec();
            overrides.push((axis.to_string(), v.clone()));
            let mut cfg = config::load_with_overrides(base_toml, &overrides)?;
            if seed_policy == SeedPolicy::PerValue {
                cfg.run.seed = cfg.run.seed.wrapping_add(i as u64);
            }
            Ok(SweepPoint {
                label: v.clone(),
                config: cfg,
            })
        })
        .collect()
}

/// Run every point sequentially.
pub fn run_points_sequential(points: &[SweepPoint]) -> Result<Vec<CompletedRun>, SimError> {
    points.iter().map(|p| run_scenario(&p.config)).collect()
}

/// Run every point, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn run_points(points: &[SweepPoint]) -> Result<Vec<CompletedRun>, SimError> {
    use rayon::prelude::*;
    points
        .par_iter()
        .map(|p| run_scenario(&p.config))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_points(points: &[SweepPoint]) -> Result<Vec<CompletedRun>, SimError> {
    run_points_sequential(points)
}

/// Combined comparison table across the sweep, one row per run.
pub fn comparison_csv(axis: &str, labels: &[String], summaries: &[Summary]) -> String {
    use std::fmt::Write as _;
    let mut csv = format!(
        "{axis},seed,mean_backend_latency_us,p95_backend_latency_us,\
         p99_backend_latency_us,throughput_cost_per_s,completed\n"
    );
    for (label, s) in labels.iter().zip(summaries) {
        let b = s.latency.backend.as_ref();
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            label,
            s.seed,
            b.map_or(f64::NAN, |b| b.mean_us),
            b.map_or(0, |b| b.p95_us),
            b.map_or(0, |b| b.p99_us),
            s.throughput_cost_per_s,
            s.requests.completed,
        )
        .unwrap();
    }
    csv
}

/// Expanded points, their completed runs, and the per-run summaries.
pub type SweepResult = (Vec<SweepPoint>, Vec<CompletedRun>, Vec<Summary>);

/// Convenience wrapper used by the CLI and benches: expand, run, summarize.
pub fn run_sweep(
    base_toml: &str,
    axis: &str,
    values: &[String],
    seed_policy: SeedPolicy,
    parallel: bool,
) -> Result<SweepResult, SimError> {
    let points = expand(base_toml, axis, values, seed_policy, &[])?;
    let runs = if parallel {
        run_points(&points)?
    } else {
        run_points_sequential(&points)?
    };
    let summaries = runs.iter().map(build_summary).collect();
    Ok((points, runs, summaries))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[run]
duration_s = 1.0
seed = 10

[workload]
[[workload.phases]]
duration_s = 1.0
request_size = 4096
queue_depth = 8

[backend]
noise_sigma = 0.0

[admission]
kind = "unlimited"
"#;

    #[test]
    fn expand_applies_axis_and_seed_policy() {
        let vals: Vec<String> = ["8", "16", "32"].iter().map(|s| s.to_string()).collect();
        let pts = expand(BASE, "workload.queue_depth", &vals, SeedPolicy::PerValue, &[]).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2].config.workload.phases[0].queue_depth, 32);
        assert_eq!(pts[0].config.run.seed, 10);
        assert_eq!(pts[2].config.run.seed, 12);
    }

    #[test]
    fn unknown_axis_is_error() {
        let vals = vec!["1".to_string()];
        assert!(expand(BASE, "backend.nonexistent", &vals, SeedPolicy::Shared, &[]).is_err());
    }

    #[test]
    fn empty_values_is_error() {
        assert!(expand(BASE, "run.seed", &[], SeedPolicy::Shared, &[]).is_err());
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let vals: Vec<String> = ["4", "8"].iter().map(|s| s.to_string()).collect();
        let pts = expand(BASE, "workload.queue_depth", &vals, SeedPolicy::Shared, &[]).unwrap();
        let seq = run_points_sequential(&pts).unwrap();
        let par = run_points(&pts).unwrap();
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.completed, b.completed);
            assert_eq!(
                a.metrics.throughput(a.steady_window()),
                b.metrics.throughput(b.steady_window())
            );
        }
    }

    #[test]
    fn comparison_csv_has_one_row_per_run() {
        let vals: Vec<String> = ["4", "8"].iter().map(|s| s.to_string()).collect();
        let (pts, _runs, summaries) =
            run_sweep(BASE, "workload.queue_depth", &vals, SeedPolicy::Shared, false).unwrap();
        let labels: Vec<String> = pts.into_iter().map(|p| p.label).collect();
        let csv = comparison_csv("workload.queue_depth", &labels, &summaries);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("workload.queue_depth,seed,"));
    }
}
