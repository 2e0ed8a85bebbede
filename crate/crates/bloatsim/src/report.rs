//! Report generation: summary JSON plus CSV time series and the optional
//! per-request log. Column orders and key names are frozen in
//! `schema/report_schema.json`; keep both in sync when changing anything
//! here.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::{Dimension, Window};
use crate::sim::CompletedRun;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_us: f64,
    pub p50_us: u64,
    pub p95_us: u64,
    pub p99_us: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencySummary {
    pub frontend: Option<LatencyStats>,
    pub backend: Option<LatencyStats>,
    pub total: Option<LatencyStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestCounts {
    pub created: u64,
    pub completed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlowLoopSummary {
    pub steps: u64,
    pub fit_skips: u64,
}

/// Latency/throughput deltas against a named baseline summary. Positive
/// reduction/loss percentages mean this run is below the baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub latency_reduction_pct_mean: f64,
    pub latency_reduction_pct_p95: f64,
    pub latency_reduction_pct_p99: f64,
    pub throughput_loss_pct: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub seed: u64,
    pub duration_s: f64,
    pub warmup_s: f64,
    pub latency: LatencySummary,
    pub throughput_cost_per_s: f64,
    pub requests: RequestCounts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slow_loop: Option<SlowLoopSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    pub config: serde_json::Value,
}

fn stats_for(run: &CompletedRun, dim: Dimension, w: Window) -> Option<LatencyStats> {
    Some(LatencyStats {
        mean_us: run.metrics.mean_latency(dim, w).ok()?,
        p50_us: run.metrics.percentile(dim, 0.50, w).ok()?,
        p95_us: run.metrics.percentile(dim, 0.95, w).ok()?,
        p99_us: run.metrics.percentile(dim, 0.99, w).ok()?,
    })
}

/// Steady-state summary of a completed run (warmup excluded).
pub fn build_summary(run: &CompletedRun) -> Summary {
    let w = run.steady_window();
    Summary {
        schema_version: SCHEMA_VERSION,
        seed: run.config.run.seed,
        duration_s: run.config.run.duration_s,
        warmup_s: run.config.run.duration_s * run.config.run.warmup_frac,
        latency: LatencySummary {
            frontend: stats_for(run, Dimension::Frontend, w),
            backend: stats_for(run, Dimension::Backend, w),
            total: stats_for(run, Dimension::Total, w),
        },
        throughput_cost_per_s: run.metrics.throughput(w),
        requests: RequestCounts {
            created: run.created,
            completed: run.completed,
        },
        slow_loop: match (run.slow_steps, run.fit_skips) {
            (Some(steps), Some(fit_skips)) => Some(SlowLoopSummary { steps, fit_skips }),
            _ => None,
        },
        comparison: None,
        config: run.config.echo(),
    }
}

/// Fill comparison fields from a baseline run's summary.
pub fn attach_comparison(summary: &mut Summary, baseline: &Summary, baseline_name: &str) {
    let reduction = |ours: f64, theirs: f64| {
        if theirs == 0.0 {
            0.0
        } else {
            (theirs - ours) / theirs * 100.0
        }
    };
    let (ours, theirs) = match (&summary.latency.backend, &baseline.latency.backend) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        _ => return,
    };
    summary.comparison = Some(Comparison {
        baseline: baseline_name.to_string(),
        latency_reduction_pct_mean: reduction(ours.mean_us, theirs.mean_us),
        latency_reduction_pct_p95: reduction(ours.p95_us as f64, theirs.p95_us as f64),
        latency_reduction_pct_p99: reduction(ours.p99_us as f64, theirs.p99_us as f64),
        throughput_loss_pct: reduction(
            summary.throughput_cost_per_s,
            baseline.throughput_cost_per_s,
        ),
    });
}

/// Write all report files for a run; returns the written paths in a stable
/// order. CSV: header row, comma separators, decimal point, LF endings.
pub fn write_report(
    run: &CompletedRun,
    summary: &Summary,
    out_dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    std::fs::write(&summary_path, json + "\n")?;
    written.push(summary_path);

    for (name, series) in run.metrics.traces() {
        let mut csv = String::from("time_us,value\n");
        for &(t, v) in series {
            writeln!(csv, "{t},{v}").unwrap();
        }
        let path = out_dir.join(format!("trace_{name}.csv"));
        std::fs::write(&path, csv)?;
        written.push(path);
    }

    if run.config.output.per_request {
        let mut csv = String::from(
            "id,size,cost,t_created_us,t_admitted_us,t_backend_done_us,\
             frontend_latency_us,backend_latency_us,total_latency_us\n",
        );
        for r in run.metrics.request_log() {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                r.id,
                r.size,
                r.cost,
                r.t_created_us,
                r.t_admitted_us,
                r.t_backend_done_us,
                r.t_admitted_us - r.t_created_us,
                r.t_backend_done_us - r.t_admitted_us,
                r.t_backend_done_us - r.t_created_us,
            )
            .unwrap();
        }
        let path = out_dir.join("requests.csv");
        std::fs::write(&path, csv)?;
        written.push(path);
    }

    Ok(written)
}

pub fn load_summary(path: &Path) -> Result<Summary, String> {
    let s = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&s).map_err(|e| format!("{}: {e}", path.display()))
}
