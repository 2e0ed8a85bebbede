//! Per-request latency recording, windowed throughput, and named trace
//! series. Percentiles are exact nearest-rank order statistics over the
//! retained samples.

use std::collections::BTreeMap;

use crate::engine::SimTime;
use crate::error::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dimension {
    Frontend,
    Backend,
    Total,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Frontend, Dimension::Backend, Dimension::Total];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Frontend => "frontend",
            Dimension::Backend => "backend",
            Dimension::Total => "total",
        }
    }

    fn idx(self) -> usize {
        match self {
            Dimension::Frontend => 0,
            Dimension::Backend => 1,
            Dimension::Total => 2,
        }
    }
}

/// A half-open observation window `[start, end]` in simulation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: SimTime,
    pub end: SimTime,
}

impl Window {
    pub fn new(start: SimTime, end: SimTime) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: SimTime) -> bool {
        t >= self.start && t <= self.end
    }

    pub fn span_secs(&self) -> f64 {
        self.end.saturating_sub(self.start) as f64 / 1e6
    }
}

/// One completed request's full timing record, kept only when the
/// per-request log is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestRecord {
    pub id: u64,
    pub size: u64,
    pub cost: u64,
    pub t_created_us: u64,
    pub t_admitted_us: u64,
    pub t_backend_done_us: u64,
}

#[derive(Debug, Default)]
pub struct MetricsStore {
    // (stamp, latency_us), stamps nondecreasing per dimension.
    latencies: [Vec<(u64, u64)>; 3],
    // (stamp, cost) per completion, for windowed throughput.
    completions: Vec<(u64, u64)>,
    traces: BTreeMap<&'static str, Vec<(u64, f64)>>,
    request_log: Vec<RequestRecord>,
}

impl MetricsStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_latency(&mut self, dim: Dimension, stamp: SimTime, latency_us: u64) {
        let series = &mut self.latencies[dim.idx()];
        debug_assert!(series.last().is_none_or(|&(t, _)| t <= stamp.as_micros()));
        series.push((stamp.as_micros(), latency_us));
    }

    pub fn record_completion(&mut self, stamp: SimTime, cost: u64) {
        self.completions.push((stamp.as_micros(), cost));
    }

    pub fn record_request(&mut self, rec: RequestRecord) {
        self.request_log.push(rec);
    }

    pub fn request_log(&self) -> &[RequestRecord] {
        &self.request_log
    }

    pub fn record_trace(&mut self, series: &'static str, stamp: SimTime, value: f64) {
        self.traces.entry(series).or_default().push((stamp.as_micros(), value));
    }

    pub fn traces(&self) -> &BTreeMap<&'static str, Vec<(u64, f64)>> {
        &self.traces
    }

    pub fn trace(&self, series: &str) -> Option<&Vec<(u64, f64)>> {
        self.traces.get(series)
    }

    pub fn samples_in(&self, dim: Dimension, window: Window) -> Vec<u64> {
        self.latencies[dim.idx()]
            .iter()
            .filter(|&&(t, _)| window.contains(SimTime(t)))
            .map(|&(_, l)| l)
            .collect()
    }

    /// Exact nearest-rank percentile over samples in the window:
    /// the `ceil(p * n)`-th smallest sample.
    pub fn percentile(
        &self,
        dim: Dimension,
        p: f64,
        window: Window,
    ) -> Result<u64, MetricsError> {
        assert!(p > 0.0 && p <= 1.0, "p must be in (0, 1]");
        let mut xs = self.samples_in(dim, window);
        if xs.is_empty() {
            return Err(MetricsError::NoData(
                window.start.as_micros(),
                window.end.as_micros(),
            ));
        }
        xs.sort_unstable();
        let rank = (p * xs.len() as f64).ceil() as usize;
        Ok(xs[rank.max(1) - 1])
    }

    pub fn mean_latency(&self, dim: Dimension, window: Window) -> Result<f64, MetricsError> {
        let xs = self.samples_in(dim, window);
        if xs.is_empty() {
            return Err(MetricsError::NoData(
                window.start.as_micros(),
                window.end.as_micros(),
            ));
        }
        Ok(xs.iter().sum::<u64>() as f64 / xs.len() as f64)
    }

    pub fn completions_in(&self, window: Window) -> u64 {
        self.completions
            .iter()
            .filter(|&&(t, _)| window.contains(SimTime(t)))
            .count() as u64
    }

    /// Completed cost over the window divided by the window length, in cost
    /// units per second.
    pub fn throughput(&self, window: Window) -> f64 {
        let total: u64 = self
            .completions
            .iter()
            .filter(|&&(t, _)| window.contains(SimTime(t)))
            .map(|&(_, c)| c)
            .sum();
        let span = window.span_secs();
        if span == 0.0 {
            0.0
        } else {
            total as f64 / span
        }
    }
}
