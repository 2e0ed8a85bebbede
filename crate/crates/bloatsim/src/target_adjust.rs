//! The slow loop: maintain a (target, throughput) history, fit the
//! logarithmic throughput-latency curve, derive the optimal target from the
//! configured trade-off slope, perturb it with mode-parameterized log-normal
//! noise, and push it into the fast loop.

use std::collections::VecDeque;

use rand::Rng;

use crate::admission::AdmissionController;
use crate::engine::SimTime;
use crate::estimation::{self, CurveFit};

/// One history entry: the target in force during a slow-loop window paired
/// with the throughput measured over that window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub target_us: u64,
    pub throughput_cost_per_s: f64,
}

#[derive(Debug, Clone)]
pub struct SlowLoopConfig {
    /// Slow-loop period in microseconds.
    pub interval_us: u64,
    /// Bounded history length; oldest entries are evicted first.
    pub history_len: usize,
    /// Desired tangent slope of the throughput-latency curve at the
    /// operating point, in regression units (throughput units per latency
    /// unit).
    pub target_slope: f64,
    /// Log-scale std of the exploration noise applied to the target.
    pub noise_sigma: f64,
    pub target_floor_us: u64,
    pub target_ceiling_us: u64,
    /// Minimum history length before a regression is attempted.
    pub min_fit_points: usize,
    /// Minimum number of distinct target values before a regression is
    /// attempted.
    pub min_distinct_targets: usize,
    /// Latency unit for the regression abscissa, in microseconds. The
    /// default of 1000 puts x in milliseconds.
    pub latency_unit_us: f64,
    /// Throughput unit for the regression ordinate, in cost units per
    /// second. The default of 1e6 puts y in megabytes/s when cost is bytes.
    pub throughput_unit: f64,
}

impl Default for SlowLoopConfig {
    fn default() -> Self {
        Self {
            interval_us: 2_000_000,
            history_len: 100,
            target_slope: 5.0,
            noise_sigma: 0.25,
            target_floor_us: 1_000,
            target_ceiling_us: 10_000_000,
            min_fit_points: 8,
            min_distinct_targets: 4,
            latency_unit_us: 1_000.0,
            throughput_unit: 1_000_000.0,
        }
    }
}

/// Outcome of one slow-loop step, recorded into the trace series.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub at: SimTime,
    pub throughput_cost_per_s: f64,
    pub fit_ok: bool,
    /// Pre-noise, pre-clamp optimal target in microseconds, when the fit
    /// succeeded.
    pub optimal_preclamp_us: Option<f64>,
    /// Target installed into the fast loop after noise and clamping.
    pub installed_target_us: u64,
}

#[derive(Debug)]
pub struct SlowLoop {
    cfg: SlowLoopConfig,
    history: VecDeque<Sample>,
    completed_cost: u64,
    window_start: SimTime,
    /// Mode the exploration noise is centered on: the last successful
    /// pre-noise optimal (clamped), or the initial target before any fit.
    mode_us: f64,
    fit_skips: u64,
    steps: u64,
    last_fit: Option<CurveFit>,
}

impl SlowLoop {
    pub fn new(cfg: SlowLoopConfig, initial_target_us: u64) -> Self {
        Self {
            mode_us: (initial_target_us.max(1)) as f64,
            cfg,
            history: VecDeque::new(),
            completed_cost: 0,
            window_start: SimTime::ZERO,
            fit_skips: 0,
            steps: 0,
            last_fit: None,
        }
    }

    pub fn record_completion(&mut self, cost: u64, _now: SimTime) {
        self.completed_cost += cost;
    }

    pub fn history(&self) -> &VecDeque<Sample> {
        &self.history
    }

    pub fn fit_skips(&self) -> u64 {
        self.fit_skips
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn last_fit(&self) -> Option<&CurveFit> {
        self.last_fit.as_ref()
    }

    fn fit_eligible(&self) -> bool {
        if self.history.len() < self.cfg.min_fit_points {
            return false;
        }
        let mut targets: Vec<u64> = self.history.iter().map(|s| s.target_us).collect();
        targets.sort_unstable();
        targets.dedup();
        targets.len() >= self.cfg.min_distinct_targets
    }

    /// One slow-loop step: sample throughput over the elapsed window, update
    /// the history, refit the curve, and install a new (noisy) target into
    /// the fast loop. Returns the outcome and the next timer deadline.
    pub fn step<R: Rng>(
        &mut self,
        now: SimTime,
        controller: &mut dyn AdmissionController,
        rng: &mut R,
    ) -> (StepOutcome, SimTime) {
        self.steps += 1;
        let elapsed_s = (now.saturating_sub(self.window_start)).max(1) as f64 / 1e6;
        let throughput = self.completed_cost as f64 / elapsed_s;
        let window_target = controller.target_us().unwrap_or(self.mode_us as u64);
        self.history.push_back(Sample {
            target_us: window_target,
            throughput_cost_per_s: throughput,
        });
        while self.history.len() > self.cfg.history_len {
            self.history.pop_front();
        }

        let mut fit_ok = false;
        let mut optimal_preclamp_us = None;
        if self.fit_eligible() {
            let pts: Vec<(f64, f64)> = self
                .history
                .iter()
                .map(|s| {
                    (
                        s.target_us as f64 / self.cfg.latency_unit_us,
                        s.throughput_cost_per_s / self.cfg.throughput_unit,
                    )
                })
                .collect();
            match estimation::fit_log_curve(&pts) {
                Ok(fit) if fit.b > 0.0 => {
                    let optimal_scaled = fit.b / self.cfg.target_slope;
                    let optimal_us = optimal_scaled * self.cfg.latency_unit_us;
                    optimal_preclamp_us = Some(optimal_us);
                    self.mode_us = optimal_us
                        .clamp(self.cfg.target_floor_us as f64, self.cfg.target_ceiling_us as f64);
                    self.last_fit = Some(fit);
                    fit_ok = true;
                }
                _ => {
                    // Degenerate abscissae or b <= 0: unstable regime, keep
                    // the previous mode and count the skip.
                    self.fit_skips += 1;
                }
            }
        } else {
            self.fit_skips += 1;
        }

        // Exploration noise is applied every step, centered on the current
        // mode, so the history accumulates distinct targets even before the
        // first successful fit.
        let noisy = estimation::lognormal_mode_sample(self.mode_us, self.cfg.noise_sigma, rng)
            .expect("mode kept positive by clamping");
        let installed = (noisy.round() as u64)
            .clamp(self.cfg.target_floor_us, self.cfg.target_ceiling_us);
        controller.set_target(installed);

        self.completed_cost = 0;
        self.window_start = now;
        let outcome = StepOutcome {
            at: now,
            throughput_cost_per_s: throughput,
            fit_ok,
            optimal_preclamp_us,
            installed_target_us: installed,
        };
        (outcome, now + self.cfg.interval_us)
    }
}
