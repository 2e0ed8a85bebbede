//! Admission controllers: the contract plus three implementations.
//!
//! `Unlimited` is the no-admission-control baseline, `StaticBudget` is the
//! fixed-budget throttle analog, and `QbaCodel` is the queuing-budget
//! adjusting CoDel fast loop: every interval it compares the minimum backend
//! latency observed during the interval against a target, shrinking the
//! budget (and the interval) on violation, growing the budget and resetting
//! the interval otherwise.

use crate::engine::SimTime;

/// Cost units charged against the queuing budget: request size in bytes plus
/// an optional fixed component.
pub fn cost_of(size: u64, cost_fixed: u64) -> u64 {
    size + cost_fixed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetSnapshot {
    pub used: u64,
    pub capacity: u64,
}

/// Operation set every admission controller implements.
///
/// `can_admit` is side-effect free; `on_submit` is only called after
/// `can_admit` returned true at the same instant. All calls come from the
/// single engine thread.
pub trait AdmissionController {
    fn kind(&self) -> &'static str;

    fn can_admit(&self, cost: u64) -> bool;

    fn on_submit(&mut self, cost: u64, now: SimTime);

    fn on_complete(&mut self, cost: u64, backend_latency_us: u64, now: SimTime);

    /// Fires the controller's periodic step, returning when the next timer
    /// should fire, or `None` for timerless controllers.
    fn on_timer(&mut self, now: SimTime) -> Option<SimTime>;

    /// Install a new latency target. No-op except for `QbaCodel`.
    fn set_target(&mut self, _target_us: u64) {}

    fn target_us(&self) -> Option<u64> {
        None
    }

    fn budget(&self) -> Option<BudgetSnapshot> {
        None
    }

    fn interval_us(&self) -> Option<f64> {
        None
    }
}

/// Baseline: admits everything, tracks nothing.
#[derive(Debug, Default)]
pub struct Unlimited;

impl AdmissionController for Unlimited {
    fn kind(&self) -> &'static str {
        "unlimited"
    }

    fn can_admit(&self, _cost: u64) -> bool {
        true
    }

    fn on_submit(&mut self, _cost: u64, _now: SimTime) {}

    fn on_complete(&mut self, _cost: u64, _latency: u64, _now: SimTime) {}

    fn on_timer(&mut self, _now: SimTime) -> Option<SimTime> {
        None
    }
}

/// Fixed-capacity budget admission control; the capacity never changes at
/// runtime.
#[derive(Debug)]
pub struct StaticBudget {
    capacity: u64,
    used: u64,
}

impl StaticBudget {
    pub fn new(capacity: u64) -> Self {
        Self { capacity, used: 0 }
    }
}

impl AdmissionController for StaticBudget {
    fn kind(&self) -> &'static str {
        "static"
    }

    fn can_admit(&self, cost: u64) -> bool {
        // A request is always admissible when nothing is in flight, so one
        // oversized request can never deadlock the pipeline.
        self.used == 0 || self.used + cost <= self.capacity
    }

    fn on_submit(&mut self, cost: u64, _now: SimTime) {
        self.used += cost;
    }

    fn on_complete(&mut self, cost: u64, _latency: u64, _now: SimTime) {
        self.used = self.used.saturating_sub(cost);
    }

    fn on_timer(&mut self, _now: SimTime) -> Option<SimTime> {
        None
    }

    fn budget(&self) -> Option<BudgetSnapshot> {
        Some(BudgetSnapshot {
            used: self.used,
            capacity: self.capacity,
        })
    }
}

/// Tunables for the queuing-budget adjusting CoDel fast loop.
#[derive(Debug, Clone)]
pub struct QbaCodelConfig {
    /// Latency target in microseconds.
    pub target_us: u64,
    /// Interval the loop starts from and resets to on a non-violation.
    pub interval_initial_us: u64,
    /// Floor for the shrinking interval.
    pub interval_min_us: u64,
    /// Starting budget capacity in cost units.
    pub initial_capacity: u64,
    pub budget_min: u64,
    pub budget_max: u64,
    /// Additive growth per non-violating interval.
    pub budget_increment: u64,
    /// Multiplicative decrease gain on violation.
    pub alpha: f64,
}

impl Default for QbaCodelConfig {
    fn default() -> Self {
        Self {
            target_us: 5_000,
            interval_initial_us: 100_000,
            interval_min_us: 1_000,
            initial_capacity: 64 * 1024 * 1024,
            budget_min: 4_096,
            budget_max: 64 * 1024 * 1024,
            budget_increment: 64 * 1024,
            alpha: 0.5,
        }
    }
}

/// The fast loop. Holds all per-interval state: target, current interval,
/// violation count, the minimum backend latency seen this interval, and the
/// budget accounting.
#[derive(Debug)]
pub struct QbaCodel {
    cfg: QbaCodelConfig,
    target_us: u64,
    interval_current_us: f64,
    violation_count: u32,
    min_latency_window: Option<u64>,
    budget_capacity: u64,
    budget_used: u64,
}

impl QbaCodel {
    pub fn new(cfg: QbaCodelConfig) -> Self {
        let capacity = cfg
            .initial_capacity
            .clamp(cfg.budget_min, cfg.budget_max);
        Self {
            target_us: cfg.target_us,
            interval_current_us: cfg.interval_initial_us as f64,
            violation_count: 0,
            min_latency_window: None,
            budget_capacity: capacity,
            budget_used: 0,
            cfg,
        }
    }

    pub fn violation_count(&self) -> u32 {
        self.violation_count
    }

    pub fn interval_current_us(&self) -> f64 {
        self.interval_current_us
    }

    pub fn min_latency_window(&self) -> Option<u64> {
        self.min_latency_window
    }

    /// One fast-loop step. Compares the interval's minimum latency against
    /// the target, adjusts budget and interval, resets the measurement
    /// window, and returns when the next step is due.
    pub fn fast_loop_step(&mut self, now: SimTime) -> SimTime {
        // No completions during the interval means the backend stalled;
        // treat as a violation at twice the target.
        let m = self.min_latency_window.unwrap_or(self.target_us * 2);
        if m > self.target_us {
            let severity = (m - self.target_us) as f64 / m as f64;
            let decrease = (self.cfg.alpha * self.budget_capacity as f64 * severity).ceil() as u64;
            self.budget_capacity = self
                .budget_capacity
                .saturating_sub(decrease)
                .max(self.cfg.budget_min);
            self.violation_count += 1;
            self.interval_current_us = (self.interval_current_us
                / (self.violation_count as f64).sqrt())
            .max(self.cfg.interval_min_us as f64);
        } else {
            self.budget_capacity = self
                .budget_capacity
                .saturating_add(self.cfg.budget_increment)
                .min(self.cfg.budget_max);
            self.interval_current_us = self.cfg.interval_initial_us as f64;
            self.violation_count = 0;
        }
        self.min_latency_window = None;
        now + self.interval_current_us.round() as u64
    }
}

impl AdmissionController for QbaCodel {
    fn kind(&self) -> &'static str {
        "qba_codel"
    }

    fn can_admit(&self, cost: u64) -> bool {
        self.budget_used == 0 || self.budget_used + cost <= self.budget_capacity
    }

    fn on_submit(&mut self, cost: u64, _now: SimTime) {
        self.budget_used += cost;
    }

    fn on_complete(&mut self, cost: u64, backend_latency_us: u64, _now: SimTime) {
        self.budget_used = self.budget_used.saturating_sub(cost);
        self.min_latency_window = Some(match self.min_latency_window {
            Some(m) => m.min(backend_latency_us),
            None => backend_latency_us,
        });
    }

    fn on_timer(&mut self, now: SimTime) -> Option<SimTime> {
        Some(self.fast_loop_step(now))
    }

    fn set_target(&mut self, target_us: u64) {
        self.target_us = target_us.max(1);
    }

    fn target_us(&self) -> Option<u64> {
        Some(self.target_us)
    }

    fn budget(&self) -> Option<BudgetSnapshot> {
        Some(BudgetSnapshot {
            used: self.budget_used,
            capacity: self.budget_capacity,
        })
    }

    fn interval_us(&self) -> Option<f64> {
        Some(self.interval_current_us)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codel(cfg: QbaCodelConfig) -> QbaCodel {
        QbaCodel::new(cfg)
    }

    #[test]
    fn cost_of_is_size_plus_fixed() {
        assert_eq!(cost_of(4096, 0), 4096);
        assert_eq!(cost_of(65536, 0), 65536);
        assert_eq!(cost_of(4096, 512), 4608);
    }

    #[test]
    fn can_admit_budget_arithmetic() {
        let mut c = codel(QbaCodelConfig {
            initial_capacity: 100,
            budget_min: 1,
            budget_max: 1000,
            ..Default::default()
        });
        assert!(c.can_admit(150), "anti-deadlock: admissible at used=0");
        c.on_submit(60, SimTime::ZERO);
        assert!(!c.can_admit(50));
        assert!(c.can_admit(40));
    }

    #[test]
    fn on_complete_releases_budget_and_tracks_min() {
        let mut c = codel(QbaCodelConfig {
            initial_capacity: 1000,
            budget_min: 1,
            ..Default::default()
        });
        c.on_submit(100, SimTime::ZERO);
        assert_eq!(c.budget().unwrap().used, 100);
        c.on_complete(40, 12_000, SimTime(1));
        assert_eq!(c.budget().unwrap().used, 60);
        assert_eq!(c.min_latency_window(), Some(12_000));
        c.on_complete(20, 8_000, SimTime(2));
        assert_eq!(c.min_latency_window(), Some(8_000));
        c.on_complete(0, 12_000, SimTime(3));
        assert_eq!(c.min_latency_window(), Some(8_000));
    }

    #[test]
    fn violation_step_decreases_budget_by_severity() {
        // m=15ms, target=10ms, capacity=1MiB, alpha=0.5
        // decrease = ceil(0.5 * 1048576 * 5/15) = 174763
        let mut c = codel(QbaCodelConfig {
            target_us: 10_000,
            initial_capacity: 1024 * 1024,
            budget_min: 1,
            budget_max: 64 * 1024 * 1024,
            alpha: 0.5,
            interval_initial_us: 100_000,
            interval_min_us: 1_000,
            budget_increment: 65_536,
        });
        c.on_submit(1, SimTime::ZERO);
        c.on_complete(1, 15_000, SimTime(1));
        let next = c.fast_loop_step(SimTime(100_000));
        assert_eq!(c.budget().unwrap().capacity, 1024 * 1024 - 174_763);
        assert_eq!(c.violation_count(), 1);
        // interval / sqrt(1) unchanged
        assert_eq!(c.interval_current_us(), 100_000.0);
        assert_eq!(next, SimTime(200_000));
    }

    #[test]
    fn interval_compounds_by_sqrt_factorial() {
        let mut c = codel(QbaCodelConfig {
            target_us: 10_000,
            interval_initial_us: 100_000,
            interval_min_us: 1,
            ..Default::default()
        });
        let initial = 100_000.0f64;
        let mut fact = 1.0f64;
        for k in 1..=6u32 {
            c.on_complete(0, 50_000, SimTime(k as u64));
            c.fast_loop_step(SimTime(k as u64 * 100));
            fact *= k as f64;
            let expect = initial / fact.sqrt();
            let got = c.interval_current_us();
            assert!(
                (got - expect).abs() / expect < 1e-12,
                "k={k}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn non_violation_resets_interval_and_count_and_grows_budget() {
        let mut c = codel(QbaCodelConfig {
            target_us: 10_000,
            initial_capacity: 1024 * 1024,
            budget_increment: 65_536,
            ..Default::default()
        });
        c.on_complete(0, 15_000, SimTime(1));
        c.fast_loop_step(SimTime(100));
        c.on_complete(0, 15_000, SimTime(101));
        c.fast_loop_step(SimTime(200));
        assert_eq!(c.violation_count(), 2);
        let cap_before = c.budget().unwrap().capacity;
        c.on_complete(0, 8_000, SimTime(201));
        c.fast_loop_step(SimTime(300));
        assert_eq!(c.violation_count(), 0);
        assert_eq!(c.interval_current_us(), 100_000.0);
        assert_eq!(c.budget().unwrap().capacity, cap_before + 65_536);
    }

    #[test]
    fn absent_window_counts_as_violation() {
        let mut c = codel(QbaCodelConfig {
            target_us: 10_000,
            ..Default::default()
        });
        c.fast_loop_step(SimTime(100));
        assert_eq!(c.violation_count(), 1);
    }

    #[test]
    fn capacity_clamps_hold() {
        let mut c = codel(QbaCodelConfig {
            target_us: 100,
            initial_capacity: 10_000,
            budget_min: 4_096,
            budget_max: 20_000,
            budget_increment: 65_536,
            alpha: 1.0,
            ..Default::default()
        });
        // Severe violations drive capacity down to the floor, never below.
        for i in 0..10 {
            c.on_complete(0, 1_000_000, SimTime(i));
            c.fast_loop_step(SimTime(i * 100 + 100));
            let cap = c.budget().unwrap().capacity;
            assert!(cap >= 4_096, "capacity {cap} below floor");
        }
        assert_eq!(c.budget().unwrap().capacity, 4_096);
        // A run of good intervals saturates at the ceiling.
        for i in 0..10 {
            c.on_complete(0, 10, SimTime(1000 + i));
            c.fast_loop_step(SimTime(100_000 + i * 100));
            assert!(c.budget().unwrap().capacity <= 20_000);
        }
        assert_eq!(c.budget().unwrap().capacity, 20_000);
    }

    #[test]
    fn interval_floor_holds() {
        let mut c = codel(QbaCodelConfig {
            target_us: 10,
            interval_initial_us: 10_000,
            interval_min_us: 1_000,
            ..Default::default()
        });
        for i in 0..200u64 {
            c.on_complete(0, 1_000_000, SimTime(i));
            c.fast_loop_step(SimTime(i * 10 + 10));
        }
        assert_eq!(c.interval_current_us(), 1_000.0);
    }

    #[test]
    fn static_budget_capacity_constant() {
        let mut s = StaticBudget::new(500);
        assert!(s.can_admit(600), "anti-deadlock at used=0");
        s.on_submit(400, SimTime::ZERO);
        assert!(!s.can_admit(200));
        s.on_complete(400, 1, SimTime(1));
        assert_eq!(s.budget().unwrap().capacity, 500);
        assert!(s.on_timer(SimTime(5)).is_none());
    }

    #[test]
    fn unlimited_always_admits() {
        let u = Unlimited;
        assert!(u.can_admit(u64::MAX));
        assert!(u.budget().is_none());
    }
}
