//! Simulation driver: wires workload, frontend, admission controller,
//! backend, slow loop, and metrics onto the event queue and runs the
//! scenario to completion.

use crate::admission::AdmissionController;
use crate::backend::Backend;
use crate::config::{AdmissionKind, ScenarioConfig};
use crate::engine::{stream_id, Event, EventKind, EventQueue, RngStream, SimTime};
use crate::error::SimError;
use crate::frontend::Frontend;
use crate::metrics::{Dimension, MetricsStore, Window};
use crate::target_adjust::SlowLoop;
use crate::workload::Workload;

/// One line of the dispatch log: `(fire_at, seq, kind tag)`.
pub type DispatchRecord = (u64, u64, &'static str);

pub struct Simulation {
    cfg: ScenarioConfig,
    queue: EventQueue,
    workload: Workload,
    frontend: Frontend,
    backend: Backend,
    controller: Box<dyn AdmissionController>,
    slow_loop: Option<SlowLoop>,
    slow_rng: RngStream,
    metrics: MetricsStore,
    dispatch_log: Option<Vec<DispatchRecord>>,
}

/// Everything a finished run exposes to reporting and tests.
pub struct CompletedRun {
    pub config: ScenarioConfig,
    pub metrics: MetricsStore,
    pub duration: SimTime,
    pub created: u64,
    pub completed: u64,
    pub events_dispatched: u64,
    pub slow_steps: Option<u64>,
    pub fit_skips: Option<u64>,
    pub dispatch_log: Option<Vec<DispatchRecord>>,
}

impl CompletedRun {
    /// Steady-state window: warmup excluded.
    pub fn steady_window(&self) -> Window {
        Window::new(
            SimTime(self.config.warmup_us()),
            self.duration,
        )
    }
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig, collect_dispatch_log: bool) -> Result<Self, SimError> {
        cfg.validate()?;
        let seed = cfg.run.seed;
        let workload = Workload::new(cfg.to_workload_spec(), cfg.admission.cost_fixed)?;
        let backend = Backend::new(
            cfg.to_backend_config(),
            RngStream::new(seed, stream_id::BACKEND_NOISE),
        );
        let controller = cfg.build_controller();
        let slow_loop = if cfg.admission.kind == AdmissionKind::SfCodel {
            Some(SlowLoop::new(
                cfg.to_slow_loop_config().expect("validated"),
                cfg.admission.target_us,
            ))
        } else {
            None
        };
        let mut sim = Self {
            queue: EventQueue::new(),
            workload,
            frontend: Frontend::new(),
            backend,
            controller,
            slow_loop,
            slow_rng: RngStream::new(seed, stream_id::SLOW_LOOP_NOISE),
            metrics: MetricsStore::new(),
            dispatch_log: collect_dispatch_log.then(Vec::new),
            cfg,
        };
        sim.schedule_initial_events()?;
        Ok(sim)
    }

    fn schedule_initial_events(&mut self) -> Result<(), SimError> {
        let count = self.workload.initial_issue_count();
        self.queue
            .schedule(SimTime::ZERO, EventKind::RequestIssue { count })?;
        for (at, phase_idx) in self.workload.boundaries() {
            self.queue.schedule(at, EventKind::PhaseSwitch { phase_idx })?;
        }
        if matches!(
            self.cfg.admission.kind,
            AdmissionKind::QbaCodel | AdmissionKind::SfCodel
        ) {
            self.queue.schedule(
                SimTime(self.cfg.admission.interval_initial_us),
                EventKind::FastLoopTimer,
            )?;
        }
        if self.slow_loop.is_some() {
            let interval = self.cfg.sf_codel.as_ref().expect("validated").slow_interval_us;
            self.queue.schedule(SimTime(interval), EventKind::SlowLoopTimer)?;
        }
        self.queue
            .schedule(SimTime::ZERO, EventKind::MeasurementFlush)?;
        Ok(())
    }

    pub fn run(mut self) -> Result<CompletedRun, SimError> {
        let t_end = SimTime(self.cfg.duration_us());
        while let Some(ev) = self.queue.pop_next(t_end) {
            if let Some(log) = &mut self.dispatch_log {
                log.push((ev.fire_at.as_micros(), ev.seq, ev.kind.tag()));
            }
            self.dispatch(ev)?;
            self.check_invariants()?;
        }
        Ok(CompletedRun {
            duration: t_end,
            created: self.workload.created(),
            completed: self.workload.completed(),
            events_dispatched: self.queue.dispatched(),
            slow_steps: self.slow_loop.as_ref().map(|s| s.steps()),
            fit_skips: self.slow_loop.as_ref().map(|s| s.fit_skips()),
            dispatch_log: self.dispatch_log,
            config: self.cfg,
            metrics: self.metrics,
        })
    }

    fn dispatch(&mut self, ev: Event) -> Result<(), SimError> {
        let now = ev.fire_at;
        match ev.kind {
            EventKind::RequestIssue { count } => {
                for r in self.workload.create_requests(count, now) {
                    self.frontend.on_arrival(r, now)?;
                }
                self.drain(now)?;
            }
            EventKind::BatchComplete => {
                let done = self.backend.complete_batch(now);
                let think = self.workload.think_time_us();
                for r in done {
                    let admitted = r.t_admitted.expect("completed request was admitted");
                    let backend_lat = now.saturating_sub(admitted);
                    let total_lat = now.saturating_sub(r.t_created);
                    self.metrics.record_latency(Dimension::Backend, now, backend_lat);
                    self.metrics.record_latency(Dimension::Total, now, total_lat);
                    self.metrics.record_completion(now, r.cost);
                    if self.cfg.output.per_request {
                        self.metrics.record_request(crate::metrics::RequestRecord {
                            id: r.id,
                            size: r.size,
                            cost: r.cost,
                            t_created_us: r.t_created.as_micros(),
                            t_admitted_us: admitted.as_micros(),
                            t_backend_done_us: now.as_micros(),
                        });
                    }
                    self.controller.on_complete(r.cost, backend_lat, now);
                    if let Some(slow) = &mut self.slow_loop {
                        slow.record_completion(r.cost, now);
                    }
                    let replacements = self.workload.on_completion(r.id, now)?;
                    if replacements > 0 {
                        self.queue.schedule(
                            now + think,
                            EventKind::RequestIssue {
                                count: replacements,
                            },
                        )?;
                    }
                }
                if let Some(t) = self.backend.start_batch(now) {
                    self.queue.schedule(t, EventKind::BatchComplete)?;
                }
                // Budget was released; give the frontend a chance to submit.
                self.drain(now)?;
            }
            EventKind::FastLoopTimer => {
                if let Some(next) = self.controller.on_timer(now) {
                    self.queue.schedule(next, EventKind::FastLoopTimer)?;
                }
                if let Some(b) = self.controller.budget() {
                    self.metrics.record_trace("budget_capacity", now, b.capacity as f64);
                    self.metrics.record_trace("budget_used", now, b.used as f64);
                }
                if let Some(i) = self.controller.interval_us() {
                    self.metrics.record_trace("interval_us", now, i);
                }
                self.drain(now)?;
            }
            EventKind::SlowLoopTimer => {
                let slow = self.slow_loop.as_mut().expect("slow timer without slow loop");
                let (outcome, next) =
                    slow.step(now, self.controller.as_mut(), self.slow_rng.rng());
                self.queue.schedule(next, EventKind::SlowLoopTimer)?;
                self.metrics
                    .record_trace("target_us", now, outcome.installed_target_us as f64);
                self.metrics.record_trace(
                    "throughput_window",
                    now,
                    outcome.throughput_cost_per_s,
                );
                self.metrics
                    .record_trace("fit_ok", now, if outcome.fit_ok { 1.0 } else { 0.0 });
                if let Some(opt) = outcome.optimal_preclamp_us {
                    self.metrics.record_trace("slow_optimal_us", now, opt);
                }
            }
            EventKind::PhaseSwitch { phase_idx } => {
                let top_up = self.workload.on_phase_switch(phase_idx);
                if top_up > 0 {
                    self.queue
                        .schedule(now, EventKind::RequestIssue { count: top_up })?;
                }
            }
            EventKind::MeasurementFlush => {
                self.metrics.record_trace(
                    "backend_buffer_len",
                    now,
                    self.backend.buffer_len() as f64,
                );
                self.metrics.record_trace(
                    "in_backend_count",
                    now,
                    self.backend.in_backend_count() as f64,
                );
                self.metrics.record_trace(
                    "frontend_pending",
                    now,
                    self.frontend.pending_len() as f64,
                );
                self.queue.schedule(
                    now + self.cfg.run.trace_sample_ms * 1_000,
                    EventKind::MeasurementFlush,
                )?;
            }
        }
        Ok(())
    }

    fn drain(&mut self, now: SimTime) -> Result<(), SimError> {
        let backend = &mut self.backend;
        let metrics = &mut self.metrics;
        let queue = &mut self.queue;
        let mut err = None;
        self.frontend.drain(now, self.controller.as_mut(), |r| {
            metrics.record_latency(
                Dimension::Frontend,
                now,
                now.saturating_sub(r.t_created),
            );
            if let Some(t) = backend.submit(r, now) {
                if let Err(e) = queue.schedule(t, EventKind::BatchComplete) {
                    err = Some(e);
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Cross-module accounting checks, asserted after every event:
    /// the controller's used budget equals the backend's in-flight cost,
    /// budget clamps hold, and no request or event has gone missing.
    fn check_invariants(&self) -> Result<(), SimError> {
        if !self.queue.conservation_holds() {
            return Err(SimError::InvariantBreach("event conservation".into()));
        }
        if let Some(b) = self.controller.budget() {
            let in_flight = self.backend.in_backend_cost();
            if b.used != in_flight {
                return Err(SimError::InvariantBreach(format!(
                    "budget accounting: controller used={} backend in-flight={}",
                    b.used, in_flight
                )));
            }
            if self.controller.kind() == "qba_codel" {
                let min = self.cfg.admission.budget_min;
                let max = self.cfg.admission.budget_max;
                if b.capacity < min || b.capacity > max {
                    return Err(SimError::InvariantBreach(format!(
                        "capacity clamp: {} not in [{min}, {max}]",
                        b.capacity
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Build and run one scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<CompletedRun, SimError> {
    Simulation::new(cfg.clone(), false)?.run()
}

/// Like [`run_scenario`] but also collects the event dispatch log, used by
/// replay-determinism checks.
pub fn run_scenario_logged(cfg: &ScenarioConfig) -> Result<CompletedRun, SimError> {
    Simulation::new(cfg.clone(), true)?.run()
}
