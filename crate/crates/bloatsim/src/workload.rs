//! Closed-loop workload generator: keeps a fixed number of outstanding
//! requests in flight (iodepth semantics), with per-phase request size and
//! depth, and phase switches at cumulative boundaries.

use std::collections::HashSet;

use crate::admission::cost_of;
use crate::engine::SimTime;
use crate::error::SimError;

/// One write operation flowing frontend -> backend -> completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: u64,
    pub size: u64,
    pub cost: u64,
    pub t_created: SimTime,
    pub t_admitted: Option<SimTime>,
    pub t_backend_done: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadPhase {
    pub duration_us: u64,
    pub request_size: u64,
    pub queue_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkloadSpec {
    pub phases: Vec<WorkloadPhase>,
    /// Delay between a completion and the replacement issue. Defaults to 0
    /// (pure saturation workload).
    pub think_time_us: u64,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.phases.is_empty() {
            return Err(SimError::Config("workload has no phases".into()));
        }
        for (i, p) in self.phases.iter().enumerate() {
            if p.request_size == 0 {
                return Err(SimError::Config(format!("phase {i}: request_size must be > 0")));
            }
            if p.queue_depth == 0 {
                return Err(SimError::Config(format!("phase {i}: queue_depth must be >= 1")));
            }
            if p.duration_us == 0 {
                return Err(SimError::Config(format!("phase {i}: duration must be > 0")));
            }
        }
        Ok(())
    }

    /// Cumulative phase-switch times: `(boundary, index of phase starting
    /// there)` for every phase after the first.
    pub fn boundaries(&self) -> Vec<(SimTime, usize)> {
        let mut t = 0u64;
        let mut out = Vec::new();
        for (i, p) in self.phases.iter().enumerate() {
            if i > 0 {
                out.push((SimTime(t), i));
            }
            t += p.duration_us;
        }
        out
    }
}

/// Closed-loop generator state. Replacement creation is two-step: a
/// completion *decides* how many replacements to issue (so depth drops are
/// honored), and the driver creates them at the issue event, stamping the
/// then-current phase's size.
#[derive(Debug)]
pub struct Workload {
    spec: WorkloadSpec,
    cost_fixed: u64,
    current_phase: usize,
    next_id: u64,
    outstanding: u64,
    pending_issues: u64,
    created: u64,
    completed: u64,
    live: HashSet<u64>,
}

impl Workload {
    pub fn new(spec: WorkloadSpec, cost_fixed: u64) -> Result<Self, SimError> {
        spec.validate()?;
        Ok(Self {
            spec,
            cost_fixed,
            current_phase: 0,
            next_id: 0,
            outstanding: 0,
            pending_issues: 0,
            created: 0,
            completed: 0,
            live: HashSet::new(),
        })
    }

    pub fn think_time_us(&self) -> u64 {
        self.spec.think_time_us
    }

    pub fn boundaries(&self) -> Vec<(SimTime, usize)> {
        self.spec.boundaries()
    }

    pub fn current_depth(&self) -> u64 {
        self.spec.phases[self.current_phase].queue_depth as u64
    }

    pub fn outstanding(&self) -> u64 {
        self.outstanding
    }

    pub fn created(&self) -> u64 {
        self.created
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    /// Number of requests the initial burst at t=0 should contain.
    pub fn initial_issue_count(&mut self) -> u32 {
        let want = self.current_depth();
        let deficit = want.saturating_sub(self.outstanding + self.pending_issues);
        self.pending_issues += deficit;
        deficit as u32
    }

    /// Create `count` requests with the current phase's size.
    pub fn create_requests(&mut self, count: u32, now: SimTime) -> Vec<Request> {
        let phase = &self.spec.phases[self.current_phase];
        let mut out = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let id = self.next_id;
            self.next_id += 1;
            self.created += 1;
            self.outstanding += 1;
            self.pending_issues = self.pending_issues.saturating_sub(1);
            self.live.insert(id);
            out.push(Request {
                id,
                size: phase.request_size,
                cost: cost_of(phase.request_size, self.cost_fixed),
                t_created: now,
                t_admitted: None,
                t_backend_done: None,
            });
        }
        out
    }

    /// Account a completion and decide how many replacements to issue. A
    /// depth decrease suppresses replacements until outstanding falls back
    /// under the new depth.
    pub fn on_completion(&mut self, id: u64, _now: SimTime) -> Result<u32, SimError> {
        if !self.live.remove(&id) {
            return Err(SimError::UnknownCompletion(id));
        }
        self.completed += 1;
        self.outstanding -= 1;
        let want = self.current_depth();
        if self.outstanding + self.pending_issues < want {
            self.pending_issues += 1;
            Ok(1)
        } else {
            Ok(0)
        }
    }

    /// Switch to the given phase. Tops up issues when the new depth is
    /// higher; in-flight requests are never cancelled.
    pub fn on_phase_switch(&mut self, phase_idx: usize) -> u32 {
        self.current_phase = phase_idx;
        let want = self.current_depth();
        let deficit = want.saturating_sub(self.outstanding + self.pending_issues);
        self.pending_issues += deficit;
        deficit as u32
    }
}
