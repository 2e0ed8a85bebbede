//! Deterministic discrete-event core: logical clock, ordered event queue,
//! seeded per-consumer random streams.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::SimError;

/// Logical simulation time in integer microseconds since simulation start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn micros(us: u64) -> Self {
        SimTime(us)
    }

    pub fn millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub fn secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    pub fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: SimTime) -> u64 {
        self.0.saturating_sub(other.0)
    }
}

impl std::ops::Add<u64> for SimTime {
    type Output = SimTime;
    fn add(self, rhs: u64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl std::fmt::Display for SimTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// What a scheduled event does when it fires. The simulation driver matches
/// on this to route the event to the owning component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// Create `count` new requests with the current phase's size and hand
    /// them to the frontend.
    RequestIssue { count: u32 },
    /// The batch currently in service at the backend finishes.
    BatchComplete,
    /// Fast-loop controller timer.
    FastLoopTimer,
    /// Slow-loop (target adjusting) timer.
    SlowLoopTimer,
    /// Switch the workload to phase `phase_idx`.
    PhaseSwitch { phase_idx: usize },
    /// Periodic gauge sampling into the trace series.
    MeasurementFlush,
}

impl EventKind {
    /// Short stable tag used in dispatch logs.
    pub fn tag(&self) -> &'static str {
        match self {
            EventKind::RequestIssue { .. } => "request-issue",
            EventKind::BatchComplete => "batch-complete",
            EventKind::FastLoopTimer => "fast-loop-timer",
            EventKind::SlowLoopTimer => "slow-loop-timer",
            EventKind::PhaseSwitch { .. } => "phase-switch",
            EventKind::MeasurementFlush => "measurement-flush",
        }
    }
}

/// A scheduled event. Events with equal `fire_at` dispatch in `seq` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub fire_at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so the BinaryHeap pops the earliest (fire_at, seq) first.
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Handle returned by [`EventQueue::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// Min-ordered event queue keyed on `(fire_at, seq)` with a logical clock.
///
/// Cancellation is tombstone-based: cancelled handles are skipped at pop
/// time. Bookkeeping counters allow asserting that no event is ever lost.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    cancelled: HashSet<u64>,
    now: SimTime,
    next_seq: u64,
    scheduled: u64,
    dispatched: u64,
    cancelled_count: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Schedule `kind` to fire at `fire_at`. Scheduling in the past is an
    /// engine bug and returns a hard error.
    pub fn schedule(&mut self, fire_at: SimTime, kind: EventKind) -> Result<EventHandle, SimError> {
        if fire_at < self.now {
            return Err(SimError::ScheduleInPast {
                now: self.now.as_micros(),
                fire_at: fire_at.as_micros(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.scheduled += 1;
        self.heap.push(Event { fire_at, seq, kind });
        Ok(EventHandle(seq))
    }

    /// Cancel a scheduled event. Returns true if it was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.cancelled.insert(handle.0) {
            self.cancelled_count += 1;
            true
        } else {
            false
        }
    }

    /// Pop the next event with `fire_at <= t_end`, advancing the clock to its
    /// fire time. When the queue is exhausted up to `t_end`, the clock is
    /// advanced to `t_end` and `None` is returned.
    pub fn pop_next(&mut self, t_end: SimTime) -> Option<Event> {
        loop {
            match self.heap.peek() {
                Some(ev) if ev.fire_at <= t_end => {
                    let ev = self.heap.pop().unwrap();
                    if self.cancelled.remove(&ev.seq) {
                        continue;
                    }
                    debug_assert!(ev.fire_at >= self.now, "clock monotonicity violated");
                    self.now = ev.fire_at;
                    self.dispatched += 1;
                    return Some(ev);
                }
                _ => {
                    if t_end > self.now {
                        self.now = t_end;
                    }
                    return None;
                }
            }
        }
    }

    /// Pending (scheduled, not yet dispatched or cancelled) event count.
    pub fn pending(&self) -> u64 {
        self.scheduled - self.dispatched - self.cancelled_count
    }

    /// Conservation check: scheduled − cancelled − dispatched − pending = 0.
    pub fn conservation_holds(&self) -> bool {
        let live = self.heap.len() as u64 - self.cancelled.len() as u64;
        self.scheduled - self.cancelled_count - self.dispatched == live
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }
}

/// A seeded random stream. The same `(seed, stream_id)` pair yields an
/// identical sample sequence across runs and platforms.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha12Rng,
}

/// Stream ids, one per randomness consumer so enabling one consumer never
/// perturbs another's samples.
pub mod stream_id {
    pub const WORKLOAD: u64 = 1;
    pub const BACKEND_NOISE: u64 = 2;
    pub const SLOW_LOOP_NOISE: u64 = 3;
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_time_dispatches_in_seq_order() {
        let mut q = EventQueue::new();
        let kind = EventKind::MeasurementFlush;
        // Interleave schedule order so heap order is exercised.
        q.schedule(SimTime(100), EventKind::BatchComplete).unwrap(); // seq 0
        q.schedule(SimTime(100), kind).unwrap(); // seq 1
        q.schedule(SimTime(50), kind).unwrap(); // seq 2
        let order: Vec<u64> = std::iter::from_fn(|| q.pop_next(SimTime(1000)))
            .map(|e| e.seq)
            .collect();
        assert_eq!(order, vec![2, 0, 1]);
    }

    #[test]
    fn schedule_at_now_dispatches_after_earlier_seq_same_time() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(0), EventKind::MeasurementFlush).unwrap(); // seq 0
        q.schedule(SimTime(0), EventKind::BatchComplete).unwrap(); // seq 1
        let first = q.pop_next(SimTime(0)).unwrap();
        assert_eq!(first.seq, 0);
        // Schedule at now+0 while an earlier-seq same-time event is pending.
        q.schedule(SimTime(0), EventKind::FastLoopTimer).unwrap(); // seq 2
        assert_eq!(q.pop_next(SimTime(0)).unwrap().seq, 1);
        assert_eq!(q.pop_next(SimTime(0)).unwrap().seq, 2);
    }

    #[test]
    fn schedule_in_past_is_error() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(10), EventKind::MeasurementFlush).unwrap();
        q.pop_next(SimTime(10)).unwrap();
        assert!(q.schedule(SimTime(9), EventKind::MeasurementFlush).is_err());
    }

    #[test]
    fn run_until_empty_queue_advances_clock() {
        let mut q = EventQueue::new();
        assert!(q.pop_next(SimTime(1000)).is_none());
        assert_eq!(q.now(), SimTime(1000));
    }

    #[test]
    fn only_events_before_t_end_dispatch() {
        let mut q = EventQueue::new();
        for t in [10u64, 20, 30, 500] {
            q.schedule(SimTime(t), EventKind::MeasurementFlush).unwrap();
        }
        let mut n = 0;
        while q.pop_next(SimTime(100)).is_some() {
            n += 1;
        }
        assert_eq!(n, 3);
        assert_eq!(q.pending(), 1);
    }

    #[test]
    fn handler_scheduled_event_within_t_end_also_dispatches() {
        // Model the driver loop: a dispatched event schedules a follow-up
        // inside the same run_until horizon.
        let mut q = EventQueue::new();
        q.schedule(SimTime(10), EventKind::MeasurementFlush).unwrap();
        let mut seen = vec![];
        while let Some(ev) = q.pop_next(SimTime(100)) {
            seen.push(ev.fire_at.as_micros());
            if seen.len() == 1 {
                q.schedule(SimTime(50), EventKind::MeasurementFlush).unwrap();
            }
        }
        assert_eq!(seen, vec![10, 50]);
    }

    #[test]
    fn cancelled_events_are_skipped() {
        let mut q = EventQueue::new();
        let h = q.schedule(SimTime(10), EventKind::MeasurementFlush).unwrap();
        q.schedule(SimTime(20), EventKind::MeasurementFlush).unwrap();
        assert!(q.cancel(h));
        assert!(!q.cancel(h));
        let ev = q.pop_next(SimTime(100)).unwrap();
        assert_eq!(ev.fire_at, SimTime(20));
        assert!(q.conservation_holds());
    }

    #[test]
    fn rng_stream_is_reproducible_and_streams_are_independent() {
        let mut a = RngStream::new(42, stream_id::WORKLOAD);
        let mut b = RngStream::new(42, stream_id::WORKLOAD);
        let mut c = RngStream::new(42, stream_id::BACKEND_NOISE);
        let xs: Vec<u64> = (0..8).map(|_| a.rng().gen()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.rng().gen()).collect();
        let zs: Vec<u64> = (0..8).map(|_| c.rng().gen()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }
}
