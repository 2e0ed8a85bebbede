//! Black-box storage backend: an unbounded internal buffer plus a single
//! batch service station. Batching amortizes a fixed per-batch overhead,
//! which produces both the bufferbloat under study and the saturating
//! throughput-latency curve.

use rand_distr::{Distribution, Normal};

use crate::engine::{RngStream, SimTime};
use crate::workload::Request;

#[derive(Debug, Clone)]
pub struct BackendConfig {
    /// Max requests pulled into one service batch.
    pub batch_max: u32,
    /// Fixed overhead per batch, microseconds.
    pub t_fixed_us: f64,
    /// Per-byte service time, microseconds per byte.
    pub t_per_byte_us: f64,
    /// Per-request service time, microseconds. Zero by default; raising it
    /// separates the throughput-latency curves of different request sizes.
    pub t_per_request_us: f64,
    /// Log-scale std of the multiplicative service-time noise. The noise
    /// factor is mean-1 (mu = -sigma^2/2), so expected service time is
    /// noise-invariant.
    pub noise_sigma: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            batch_max: 64,
            t_fixed_us: 500.0,
            t_per_byte_us: 0.01,
            t_per_request_us: 0.0,
            noise_sigma: 0.3,
        }
    }
}

#[derive(Debug)]
pub struct Backend {
    cfg: BackendConfig,
    buffer: std::collections::VecDeque<Request>,
    in_service: Vec<Request>,
    in_backend_cost: u64,
    noise: RngStream,
}

impl Backend {
    pub fn new(cfg: BackendConfig, noise: RngStream) -> Self {
        Self {
            cfg,
            buffer: std::collections::VecDeque::new(),
            in_service: Vec::new(),
            in_backend_cost: 0,
            noise,
        }
    }

    pub fn busy(&self) -> bool {
        !self.in_service.is_empty()
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Requests inside the backend: buffered plus in the current batch.
    pub fn in_backend_count(&self) -> u64 {
        (self.buffer.len() + self.in_service.len()) as u64
    }

    /// Total cost of requests inside the backend.
    pub fn in_backend_cost(&self) -> u64 {
        self.in_backend_cost
    }

    /// Accept an admitted request into the (unbounded) buffer. If the
    /// station is idle a batch starts immediately; the returned time is when
    /// its completion event must fire.
    pub fn submit(&mut self, r: Request, now: SimTime) -> Option<SimTime> {
        self.in_backend_cost += r.cost;
        self.buffer.push_back(r);
        if self.busy() {
            None
        } else {
            self.start_batch(now)
        }
    }

    /// Pull up to `batch_max` requests from the buffer and start serving
    /// them. Returns the batch completion time, or `None` if the station is
    /// busy or the buffer empty.
    pub fn start_batch(&mut self, now: SimTime) -> Option<SimTime> {
        if self.busy() || self.buffer.is_empty() {
            return None;
        }
        let n = (self.cfg.batch_max as usize).min(self.buffer.len());
        self.in_service.extend(self.buffer.drain(..n));
        let bytes: u64 = self.in_service.iter().map(|r| r.size).sum();
        let nominal = self.cfg.t_fixed_us
            + self.cfg.t_per_byte_us * bytes as f64
            + self.cfg.t_per_request_us * n as f64;
        let service = nominal * self.noise_factor();
        // Round half-up to integer ticks, with a 1-tick floor so time
        // always advances.
        let ticks = (service.round() as u64).max(1);
        Some(now + ticks)
    }

    fn noise_factor(&mut self) -> f64 {
        let sigma = self.cfg.noise_sigma;
        if sigma == 0.0 {
            return 1.0;
        }
        let normal = Normal::new(-sigma * sigma / 2.0, sigma).expect("valid sigma");
        normal.sample(self.noise.rng()).exp()
    }

    /// Finish the batch in service, stamping completion times. The caller
    /// forwards completions and then calls [`Backend::start_batch`] again.
    pub fn complete_batch(&mut self, now: SimTime) -> Vec<Request> {
        let mut done: Vec<Request> = self.in_service.drain(..).collect();
        for r in &mut done {
            r.t_backend_done = Some(now);
            self.in_backend_cost -= r.cost;
        }
        done
    }
}
