//! A deterministic discrete-event simulator of a storage server (frontend
//! queue, admission gate, batching backend) together with adaptive
//! CoDel-style admission control: a fast loop that adjusts a queuing budget
//! against a latency target, and a slow loop that adapts the target itself
//! from the measured throughput-latency curve.

pub mod admission;
pub mod backend;
pub mod config;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod frontend;
pub mod metrics;
pub mod report;
pub mod sim;
pub mod sweep;
pub mod target_adjust;
pub mod workload;

pub use config::ScenarioConfig;
pub use engine::SimTime;
pub use error::SimError;
pub use sim::{run_scenario, run_scenario_logged, CompletedRun};
