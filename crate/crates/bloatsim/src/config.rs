//! Declarative scenario configuration: TOML sections for run, workload,
//! backend, admission, slow loop, and output, with `key=value` override
//! support for sweeps.

use serde::{Deserialize, Serialize};

use crate::admission::{AdmissionController, QbaCodel, QbaCodelConfig, StaticBudget, Unlimited};
use crate::backend::BackendConfig;
use crate::error::SimError;
use crate::target_adjust::SlowLoopConfig;
use crate::workload::{WorkloadPhase, WorkloadSpec};

fn d_warmup_frac() -> f64 {
    0.1
}
fn d_trace_sample_ms() -> u64 {
    100
}
fn d_batch_max() -> u32 {
    64
}
fn d_t_fixed_us() -> f64 {
    500.0
}
fn d_t_per_byte_us() -> f64 {
    0.01
}
fn d_noise_sigma() -> f64 {
    0.3
}
fn d_target_us() -> u64 {
    5_000
}
fn d_interval_initial_us() -> u64 {
    100_000
}
fn d_interval_min_us() -> u64 {
    1_000
}
fn d_budget_max() -> u64 {
    64 * 1024 * 1024
}
fn d_budget_min() -> u64 {
    4_096
}
fn d_budget_increment() -> u64 {
    64 * 1024
}
fn d_alpha() -> f64 {
    0.5
}
fn d_target_slope() -> f64 {
    5.0
}
fn d_slow_interval_us() -> u64 {
    2_000_000
}
fn d_history_len() -> usize {
    100
}
fn d_slow_noise_sigma() -> f64 {
    0.25
}
fn d_target_floor_us() -> u64 {
    1_000
}
fn d_target_ceiling_us() -> u64 {
    10_000_000
}
fn d_min_fit_points() -> usize {
    8
}
fn d_min_distinct_targets() -> usize {
    4
}
fn d_latency_unit_us() -> f64 {
    1_000.0
}
fn d_throughput_unit() -> f64 {
    1_000_000.0
}
fn d_out_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: f64,
    pub seed: u64,
    /// Fraction of the run excluded from steady-state summaries.
    #[serde(default = "d_warmup_frac")]
    pub warmup_frac: f64,
    #[serde(default = "d_trace_sample_ms")]
    pub trace_sample_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub duration_s: f64,
    pub request_size: u64,
    pub queue_depth: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    #[serde(default)]
    pub think_time_us: u64,
    pub phases: Vec<PhaseSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default = "d_batch_max")]
    pub batch_max: u32,
    #[serde(default = "d_t_fixed_us")]
    pub t_fixed_us: f64,
    #[serde(default = "d_t_per_byte_us")]
    pub t_per_byte_us: f64,
    #[serde(default)]
    pub t_per_request_us: f64,
    #[serde(default = "d_noise_sigma")]
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionKind {
    Unlimited,
    Static,
    QbaCodel,
    SfCodel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmissionSection {
    pub kind: AdmissionKind,
    #[serde(default)]
    pub cost_fixed: u64,
    /// Fixed capacity, required for `kind = "static"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u64>,
    #[serde(default = "d_target_us")]
    pub target_us: u64,
    #[serde(default = "d_interval_initial_us")]
    pub interval_initial_us: u64,
    #[serde(default = "d_interval_min_us")]
    pub interval_min_us: u64,
    #[serde(default = "d_budget_max")]
    pub initial_capacity: u64,
    #[serde(default = "d_budget_min")]
    pub budget_min: u64,
    #[serde(default = "d_budget_max")]
    pub budget_max: u64,
    #[serde(default = "d_budget_increment")]
    pub budget_increment: u64,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfCodelSection {
    #[serde(default = "d_target_slope")]
    pub target_slope: f64,
    #[serde(default = "d_slow_interval_us")]
    pub slow_interval_us: u64,
    #[serde(default = "d_history_len")]
    pub history_len: usize,
    #[serde(default = "d_slow_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "d_target_floor_us")]
    pub target_floor_us: u64,
    #[serde(default = "d_target_ceiling_us")]
    pub target_ceiling_us: u64,
    #[serde(default = "d_min_fit_points")]
    pub min_fit_points: usize,
    #[serde(default = "d_min_distinct_targets")]
    pub min_distinct_targets: usize,
    #[serde(default = "d_latency_unit_us")]
    pub latency_unit_us: f64,
    #[serde(default = "d_throughput_unit")]
    pub throughput_unit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "d_out_dir")]
    pub dir: String,
    #[serde(default)]
    pub per_request: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: d_out_dir(),
            per_request: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunSection,
    pub workload: WorkloadSection,
    pub backend: BackendSection,
    pub admission: AdmissionSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sf_codel: Option<SfCodelSection>,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig =
            toml::from_str(s).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, SimError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.run.duration_s <= 0.0 {
            return Err(SimError::Config("run.duration_s must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.run.warmup_frac) {
            return Err(SimError::Config("run.warmup_frac must be in [0, 1)".into()));
        }
        self.to_workload_spec().validate()?;
        if self.backend.batch_max == 0 {
            return Err(SimError::Config("backend.batch_max must be >= 1".into()));
        }
        if self.backend.t_fixed_us <= 0.0 || self.backend.t_per_byte_us <= 0.0 {
            return Err(SimError::Config(
                "backend.t_fixed_us and backend.t_per_byte_us must be > 0".into(),
            ));
        }
        if self.backend.noise_sigma < 0.0 {
            return Err(SimError::Config("backend.noise_sigma must be >= 0".into()));
        }
        match self.admission.kind {
            AdmissionKind::Static if self.admission.capacity.is_none() => {
                return Err(SimError::Config(
                    "admission.capacity is required for kind = \"static\"".into(),
                ));
            }
            AdmissionKind::SfCodel if self.sf_codel.is_none() => {
                return Err(SimError::Config(
                    "[sf_codel] section is required for kind = \"sf_codel\"".into(),
                ));
            }
            _ => {}
        }
        if let Some(sf) = &self.sf_codel {
            if sf.target_slope <= 0.0 {
                return Err(SimError::Config("sf_codel.target_slope must be > 0".into()));
            }
            if sf.noise_sigma < 0.0 {
                return Err(SimError::Config("sf_codel.noise_sigma must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn duration_us(&self) -> u64 {
        (self.run.duration_s * 1e6).round() as u64
    }

    pub fn warmup_us(&self) -> u64 {
        (self.run.duration_s * self.run.warmup_frac * 1e6).round() as u64
    }

    pub fn to_workload_spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            phases: self
                .workload
                .phases
                .iter()
                .map(|p| WorkloadPhase {
                    duration_us: (p.duration_s * 1e6).round() as u64,
                    request_size: p.request_size,
                    queue_depth: p.queue_depth,
                })
                .collect(),
            think_time_us: self.workload.think_time_us,
        }
    }

    pub fn to_backend_config(&self) -> BackendConfig {
        BackendConfig {
            batch_max: self.backend.batch_max,
            t_fixed_us: self.backend.t_fixed_us,
            t_per_byte_us: self.backend.t_per_byte_us,
            t_per_request_us: self.backend.t_per_request_us,
            noise_sigma: self.backend.noise_sigma,
        }
    }

    pub fn to_qba_config(&self) -> QbaCodelConfig {
        QbaCodelConfig {
            target_us: self.admission.target_us,
            interval_initial_us: self.admission.interval_initial_us,
            interval_min_us: self.admission.interval_min_us,
            initial_capacity: self.admission.initial_capacity,
            budget_min: self.admission.budget_min,
            budget_max: self.admission.budget_max,
            budget_increment: self.admission.budget_increment,
            alpha: self.admission.alpha,
        }
    }

    pub fn to_slow_loop_config(&self) -> Option<SlowLoopConfig> {
        let sf = self.sf_codel.as_ref()?;
        Some(SlowLoopConfig {
            interval_us: sf.slow_interval_us,
            history_len: sf.history_len,
            target_slope: sf.target_slope,
            noise_sigma: sf.noise_sigma,
            target_floor_us: sf.target_floor_us,
            target_ceiling_us: sf.target_ceiling_us,
            min_fit_points: sf.min_fit_points,
            min_distinct_targets: sf.min_distinct_targets,
            latency_unit_us: sf.latency_unit_us,
            throughput_unit: sf.throughput_unit,
        })
    }

    pub fn build_controller(&self) -> Box<dyn AdmissionController> {
        match self.admission.kind {
            AdmissionKind::Unlimited => Box::new(Unlimited),
            AdmissionKind::Static => Box::new(StaticBudget::new(
                self.admission.capacity.expect("validated"),
            )),
            AdmissionKind::QbaCodel | AdmissionKind::SfCodel => {
                Box::new(QbaCodel::new(self.to_qba_config()))
            }
        }
    }

    /// Fully resolved config echo for summaries: every default filled in,
    /// output section dropped so report hashes do not depend on paths.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().unwrap().remove("output");
        v
    }
}

/// Parse a `--set key=value` literal: tries integer, then float, then bool,
/// then falls back to string.
fn parse_literal(s: &str) -> toml::Value {
    if let Ok(i) = s.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = s.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = s.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(s.to_string())
    }
}

/// Apply a dotted-path override to a parsed TOML document.
///
/// `workload.queue_depth` and `workload.request_size` are shorthands that
/// apply to every phase; numeric path segments index into arrays.
pub fn apply_override(doc: &mut toml::Value, key: &str, raw_value: &str) -> Result<(), SimError> {
    let value = parse_literal(raw_value);
    if key == "workload.queue_depth" || key == "workload.request_size" {
        let field = key.rsplit('.').next().unwrap();
        let phases = doc
            .get_mut("workload")
            .and_then(|w| w.get_mut("phases"))
            .and_then(|p| p.as_array_mut())
            .ok_or_else(|| SimError::Config("no workload.phases to override".into()))?;
        for phase in phases {
            phase
                .as_table_mut()
                .ok_or_else(|| SimError::Config("phase is not a table".into()))?
                .insert(field.to_string(), value.clone());
        }
        return Ok(());
    }

    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i == parts.len() - 1;
        if let Ok(idx) = part.parse::<usize>() {
            let arr = node
                .as_array_mut()
                .ok_or_else(|| SimError::Config(format!("{key}: '{part}' indexes a non-array")))?;
            if idx >= arr.len() {
                return Err(SimError::Config(format!("{key}: index {idx} out of range")));
            }
            if last {
                arr[idx] = value;
                return Ok(());
            }
            node = &mut arr[idx];
        } else {
            let table = node
                .as_table_mut()
                .ok_or_else(|| SimError::Config(format!("{key}: '{part}' is not a table")))?;
            if last {
                table.insert(part.to_string(), value);
                return Ok(());
            }
            node = table
                .entry(part.to_string())
                .or_insert(toml::Value::Table(Default::default()));
        }
    }
    Ok(())
}

/// Parse a config, apply overrides, and validate. Used by `run` (--set) and
/// by `sweep` for each axis value.
pub fn load_with_overrides(
    toml_text: &str,
    overrides: &[(String, String)],
) -> Result<ScenarioConfig, SimError> {
    let mut doc: toml::Value =
        toml::from_str(toml_text).map_err(|e| SimError::Config(e.to_string()))?;
    for (k, v) in overrides {
        apply_override(&mut doc, k, v)?;
    }
    let cfg: ScenarioConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| SimError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
