//! Scenario runner CLI: `run` one scenario, `sweep` a parameter axis, or
//! `fit` a logarithmic curve to offline CSV data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bloatsim::config::{self, ScenarioConfig};
use bloatsim::error::SimError;
use bloatsim::estimation;
use bloatsim::report;
use bloatsim::sim::run_scenario;
use bloatsim::sweep::{self, SeedPolicy};

/// Output directory override, highest precedence after --out.
const OUT_ENV: &str = "BLOATSIM_OUT";

#[derive(Parser)]
#[command(name = "bloatsim", version, about = "Storage-server bufferbloat simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonRunArgs {
    /// Scenario config (TOML).
    config: PathBuf,
    /// Output directory (overrides config and BLOATSIM_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. --set run.seed=7 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario and write its reports.
    Run {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Compare against a previous run's summary.json; embeds
        /// latency-reduction and throughput-loss fields.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Execute one run per axis value and write a combined comparison CSV.
    Sweep {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Dotted config key to sweep, e.g. sf_codel.target_slope.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Derive a distinct seed per value instead of sharing the base seed.
        #[arg(long)]
        per_value_seeds: bool,
        /// Force sequential execution of the sweep runs.
        #[arg(long)]
        sequential: bool,
    },
    /// Fit f(x) = a + b*ln(x) to a CSV with columns x,y.
    Fit {
        csv: PathBuf,
        /// Also print b / slope (the implied optimal target).
        #[arg(long)]
        slope: Option<f64>,
    },
}

fn parse_sets(sets: &[String]) -> Result<Vec<(String, String)>, SimError> {
    sets.iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| SimError::Config(format!("--set expects KEY=VALUE, got '{s}'")))
        })
        .collect()
}

fn resolve_out_dir(flag: &Option<PathBuf>, cfg: &ScenarioConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var(OUT_ENV) {
        return PathBuf::from(dir);
    }
    PathBuf::from(&cfg.output.dir)
}

fn load_config(common: &CommonRunArgs) -> Result<ScenarioConfig, SimError> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| SimError::Config(format!("{}: {e}", common.config.display())))?;
    config::load_with_overrides(&text, &parse_sets(&common.sets)?)
}

fn cmd_run(common: &CommonRunArgs, baseline: &Option<PathBuf>) -> Result<(), String> {
    let cfg = load_config(common).map_err(|e| e.to_string())?;
    let out_dir = resolve_out_dir(&common.out, &cfg);
    let run = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let mut summary = report::build_summary(&run);
    if let Some(path) = baseline {
        let base = report::load_summary(path)?;
        report::attach_comparison(&mut summary, &base, &path.display().to_string());
    }
    let files = report::write_report(&run, &summary, &out_dir).map_err(|e| e.to_string())?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_sweep(
    common: &CommonRunArgs,
    axis: &str,
    values: &[String],
    per_value_seeds: bool,
    sequential: bool,
) -> Result<(), String> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| format!("{}: {e}", common.config.display()))?;
    let overrides = parse_sets(&common.sets).map_err(|e| e.to_string())?;
    let policy = if per_value_seeds {
        SeedPolicy::PerValue
    } else {
        SeedPolicy::Shared
    };
    let points =
        sweep::expand(&text, axis, values, policy, &overrides).map_err(|e| e.to_string())?;
    let out_root = resolve_out_dir(&common.out, &points[0].config);

    let runs = if sequential {
        sweep::run_points_sequential(&points)
    } else {
        sweep::run_points(&points)
    }
    .map_err(|e| e.to_string())?;

    let mut summaries = Vec::with_capacity(runs.len());
    for (point, run) in points.iter().zip(&runs) {
        let summary = report::build_summary(run);
        let dir = out_root.join(format!("{}={}", axis.replace('.', "_"), point.label));
        report::write_report(run, &summary, &dir).map_err(|e| e.to_string())?;
        summaries.push(summary);
    }
    let labels: Vec<String> = points.iter().map(|p| p.label.clone()).collect();
    let csv = sweep::comparison_csv(axis, &labels, &summaries);
    std::fs::create_dir_all(&out_root).map_err(|e| e.to_string())?;
    let path = out_root.join("comparison.csv");
    std::fs::write(&path, csv).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_fit(csv: &PathBuf, slope: Option<f64>) -> Result<(), String> {
    let text = std::fs::read_to_string(csv).map_err(|e| format!("{}: {e}", csv.display()))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue; // optional "x,y" header
        }
        let (xs, ys) = line
            .split_once(',')
            .ok_or_else(|| format!("line {}: expected 'x,y'", lineno + 1))?;
        let x: f64 = xs.trim().parse().map_err(|e| format!("line {}: {e}", lineno + 1))?;
        let y: f64 = ys.trim().parse().map_err(|e| format!("line {}: {e}", lineno + 1))?;
        samples.push((x, y));
    }
    let fit = estimation::fit_log_curve(&samples).map_err(|e| e.to_string())?;
    println!("a = {}", fit.a);
    println!("b = {}", fit.b);
    println!("residual_rms = {}", fit.residual_rms);
    if let Some(s) = slope {
        if s <= 0.0 {
            return Err("--slope must be > 0".into());
        }
        println!("optimal_target = {}", fit.b / s);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { common, baseline } => cmd_run(common, baseline),
        Command::Sweep {
            common,
            axis,
            values,
            per_value_seeds,
            sequential,
        } => cmd_sweep(common, axis, values, *per_value_seeds, *sequential),
        Command::Fit { csv, slope } => cmd_fit(csv, *slope),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
