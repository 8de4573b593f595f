//! Command-line driver.
//!
//! ```text
//! hcran run [--config FILE] [--sweep AXIS VALUES] [--seed N] [--slots N]
//!           [--warmup N] [--baseline msr] [--strict-bounds] [--strict] [--out DIR]
//! ```
//!
//! Without `--config` the built-in reference scenario is used. Flags override
//! the config file. Every flag has an environment variable with the `HCRAN_`
//! prefix (`HCRAN_CONFIG`, `HCRAN_SEED`, `HCRAN_SLOTS`, `HCRAN_WARMUP`,
//! `HCRAN_BASELINE`, `HCRAN_STRICT_BOUNDS`, `HCRAN_STRICT`, `HCRAN_OUT`);
//! `HCRAN_SWEEP` takes the axis and the values separated by whitespace, e.g.
//! `HCRAN_SWEEP="V 10,100,1000"`. Flags win over the environment.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid config or arguments,
//! 3 output not writable, 4 backlog bound breached, 5 flagged run under
//! `--strict`. Errors go to stderr as one JSON object.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hcran_core::harness::HarnessError;
use hcran_core::{run, sweep, RunOutput, Scheme, SweepAxis};
use serde_json::json;

use crate::config::{parse_values, ConfigError, ExperimentConfig, SweepSpec};
use crate::output::{write_figdata, write_summary, write_trace, RunRecord};

#[derive(Parser, Debug)]
#[command(name = "hcran", version, about = "Slotted H-CRAN simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one experiment and write its CSV files.
    Run(RunArgs),
    /// Print the built-in reference config.
    DefaultConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Msr,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long, env = "HCRAN_CONFIG")]
    pub config: Option<PathBuf>,
    /// Sweep axis (V, lambda, ee_req) and comma-separated values.
    #[arg(long, num_args = 2, value_names = ["AXIS", "VALUES"])]
    pub sweep: Option<Vec<String>>,
    #[arg(long, env = "HCRAN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "HCRAN_SLOTS")]
    pub slots: Option<usize>,
    #[arg(long, env = "HCRAN_WARMUP")]
    pub warmup: Option<usize>,
    /// Also run a baseline scheme.
    #[arg(long, value_enum, env = "HCRAN_BASELINE")]
    pub baseline: Vec<Baseline>,
    /// Apply the backlog-bound assertion to baseline runs too.
    #[arg(long, env = "HCRAN_STRICT_BOUNDS")]
    pub strict_bounds: bool,
    /// Fail when a run is flagged (non-convergence or infeasible slots).
    #[arg(long, env = "HCRAN_STRICT")]
    pub strict: bool,
    #[arg(long, env = "HCRAN_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum AppError {
    Config(String),
    Output(String),
    Internal(String),
    BoundBreach(Vec<String>),
    Flagged(Vec<String>),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Internal(_) => 1,
            AppError::Config(_) => 2,
            AppError::Output(_) => 3,
            AppError::BoundBreach(_) => 4,
            AppError::Flagged(_) => 5,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (kind, message, runs) = match self {
            AppError::Config(m) => ("config", m.clone(), vec![]),
            AppError::Output(m) => ("output", m.clone(), vec![]),
            AppError::Internal(m) => ("internal", m.clone(), vec![]),
            AppError::BoundBreach(r) => ("bound_breach", "backlog bound exceeded".into(), r.clone()),
            AppError::Flagged(r) => ("flagged", "flagged runs under strict mode".into(), r.clone()),
        };
        json!({ "error": kind, "message": message, "runs": runs, "exit_code": self.exit_code() })
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<HarnessError> for AppError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Controller(_) | HarnessError::Queue(_) => AppError::Internal(e.to_string()),
            _ => AppError::Config(e.to_string()),
        }
    }
}

/// Config file plus command-line and environment overrides.
pub fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, AppError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::reference(),
    };
    let sweep = match &args.sweep {
        Some(v) => Some((v[0].clone(), v[1].clone())),
        None => std::env::var("HCRAN_SWEEP").ok().map(|s| {
            let mut it = s.split_whitespace();
            let axis = it.next().unwrap_or_default().to_string();
            (axis, it.collect::<Vec<_>>().join(""))
        }),
    };
    if let Some((axis, values)) = sweep {
        let axis: SweepAxis = axis.parse().map_err(AppError::Config)?;
        cfg.sweep = Some(SweepSpec {
            axis,
            values: parse_values(&values)?,
        });
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.slots {
        cfg.slots = s;
    }
    if let Some(w) = args.warmup {
        cfg.warmup = w;
    }
    if args.baseline.contains(&Baseline::Msr) {
        cfg.baselines.msr = true;
    }
    if let Some(o) = &args.out {
        cfg.output_dir.clone_from(o);
    }
    cfg.strict |= args.strict;
    cfg.validate()?;
    Ok(cfg)
}

fn run_name(scheme: Scheme, sweep: Option<(SweepAxis, f64)>) -> String {
    match sweep {
        Some((axis, v)) => format!("{}_{}_{}", scheme.name(), axis.name(), v),
        None => scheme.name().to_string(),
    }
}

/// Runs the experiment and writes its outputs. Returns the finished runs.
pub fn execute(cfg: &ExperimentConfig, strict_bounds: bool) -> Result<Vec<RunRecord>, AppError> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| AppError::Output(format!("{}: {e}", dir.display())))?;
    let out_err = |e: csv::Error| AppError::Output(e.to_string());

    let mut records = Vec::new();
    for template in cfg.run_specs() {
        let outputs: Vec<(Option<(SweepAxis, f64)>, RunOutput)> = match &cfg.sweep {
            Some(s) => sweep(&template, s.axis, &s.values)?
                .into_iter()
                .zip(&s.values)
                .map(|(o, &v)| (Some((s.axis, v)), o))
                .collect(),
            None => vec![(None, run(&template)?)],
        };
        for (point, out) in outputs {
            let name = run_name(template.scheme, point);
            write_trace(&dir.join(format!("trace_{name}.csv")), &out.trace).map_err(out_err)?;
            records.push(RunRecord {
                name,
                sweep: point,
                seed: cfg.seed,
                metrics: out.metrics,
            });
        }
    }
    write_summary(&dir.join("run_summary.csv"), &records).map_err(out_err)?;
    if let Some(s) = &cfg.sweep {
        write_figdata(dir, s.axis, &records).map_err(out_err)?;
    }

    let breached: Vec<String> = records
        .iter()
        .filter(|r| r.metrics.bound_violations > 0 && (strict_bounds || r.metrics.scheme == Scheme::Jccro))
        .map(|r| r.name.clone())
        .collect();
    if !breached.is_empty() {
        return Err(AppError::BoundBreach(breached));
    }
    let flagged: Vec<String> = records
        .iter()
        .filter(|r| r.metrics.flagged)
        .map(|r| r.name.clone())
        .collect();
    if !flagged.is_empty() {
        if cfg.strict {
            return Err(AppError::Flagged(flagged));
        }
        eprintln!("{}", json!({ "warning": "flagged", "runs": flagged }));
    }
    Ok(records)
}

pub fn main_with(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::DefaultConfig => {
            print!("{}", crate::config::DEFAULT_CONFIG);
            Ok(())
        }
        Command::Run(args) => {
            let cfg = resolve_config(&args)?;
            let records = execute(&cfg, args.strict_bounds)?;
            for r in &records {
                let m = &r.metrics;
                println!(
                    "{}: utility {:.4} delay {:.2} slots rate {:.6e} bit/s power {:.4} W ee {:.4}",
                    r.name, m.utility, m.avg_delay, m.avg_rate, m.avg_power, m.achieved_ee
                );
            }
            println!("wrote {} run(s) to {}", records.len(), cfg.output_dir.display());
            Ok(())
        }
    }
}
