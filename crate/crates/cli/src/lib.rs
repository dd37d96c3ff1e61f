//! Scenario runner behind the `vexlab` binary: reads an experiment config, runs one scenario and
//! writes a versioned JSON report plus CSV tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod scenarios;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use vexlab_core::VexError;

pub use config::{ExperimentConfig, LoadedConfig, Scenario};
pub use scenarios::{run_scenario, run_seed, ScenarioOutput};

pub const SCHEMA_VERSION: &str = "1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] VexError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e {
                VexError::MaxItersExceeded { .. } => EXIT_NOT_CONVERGED,
                VexError::InvalidInput(_) | VexError::NonElliptic { .. } | VexError::ExponentTooLarge { .. } | VexError::Parse(_) => {
                    EXIT_CONFIG
                }
                _ => EXIT_FAILURE,
            },
            CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

/// Serializes rows with a header line; every row must have `header.len()` fields.
pub fn csv_string<R, F>(header: &[&str], rows: R) -> Result<String, CliError>
where
    R: IntoIterator<Item = Vec<F>>,
    F: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub scenario: Scenario,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub written: Vec<PathBuf>,
}

/// Report body without the metadata block; identical for identical (config, seed).
pub fn report_body(scenario: Scenario, cfg: &LoadedConfig, out: &ScenarioOutput) -> Value {
    json!({
        "schema": SCHEMA_VERSION,
        "scenario": scenario.name(),
        "seed": cfg.seed(),
        "converged": out.converged,
        "config": cfg.raw,
        "result": out.result,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn run(opts: &RunOptions) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let mut cfg = LoadedConfig::from_path(&opts.config)?;
    cfg.apply_seed(opts.seed);
    cfg.validate_for(opts.scenario)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.config.out.as_ref().map(|o| cfg.base_dir.join(o)))
        .unwrap_or_else(|| PathBuf::from("vexlab-out"));

    let output = run_scenario(opts.scenario, &cfg)?;

    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut report = report_body(opts.scenario, &cfg, &output);
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    report["metadata"] = json!({
        "tool": "vexlab",
        "version": env!("CARGO_PKG_VERSION"),
        "created_unix": created,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
    });
    let mut written = Vec::new();
    let report_path = out_dir.join(format!("{}.json", opts.scenario.name()));
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write(&report_path, &(text + "\n"))?;
    written.push(report_path);
    for (name, contents) in &output.files {
        let path = out_dir.join(name);
        write(&path, contents)?;
        written.push(path);
    }
    let exit_code = match output.error_exit {
        Some(code) => code,
        None if !output.converged => EXIT_NOT_CONVERGED,
        None => EXIT_OK,
    };
    Ok(RunSummary {
        exit_code,
        out_dir,
        written,
    })
}
