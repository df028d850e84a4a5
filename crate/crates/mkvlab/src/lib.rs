//! Batch runner for mkvlab experiments.
//!
//! A run reads one JSON config, executes the experiment it names and writes
//! `report.json`, `series.csv` and `manifest.json` into the output directory.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
pub mod report;
pub mod schema;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

pub use config::{ConfigError, ExperimentConfig, Kind};
pub use experiments::RunError;
pub use report::{Check, Report, Status};

/// Seed used when neither the command line nor the config sets one.
pub const DEFAULT_SEED: u64 = 0;

pub const EXIT_PASS: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Errors that prevent a report from being produced.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => EXIT_CONFIG,
            AppError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Kind named on the command line; `None` for `run`.
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: Report,
    pub exit_code: u8,
}

/// Read and validate a config file.
pub fn load_config(path: &Path, kind: Option<Kind>) -> Result<(ExperimentConfig, Vec<u8>), ConfigError> {
    let bytes = fs::read(path).map_err(|e| ConfigError {
        path: ".".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| ConfigError {
        path: ".".into(),
        message: format!("config is not UTF-8: {e}"),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config::parse(text, kind, &base)?, bytes))
}

fn error_kind(e: &mkvlab_core::Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("Error").to_string()
}

/// Execute a parsed config and build its report. Numerical failures become
/// an error report rather than an `Err`.
pub fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<(Report, io::Series), ConfigError> {
    let mut report = Report {
        kind: cfg.kind,
        schema_version: config::SCHEMA_VERSION,
        seed,
        status: Status::Pass,
        checks: Vec::new(),
        bounds: Vec::new(),
        diagnostics: Default::default(),
        error: None,
        config: cfg.raw.clone(),
    };
    match experiments::run(cfg, seed) {
        Ok(o) => {
            report.status = if o.checks.iter().all(|c| c.pass) {
                Status::Pass
            } else {
                Status::Fail
            };
            report.checks = o.checks;
            report.bounds = o.bounds;
            report.diagnostics = o.diagnostics;
            Ok((report, o.series))
        }
        Err(RunError::Config(e)) => Err(e),
        Err(RunError::Numerical(e)) => {
            report.status = Status::Error;
            report.error = Some(report::ErrorInfo {
                kind: error_kind(&e),
                message: e.to_string(),
            });
            Ok((report, io::Series::new(&["message"])))
        }
    }
}

pub fn exit_code(report: &Report) -> u8 {
    match report.status {
        Status::Pass => EXIT_PASS,
        Status::Fail => EXIT_FAIL,
        Status::Error => EXIT_NUMERICAL,
    }
}

/// Full run: load, execute, write the three output files.
pub fn run(args: &RunArgs) -> Result<RunResult, AppError> {
    let (cfg, config_bytes) = load_config(&args.config, args.kind)?;
    let seed = args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let (report, mut series) = execute(&cfg, seed)?;
    if let Some(err) = &report.error {
        series.push_cells(vec![err.message.clone()]);
    }

    fs::create_dir_all(&args.out).map_err(|e| AppError::Io(format!("cannot create {}: {e}", args.out.display())))?;
    let report_bytes = report.to_json();
    let series_bytes = series
        .to_csv()
        .map_err(|e| AppError::Io(format!("cannot encode series: {e}")))?;
    io::write_file(&args.out.join("report.json"), &report_bytes).map_err(AppError::Io)?;
    io::write_file(&args.out.join("series.csv"), &series_bytes).map_err(AppError::Io)?;

    let code = exit_code(&report);
    let manifest = json!({
        "tool": "mkvlab",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": cfg.kind,
        "seed": seed,
        "config_path": args.config.display().to_string(),
        "config_sha256": io::sha256_hex(&config_bytes),
        "threads": rayon::current_num_threads(),
        "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        "exit_code": code,
        "outputs": {
            "report.json": io::sha256_hex(&report_bytes),
            "series.csv": io::sha256_hex(&series_bytes),
        },
    });
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    manifest_bytes.push(b'\n');
    io::write_file(&args.out.join("manifest.json"), &manifest_bytes).map_err(AppError::Io)?;
    Ok(RunResult { report, exit_code: code })
}
