//! Batch driver: configuration, identity suites, sweeps and reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod artifacts;
pub mod config;
pub mod report;
pub mod sweep;
pub mod verify;

use std::path::PathBuf;

pub use config::{IdentityConfig, RunConfig, SCHEMA};

/// Exit codes: 0 all gates pass, 1 a gate failed, 2 configuration or I/O
/// error, 3 numerical non-convergence.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_GATE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(std::io::Error),
    Gate(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Gate(_) => EXIT_GATE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Gate(m) => write!(f, "gate failed: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<adiabat::Error> for CliError {
    fn from(e: adiabat::Error) -> Self {
        use adiabat::Error as E;
        match e {
            E::Precondition(_) => CliError::Gate(e.to_string()),
            E::Invalid(_) | E::Scenario(_) | E::Shape(_) | E::EmptyMask(_) => CliError::Config(e.to_string()),
            E::Io(io) => CliError::Io(io),
            E::Json(j) => CliError::Io(j.into()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Settings shared by every command after flags and config are merged.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub workers: usize,
    pub dry_run: bool,
}

impl Context {
    pub fn new(config: RunConfig, out: Option<PathBuf>, workers: Option<usize>, dry_run: bool) -> Result<Self, CliError> {
        let workers = match workers.or(config.workers) {
            Some(0) => return Err(CliError::Config("--workers must be at least 1".into())),
            Some(w) => w,
            None => std::thread::available_parallelism().map(|n| n.get().saturating_sub(1)).unwrap_or(1).max(1),
        };
        let out = out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("adiabat-out"));
        Ok(Context { config, out, workers, dry_run })
    }

    /// Run `f` on a pool of `workers` threads.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}
