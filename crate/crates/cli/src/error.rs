//! CLI-level error type. Every failure surfaces as a single line suitable
//! for stderr, with file and line context where it exists.

use std::fmt;
use std::path::PathBuf;

use kalman_bench_core::metrics::MetricsError;
use kalman_bench_core::scenarios::ScenarioError;
use kalman_bench_core::sim::SimError;

#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, source: std::io::Error },
    /// CSV parse failure with 1-based line number.
    Csv { path: PathBuf, line: usize, message: String },
    Config(String),
    Scenario(ScenarioError),
    Sim(SimError),
    Metrics(MetricsError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Csv { path, line, message } => {
                write!(f, "{}:{line}: {message}", path.display())
            }
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Scenario(e) => write!(f, "{e}"),
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Metrics(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Scenario(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Metrics(e)
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
