//! Batch front end for the nonlocal heat-equation solver: `bound`, `solve`,
//! `verify` and `compare`, configured by a TOML file and reporting CSV.

pub mod commands;
pub mod config;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    #[error("tolerance check failed: {0}")]
    Tolerance(String),

    #[error(transparent)]
    Solver(nlheat::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl From<nlheat::Error> for CliError {
    fn from(e: nlheat::Error) -> Self {
        match e {
            nlheat::Error::Hypothesis(_) | nlheat::Error::PoleRisk { .. } => CliError::Hypothesis(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    /// 2 hypothesis violation, 3 tolerance failure, 4 configuration error,
    /// 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Hypothesis(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Config(_) => 4,
            _ => 1,
        }
    }
}
