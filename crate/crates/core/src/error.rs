use thiserror::Error;

/// Errors produced anywhere in the modelling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation error at row {row}, column `{column}`: {message}")]
    Validation {
        row: usize,
        column: String,
        message: String,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("index {index} out of bounds ({message})")]
    Bounds { index: usize, message: String },

    #[error("parameter outside its support: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("model spec error: {0}")]
    Spec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure at step {step}: {message}")]
    Numerical { step: usize, message: String },

    #[error("chain {chain} aborted at iteration {iteration}: {message}")]
    ChainAborted {
        chain: usize,
        iteration: usize,
        message: String,
    },

    #[error("input error: {0}")]
    Input(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("degenerate chains: {0}")]
    DegenerateChains(String),

    #[error("infeasible allocation problem: {binding} ({detail})")]
    Infeasible { binding: String, detail: String },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code, used in JSON error payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema",
            Error::Validation { .. } => "validation",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Bounds { .. } => "bounds",
            Error::Domain(_) => "domain",
            Error::Dimension(_) => "dimension",
            Error::Spec(_) => "spec",
            Error::Config(_) => "config",
            Error::Numerical { .. } => "numerical",
            Error::ChainAborted { .. } => "chain_aborted",
            Error::Input(_) => "input",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::DegenerateChains(_) => "degenerate_chains",
            Error::Infeasible { .. } => "infeasible",
            Error::NotFound(_) => "not_found",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
