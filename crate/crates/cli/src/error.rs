use bribery_core::markov::MarkovError;
use bribery_core::simulate::SimError;
use bribery_core::strategies::StrategyError;
use bribery_core::ModelError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{} of {total} metrics outside tolerance", failed.len())]
    ValidationFailed { failed: Vec<String>, total: usize },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Model(_) => "model",
            CliError::Markov(_) => "markov",
            CliError::Strategy(StrategyError::Infeasible(_)) => "infeasible",
            CliError::Strategy(_) => "strategy",
            CliError::Simulation(_) => "simulation",
            CliError::Io { .. } => "io",
            CliError::Csv(_) | CliError::Json(_) => "report",
            CliError::ValidationFailed { .. } => "validation_failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a str,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            failed: Option<&'a [String]>,
        }
        let failed = match self {
            CliError::ValidationFailed { failed, .. } => Some(failed.as_slice()),
            _ => None,
        };
        serde_json::to_string(&Record {
            error: self.kind(),
            message: self.to_string(),
            failed,
        })
        .expect("error record serializes")
    }
}
