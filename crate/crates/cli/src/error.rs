use std::path::Path;

use thiserror::Error;

use veason_core::cot::CotError;
use veason_core::env::EnvError;
use veason_core::eval::EvalError;
use veason_core::grpo::GrpoError;
use veason_core::rewards::RewardError;
use veason_core::train::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Io { .. } => 3,
            Self::Numerical(_) => 4,
        }
    }
}

impl From<GrpoError> for CliError {
    fn from(e: GrpoError) -> Self {
        match e {
            GrpoError::NonFiniteReward { .. }
            | GrpoError::NonFiniteRatio { .. }
            | GrpoError::NonFiniteGradient
            | GrpoError::NonFiniteParameters => Self::Numerical(e.to_string()),
            other => Self::Validation(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Grpo(g) => g.into(),
            other => Self::Validation(other.to_string()),
        }
    }
}

macro_rules! validation_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Validation(e.to_string())
            }
        }
    )*};
}

validation_from!(CotError, EnvError, EvalError, RewardError);
