use std::path::Path;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_GRADIENT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Input(String),

    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),

    #[error(transparent)]
    Core(#[from] lambdaq::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use lambdaq::Error as E;
        match self {
            Self::Core(E::GradientUndefined { .. }) => EXIT_GRADIENT,
            Self::Core(E::StalledLineSearch { .. } | E::NoRoot { .. } | E::BracketExpansion { .. }) => {
                EXIT_NOT_CONVERGED
            }
            _ => EXIT_INPUT,
        }
    }
}
