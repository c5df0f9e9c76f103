use thiserror::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] edmp_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use edmp_core::Error as E;
        match self {
            CliError::Parse(_) | CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::NotAnEdm | E::InvalidMatrix(_) => 3,
                E::NotUnitSpherical { .. } => 4,
                E::InvalidEntry(_) => 5,
                E::InfeasibleSpec(_) => 6,
                _ => 1,
            },
        }
    }
}
