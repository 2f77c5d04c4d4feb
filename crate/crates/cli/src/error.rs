use thiserror::Error;

/// Process exit status for validation problems (bad config, bad input data).
pub const EXIT_VALIDATION: i32 = 2;
/// Process exit status for solver or fit failures.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("input error: {0}")]
    Ingest(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] nanofiber_trap::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use nanofiber_trap::Error as E;
        match self {
            CliError::Validation(_) | CliError::Ingest(_) | CliError::Io(_) => EXIT_VALIDATION,
            CliError::Model(e) => match e {
                E::NoRoot { .. } | E::NoMinimum(_) | E::Saddle(_) | E::ZeroIntensity { .. } => EXIT_SOLVER,
                E::InvalidParameter { .. }
                | E::OutOfBracket { .. }
                | E::Resonance { .. }
                | E::NonPositiveDistance(_)
                | E::InsideFiber { .. }
                | E::Components(_)
                | E::DegenerateReference { .. }
                | E::InsufficientData(_) => EXIT_VALIDATION,
            },
        }
    }
}
