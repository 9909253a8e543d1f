use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size {dz} exceeds the limit {limit}")]
    StepTooLarge { dz: f64, limit: f64 },

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (max deviation of U^H U from identity {0:e})")]
    NotUnitary(f64),

    #[error("eliminated block is singular (smallest singular value {sigma_min:e}, threshold {threshold:e})")]
    SingularBlock { sigma_min: f64, threshold: f64 },

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("not enough {kind} modes: need {needed}, found {found}")]
    InsufficientModes { kind: &'static str, needed: usize, found: usize },

    #[error("effective coupling does not decay with size (adiabatic ratio {0} >= 1)")]
    NonDecaying(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidArgument(_)
                | Error::StepTooLarge { .. }
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
