use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid entry index: {0}")]
    InvalidEntry(String),

    #[error("matrix is not a Euclidean distance matrix")]
    NotAnEdm,

    #[error("matrix is not a unit spherical EDM (2 e^T w = {two_etw})")]
    NotUnitSpherical { two_etw: f64 },

    #[error("vectors are parallel")]
    ParallelVectors,

    #[error("degenerate denominator in {what}")]
    DegenerateDenominator { what: &'static str },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("t = {t} lies outside T<= = [{lo}, {hi}]")]
    OutsideTleq { t: f64, lo: f64, hi: f64 },

    #[error("t = {t} is a pole of the closed form")]
    PoleAt { t: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("infeasible instance spec: {0}")]
    InfeasibleSpec(String),
}

impl Error {
    /// Stable variant name, used by serialized reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::InvalidEntry(_) => "InvalidEntry",
            Error::NotAnEdm => "NotAnEdm",
            Error::NotUnitSpherical { .. } => "NotUnitSpherical",
            Error::ParallelVectors => "ParallelVectors",
            Error::DegenerateDenominator { .. } => "DegenerateDenominator",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::OutsideTleq { .. } => "OutsideTleq",
            Error::PoleAt { .. } => "PoleAt",
            Error::Infeasible(_) => "Infeasible",
            Error::InfeasibleSpec(_) => "InfeasibleSpec",
        }
    }
}
