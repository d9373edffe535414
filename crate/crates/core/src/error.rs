use thiserror::Error;

use crate::subspace::CommutatorReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("variable index {index} out of range for {n} variables")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("point lies outside the open polydisc (|w_{index}| = {modulus})")]
    OutsidePolydisc { index: usize, modulus: f64 },

    #[error("point is not on the torus (|zeta_{index}| = {modulus})")]
    NotOnTorus { index: usize, modulus: f64 },

    #[error("generator of degree {degree} does not fit in a window of degree {window}")]
    DegreeExceedsWindow { degree: u32, window: u32 },

    #[error("empty generator list: the window of the zero subspace is unknown")]
    EmptyGenerators,

    #[error("not a submodule at this window: shift in z_{} leaves the subspace (residual {residual:e})", .direction + 1)]
    NotSubmodule { direction: usize, residual: f64 },

    #[error("subspace is not doubly commuting (max pair norm {:e})", .0.max_norm())]
    NotDoublyCommuting(Box<CommutatorReport>),

    #[error("wandering subspace has dimension {wandering} > {ambient}: certified non-Beurling")]
    NonBeurling { wandering: usize, ambient: usize },

    #[error("extracted inner function does not reproduce the subspace (projection distance {distance:e})")]
    RangeMismatch { distance: f64 },

    #[error("vector is not contained in the subspace (residual {residual:e})")]
    NotContained { residual: f64 },

    #[error("subspace is zero; nothing to extract")]
    ZeroSubspace,

    #[error("window degree {window} is below the required {required}")]
    WindowTooSmall { window: u32, required: u32 },

    #[error("least-squares residual {residual:e} exceeds {tolerance:e}: window too small or hypothesis violated")]
    GammaResidual { residual: f64, tolerance: f64 },

    #[error("wire format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
