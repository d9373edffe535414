//! Shift-invariant subspaces of `H^2_E` over the polydisc, computed on finite
//! degree windows. Covers commutator tests, inner symbol extraction and
//! completion of left-invertible polynomial columns, with residual
//! certificates throughout.

pub mod beurling;
pub mod completion;
pub mod error;
pub mod hardy;
pub mod linalg;
pub mod random;
pub mod reports;
pub mod subspace;
pub mod wire;

pub use error::{Error, Result};
