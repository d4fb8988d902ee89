//! Coded distributed matrix-vector and matrix-matrix multiplication that
//! tolerates slow workers, uses their partial work and keeps encoded blocks
//! sparse.

pub mod blockmat;
pub mod cli;
pub mod decoder;
pub mod designs;
pub mod error;
pub mod field;
pub mod fraction;
pub mod matching;
pub mod metrics;
pub mod schemes;
pub mod simulator;

pub use error::{Error, Result};
pub use fraction::{frac, Fraction};
