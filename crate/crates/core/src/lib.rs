//! Near-field localization through a reconfigurable intelligent surface (RIS)
//! whose element amplitudes depend on the applied phase.
//!
//! The crate covers the forward model, misspecified and classical bounds, the
//! mismatched (AMML) and calibrating (AML) estimators, and an experiment
//! harness that turns TOML configs into CSV tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bessel;
pub mod bounds;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod par;
pub mod ris_model;
pub mod signal;
pub mod validate;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Complex dense matrix (column major).
pub type CMatrix = nalgebra::DMatrix<C64>;
