//! Link-level simulation toolkit for uplink massive MIMO receivers with
//! low-resolution ADCs.
//!
//! The crate models the quantizer, its Hermite expansion, the family of
//! linear (LMMSE-type) receivers built on top of the different quantization
//! models, channel estimation from quantized pilots and a deterministic
//! Monte-Carlo harness that writes results as CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_estimation;
pub mod comms;
pub mod equalizers;
pub mod error;
pub mod experiments;
pub mod hermite;
pub mod linalg;
pub mod linear_models;
pub mod quadrature;
pub mod quantization;
pub mod rng;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
