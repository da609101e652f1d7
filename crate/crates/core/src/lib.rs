//! State-aware anti-drift correlation filter tracking.
//!
//! The filter is learned jointly against context patches and a color-based
//! reliability mask by ADMM in the Fourier domain, and model updates are gated
//! on the peak value and the excess kurtosis of the response map.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod cli;
pub mod error;
pub mod eval;
pub mod imaging;
pub mod reliability;
pub mod spectral;
pub mod tracker;

pub use error::{Error, Result};
