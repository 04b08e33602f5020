//! Dependence-robust inference built on resampled test statistics.

pub mod applications;
pub mod equality;
pub mod error;
pub mod inequality;
pub mod io;
pub mod numkernel;
pub mod resample;
pub mod simharness;

pub use error::{Error, Result};
