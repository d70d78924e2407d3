//! Thermodynamic speed limits for learning dynamics.
//!
//! Quantities follow one convention throughout: `W2` is the squared
//! Wasserstein-2 cost, entropy production is reported as `β⁻¹R` in loss
//! units, and `T_SL = W2 / (β⁻¹R)`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;

pub mod dynamics;
pub mod linalg;
pub mod linreg;
pub mod ntk;
pub mod quad;
pub mod thermo;
mod types;

pub use error::{Error, Result};
pub use types::*;

/// Linear algebra types used throughout the public API.
pub use nalgebra;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
