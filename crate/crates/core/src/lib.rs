//! Physical-optics model of a prime-focus paraboloid whose outer annulus is
//! split into weighted rim elements, plus the optimizers that choose those
//! weights to steer pattern nulls.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedloop;
pub mod config;
pub mod error;
pub mod field;
pub mod geometry;
pub mod hybrid;
pub mod io;
pub mod openloop;
pub mod quantized;
pub mod weights;

pub use config::{DishConfig, DishSpec};
pub use error::{Error, Result};
pub use field::{FieldBundle, GainNormalization, PatternCut};
pub use geometry::{Geometry, RimElement, SurfacePatch};
pub use num_complex::Complex64;
pub use openloop::{ConstraintSet, GpSettings};
pub use weights::{PhaseAlphabet, QuantizedWeights, Regime, WeightVector};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Degrees to radians.
pub fn deg(x: f64) -> f64 {
    x.to_radians()
}
