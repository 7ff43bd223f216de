//! Fixtures shared by the benchmarks.

use rimnull_core::{DishConfig, Geometry};

/// Default dish with a coarse fixed mesh; benchmarks that only touch the rim
/// do not need the full mesh density.
pub fn coarse_geometry() -> Geometry {
    let cfg = DishConfig { fixed_mesh_density: 2.0, ..DishConfig::default() };
    Geometry::build(&cfg).expect("default dish builds")
}

pub fn default_geometry() -> Geometry {
    Geometry::build(&DishConfig::default()).expect("default dish builds")
}
