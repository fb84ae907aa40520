//! Shared inputs for the kernel benchmarks.

use calderon_core::symbol::{build_cosphere_grid, CosphereGrid, CospherePoint, Geometry};

/// 64 base points, both covector directions.
pub fn circle_grid() -> CosphereGrid {
    build_cosphere_grid(Geometry::Circle, 64).expect("circle grid")
}

pub fn unit_point() -> CospherePoint {
    CospherePoint::new(vec![0.0], vec![1.0]).expect("point")
}
