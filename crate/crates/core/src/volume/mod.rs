//! Volume of the zero set of a sampled system: curve length on `S^2` by
//! marching triangles or by Crofton's formula, and root counts on `S^1`.

mod crofton;
mod marching;

pub use crofton::{count_roots_circle, count_roots_periodic, random_great_circle, zero_volume_crofton, RootGrid};
pub use marching::{
    default_mesh_level, max_edge_length, required_mesh_level, zero_length_marching, zero_length_marching_field,
    zero_length_refined, LevelPolyline, MarchingOptions, MESH_RULE_CONSTANT,
};

use serde::Serialize;

/// How a volume was measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    Marching,
    Crofton,
    Count,
    /// Marching squares on a planar grid.
    MarchingSquares,
}

/// A measured volume with an error estimate: the Newton correction or mesh
/// refinement change for marching, the Monte Carlo standard error for
/// Crofton, zero for exact counts, and the change from the half-resolution
/// grid for marching squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub method: VolumeMethod,
    pub error_estimate: f64,
    pub mesh_level: Option<u32>,
    pub n_circles: Option<usize>,
}
