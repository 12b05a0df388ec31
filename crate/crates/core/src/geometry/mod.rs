//! Deterministic geometry kernel: meshes, point clouds, sampling, exact
//! signed distances, marching cubes and Chamfer distance.

mod chamfer;
mod cloud;
mod distance;
pub mod io;
mod marching_cubes;
mod mesh;
mod sampling;
mod sdf_samples;

pub use chamfer::{chamfer_distance, nearest_sq_distances, Chamfer, KdTree};
pub use cloud::PointCloud;
pub use distance::{point_triangle_distance_sq, signed_distance, MeshDistance};
pub use marching_cubes::{marching_cubes, ScalarGrid};
pub use mesh::{normalize_to_unit_sphere, Normalization, TriMesh};
pub use sampling::{
    half_space_cut, half_space_cut_along, retained_count, sample_surface, sample_uniform_ball,
};
pub use sdf_samples::{decode_surface, encode_surface, SdfSampleSet};

pub type Vec3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// Squared Euclidean distance. Every nearest-neighbour path in the crate uses
/// this exact expression so indexed and brute-force searches agree bitwise.
#[inline]
pub fn dist_sq(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
