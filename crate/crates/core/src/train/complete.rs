use super::Model;
use crate::error::{Error, Result};
use crate::geometry::{marching_cubes, PointCloud, ScalarGrid, TriMesh};

/// Half-width of the cube the completed field is sampled on.
pub const GRID_EXTENT: f64 = 1.1;

/// Completes a partial cloud in the unit-ball frame: encode, sample the field
/// on an `resolution³` grid over `[-1.1, 1.1]³` and extract its zero level set.
/// The field is intersected with the unit ball, the only region the
/// generator is trained on.
pub fn complete(model: &Model, partial: &PointCloud, resolution: usize) -> Result<TriMesh> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!("grid resolution {resolution} below 2")));
    }
    let z = model.encoder.encode_points(&model.enc, &partial.points)?;
    let (pts, dims, origin, spacing) = ScalarGrid::cube_points(resolution, -GRID_EXTENT, GRID_EXTENT);
    let mut values = model.generator.evaluate(&model.gen, &z, &pts)?;
    for (v, p) in values.iter_mut().zip(&pts) {
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        *v = v.max(r - 1.0);
    }
    if values.iter().all(|&v| v >= 0.0) {
        return Err(Error::EmptySurface);
    }
    let grid = ScalarGrid::new(dims, origin, spacing, values)?;
    let fill = grid.values.iter().copied().fold(1.0, f64::max);
    marching_cubes(&grid.padded(fill), 0.0)
}
