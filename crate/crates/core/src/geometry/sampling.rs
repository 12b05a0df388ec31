use rand::Rng;
use rand_distr::{Distribution, UnitSphere};

use super::{add, dot, norm, scale, PointCloud, TriMesh, Vec3};
use crate::error::{Error, Result};

/// Uniform samples from the closed unit ball (rejection from the cube).
pub fn sample_uniform_ball<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Result<PointCloud> {
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let p: Vec3 = [
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ];
        if dot(p, p) <= 1.0 {
            points.push(p);
        }
    }
    Ok(PointCloud::new(points))
}

/// Area-weighted surface samples; each point carries its face's unit normal.
pub fn sample_surface<R: Rng + ?Sized>(
    mesh: &TriMesh,
    count: usize,
    rng: &mut R,
) -> Result<PointCloud> {
    if count == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    if !mesh.is_watertight() {
        return Err(Error::InvalidMesh("surface sampling needs a watertight mesh".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::InvalidMesh("mesh has zero surface area".into()));
    }
    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let r = rng.random::<f64>() * total;
        let f = cumulative
            .partition_point(|&c| c <= r)
            .min(mesh.faces.len() - 1);
        let [a, b, c] = mesh.triangle(f);
        let s = rng.random::<f64>().sqrt();
        let t = rng.random::<f64>();
        let p = add(
            add(scale(a, 1.0 - s), scale(b, s * (1.0 - t))),
            scale(c, s * t),
        );
        let n = mesh.face_cross(f);
        points.push(p);
        normals.push(scale(n, 1.0 / norm(n)));
    }
    Ok(PointCloud {
        points,
        normals: Some(normals),
    })
}

/// `⌈ratio·n⌉`, clamped to `[1, n]`. Products that land within 1e-9 above an
/// integer (binary rounding of e.g. `0.22 * 50`) count as that integer.
pub fn retained_count(ratio: f64, n: usize) -> usize {
    let raw = (ratio * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

/// Keep the `⌈ratio·n⌉` points with the smallest projection onto a direction
/// drawn uniformly from the unit sphere.
pub fn half_space_cut<R: Rng + ?Sized>(
    cloud: &PointCloud,
    retain_ratio: f64,
    rng: &mut R,
) -> Result<PointCloud> {
    let dir: [f64; 3] = UnitSphere.sample(rng);
    half_space_cut_along(cloud, retain_ratio, dir)
}

/// [`half_space_cut`] with a fixed cut direction. Ties in the projection are
/// broken by point index; the output keeps input order.
pub fn half_space_cut_along(cloud: &PointCloud, retain_ratio: f64, dir: Vec3) -> Result<PointCloud> {
    if !(retain_ratio > 0.0 && retain_ratio <= 1.0) {
        return Err(Error::InvalidRatio(retain_ratio));
    }
    if cloud.is_empty() {
        return Err(Error::InvalidInput("cannot cut an empty cloud".into()));
    }
    let keep = retained_count(retain_ratio, cloud.len());
    let mut order: Vec<(f64, usize)> = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, &p)| (dot(p, dir), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut idx: Vec<usize> = order[..keep].iter().map(|&(_, i)| i).collect();
    idx.sort_unstable();
    Ok(cloud.select(&idx))
}
