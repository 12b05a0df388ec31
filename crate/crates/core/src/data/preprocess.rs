use rand::Rng;
use rayon::prelude::*;

use super::AnalyticShape;
use crate::error::Result;
use crate::geometry::{
    normalize_to_unit_sphere, sample_surface, sample_uniform_ball, MeshDistance, Normalization,
    PointCloud, SdfSampleSet, TriMesh, Vec3,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A preprocessed shape ready for training and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeRecord {
    pub id: String,
    /// Mesh normalized to the unit ball.
    pub mesh: TriMesh,
    pub sdf: SdfSampleSet,
    /// Cached surface samples with face normals, at `f32` precision.
    pub surface: PointCloud,
    pub split: Split,
    /// Closed-form SDF of procedural shapes and the normalization that maps
    /// their frame to the unit ball.
    pub analytic: Option<(AnalyticShape, Normalization)>,
}

impl ShapeRecord {
    pub fn inside_fraction(&self) -> f64 {
        self.sdf.inside_fraction()
    }

    /// Closed-form signed distance at a point of the normalized frame.
    pub fn analytic_sdf(&self, p: Vec3) -> Option<f64> {
        self.analytic
            .as_ref()
            .map(|(shape, t)| shape.sdf(t.invert(p)) / t.scale)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    pub sdf_samples: usize,
    pub surface_points: usize,
    pub min_inside_fraction: f64,
    pub lipschitz_pairs: usize,
    pub lipschitz_tol: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            sdf_samples: 100_000,
            surface_points: 32_768,
            min_inside_fraction: 0.01,
            lipschitz_pairs: 10_000,
            lipschitz_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Preprocessed {
    Kept(ShapeRecord),
    Discarded(String),
}

pub const NOT_WATERTIGHT: &str = "not watertight";
pub const TOO_FEW_INSIDE: &str = "inside fraction < 1%";
pub const DISCONTINUOUS: &str = "discontinuous SDF";

/// Normalize, sample the unit ball, compute exact signed distances, apply the
/// discard rules and cache surface samples. The record is tagged `Train`.
pub fn preprocess<R: Rng + ?Sized>(
    id: &str,
    mesh: &TriMesh,
    cfg: &PreprocessConfig,
    rng: &mut R,
) -> Result<Preprocessed> {
    Ok(preprocess_with_frame(id, mesh, cfg, rng)?.0)
}

/// [`preprocess`], also returning the normalization applied to kept meshes.
pub(crate) fn preprocess_with_frame<R: Rng + ?Sized>(
    id: &str,
    mesh: &TriMesh,
    cfg: &PreprocessConfig,
    rng: &mut R,
) -> Result<(Preprocessed, Option<Normalization>)> {
    let discard = |reason: &str| Ok((Preprocessed::Discarded(reason.into()), None));
    if !mesh.is_watertight() {
        return discard(NOT_WATERTIGHT);
    }
    let (mesh, frame) = normalize_to_unit_sphere(mesh)?;
    let oracle = MeshDistance::new(&mesh)?;
    let queries = sample_uniform_ball(cfg.sdf_samples, rng)?.points;
    let distances: Vec<f64> = queries
        .par_iter()
        .map(|&q| oracle.signed_distance(q))
        .collect();
    let sdf = SdfSampleSet::from_f64(&queries, &distances)?;
    if sdf.inside_fraction() < cfg.min_inside_fraction {
        return discard(TOO_FEW_INSIDE);
    }
    if sdf.lipschitz_violations(cfg.lipschitz_pairs, cfg.lipschitz_tol, rng) > 0 {
        return discard(DISCONTINUOUS);
    }
    let surface = sample_surface(&mesh, cfg.surface_points, rng)?.quantized();
    let record = ShapeRecord {
        id: id.to_string(),
        mesh,
        sdf,
        surface,
        split: Split::Train,
        analytic: None,
    };
    Ok((Preprocessed::Kept(record), Some(frame)))
}
