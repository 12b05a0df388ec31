use rand::seq::index;
use rand::Rng;

use super::ShapeRecord;
use crate::error::Result;
use crate::geometry::{half_space_cut, PointCloud};

/// Retained-ratio distribution of partial inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartialMode {
    /// Ratios from U(0.5, 1).
    Train,
    /// Ratios from U(0.5, 0.55).
    Test,
}

impl PartialMode {
    pub fn ratio_range(self) -> (f64, f64) {
        match self {
            PartialMode::Train => (0.5, 1.0),
            PartialMode::Test => (0.5, 0.55),
        }
    }

    pub fn draw_ratio<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let (lo, hi) = self.ratio_range();
        rng.random_range(lo..=hi)
    }
}

/// `n` points drawn without replacement, kept in cloud order. Returns the whole
/// cloud when `n` is not smaller.
pub fn subsample<R: Rng + ?Sized>(cloud: &PointCloud, n: usize, rng: &mut R) -> PointCloud {
    if n >= cloud.len() {
        return cloud.clone();
    }
    let mut idx = index::sample(rng, cloud.len(), n).into_vec();
    idx.sort_unstable();
    cloud.select(&idx)
}

/// Partial input: optionally sub-sample the cached surface to `points`, then
/// apply a random half-space cut with a ratio drawn for `mode`.
pub fn draw_partial<R: Rng + ?Sized>(
    record: &ShapeRecord,
    mode: PartialMode,
    points: Option<usize>,
    rng: &mut R,
) -> Result<PointCloud> {
    let src = match points {
        Some(n) => subsample(&record.surface, n, rng),
        None => record.surface.clone(),
    };
    let ratio = mode.draw_ratio(rng);
    half_space_cut(&src, ratio, rng)
}
