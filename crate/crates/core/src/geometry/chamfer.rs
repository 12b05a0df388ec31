use super::{dist_sq, PointCloud, Vec3};
use crate::error::{Error, Result};

/// Static 3-d tree for exact nearest-neighbour squared distances.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    /// Implicit balanced tree: node `m` of range `[lo, hi)` is `(lo + hi) / 2`.
    order: Vec<usize>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build(points, &mut order, &mut axes, 0, points.len());
        KdTree {
            points: points.to_vec(),
            order,
            axes,
        }
    }

    /// Minimum of [`dist_sq`] over all points. The value equals the brute-force
    /// minimum bit for bit: pruning only skips subtrees that cannot beat it.
    pub fn nearest_sq(&self, q: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        self.search(q, 0, self.order.len(), &mut best);
        best
    }

    fn search(&self, q: Vec3, lo: usize, hi: usize, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let p = self.points[self.order[mid]];
        let d = dist_sq(q, p);
        if d < *best {
            *best = d;
        }
        let axis = self.axes[mid] as usize;
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        // the plane gap is a lower bound on any distance across the split
        if delta * delta <= *best {
            self.search(q, far.0, far.1, best);
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], axes: &mut [u8], lo: usize, hi: usize) {
    if hi - lo <= 1 {
        return;
    }
    let mut bmin = [f64::INFINITY; 3];
    let mut bmax = [f64::NEG_INFINITY; 3];
    for &i in &order[lo..hi] {
        for k in 0..3 {
            bmin[k] = bmin[k].min(points[i][k]);
            bmax[k] = bmax[k].max(points[i][k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (bmax[a] - bmin[a]).total_cmp(&(bmax[b] - bmin[b])))
        .unwrap();
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    axes[mid] = axis as u8;
    build(points, order, axes, lo, mid);
    build(points, order, axes, mid + 1, hi);
}

/// Squared distance from every point of `from` to its nearest point in `to`.
pub fn nearest_sq_distances(from: &[Vec3], to: &KdTree) -> Vec<f64> {
    from.iter().map(|&p| to.nearest_sq(p)).collect()
}

/// Symmetric Chamfer distance with its two one-sided terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chamfer {
    /// Mean over `a` of the squared distance to the nearest point of `b`.
    pub a_to_b: f64,
    /// Mean over `b` of the squared distance to the nearest point of `a`.
    pub b_to_a: f64,
}

impl Chamfer {
    pub fn total(&self) -> f64 {
        self.a_to_b + self.b_to_a
    }

    pub fn between(a: &PointCloud, b: &PointCloud) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidInput("Chamfer distance of an empty cloud".into()));
        }
        let ta = KdTree::new(&a.points);
        let tb = KdTree::new(&b.points);
        Ok(Chamfer {
            a_to_b: mean(&nearest_sq_distances(&a.points, &tb)),
            b_to_a: mean(&nearest_sq_distances(&b.points, &ta)),
        })
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `CD(a, b) = mean_a min_b |x-y|^2 + mean_b min_a |x-y|^2`.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Chamfer::between(a, b).map(|c| c.total())
}
