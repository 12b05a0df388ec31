use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Ellipsoid,
    Capsule,
    RoundedBox,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Ellipsoid { radii: Vec3 },
    /// Segment along z from `-half_length` to `half_length`, swept by `radius`.
    Capsule { half_length: f64, radius: f64 },
    RoundedBox { half_extents: Vec3, rounding: f64 },
}

impl Primitive {
    /// Signed distance in the primitive's own frame. Exact except for
    /// non-spherical ellipsoids, where it is a first-order approximation with
    /// the exact zero set.
    pub fn sdf(&self, p: Vec3) -> f64 {
        match *self {
            Primitive::Ellipsoid { radii } => {
                if radii[0] == radii[1] && radii[1] == radii[2] {
                    return len(p) - radii[0];
                }
                let k0 = len([0, 1, 2].map(|a| p[a] / radii[a]));
                let k1 = len([0, 1, 2].map(|a| p[a] / (radii[a] * radii[a])));
                if k1 == 0.0 {
                    return -radii.iter().copied().fold(f64::INFINITY, f64::min);
                }
                k0 * (k0 - 1.0) / k1
            }
            Primitive::Capsule {
                half_length,
                radius,
            } => {
                let z = p[2].clamp(-half_length, half_length);
                len([p[0], p[1], p[2] - z]) - radius
            }
            Primitive::RoundedBox {
                half_extents,
                rounding,
            } => {
                let q = [0, 1, 2].map(|a| p[a].abs() - half_extents[a]);
                let outside = len(q.map(|c| c.max(0.0)));
                let inside = q[0].max(q[1]).max(q[2]).min(0.0);
                outside + inside - rounding
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        match self {
            Primitive::Ellipsoid { radii } => radii[0] == radii[1] && radii[1] == radii[2],
            _ => true,
        }
    }
}

fn len(p: Vec3) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// A primitive under a rotation, with closed-form signed distance.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticShape {
    pub primitive: Primitive,
    /// Row-major rotation taking primitive coordinates to world coordinates.
    pub rotation: [[f64; 3]; 3],
}

impl AnalyticShape {
    pub fn sdf(&self, p: Vec3) -> f64 {
        let r = &self.rotation;
        let local = [0, 1, 2].map(|c| r[0][c] * p[0] + r[1][c] * p[1] + r[2][c] * p[2]);
        self.primitive.sdf(local)
    }
}

/// Uniformly distributed rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> [[f64; 3]; 3] {
    let mut q = [0.0f64; 4];
    loop {
        for c in &mut q {
            *c = StandardNormal.sample(rng);
        }
        let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-9 {
            q.iter_mut().for_each(|c| *c /= n);
            break;
        }
    }
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}
