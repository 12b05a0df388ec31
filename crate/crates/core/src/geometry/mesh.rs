use std::collections::HashMap;

use super::{cross, norm, scale, sub, Vec3};
use crate::error::{Error, Result};

/// Indexed triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

/// Affine map applied by [`normalize_to_unit_sphere`]: `x' = (x - center) / scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub center: Vec3,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        scale(sub(p, self.center), 1.0 / self.scale)
    }

    pub fn invert(&self, p: Vec3) -> Vec3 {
        super::add(scale(p, self.scale), self.center)
    }
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidMesh(format!(
                "face {f:?} references a vertex beyond {n}"
            )));
        }
        if let Some(v) = vertices.iter().find(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {v:?}")));
        }
        Ok(TriMesh {
            vertices,
            faces,
            normals: None,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty() || self.faces.is_empty()
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal, twice the face area in length.
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        cross(sub(b, a), sub(c, a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * norm(self.face_cross(f))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Signed enclosed volume; positive for outward-oriented closed meshes.
    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
                super::dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Every undirected edge is shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        if self.faces.is_empty() {
            return false;
        }
        let mut edges: HashMap<(usize, usize), u32> = HashMap::with_capacity(self.faces.len() * 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if a == b {
                    return false;
                }
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        edges.values().all(|&c| c == 2)
    }

    /// Every directed edge appears once and its reverse once, i.e. faces are
    /// consistently oriented.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    pub fn transformed(&self, t: &Normalization) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| t.apply(v)).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }
}

/// Center the bounding box at the origin and scale so the farthest vertex has
/// unit norm. Returns the mesh and the transform that was applied.
pub fn normalize_to_unit_sphere(mesh: &TriMesh) -> Result<(TriMesh, Normalization)> {
    let (lo, hi) = mesh
        .bounding_box()
        .ok_or_else(|| Error::InvalidMesh("mesh has no vertices".into()))?;
    if mesh.faces.is_empty() {
        return Err(Error::InvalidMesh("mesh has no faces".into()));
    }
    let center = [
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    ];
    let s = mesh
        .vertices
        .iter()
        .map(|&v| norm(sub(v, center)))
        .fold(0.0, f64::max);
    if s <= 0.0 || !s.is_finite() {
        return Err(Error::InvalidMesh("mesh collapses to a point".into()));
    }
    // already normalized up to rounding: keep it bit-for-bit
    if norm(center) <= 1e-12 && (s - 1.0).abs() <= 1e-12 {
        let identity = Normalization {
            center: [0.0; 3],
            scale: 1.0,
        };
        return Ok((mesh.clone(), identity));
    }
    let t = Normalization { center, scale: s };
    Ok((mesh.transformed(&t), t))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn unit_cube() -> TriMesh {
        let v = vec![
            [0., 0., 0.],
            [1., 0., 0.],
            [1., 1., 0.],
            [0., 1., 0.],
            [0., 0., 1.],
            [1., 0., 1.],
            [1., 1., 1.],
            [0., 1., 1.],
        ];
        let f = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [2, 3, 7],
            [2, 7, 6],
            [1, 2, 6],
            [1, 6, 5],
            [0, 4, 7],
            [0, 7, 3],
        ];
        TriMesh::new(v, f).unwrap()
    }

    fn max_norm(m: &TriMesh) -> f64 {
        m.vertices.iter().map(|&v| norm(v)).fold(0.0, f64::max)
    }

    #[test]
    fn normalize_symmetric_triangle() {
        let m = TriMesh::new(vec![[2., 0., 0.], [-2., 0., 0.], [0., 2., 0.]], vec![[0, 1, 2]])
            .unwrap();
        let (n, t) = normalize_to_unit_sphere(&m).unwrap();
        assert_eq!(t.center, [0.0, 1.0, 0.0]);
        // bbox center is (0,1,0); farthest vertices sit at sqrt(5)
        assert!((t.scale - 5f64.sqrt()).abs() < 1e-12);
        assert!((max_norm(&n) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalize_degenerate_triangle() {
        let m = TriMesh::new(vec![[1., 1., 1.], [1., 1., 2.], [1., 2., 1.]], vec![[0, 1, 2]])
            .unwrap();
        let (n, t) = normalize_to_unit_sphere(&m).unwrap();
        assert_eq!(t.center, [1.0, 1.5, 1.5]);
        assert!((max_norm(&n) - 1.0).abs() < 1e-9);
        for v in &n.vertices {
            assert!((norm(*v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_is_idempotent_and_canonical() {
        let cube = unit_cube();
        let (a, _) = normalize_to_unit_sphere(&cube).unwrap();
        let (b, _) = normalize_to_unit_sphere(&a).unwrap();
        assert_eq!(a, b);
        let moved = cube.transformed(&Normalization {
            center: [-3.0, 0.5, 7.0],
            scale: 0.25,
        });
        let (c, _) = normalize_to_unit_sphere(&moved).unwrap();
        for (p, q) in a.vertices.iter().zip(&c.vertices) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_mesh_rejected() {
        let m = TriMesh::new(vec![], vec![]).unwrap();
        assert!(matches!(
            normalize_to_unit_sphere(&m),
            Err(Error::InvalidMesh(_))
        ));
    }

    #[test]
    fn out_of_range_face_rejected() {
        assert!(TriMesh::new(vec![[0.; 3]; 2], vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn cube_topology() {
        let c = unit_cube();
        assert!(c.is_watertight());
        assert!(c.is_consistently_oriented());
        assert!((c.volume() - 1.0).abs() < 1e-12);
        let mut open = c.clone();
        open.faces.pop();
        assert!(!open.is_watertight());
    }
}
