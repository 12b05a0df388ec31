use super::{dot, sub, TriMesh, Vec3};
use crate::error::{Error, Result};

/// Squared distance from `p` to triangle `abc` (closest-feature walk over the
/// Voronoi regions of vertices, edges and face).
pub fn point_triangle_distance_sq(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    super::dist_sq(p, closest_point_on_triangle(p, a, b, c))
}

fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Vec3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return lerp(a, ab, v);
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return lerp(a, ac, w);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return lerp(b, sub(c, b), w);
    }
    let sum = va + vb + vc;
    if !(sum > 0.0) || !sum.is_finite() {
        // degenerate (collinear) triangle: nearest point lies on an edge
        return [
            closest_on_segment(p, a, b),
            closest_on_segment(p, b, c),
            closest_on_segment(p, c, a),
        ]
        .into_iter()
        .min_by(|x, y| super::dist_sq(p, *x).total_cmp(&super::dist_sq(p, *y)))
        .unwrap();
    }
    let denom = 1.0 / sum;
    let v = vb * denom;
    let w = vc * denom;
    [
        a[0] + ab[0] * v + ac[0] * w,
        a[1] + ab[1] * v + ac[1] * w,
        a[2] + ab[2] * v + ac[2] * w,
    ]
}

fn closest_on_segment(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let ab = sub(b, a);
    let len = dot(ab, ab);
    if len <= 0.0 {
        return a;
    }
    lerp(a, ab, (dot(sub(p, a), ab) / len).clamp(0.0, 1.0))
}

#[inline]
fn lerp(a: Vec3, d: Vec3, t: f64) -> Vec3 {
    [a[0] + d[0] * t, a[1] + d[1] * t, a[2] + d[2] * t]
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }

    fn grow(&mut self, p: Vec3) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }

    fn dist_sq(&self, p: Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let e = (self.lo[k] - p[k]).max(p[k] - self.hi[k]).max(0.0);
            d += e * e;
        }
        d
    }
}

#[derive(Clone, Debug)]
struct BvhNode {
    bounds: Aabb,
    /// Leaf: first triangle slot; interior: index of the right child (left is `self + 1`).
    start: usize,
    count: usize,
}

const LEAF_SIZE: usize = 4;

/// Axis-aligned 2D bins of projected triangles, used to cast one axis ray.
#[derive(Clone, Debug)]
struct RayBins {
    axis: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    inv_cell: [f64; 2],
    dims: [usize; 2],
    offsets: Vec<usize>,
    items: Vec<usize>,
}

/// Accelerated exact distance queries against a watertight mesh.
///
/// Magnitude is the minimum point-to-triangle distance (BVH traversal); the
/// sign comes from ray-crossing parity along +x, +y and +z with a majority vote.
#[derive(Clone, Debug)]
pub struct MeshDistance {
    tris: Vec<[Vec3; 3]>,
    faces: Vec<[usize; 3]>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
    rays: [RayBins; 3],
}

impl MeshDistance {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::InvalidMesh("mesh is empty".into()));
        }
        if !mesh.is_watertight() {
            return Err(Error::SignUndefined(
                "inside/outside is undefined for a mesh that is not watertight".into(),
            ));
        }
        let tris: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        build_bvh(&tris, &mut order, 0, tris.len(), &mut nodes);
        let rays = [0, 1, 2].map(|axis| RayBins::new(&tris, axis));
        Ok(MeshDistance {
            tris,
            faces: mesh.faces.clone(),
            order,
            nodes,
            rays,
        })
    }

    /// Minimum squared distance to any triangle.
    pub fn distance_sq(&self, p: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.dist_sq(p)));
        while let Some((i, d)) = stack.pop() {
            if d >= best {
                continue;
            }
            let node = &self.nodes[i];
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = self.tris[t];
                    best = best.min(point_triangle_distance_sq(p, a, b, c));
                }
            } else {
                let (l, r) = (i + 1, node.start);
                let dl = self.nodes[l].bounds.dist_sq(p);
                let dr = self.nodes[r].bounds.dist_sq(p);
                if dl <= dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
        best
    }

    pub fn is_inside(&self, p: Vec3) -> bool {
        let votes = self
            .rays
            .iter()
            .filter(|r| r.crossings(&self.tris, &self.faces, p) % 2 == 1)
            .count();
        votes >= 2
    }

    /// Negative inside the surface.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        let d = self.distance_sq(p).sqrt();
        if self.is_inside(p) {
            -d
        } else {
            d
        }
    }
}

/// One-off signed distance; build a [`MeshDistance`] for repeated queries.
pub fn signed_distance(mesh: &TriMesh, query: Vec3) -> Result<f64> {
    Ok(MeshDistance::new(mesh)?.signed_distance(query))
}

fn centroid(t: &[Vec3; 3], k: usize) -> f64 {
    (t[0][k] + t[1][k] + t[2][k]) / 3.0
}

fn build_bvh(
    tris: &[[Vec3; 3]],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        for v in tris[t] {
            bounds.grow(v);
        }
        cbounds.grow([centroid(&tris[t], 0), centroid(&tris[t], 1), centroid(&tris[t], 2)]);
    }
    let me = nodes.len();
    nodes.push(BvhNode {
        bounds,
        start,
        count: end - start,
    });
    if end - start <= LEAF_SIZE {
        return me;
    }
    let extent = [0, 1, 2].map(|k| cbounds.hi[k] - cbounds.lo[k]);
    let axis = (0..3)
        .max_by(|&a, &b| extent[a].total_cmp(&extent[b]))
        .unwrap();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroid(&tris[a], axis)
            .total_cmp(&centroid(&tris[b], axis))
            .then(a.cmp(&b))
    });
    build_bvh(tris, order, start, mid, nodes);
    let right = build_bvh(tris, order, mid, end, nodes);
    nodes[me].start = right;
    nodes[me].count = 0;
    me
}

fn plane_axes(axis: usize) -> (usize, usize) {
    ((axis + 1) % 3, (axis + 2) % 3)
}

impl RayBins {
    fn new(tris: &[[Vec3; 3]], axis: usize) -> Self {
        let (u, v) = plane_axes(axis);
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for t in tris {
            for p in t {
                lo[0] = lo[0].min(p[u]);
                lo[1] = lo[1].min(p[v]);
                hi[0] = hi[0].max(p[u]);
                hi[1] = hi[1].max(p[v]);
            }
        }
        let side = ((tris.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
        let dims = [side, side];
        let inv_cell = [0, 1].map(|k| {
            let span = hi[k] - lo[k];
            if span > 0.0 {
                dims[k] as f64 / span
            } else {
                0.0
            }
        });
        let mut bins = RayBins {
            axis,
            lo,
            hi,
            inv_cell,
            dims,
            offsets: vec![0; dims[0] * dims[1] + 1],
            items: Vec::new(),
        };
        let ranges: Vec<[usize; 4]> = tris
            .iter()
            .map(|t| {
                let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
                for p in t {
                    a[0] = a[0].min(p[u]);
                    a[1] = a[1].min(p[v]);
                    b[0] = b[0].max(p[u]);
                    b[1] = b[1].max(p[v]);
                }
                [bins.cell(0, a[0]), bins.cell(0, b[0]), bins.cell(1, a[1]), bins.cell(1, b[1])]
            })
            .collect();
        for r in &ranges {
            for i in r[0]..=r[1] {
                for j in r[2]..=r[3] {
                    bins.offsets[i * dims[1] + j + 1] += 1;
                }
            }
        }
        for k in 1..bins.offsets.len() {
            bins.offsets[k] += bins.offsets[k - 1];
        }
        let mut fill = bins.offsets.clone();
        bins.items = vec![0; *bins.offsets.last().unwrap()];
        for (t, r) in ranges.iter().enumerate() {
            for i in r[0]..=r[1] {
                for j in r[2]..=r[3] {
                    let c = i * dims[1] + j;
                    bins.items[fill[c]] = t;
                    fill[c] += 1;
                }
            }
        }
        bins
    }

    fn cell(&self, k: usize, x: f64) -> usize {
        let c = ((x - self.lo[k]) * self.inv_cell[k]).floor();
        (c.max(0.0) as usize).min(self.dims[k] - 1)
    }

    /// Number of triangles crossed by the ray from `p` along `+axis`.
    fn crossings(&self, tris: &[[Vec3; 3]], faces: &[[usize; 3]], p: Vec3) -> usize {
        let (u, v) = plane_axes(self.axis);
        let q = [p[u], p[v]];
        if q[0] < self.lo[0] || q[1] < self.lo[1] || q[0] > self.hi[0] || q[1] > self.hi[1] {
            return 0;
        }
        let c = self.cell(0, q[0]) * self.dims[1] + self.cell(1, q[1]);
        let mut count = 0;
        for &t in &self.items[self.offsets[c]..self.offsets[c + 1]] {
            let tri = &tris[t];
            let ids = faces[t];
            let pts = [0, 1, 2].map(|k| [tri[k][u], tri[k][v]]);
            // edge k is opposite vertex k
            let o = [
                edge_side(pts[1], ids[1], pts[2], ids[2], q),
                edge_side(pts[2], ids[2], pts[0], ids[0], q),
                edge_side(pts[0], ids[0], pts[1], ids[1], q),
            ];
            let pos = o.iter().all(|e| e.1);
            let neg = o.iter().all(|e| !e.1);
            if !(pos || neg) {
                continue;
            }
            let total = o[0].0 + o[1].0 + o[2].0;
            let hit = if total != 0.0 {
                (o[0].0 * tri[0][self.axis] + o[1].0 * tri[1][self.axis] + o[2].0 * tri[2][self.axis])
                    / total
            } else {
                tri[0][self.axis]
            };
            if hit > p[self.axis] {
                count += 1;
            }
        }
        count
    }
}

/// Orientation of `q` against the directed edge `a -> b` with ties resolved by
/// a symbolic perturbation of `q`. The value is computed from the endpoint with
/// the smaller vertex id so adjacent faces see exactly negated results.
fn edge_side(a: [f64; 2], ia: usize, b: [f64; 2], ib: usize, q: [f64; 2]) -> (f64, bool) {
    let (s, e, flip) = if ia < ib { (a, b, false) } else { (b, a, true) };
    let o = (e[0] - s[0]) * (q[1] - s[1]) - (e[1] - s[1]) * (q[0] - s[0]);
    let positive = if o != 0.0 {
        o > 0.0
    } else {
        // q + (eps, eps^2): first-order term is -(e.v - s.v)
        let dv = e[1] - s[1];
        if dv != 0.0 {
            dv < 0.0
        } else {
            e[0] - s[0] > 0.0
        }
    };
    if flip {
        (-o, !positive)
    } else {
        (o, positive)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::mesh::tests::unit_cube;
    use crate::geometry::norm;

    /// Icosphere of radius 1 built by repeated midpoint subdivision.
    pub fn icosphere(subdivisions: usize) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = vec![
            [-1., t, 0.],
            [1., t, 0.],
            [-1., -t, 0.],
            [1., -t, 0.],
            [0., -1., t],
            [0., 1., t],
            [0., -1., -t],
            [0., 1., -t],
            [t, 0., -1.],
            [t, 0., 1.],
            [-t, 0., -1.],
            [-t, 0., 1.],
        ];
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for v in &mut verts {
            let n = norm(*v);
            *v = v.map(|c| c / n);
        }
        for _ in 0..subdivisions {
            let mut cache = std::collections::HashMap::new();
            let mut next = Vec::with_capacity(faces.len() * 4);
            let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
                *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let m = [0, 1, 2].map(|k| 0.5 * (verts[a][k] + verts[b][k]));
                    let n = norm(m);
                    verts.push(m.map(|c| c / n));
                    verts.len() - 1
                })
            };
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut verts);
                let bc = mid(b, c, &mut verts);
                let ca = mid(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        TriMesh::new(verts, faces).unwrap()
    }

    /// Largest gap between the unit sphere and the inscribed mesh: the distance
    /// from the origin to the nearest face plane falls short of 1 by this much.
    pub fn chordal_error(mesh: &TriMesh) -> f64 {
        (0..mesh.faces.len())
            .map(|f| {
                let n = mesh.face_cross(f);
                let a = mesh.triangle(f)[0];
                1.0 - dot(a, n).abs() / norm(n)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn icosphere_matches_analytic_sdf() {
        let mesh = icosphere(4);
        assert!(mesh.is_watertight());
        let chord = chordal_error(&mesh);
        assert!(chord < 1.2e-3, "chordal error {chord}");
        let sdf = MeshDistance::new(&mesh).unwrap();
        assert!((sdf.signed_distance([0.0; 3]) + 1.0).abs() <= chord);
        assert!((sdf.signed_distance([2.0, 0.0, 0.0]) - 1.0).abs() <= chord);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let p: Vec3 = [0, 1, 2].map(|_| rng.random_range(-1.5..1.5));
            let exact = norm(p) - 1.0;
            let d = sdf.signed_distance(p);
            assert!((d - exact).abs() <= 2.0 * chord, "p {p:?}: {d} vs {exact}");
        }
    }

    #[test]
    fn vertex_query_is_zero() {
        let mesh = icosphere(2);
        let sdf = MeshDistance::new(&mesh).unwrap();
        for &v in mesh.vertices.iter().take(20) {
            assert!(sdf.signed_distance(v).abs() < 1e-9);
        }
    }

    #[test]
    fn bvh_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for mesh in [icosphere(3), unit_cube()] {
            let sdf = MeshDistance::new(&mesh).unwrap();
            for _ in 0..1000 {
                let p: Vec3 = [0, 1, 2].map(|_| rng.random_range(-2.0..2.0));
                let brute = (0..mesh.faces.len())
                    .map(|f| {
                        let [a, b, c] = mesh.triangle(f);
                        point_triangle_distance_sq(p, a, b, c)
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!((sdf.distance_sq(p).sqrt() - brute.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cube_sign_on_grazing_rays() {
        let cube = unit_cube();
        let sdf = MeshDistance::new(&cube).unwrap();
        // rays through shared diagonals and edges of the cube faces
        assert!(sdf.is_inside([0.5, 0.5, 0.5]));
        assert!(sdf.is_inside([0.25, 0.25, 0.25]));
        assert!(sdf.is_inside([0.5, 0.75, 0.75]));
        assert!(!sdf.is_inside([1.5, 0.5, 0.5]));
        assert!(!sdf.is_inside([-0.5, 0.0, 0.0]));
        assert!((sdf.signed_distance([0.5, 0.5, 0.5]) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn open_mesh_sign_undefined() {
        let mut open = unit_cube();
        open.faces.pop();
        assert!(matches!(
            MeshDistance::new(&open),
            Err(Error::SignUndefined(_))
        ));
    }

    #[test]
    fn degenerate_triangle_distance() {
        let d = point_triangle_distance_sq([0., 1., 0.], [0.; 3], [1., 0., 0.], [2., 0., 0.]);
        assert!((d - 1.0).abs() < 1e-12);
    }
}
