use rand::Rng;

use super::{PointCloud, Vec3};
use crate::error::{Error, Result};

const SDF_MAGIC: &[u8; 8] = b"SDFSAMP\0";
const SURFACE_MAGIC: &[u8; 8] = b"SDFSURF\0";
const FORMAT_VERSION: u32 = 1;

/// Query points in the unit ball with their ground-truth signed distances,
/// stored at `f32` precision (the on-disk precision).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdfSampleSet {
    pub queries: Vec<[f32; 3]>,
    pub distances: Vec<f32>,
}

impl SdfSampleSet {
    pub fn from_f64(queries: &[Vec3], distances: &[f64]) -> Result<Self> {
        if queries.len() != distances.len() {
            return Err(Error::InvalidInput(format!(
                "{} queries but {} distances",
                queries.len(),
                distances.len()
            )));
        }
        let set = SdfSampleSet {
            queries: queries.iter().map(|q| q.map(|c| c as f32)).collect(),
            distances: distances.iter().map(|&d| d as f32).collect(),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn query(&self, i: usize) -> Vec3 {
        self.queries[i].map(f64::from)
    }

    pub fn distance(&self, i: usize) -> f64 {
        f64::from(self.distances[i])
    }

    pub fn validate(&self) -> Result<()> {
        if self.queries.len() != self.distances.len() {
            return Err(Error::InvalidInput("query/distance length mismatch".into()));
        }
        for (q, d) in self.queries.iter().zip(&self.distances) {
            if !d.is_finite() || q.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidInput("non-finite SDF sample".into()));
            }
            let r2: f64 = q.iter().map(|&c| f64::from(c) * f64::from(c)).sum();
            // f32 storage may round a point on the sphere slightly outward
            if r2.sqrt() > 1.0 + 1e-6 {
                return Err(Error::InvalidInput(format!("query {q:?} lies outside the unit ball")));
            }
        }
        Ok(())
    }

    /// Fraction of samples with negative distance.
    pub fn inside_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.distances.iter().filter(|&&d| d < 0.0).count() as f64 / self.len() as f64
    }

    /// Number of random sample pairs violating `|d(x) - d(y)| <= |x - y| + tol`.
    pub fn lipschitz_violations<R: Rng + ?Sized>(&self, pairs: usize, tol: f64, rng: &mut R) -> usize {
        if self.len() < 2 {
            return 0;
        }
        (0..pairs)
            .filter(|_| {
                let a = rng.random_range(0..self.len());
                let b = rng.random_range(0..self.len());
                let gap = super::dist_sq(self.query(a), self.query(b)).sqrt();
                (self.distance(a) - self.distance(b)).abs() > gap + tol
            })
            .count()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.len() * 16);
        out.extend_from_slice(SDF_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for (q, d) in self.queries.iter().zip(&self.distances) {
            for c in q {
                out.extend_from_slice(&c.to_le_bytes());
            }
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let floats = decode_records(bytes, SDF_MAGIC, 4, "SDF sample set")?;
        let mut set = SdfSampleSet::default();
        for rec in floats.chunks_exact(4) {
            set.queries.push([rec[0], rec[1], rec[2]]);
            set.distances.push(rec[3]);
        }
        set.validate()
            .map_err(|e| Error::format("SDF sample set", e.to_string()))?;
        Ok(set)
    }
}

fn decode_records(bytes: &[u8], magic: &[u8; 8], width: usize, what: &'static str) -> Result<Vec<f32>> {
    if bytes.len() < 20 || &bytes[..8] != magic {
        return Err(Error::format(what, "bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::format(what, format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let body = &bytes[20..];
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(width * 4))
        .ok_or_else(|| Error::format(what, "record count overflows"))?;
    if body.len() != expected {
        return Err(Error::format(
            what,
            format!("{count} records need {expected} bytes, found {}", body.len()),
        ));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Surface cloud with normals as little-endian `f32` records `x y z nx ny nz`.
pub fn encode_surface(cloud: &PointCloud) -> Result<Vec<u8>> {
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("surface cloud needs normals".into()))?;
    let mut out = Vec::with_capacity(20 + cloud.len() * 24);
    out.extend_from_slice(SURFACE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cloud.len() as u64).to_le_bytes());
    for (p, n) in cloud.points.iter().zip(normals) {
        for c in p.iter().chain(n) {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_surface(bytes: &[u8]) -> Result<PointCloud> {
    let floats = decode_records(bytes, SURFACE_MAGIC, 6, "surface cloud")?;
    let mut points = Vec::with_capacity(floats.len() / 6);
    let mut normals = Vec::with_capacity(floats.len() / 6);
    for rec in floats.chunks_exact(6) {
        points.push([rec[0], rec[1], rec[2]].map(f64::from));
        normals.push([rec[3], rec[4], rec[5]].map(f64::from));
    }
    PointCloud::with_normals(points, normals).map_err(|e| Error::format("surface cloud", e.to_string()))
}
