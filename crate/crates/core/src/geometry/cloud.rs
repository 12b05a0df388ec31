use super::{norm, Vec3};
use crate::error::{Error, Result};

/// Point set with optional per-point unit normals.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            normals: None,
        }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        let cloud = PointCloud {
            points,
            normals: Some(normals),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.points.iter().find(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidInput(format!("non-finite point {p:?}")));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(Error::InvalidInput(format!(
                    "{} normals for {} points",
                    normals.len(),
                    self.points.len()
                )));
            }
            if let Some(n) = normals.iter().find(|&&n| (norm(n) - 1.0).abs() > 1e-6) {
                return Err(Error::InvalidInput(format!("normal {n:?} is not unit length")));
            }
        }
        Ok(())
    }

    /// Sub-cloud at `indices`, carrying normals along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
        }
    }

    /// Coordinates rounded through `f32`, the precision used on disk.
    pub fn quantized(&self) -> PointCloud {
        let q = |v: &Vec3| v.map(|c| c as f32 as f64);
        PointCloud {
            points: self.points.iter().map(q).collect(),
            normals: self.normals.as_ref().map(|n| n.iter().map(q).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normals_must_match_and_be_unit() {
        assert!(PointCloud::with_normals(vec![[0.; 3]], vec![[0., 0., 1.]]).is_ok());
        assert!(PointCloud::with_normals(vec![[0.; 3]], vec![]).is_err());
        assert!(PointCloud::with_normals(vec![[0.; 3]], vec![[0., 0., 2.]]).is_err());
    }

    #[test]
    fn select_carries_normals() {
        let c = PointCloud::with_normals(
            vec![[0.; 3], [1., 0., 0.]],
            vec![[1., 0., 0.], [0., 1., 0.]],
        )
        .unwrap();
        let s = c.select(&[1]);
        assert_eq!(s.points, vec![[1., 0., 0.]]);
        assert_eq!(s.normals.unwrap(), vec![[0., 1., 0.]]);
    }
}
