use crate::error::{Error, Result};

/// Dense row-major 2-D array of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "tensor",
                format!("{} values for shape {rows}x{cols}", data.len()),
            ));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 0.0)
    }

    pub fn full(rows: usize, cols: usize, v: f64) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::full(1, 1, v)
    }

    /// One row per 3-D point.
    pub fn from_points(points: &[[f64; 3]]) -> Self {
        Tensor {
            rows: points.len(),
            cols: 3,
            data: points.iter().flatten().copied().collect(),
        }
    }

    pub fn column(values: &[f64]) -> Self {
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single value of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        debug_assert_eq!(self.shape(), other.shape());
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn transpose(&self) -> Tensor {
        let mut data = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Tensor {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Matrix product. Each output element accumulates `a[i,k] * b[k,j]` in
    /// increasing `k` starting from zero, independent of how many rows `a` has,
    /// so row-blocked evaluation of a batch is bitwise identical to evaluating
    /// its rows separately.
    pub fn matmul(&self, b: &Tensor) -> Tensor {
        let (n, k, m) = (self.rows, self.cols, b.cols);
        debug_assert_eq!(k, b.rows);
        let mut out = vec![0.0; n * m];
        let a = &self.data;
        let bd = &b.data;
        let mut i = 0;
        while i + 4 <= n {
            let (c0, rest) = out[i * m..(i + 4) * m].split_at_mut(m);
            let (c1, rest) = rest.split_at_mut(m);
            let (c2, c3) = rest.split_at_mut(m);
            for kk in 0..k {
                let brow = &bd[kk * m..(kk + 1) * m];
                let a0 = a[i * k + kk];
                let a1 = a[(i + 1) * k + kk];
                let a2 = a[(i + 2) * k + kk];
                let a3 = a[(i + 3) * k + kk];
                for j in 0..m {
                    let bv = brow[j];
                    c0[j] += a0 * bv;
                    c1[j] += a1 * bv;
                    c2[j] += a2 * bv;
                    c3[j] += a3 * bv;
                }
            }
            i += 4;
        }
        while i < n {
            let c = &mut out[i * m..(i + 1) * m];
            for kk in 0..k {
                let av = a[i * k + kk];
                let brow = &bd[kk * m..(kk + 1) * m];
                for j in 0..m {
                    c[j] += av * brow[j];
                }
            }
            i += 1;
        }
        Tensor {
            rows: n,
            cols: m,
            data: out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Tensor::new(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Tensor::new(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        assert_eq!(a.matmul(&b).data(), &[58., 64., 139., 154.]);
    }

    #[test]
    fn matmul_rows_are_independent() {
        let a = Tensor::new(7, 5, (0..35).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let b = Tensor::new(5, 6, (0..30).map(|i| (i as f64 * 0.11).cos()).collect()).unwrap();
        let full = a.matmul(&b);
        for r in 0..7 {
            let single = Tensor::new(1, 5, a.row(r).to_vec()).unwrap().matmul(&b);
            assert_eq!(single.data(), full.row(r));
        }
    }

    #[test]
    fn shape_checked() {
        assert!(Tensor::new(2, 2, vec![0.0; 3]).is_err());
        assert_eq!(Tensor::zeros(2, 3).transpose().shape(), [3, 2]);
    }
}
