use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    MulConst(Var, Arc<Tensor>),
    LeakyRelu(Var, f64),
    Pow(Var, f64),
    RowNorm(Var),
    RecipSafe(Var),
    Normalize(Var, f64),
    ColSum(Var),
    RowSum(Var),
    SumAll(Var),
    RepeatRows(Var),
    RepeatCols(Var),
    Expand(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    PadCols(Var, usize),
    GatherRows(Var, Arc<Vec<usize>>),
    ScatterRows(Var, Arc<Vec<usize>>),
    PickRows(Var, Arc<Vec<usize>>),
    ScatterPick(Var, Arc<Vec<usize>>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Shift(..) => "shift",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Reshape(..) => "reshape",
            Op::MulConst(..) => "mul_const",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Pow(..) => "pow",
            Op::RowNorm(..) => "row_norm",
            Op::RecipSafe(..) => "recip_safe",
            Op::Normalize(..) => "normalize",
            Op::ColSum(..) => "col_sum",
            Op::RowSum(..) => "row_sum",
            Op::SumAll(..) => "sum",
            Op::RepeatRows(..) => "repeat_rows",
            Op::RepeatCols(..) => "repeat_cols",
            Op::Expand(..) => "expand",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::PadCols(..) => "pad_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::ScatterRows(..) => "scatter_rows",
            Op::PickRows(..) => "pick_rows",
            Op::ScatterPick(..) => "scatter_pick",
        }
    }

    fn for_each_input(&self, mut f: impl FnMut(Var)) {
        match self {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) => {
                f(*a);
                f(*b);
            }
            Op::ConcatCols(parts) => parts.iter().for_each(|&p| f(p)),
            Op::Scale(a, _)
            | Op::Shift(a)
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::MulConst(a, _)
            | Op::LeakyRelu(a, _)
            | Op::Pow(a, _)
            | Op::RowNorm(a)
            | Op::RecipSafe(a)
            | Op::Normalize(a, _)
            | Op::ColSum(a)
            | Op::RowSum(a)
            | Op::SumAll(a)
            | Op::RepeatRows(a)
            | Op::RepeatCols(a)
            | Op::Expand(a)
            | Op::SliceCols(a, _)
            | Op::PadCols(a, _)
            | Op::GatherRows(a, _)
            | Op::ScatterRows(a, _)
            | Op::PickRows(a, _)
            | Op::ScatterPick(a, _) => f(*a),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only record of tensor operations supporting reverse-mode
/// differentiation of any order.
///
/// Backward passes are recorded as ordinary operations on the same graph,
/// so the result of [`Graph::grad`] with `create_graph = true` can itself be
/// differentiated.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input tensor.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.leaf(Tensor::scalar(v))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    /// Value of a 1x1 node.
    pub fn item(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Diagnostic(format!(
                "{} produced a non-finite value (node {})",
                op.name(),
                self.nodes.len()
            )));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip(self.value(b), |x, y| x + y);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip(self.value(b), |x, y| x - y);
        self.push(v, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip(self.value(b), |x, y| x * y);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x * c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::Shift(a))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[0] {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let t = self.value(a);
        if t.len() != rows * cols {
            return Err(Error::shape(
                "reshape",
                format!("{:?} to [{rows}, {cols}]", t.shape()),
            ));
        }
        let v = Tensor::new(rows, cols, t.data().to_vec())?;
        self.push(v, Op::Reshape(a))
    }

    /// Elementwise product with a constant that is not differentiated.
    pub fn mul_const(&mut self, a: Var, c: Tensor) -> Result<Var> {
        let t = self.value(a);
        if t.shape() != c.shape() {
            return Err(Error::shape(
                "mul_const",
                format!("{:?} vs {:?}", t.shape(), c.shape()),
            ));
        }
        let v = t.zip(&c, |x, y| x * y);
        self.push(v, Op::MulConst(a, Arc::new(c)))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn pow(&mut self, a: Var, p: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x.powf(p));
        self.push(v, Op::Pow(a, p))
    }

    /// Euclidean norm of every row, `[n, m] -> [n, 1]`.
    pub fn row_norm(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let data = (0..t.rows())
            .map(|r| t.row(r).iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let v = Tensor::new(t.rows(), 1, data)?;
        self.push(v, Op::RowNorm(a))
    }

    /// Euclidean norm of all entries, `-> [1, 1]`.
    pub fn l2_norm(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        let flat = self.reshape(a, 1, n)?;
        self.row_norm(flat)
    }

    /// `1 / x`, with `0` mapped to `0`.
    pub fn recip_safe(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| if x == 0.0 { 0.0 } else { 1.0 / x });
        self.push(v, Op::RecipSafe(a))
    }

    /// Standardizes every row to zero mean and unit variance.
    pub fn normalize(&mut self, a: Var, eps: f64) -> Result<Var> {
        let t = self.value(a);
        let m = t.cols();
        let mut data = Vec::with_capacity(t.len());
        for r in 0..t.rows() {
            let row = t.row(r);
            let mean = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64;
            let s = 1.0 / (var + eps).sqrt();
            data.extend(row.iter().map(|x| (x - mean) * s));
        }
        let v = Tensor::new(t.rows(), m, data)?;
        self.push(v, Op::Normalize(a, eps))
    }

    /// Sums over rows, `[n, m] -> [1, m]`.
    pub fn col_sum(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let mut data = vec![0.0; t.cols()];
        for r in 0..t.rows() {
            for (d, x) in data.iter_mut().zip(t.row(r)) {
                *d += x;
            }
        }
        let v = Tensor::new(1, t.cols(), data)?;
        self.push(v, Op::ColSum(a))
    }

    /// Sums over columns, `[n, m] -> [n, 1]`.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let data = (0..t.rows()).map(|r| t.row(r).iter().sum()).collect();
        let v = Tensor::new(t.rows(), 1, data)?;
        self.push(v, Op::RowSum(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(Error::shape("mean", "empty tensor"));
        }
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Broadcasts a `[1, m]` row to `[n, m]`.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let t = self.value(a);
        if t.rows() != 1 {
            return Err(Error::shape("repeat_rows", format!("{:?}", t.shape())));
        }
        let data = t.data().repeat(n);
        let v = Tensor::new(n, t.cols(), data)?;
        self.push(v, Op::RepeatRows(a))
    }

    /// Broadcasts an `[n, 1]` column to `[n, m]`.
    pub fn repeat_cols(&mut self, a: Var, m: usize) -> Result<Var> {
        let t = self.value(a);
        if t.cols() != 1 {
            return Err(Error::shape("repeat_cols", format!("{:?}", t.shape())));
        }
        let data = t.data().iter().flat_map(|&x| std::iter::repeat_n(x, m)).collect();
        let v = Tensor::new(t.rows(), m, data)?;
        self.push(v, Op::RepeatCols(a))
    }

    /// Broadcasts a `[1, 1]` scalar to `[n, m]`.
    pub fn expand(&mut self, a: Var, n: usize, m: usize) -> Result<Var> {
        let t = self.value(a);
        if t.shape() != [1, 1] {
            return Err(Error::shape("expand", format!("{:?}", t.shape())));
        }
        let v = Tensor::full(n, m, t.data()[0]);
        self.push(v, Op::Expand(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat_cols", "no inputs"));
        };
        let rows = self.shape(first)[0];
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s[0] != rows {
                return Err(Error::shape("concat_cols", format!("{rows} rows vs {s:?}")));
            }
            cols += s[1];
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let v = Tensor::new(rows, cols, data)?;
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        if start + len > t.cols() {
            return Err(Error::shape(
                "slice_cols",
                format!("{start}+{len} of {:?}", t.shape()),
            ));
        }
        let data = (0..t.rows())
            .flat_map(|r| t.row(r)[start..start + len].iter().copied())
            .collect();
        let v = Tensor::new(t.rows(), len, data)?;
        self.push(v, Op::SliceCols(a, start))
    }

    /// Places `a` at column `start` of a zero tensor with `total` columns.
    pub fn pad_cols(&mut self, a: Var, start: usize, total: usize) -> Result<Var> {
        let t = self.value(a);
        if start + t.cols() > total {
            return Err(Error::shape(
                "pad_cols",
                format!("{start}+{} > {total}", t.cols()),
            ));
        }
        let mut v = Tensor::zeros(t.rows(), total);
        for r in 0..t.rows() {
            v.data_mut()[r * total + start..r * total + start + t.cols()].copy_from_slice(t.row(r));
        }
        self.push(v, Op::PadCols(a, start))
    }

    /// `out[i] = a[idx[i]]`.
    pub fn gather_rows(&mut self, a: Var, idx: Arc<Vec<usize>>) -> Result<Var> {
        let t = self.value(a);
        let n = t.rows();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::shape("gather_rows", format!("index {bad} of {n} rows")));
        }
        let mut data = Vec::with_capacity(idx.len() * t.cols());
        for &i in idx.iter() {
            data.extend_from_slice(t.row(i));
        }
        let v = Tensor::new(idx.len(), t.cols(), data)?;
        self.push(v, Op::GatherRows(a, idx))
    }

    /// `out[idx[i]] += a[i]` into `n` zero rows.
    pub fn scatter_rows(&mut self, a: Var, idx: Arc<Vec<usize>>, n: usize) -> Result<Var> {
        let t = self.value(a);
        if idx.len() != t.rows() || idx.iter().any(|&i| i >= n) {
            return Err(Error::shape(
                "scatter_rows",
                format!("{} indices into {n} rows for {:?}", idx.len(), t.shape()),
            ));
        }
        let m = t.cols();
        let mut v = Tensor::zeros(n, m);
        for (r, &i) in idx.iter().enumerate() {
            for (d, x) in v.data_mut()[i * m..(i + 1) * m].iter_mut().zip(t.row(r)) {
                *d += x;
            }
        }
        self.push(v, Op::ScatterRows(a, idx))
    }

    /// Column-wise selection: `out[r, j] = a[idx[r * m + j], j]`.
    pub fn pick_rows(&mut self, a: Var, idx: Arc<Vec<usize>>) -> Result<Var> {
        let t = self.value(a);
        let m = t.cols();
        if m == 0 || idx.len() % m != 0 || idx.iter().any(|&i| i >= t.rows()) {
            return Err(Error::shape("pick_rows", format!("{} indices for {:?}", idx.len(), t.shape())));
        }
        let data = idx
            .iter()
            .enumerate()
            .map(|(k, &i)| t.get(i, k % m))
            .collect();
        let v = Tensor::new(idx.len() / m, m, data)?;
        self.push(v, Op::PickRows(a, idx))
    }

    /// Adjoint of [`Graph::pick_rows`]: `out[idx[r * m + j], j] += a[r, j]`.
    pub fn scatter_pick(&mut self, a: Var, idx: Arc<Vec<usize>>, n: usize) -> Result<Var> {
        let t = self.value(a);
        let m = t.cols();
        if idx.len() != t.len() || idx.iter().any(|&i| i >= n) {
            return Err(Error::shape(
                "scatter_pick",
                format!("{} indices into {n} rows for {:?}", idx.len(), t.shape()),
            ));
        }
        let mut v = Tensor::zeros(n, m);
        for (k, &i) in idx.iter().enumerate() {
            v.data_mut()[i * m + k % m] += t.data()[k];
        }
        self.push(v, Op::ScatterPick(a, idx))
    }

    /// Column-wise maximum over all rows, `[n, m] -> [1, m]`. Ties go to the
    /// lowest row.
    pub fn max_pool(&mut self, a: Var) -> Result<Var> {
        let n = self.shape(a)[0];
        self.segment_max(a, &[0, n])
    }

    /// Column-wise maximum over consecutive row segments. `bounds` lists the
    /// segment starts followed by the total row count; the result has one row
    /// per segment.
    pub fn segment_max(&mut self, a: Var, bounds: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let (n, m) = (t.rows(), t.cols());
        let ok = bounds.len() >= 2
            && bounds[bounds.len() - 1] == n
            && bounds.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::shape("segment_max", format!("bounds {bounds:?} for {n} rows")));
        }
        let mut idx = Vec::with_capacity((bounds.len() - 1) * m);
        for w in bounds.windows(2) {
            for j in 0..m {
                let mut best = w[0];
                for i in w[0] + 1..w[1] {
                    if t.get(i, j) > t.get(best, j) {
                        best = i;
                    }
                }
                idx.push(best);
            }
        }
        self.pick_rows(a, Arc::new(idx))
    }

    /// `x w + b` with `w: [in, out]` and `b: [1, out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let n = self.shape(x)[0];
        let xw = self.matmul(x, w)?;
        let bb = self.repeat_rows(b, n)?;
        self.add(xw, bb)
    }

    /// Row-wise layer normalization with affine `gamma`, `beta` of shape `[1, m]`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let n = self.shape(x)[0];
        let y = self.normalize(x, eps)?;
        let g = self.repeat_rows(gamma, n)?;
        let b = self.repeat_rows(beta, n)?;
        let yg = self.mul(y, g)?;
        self.add(yg, b)
    }

    /// Hash of every branch taken so far: leaky ReLU input signs and max-pool
    /// winners. Two evaluations with equal signatures are on the same smooth
    /// piece of a piecewise-smooth function.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::LeakyRelu(a, _) => {
                    for &x in self.value(*a).data() {
                        (x > 0.0).hash(&mut h);
                    }
                }
                Op::PickRows(_, idx) => idx.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    /// Gradients of the scalar `output` with respect to each of `wrt`.
    ///
    /// With `create_graph` the backward pass stays on the graph and the
    /// returned handles can be differentiated again; otherwise the returned
    /// handles are constants. Fails with `NoPath` when some `wrt` does not
    /// influence `output`.
    pub fn grad(&mut self, output: Var, wrt: &[Var], create_graph: bool) -> Result<Vec<Var>> {
        self.backward(output, wrt, create_graph, false)
    }

    /// Like [`Graph::grad`] but yields zeros for unreachable inputs.
    pub fn grad_allow_unused(
        &mut self,
        output: Var,
        wrt: &[Var],
        create_graph: bool,
    ) -> Result<Vec<Var>> {
        self.backward(output, wrt, create_graph, true)
    }

    fn backward(
        &mut self,
        output: Var,
        wrt: &[Var],
        create_graph: bool,
        allow_unused: bool,
    ) -> Result<Vec<Var>> {
        let [rows, cols] = self.shape(output);
        if rows != 1 || cols != 1 {
            return Err(Error::NotScalar { rows, cols });
        }
        let end = output.0 + 1;
        let mut relevant = vec![false; end];
        for w in wrt {
            if w.0 < end {
                relevant[w.0] = true;
            }
        }
        if let Some(lo) = wrt.iter().map(|w| w.0).min() {
            for i in lo..end {
                if !relevant[i] {
                    let mut hit = false;
                    self.nodes[i].op.for_each_input(|x| hit |= relevant[x.0]);
                    relevant[i] = hit;
                }
            }
        }
        let mut reaches = vec![false; end];
        reaches[output.0] = relevant[output.0];
        for i in (0..end).rev() {
            if reaches[i] {
                self.nodes[i].op.for_each_input(|x| {
                    if relevant[x.0] {
                        reaches[x.0] = true;
                    }
                });
            }
        }
        for (r, &reach) in relevant.iter_mut().zip(&reaches) {
            *r &= reach;
        }

        let mark = self.nodes.len();
        let mut grads: Vec<Option<Var>> = vec![None; end];
        if relevant[output.0] {
            grads[output.0] = Some(self.scalar(1.0));
        }
        let mut contribs = Vec::new();
        for i in (0..end).rev() {
            let Some(g) = grads[i] else { continue };
            contribs.clear();
            self.backward_rule(i, g, &relevant, &mut contribs)?;
            for &(x, gx) in &contribs {
                grads[x.0] = Some(match grads[x.0] {
                    None => gx,
                    Some(prev) => self.add(prev, gx)?,
                });
            }
        }

        let mut out = Vec::with_capacity(wrt.len());
        for w in wrt {
            match grads.get(w.0).copied().flatten() {
                Some(g) => out.push(g),
                None if allow_unused => {
                    let [r, c] = self.shape(*w);
                    out.push(self.leaf(Tensor::zeros(r, c)));
                }
                None => {
                    self.nodes.truncate(mark);
                    return Err(Error::NoPath(w.0));
                }
            }
        }
        if !create_graph {
            let values: Vec<Tensor> = out.iter().map(|&g| self.value(g).clone()).collect();
            self.nodes.truncate(mark);
            out = values.into_iter().map(|t| self.leaf(t)).collect();
        }
        Ok(out)
    }

    /// Appends `(input, gradient contribution)` pairs for the relevant inputs
    /// of node `i` given its output gradient `g`.
    fn backward_rule(
        &mut self,
        i: usize,
        g: Var,
        need: &[bool],
        out: &mut Vec<(Var, Var)>,
    ) -> Result<()> {
        let y = Var(i);
        let op = self.nodes[i].op.clone();
        let need = |v: Var| need[v.0];
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if need(a) {
                    out.push((a, g));
                }
                if need(b) {
                    out.push((b, self.neg(g)?));
                }
            }
            Op::Mul(a, b) => {
                if need(a) {
                    out.push((a, self.mul(g, b)?));
                }
                if need(b) {
                    out.push((b, self.mul(g, a)?));
                }
            }
            Op::Scale(a, c) => out.push((a, self.scale(g, c)?)),
            Op::Shift(a) => out.push((a, g)),
            Op::MatMul(a, b) => {
                if need(a) {
                    let bt = self.transpose(b)?;
                    out.push((a, self.matmul(g, bt)?));
                }
                if need(b) {
                    let at = self.transpose(a)?;
                    out.push((b, self.matmul(at, g)?));
                }
            }
            Op::Transpose(a) => out.push((a, self.transpose(g)?)),
            Op::Reshape(a) => {
                let [r, c] = self.shape(a);
                out.push((a, self.reshape(g, r, c)?));
            }
            Op::MulConst(a, c) => {
                let v = self.value(g).zip(&c, |x, y| x * y);
                let ga = self.push(v, Op::MulConst(g, c))?;
                out.push((a, ga));
            }
            Op::LeakyRelu(a, slope) => {
                let mask = self.value(a).map(|x| if x > 0.0 { 1.0 } else { slope });
                out.push((a, self.mul_const(g, mask)?));
            }
            Op::Pow(a, p) => {
                let d = self.pow(a, p - 1.0)?;
                let d = self.scale(d, p)?;
                out.push((a, self.mul(g, d)?));
            }
            Op::RowNorm(a) => {
                let m = self.shape(a)[1];
                let inv = self.recip_safe(y)?;
                let s = self.mul(g, inv)?;
                let s = self.repeat_cols(s, m)?;
                out.push((a, self.mul(a, s)?));
            }
            Op::RecipSafe(a) => {
                let y2 = self.mul(y, y)?;
                let d = self.neg(y2)?;
                out.push((a, self.mul(g, d)?));
            }
            Op::Normalize(a, eps) => {
                let m = self.shape(a)[1];
                let inv_m = 1.0 / m as f64;
                let g_mean = self.row_sum(g)?;
                let g_mean = self.scale(g_mean, inv_m)?;
                let g_mean = self.repeat_cols(g_mean, m)?;
                let gy = self.mul(g, y)?;
                let gy_mean = self.row_sum(gy)?;
                let gy_mean = self.scale(gy_mean, inv_m)?;
                let gy_mean = self.repeat_cols(gy_mean, m)?;
                let inner = self.sub(g, g_mean)?;
                let y_gy = self.mul(y, gy_mean)?;
                let inner = self.sub(inner, y_gy)?;
                let mean = self.row_sum(a)?;
                let mean = self.scale(mean, inv_m)?;
                let mean = self.repeat_cols(mean, m)?;
                let xc = self.sub(a, mean)?;
                let sq = self.mul(xc, xc)?;
                let var = self.row_sum(sq)?;
                let var = self.scale(var, inv_m)?;
                let var = self.add_scalar(var, eps)?;
                let s = self.pow(var, -0.5)?;
                let s = self.repeat_cols(s, m)?;
                out.push((a, self.mul(inner, s)?));
            }
            Op::ColSum(a) => {
                let n = self.shape(a)[0];
                out.push((a, self.repeat_rows(g, n)?));
            }
            Op::RowSum(a) => {
                let m = self.shape(a)[1];
                out.push((a, self.repeat_cols(g, m)?));
            }
            Op::SumAll(a) => {
                let [n, m] = self.shape(a);
                out.push((a, self.expand(g, n, m)?));
            }
            Op::RepeatRows(a) => out.push((a, self.col_sum(g)?)),
            Op::RepeatCols(a) => out.push((a, self.row_sum(g)?)),
            Op::Expand(a) => out.push((a, self.sum(g)?)),
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = self.shape(p)[1];
                    if need(p) {
                        out.push((p, self.slice_cols(g, start, w)?));
                    }
                    start += w;
                }
            }
            Op::SliceCols(a, start) => {
                let total = self.shape(a)[1];
                out.push((a, self.pad_cols(g, start, total)?));
            }
            Op::PadCols(a, start) => {
                let w = self.shape(a)[1];
                out.push((a, self.slice_cols(g, start, w)?));
            }
            Op::GatherRows(a, idx) => {
                let n = self.shape(a)[0];
                out.push((a, self.scatter_rows(g, idx, n)?));
            }
            Op::ScatterRows(a, idx) => out.push((a, self.gather_rows(g, idx)?)),
            Op::PickRows(a, idx) => {
                let n = self.shape(a)[0];
                out.push((a, self.scatter_pick(g, idx, n)?));
            }
            Op::ScatterPick(a, idx) => out.push((a, self.pick_rows(g, idx)?)),
        }
        out.retain(|&(x, _)| need(x));
        Ok(())
    }
}
