use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::{Graph, Tensor, Var};
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SDFCPARM";
const VERSION: u32 = 1;

/// RMSProp hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RmsProp {
    pub lr: f64,
    pub alpha: f64,
    pub eps: f64,
}

impl RmsProp {
    pub fn new(lr: f64) -> Self {
        RmsProp {
            lr,
            alpha: 0.99,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Running mean of squared gradients.
    pub accum: Tensor,
}

/// Named trainable tensors of one network plus their optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    network: String,
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new(network: impl Into<String>) -> Self {
        ParamStore {
            network: network.into(),
            params: Vec::new(),
        }
    }

    pub fn network(&self) -> &str {
        &self.network
    }

    /// Registers a parameter and returns its index.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(Error::InvalidInput(format!("duplicate parameter {name}")));
        }
        let [r, c] = value.shape();
        self.params.push(Param {
            name,
            value,
            accum: Tensor::zeros(r, c),
        });
        Ok(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn value(&self, i: usize) -> &Tensor {
        &self.params[i].value
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.params[i].value
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Records every parameter as a leaf, in store order.
    pub fn bind(&self, g: &mut Graph) -> Vec<Var> {
        self.params.iter().map(|p| g.leaf(p.value.clone())).collect()
    }

    /// Hash over the bit patterns of all values and accumulators.
    pub fn checksum(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for p in &self.params {
            p.name.hash(&mut h);
            for v in p.value.data().iter().chain(p.accum.data()) {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// One RMSProp update. Nothing is modified if any gradient is non-finite.
    pub fn rmsprop_step(&mut self, grads: &[Tensor], opt: &RmsProp) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::shape(
                "rmsprop_step",
                format!("{} gradients for {} parameters", grads.len(), self.params.len()),
            ));
        }
        for (p, g) in self.params.iter().zip(grads) {
            if p.value.shape() != g.shape() {
                return Err(Error::shape(
                    "rmsprop_step",
                    format!("{}: {:?} vs {:?}", p.name, p.value.shape(), g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::Diagnostic(format!(
                    "non-finite gradient for {}/{}",
                    self.network, p.name
                )));
            }
        }
        for (p, g) in self.params.iter_mut().zip(grads) {
            let values = p.value.data_mut();
            let accum = p.accum.data_mut();
            for ((x, v), &gi) in values.iter_mut().zip(accum.iter_mut()).zip(g.data()) {
                *v = opt.alpha * *v + (1.0 - opt.alpha) * gi * gi;
                *x -= opt.lr * gi / (v.sqrt() + opt.eps);
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        self.write(&mut w);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "parameter checkpoint");
        let store = Self::read(&mut r)?;
        r.finish()?;
        Ok(store)
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.str(&self.network);
        w.u32(self.params.len() as u32);
        for p in &self.params {
            w.str(&p.name);
            w.u32(2);
            w.u64(p.value.rows() as u64);
            w.u64(p.value.cols() as u64);
            w.f64s(p.value.data());
        }
        for p in &self.params {
            w.f64s(p.accum.data());
        }
    }

    pub(crate) fn read(r: &mut Reader) -> Result<Self> {
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let mut store = ParamStore::new(r.str()?);
        let count = r.u32()?;
        for _ in 0..count {
            let name = r.str()?;
            let rank = r.u32()?;
            if rank != 2 {
                return Err(r.err(format!("{name}: rank {rank} unsupported")));
            }
            let rows = r.u64()?;
            let cols = r.u64()?;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| r.err(format!("{name}: dims overflow")))?;
            let n = r.count(n, 8)?;
            let value = Tensor::new(rows as usize, cols as usize, r.f64s(n)?)?;
            store
                .add(name, value)
                .map_err(|e| r.err(e.to_string()))?;
        }
        for p in &mut store.params {
            let [rows, cols] = p.value.shape();
            let accum = r.f64s(rows * cols)?;
            if accum.iter().any(|&v| !(v >= 0.0)) {
                return Err(r.err(format!("{}: negative optimizer state", p.name)));
            }
            p.accum = Tensor::new(rows, cols, accum)?;
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmsprop_hand_example() {
        let mut s = ParamStore::new("toy");
        s.add("p", Tensor::scalar(1.0)).unwrap();
        let opt = RmsProp {
            lr: 0.1,
            alpha: 0.99,
            eps: 1e-8,
        };
        s.rmsprop_step(&[Tensor::scalar(1.0)], &opt).unwrap();
        let p = &s.params()[0];
        assert!((p.accum.item() - 0.01).abs() < 1e-15);
        let expected = 1.0 - 0.1 / (0.1 + 1e-8);
        assert!((p.value.item() - expected).abs() < 1e-15);
        assert!((p.value.item() - 1e-7).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_keeps_parameters() {
        let mut s = ParamStore::new("toy");
        s.add("w", Tensor::new(1, 3, vec![0.5, -1.0, 2.0]).unwrap()).unwrap();
        let before = s.value(0).clone();
        s.rmsprop_step(&[Tensor::zeros(1, 3)], &RmsProp::new(1e-3)).unwrap();
        assert_eq!(s.value(0), &before);
    }

    #[test]
    fn non_finite_gradient_rejected_without_update() {
        let mut s = ParamStore::new("toy");
        s.add("a", Tensor::scalar(1.0)).unwrap();
        s.add("b", Tensor::scalar(1.0)).unwrap();
        let before = s.clone();
        let grads = [Tensor::scalar(1.0), Tensor::scalar(f64::NAN)];
        assert!(matches!(
            s.rmsprop_step(&grads, &RmsProp::new(0.1)),
            Err(Error::Diagnostic(_))
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn repeated_steps_are_bitwise_reproducible() {
        let run = || {
            let mut s = ParamStore::new("toy");
            s.add("w", Tensor::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap()).unwrap();
            let g = Tensor::new(2, 2, vec![0.7, -0.3, 1e-4, 2.0]).unwrap();
            for _ in 0..2 {
                s.rmsprop_step(std::slice::from_ref(&g), &RmsProp::new(1e-3)).unwrap();
            }
            s.to_bytes()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let mut s = ParamStore::new("generator");
        s.add("l0.w", Tensor::new(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap()).unwrap();
        s.add("l0.b", Tensor::new(1, 3, vec![-0.5, 0.0, 0.25]).unwrap()).unwrap();
        s.rmsprop_step(
            &[Tensor::full(2, 3, 0.3), Tensor::full(1, 3, -0.1)],
            &RmsProp::new(0.01),
        )
        .unwrap();
        let bytes = s.to_bytes();
        let back = ParamStore::from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_bytes(), bytes);
        for cut in [0, 7, 12, bytes.len() - 1] {
            assert!(ParamStore::from_bytes(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new("x");
        s.add("a", Tensor::scalar(0.0)).unwrap();
        assert!(s.add("a", Tensor::scalar(1.0)).is_err());
    }
}
