use rand::Rng;

use super::{mlp, register_mlp, Linear, NetConfig};
use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

/// PointNet encoder: a shared per-point MLP followed by a max-pool over points.
#[derive(Clone, Debug)]
pub struct Encoder {
    layers: Vec<Linear>,
    slope: f64,
    latent_dim: usize,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new("encoder");
        let mut widths = cfg.encoder_widths.clone();
        widths.push(cfg.latent_dim);
        let layers = register_mlp(&mut store, "enc", 3, &widths, rng)?;
        let enc = Encoder {
            layers,
            slope: cfg.leaky_slope,
            latent_dim: cfg.latent_dim,
        };
        Ok((enc, store))
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Latent code `[1, latent_dim]` of an `[n, 3]` point tensor.
    pub fn encode(&self, g: &mut Graph, p: &[Var], points: Var) -> Result<Var> {
        let [n, c] = g.shape(points);
        if n == 0 {
            return Err(Error::InvalidInput("cannot encode an empty point cloud".into()));
        }
        if c != 3 {
            return Err(Error::shape("encode", format!("points have {c} columns")));
        }
        let h = mlp(g, p, &self.layers, points, self.slope)?;
        g.max_pool(h)
    }

    /// Evaluates the code without keeping a graph.
    pub fn encode_points(&self, store: &ParamStore, points: &[[f64; 3]]) -> Result<Tensor> {
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let x = g.leaf(Tensor::from_points(points));
        let z = self.encode(&mut g, &p, x)?;
        Ok(g.value(z).clone())
    }
}
