use rand::Rng;
use rayon::prelude::*;

use super::{Linear, NetConfig};
use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

/// Initial scale of the output layer, so early predictions sit near zero.
const OUTPUT_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug)]
struct Block {
    linear: Linear,
    gamma: usize,
    beta: usize,
}

/// Conditional SDF network: maps each query point and a shared latent code to
/// a signed distance. Points are processed independently.
#[derive(Clone, Debug)]
pub struct Generator {
    point_embed: Linear,
    latent_embed: Linear,
    blocks: Vec<Block>,
    skip: Linear,
    skip_layer: usize,
    out: Linear,
    slope: f64,
    eps: f64,
    latent_dim: usize,
}

impl Generator {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Result<(Self, ParamStore)> {
        let mut s = ParamStore::new("generator");
        let w = cfg.generator_width;
        let point_embed = Linear::register(&mut s, "gen.embed_point", 3, w, 1.0, rng)?;
        let latent_embed = Linear::register(&mut s, "gen.embed_latent", cfg.latent_dim, w, 1.0, rng)?;
        let mut blocks = Vec::with_capacity(cfg.generator_depth);
        for i in 0..cfg.generator_depth {
            let linear = Linear::register(&mut s, &format!("gen.{i}"), w, w, 1.0, rng)?;
            let gamma = s.add(format!("gen.{i}.ln_gamma"), Tensor::full(1, w, 1.0))?;
            let beta = s.add(format!("gen.{i}.ln_beta"), Tensor::zeros(1, w))?;
            blocks.push(Block { linear, gamma, beta });
        }
        let skip = Linear::register(&mut s, "gen.skip", cfg.latent_dim, w, 1.0, rng)?;
        let out = Linear::register(&mut s, "gen.out", w, 1, OUTPUT_INIT_SCALE, rng)?;
        let gen = Generator {
            point_embed,
            latent_embed,
            blocks,
            skip,
            skip_layer: cfg.skip_layer,
            out,
            slope: cfg.leaky_slope,
            eps: cfg.layer_norm_eps,
            latent_dim: cfg.latent_dim,
        };
        Ok((gen, s))
    }

    /// Parameter indices of the output layer's weight and bias.
    pub fn output_layer(&self) -> (usize, usize) {
        (self.out.w, self.out.b)
    }

    /// Signed distances `[k, 1]` at queries `[k, 3]` for latent code `[1, latent_dim]`.
    pub fn generate(&self, g: &mut Graph, p: &[Var], queries: Var, z: Var) -> Result<Var> {
        let [k, c] = g.shape(queries);
        if k == 0 {
            return Err(Error::InvalidInput("no query points".into()));
        }
        if c != 3 {
            return Err(Error::shape("generate", format!("queries have {c} columns")));
        }
        if g.shape(z) != [1, self.latent_dim] {
            return Err(Error::shape(
                "generate",
                format!("latent {:?}, expected [1, {}]", g.shape(z), self.latent_dim),
            ));
        }
        let hp = self.point_embed.forward(g, p, queries)?;
        let hz = self.latent_embed.forward(g, p, z)?;
        let hz = g.repeat_rows(hz, k)?;
        let mut h = g.add(hp, hz)?;
        for (i, block) in self.blocks.iter().enumerate() {
            if i + 1 == self.skip_layer {
                let s = self.skip.forward(g, p, z)?;
                let s = g.repeat_rows(s, k)?;
                h = g.add(h, s)?;
            }
            let x = block.linear.forward(g, p, h)?;
            let x = g.layer_norm(x, p[block.gamma], p[block.beta], self.eps)?;
            h = g.leaky_relu(x, self.slope)?;
        }
        self.out.forward(g, p, h)
    }

    /// Evaluates the field at `queries` without keeping a graph, in chunks
    /// of bounded memory.
    pub fn evaluate(&self, store: &ParamStore, z: &Tensor, queries: &[[f64; 3]]) -> Result<Vec<f64>> {
        const CHUNK: usize = 4096;
        let parts = queries
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = Graph::new();
                let p = store.bind(&mut g);
                let zv = g.leaf(z.clone());
                let q = g.leaf(Tensor::from_points(chunk));
                let d = self.generate(&mut g, &p, q, zv)?;
                Ok(g.value(d).data().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.concat())
    }
}
