//! Encoder, generator and discriminator as functions of a [`ParamStore`].

mod discriminator;
mod encoder;
mod generator;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};

pub use discriminator::{ball_query, farthest_point_sample, Discriminator};
pub use encoder::Encoder;
pub use generator::Generator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscriminatorKind {
    #[serde(rename = "pointnet++")]
    PointNetPlusPlus,
    #[serde(rename = "pointnet")]
    PointNet,
}

/// One set-abstraction level of the discriminator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetAbstraction {
    /// Centroids kept relative to the level's input points.
    pub ratio: f64,
    pub radius: f64,
    pub max_neighbors: usize,
    pub mlp: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub latent_dim: usize,
    /// Hidden widths of the per-point encoder MLP; a final layer maps to
    /// `latent_dim`.
    pub encoder_widths: Vec<usize>,
    pub generator_depth: usize,
    pub generator_width: usize,
    /// 1-based generator layer whose input receives the latent skip.
    pub skip_layer: usize,
    pub leaky_slope: f64,
    pub layer_norm_eps: f64,
    pub discriminator: DiscriminatorKind,
    pub set_abstraction: Vec<SetAbstraction>,
    pub global_mlp: Vec<usize>,
    /// Hidden widths of the three-layer scoring head.
    pub head_widths: [usize; 2],
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            latent_dim: 64,
            encoder_widths: vec![64, 128, 256],
            generator_depth: 8,
            generator_width: 64,
            skip_layer: 5,
            leaky_slope: 0.01,
            layer_norm_eps: 1e-5,
            discriminator: DiscriminatorKind::PointNetPlusPlus,
            set_abstraction: vec![
                SetAbstraction {
                    ratio: 0.25,
                    radius: 0.2,
                    max_neighbors: 32,
                    mlp: vec![16, 32],
                },
                SetAbstraction {
                    ratio: 0.25,
                    radius: 0.4,
                    max_neighbors: 32,
                    mlp: vec![32, 64],
                },
            ],
            global_mlp: vec![128],
            head_widths: [64, 32],
        }
    }
}

impl NetConfig {
    /// Full-size dimensions: 512-d latent and an 8x128 generator.
    pub fn full_scale() -> Self {
        NetConfig {
            latent_dim: 512,
            generator_width: 128,
            set_abstraction: vec![
                SetAbstraction {
                    ratio: 0.25,
                    radius: 0.2,
                    max_neighbors: 32,
                    mlp: vec![64, 64, 128],
                },
                SetAbstraction {
                    ratio: 0.25,
                    radius: 0.4,
                    max_neighbors: 32,
                    mlp: vec![128, 128, 256],
                },
            ],
            global_mlp: vec![256, 512],
            head_widths: [256, 128],
            ..NetConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("network: {msg}")));
        if self.latent_dim == 0 || self.generator_width == 0 || self.generator_depth == 0 {
            return bad("latent_dim, generator_width and generator_depth must be positive".into());
        }
        if self.skip_layer < 2 || self.skip_layer > self.generator_depth {
            return bad(format!(
                "skip_layer {} outside 2..={}",
                self.skip_layer, self.generator_depth
            ));
        }
        let widths = self
            .encoder_widths
            .iter()
            .chain(&self.global_mlp)
            .chain(&self.head_widths)
            .chain(self.set_abstraction.iter().flat_map(|s| &s.mlp));
        if widths.into_iter().any(|&w| w == 0) {
            return bad("layer widths must be positive".into());
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky_slope {} outside [0, 1)", self.leaky_slope));
        }
        if !(self.layer_norm_eps > 0.0) {
            return bad("layer_norm_eps must be positive".into());
        }
        for (i, s) in self.set_abstraction.iter().enumerate() {
            if !(s.ratio > 0.0 && s.ratio <= 1.0) {
                return bad(format!("set_abstraction[{i}].ratio {} outside (0, 1]", s.ratio));
            }
            if !(s.radius > 0.0) || s.max_neighbors == 0 || s.mlp.is_empty() {
                return bad(format!(
                    "set_abstraction[{i}] needs a positive radius, neighbors and at least one layer"
                ));
            }
        }
        Ok(())
    }
}

/// Affine layer `x w + b` with `w: [fan_in, fan_out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

impl Linear {
    /// Registers weights drawn uniformly from `±scale/sqrt(fan_in)`.
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = scale / (fan_in as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        let w = Tensor::new(fan_in, fan_out, draw(fan_in * fan_out))?;
        let b = Tensor::new(1, fan_out, draw(fan_out))?;
        Ok(Linear {
            w: store.add(format!("{name}.w"), w)?,
            b: store.add(format!("{name}.b"), b)?,
        })
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Result<Var> {
        g.linear(x, p[self.w], p[self.b])
    }
}

/// Shared per-row MLP with a leaky ReLU after every layer.
fn mlp(g: &mut Graph, p: &[Var], layers: &[Linear], mut x: Var, slope: f64) -> Result<Var> {
    for layer in layers {
        let h = layer.forward(g, p, x)?;
        x = g.leaky_relu(h, slope)?;
    }
    Ok(x)
}

fn register_mlp<R: Rng + ?Sized>(
    store: &mut ParamStore,
    prefix: &str,
    mut fan_in: usize,
    widths: &[usize],
    rng: &mut R,
) -> Result<Vec<Linear>> {
    let mut layers = Vec::with_capacity(widths.len());
    for (i, &w) in widths.iter().enumerate() {
        layers.push(Linear::register(store, &format!("{prefix}.{i}"), fan_in, w, 1.0, rng)?);
        fan_in = w;
    }
    Ok(layers)
}

/// Rejects a store whose parameter names or shapes differ from `expected`.
pub fn check_layout(expected: &ParamStore, actual: &ParamStore) -> Result<()> {
    let same = expected.network() == actual.network()
        && expected.len() == actual.len()
        && expected
            .params()
            .iter()
            .zip(actual.params())
            .all(|(a, b)| a.name == b.name && a.value.shape() == b.value.shape());
    if !same {
        return Err(Error::InvalidInput(format!(
            "parameters for {} do not match the configured architecture",
            expected.network()
        )));
    }
    Ok(())
}
