use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{Discriminator, Generator};

/// Anything that scores a distance field sampled at query points.
pub trait Critic: Sync {
    fn score(&self, g: &mut Graph, params: &[Var], xyz: &[[f64; 3]], field: Var) -> Result<Var>;
}

impl Critic for Discriminator {
    fn score(&self, g: &mut Graph, params: &[Var], xyz: &[[f64; 3]], field: Var) -> Result<Var> {
        self.discriminate(g, params, xyz, field)
    }
}

/// A latent-conditioned signed distance field, `[k, 3] -> [k, 1]`.
pub trait ImplicitField: Sync {
    fn field(&self, g: &mut Graph, params: &[Var], queries: Var, z: Var) -> Result<Var>;
}

impl ImplicitField for Generator {
    fn field(&self, g: &mut Graph, params: &[Var], queries: Var, z: Var) -> Result<Var> {
        self.generate(g, params, queries, z)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub rec: f64,
    pub norm: f64,
    pub gp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rec: 1.0,
            norm: 0.01,
            gp: 10.0,
        }
    }
}

impl LossWeights {
    /// Full-scale weights, with `rec` applying to an unnormalized norm.
    pub fn full_scale() -> Self {
        LossWeights {
            rec: 8e-3,
            ..LossWeights::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rec", self.rec), ("norm", self.norm), ("gp", self.gp)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("loss.{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// `(‖∇ D(d̂)‖₂ − 1)²` at `d̂ = (1 − λ)·d_full + λ·d_rec`, kept on the graph
/// so it can be differentiated with respect to the critic parameters.
pub fn gradient_penalty<C: Critic + ?Sized>(
    critic: &C,
    g: &mut Graph,
    params: &[Var],
    xyz: &[[f64; 3]],
    d_full: Var,
    d_rec: Var,
    lambda: f64,
) -> Result<Var> {
    let a = g.scale(d_full, 1.0 - lambda)?;
    let b = g.scale(d_rec, lambda)?;
    let d_hat = g.add(a, b)?;
    let s = critic.score(g, params, xyz, d_hat)?;
    let grad = g.grad_allow_unused(s, &[d_hat], true)?[0];
    let n = g.l2_norm(grad)?;
    let n = g.add_scalar(n, -1.0)?;
    g.pow(n, 2.0)
}

/// Critic-side terms for one shape.
pub struct CriticTerms {
    /// `D(d_rec) − D(d_full) + λ_GP·GP`, minimized by the critic.
    pub objective: Var,
    /// `D(d_full) − D(d_rec)`.
    pub wasserstein: f64,
    pub gp: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn loss_gan<C: Critic + ?Sized>(
    critic: &C,
    g: &mut Graph,
    params: &[Var],
    xyz: &[[f64; 3]],
    d_full: Var,
    d_rec: Var,
    lambda: f64,
    gp_weight: f64,
) -> Result<CriticTerms> {
    if g.shape(d_full) != g.shape(d_rec) || g.shape(d_full) != [xyz.len(), 1] {
        return Err(Error::shape(
            "loss_gan",
            format!(
                "fields {:?} and {:?} for {} queries",
                g.shape(d_full),
                g.shape(d_rec),
                xyz.len()
            ),
        ));
    }
    let s_full = critic.score(g, params, xyz, d_full)?;
    let s_rec = critic.score(g, params, xyz, d_rec)?;
    let gp = gradient_penalty(critic, g, params, xyz, d_full, d_rec, lambda)?;
    let diff = g.sub(s_rec, s_full)?;
    let weighted = g.scale(gp, gp_weight)?;
    let objective = g.add(diff, weighted)?;
    Ok(CriticTerms {
        objective,
        wasserstein: g.item(s_full) - g.item(s_rec),
        gp: g.item(gp),
    })
}

/// Reconstruction and normal terms sharing one field evaluation at `v_part`.
/// `v_part` must be a leaf of its own so the spatial gradient is taken with
/// respect to the query positions only.
pub fn surface_terms<F: ImplicitField + ?Sized>(
    field: &F,
    g: &mut Graph,
    params: &[Var],
    z: Var,
    v_part: Var,
    normals: Option<&Tensor>,
) -> Result<(Var, Option<Var>)> {
    let n = g.shape(v_part)[0];
    let d = field.field(g, params, v_part, z)?;
    let rec = g.l2_norm(d)?;
    let rec = g.scale(rec, 1.0 / (n as f64).sqrt())?;
    let Some(normals) = normals else {
        return Ok((rec, None));
    };
    if normals.shape() != [n, 3] {
        return Err(Error::shape("loss_norm", format!("{:?} normals for {n} points", normals.shape())));
    }
    let s = g.sum(d)?;
    let grad = g.grad_allow_unused(s, &[v_part], true)?[0];
    let target = g.leaf(normals.clone());
    let diff = g.sub(grad, target)?;
    let per_point = g.row_norm(diff)?;
    Ok((rec, Some(g.mean(per_point)?)))
}

/// `‖G(V_part, z)‖₂ / √n`.
pub fn loss_rec<F: ImplicitField + ?Sized>(
    field: &F,
    g: &mut Graph,
    params: &[Var],
    z: Var,
    v_part: Var,
) -> Result<Var> {
    Ok(surface_terms(field, g, params, z, v_part, None)?.0)
}

/// Mean over points of `‖∇ₓ G(x, z) − n‖₂`, differentiable in the parameters.
pub fn loss_norm<F: ImplicitField + ?Sized>(
    field: &F,
    g: &mut Graph,
    params: &[Var],
    z: Var,
    v_part: Var,
    normals: &Tensor,
) -> Result<Var> {
    let (_, norm) = surface_terms(field, g, params, z, v_part, Some(normals))?;
    Ok(norm.expect("normals were given"))
}

/// What the encoder and generator minimize: `−D(d_rec) + λ_rec·ℓ_rec + λ_norm·ℓ_norm`.
pub fn generator_objective(
    g: &mut Graph,
    w: &LossWeights,
    score_rec: Var,
    rec: Var,
    norm: Option<Var>,
) -> Result<Var> {
    let adv = g.neg(score_rec)?;
    let r = g.scale(rec, w.rec)?;
    let mut total = g.add(adv, r)?;
    if let Some(norm) = norm {
        let n = g.scale(norm, w.norm)?;
        total = g.add(total, n)?;
    }
    Ok(total)
}

/// The combined loss `ℓ_GAN + λ_rec·ℓ_rec + λ_norm·ℓ_norm` with
/// `ℓ_GAN = D(d_full) − D(d_rec) + λ_GP·GP`.
pub fn total_loss(w: &LossWeights, wasserstein: f64, gp: f64, rec: f64, norm: f64) -> f64 {
    wasserstein + w.gp * gp + w.rec * rec + w.norm * norm
}
