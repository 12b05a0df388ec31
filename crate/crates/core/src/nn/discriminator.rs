use std::sync::Arc;

use rand::Rng;

use super::{mlp, register_mlp, DiscriminatorKind, Linear, NetConfig, SetAbstraction};
use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::geometry::dist_sq;

/// Greedy max-min subset of `count` points starting from `start`. Ties go to
/// the smallest index.
pub fn farthest_point_sample(points: &[[f64; 3]], count: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if count > n {
        return Err(Error::InvalidInput(format!("cannot sample {count} of {n} points")));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if start >= n {
        return Err(Error::InvalidInput(format!("start index {start} of {n} points")));
    }
    let mut chosen = Vec::with_capacity(count);
    let mut nearest = vec![f64::INFINITY; n];
    let mut next = start;
    for _ in 0..count {
        chosen.push(next);
        let c = points[next];
        let mut best = 0;
        let mut best_d = -1.0;
        for (i, (p, d)) in points.iter().zip(nearest.iter_mut()).enumerate() {
            *d = d.min(dist_sq(*p, c));
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        next = best;
    }
    Ok(chosen)
}

/// For each centre, the first `max_neighbors` point indices within `radius`,
/// in index order. A group that would be empty holds the centre alone.
pub fn ball_query(
    points: &[[f64; 3]],
    centers: &[usize],
    radius: f64,
    max_neighbors: usize,
) -> Vec<Vec<usize>> {
    let r2 = radius * radius;
    centers
        .iter()
        .map(|&c| {
            let group: Vec<usize> = (0..points.len())
                .filter(|&i| dist_sq(points[i], points[c]) <= r2)
                .take(max_neighbors)
                .collect();
            if group.is_empty() {
                vec![c]
            } else {
                group
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
struct Level {
    spec: SetAbstraction,
    layers: Vec<Linear>,
}

/// Critic over signed distance fields sampled at query points. Scores are
/// unbounded.
#[derive(Clone, Debug)]
pub struct Discriminator {
    kind: DiscriminatorKind,
    levels: Vec<Level>,
    global: Vec<Linear>,
    head: Vec<Linear>,
    slope: f64,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(cfg: &NetConfig, rng: &mut R) -> Result<(Self, ParamStore)> {
        let mut s = ParamStore::new("discriminator");
        let mut levels = Vec::new();
        // (x, y, z, d) rows
        let mut width = 1;
        if cfg.discriminator == DiscriminatorKind::PointNetPlusPlus {
            for (i, spec) in cfg.set_abstraction.iter().enumerate() {
                let layers = register_mlp(&mut s, &format!("disc.sa{i}"), 3 + width, &spec.mlp, rng)?;
                width = *spec.mlp.last().unwrap_or(&width);
                levels.push(Level {
                    spec: spec.clone(),
                    layers,
                });
            }
        } else {
            width += 3;
        }
        let global = register_mlp(&mut s, "disc.global", width, &cfg.global_mlp, rng)?;
        width = *cfg.global_mlp.last().unwrap_or(&width);
        let mut head = register_mlp(&mut s, "disc.head", width, &cfg.head_widths, rng)?;
        head.push(Linear::register(&mut s, "disc.out", cfg.head_widths[1], 1, 1.0, rng)?);
        let d = Discriminator {
            kind: cfg.discriminator,
            levels,
            global,
            head,
            slope: cfg.leaky_slope,
        };
        Ok((d, s))
    }

    pub fn kind(&self) -> DiscriminatorKind {
        self.kind
    }

    /// Scalar score `[1, 1]` of the field `[k, 1]` sampled at `xyz` (`k` points).
    pub fn discriminate(&self, g: &mut Graph, p: &[Var], xyz: &[[f64; 3]], field: Var) -> Result<Var> {
        let [k, c] = g.shape(field);
        if k != xyz.len() || c != 1 || k == 0 {
            return Err(Error::shape(
                "discriminate",
                format!("field {:?} for {} query points", [k, c], xyz.len()),
            ));
        }
        let pooled_input = match self.kind {
            DiscriminatorKind::PointNet => {
                let pos = g.leaf(Tensor::from_points(xyz));
                g.concat_cols(&[pos, field])?
            }
            DiscriminatorKind::PointNetPlusPlus => {
                let mut pos = xyz.to_vec();
                let mut feats = field;
                for level in &self.levels {
                    (pos, feats) = self.abstract_level(g, p, level, &pos, feats)?;
                }
                feats
            }
        };
        let h = mlp(g, p, &self.global, pooled_input, self.slope)?;
        let mut h = g.max_pool(h)?;
        let (last, hidden) = self.head.split_last().expect("head has three layers");
        h = mlp(g, p, hidden, h, self.slope)?;
        last.forward(g, p, h)
    }

    fn abstract_level(
        &self,
        g: &mut Graph,
        p: &[Var],
        level: &Level,
        pos: &[[f64; 3]],
        feats: Var,
    ) -> Result<(Vec<[f64; 3]>, Var)> {
        let n = pos.len();
        let m = ((n as f64 * level.spec.ratio).ceil() as usize).clamp(1, n);
        let centers = farthest_point_sample(pos, m, 0)?;
        let groups = ball_query(pos, &centers, level.spec.radius, level.spec.max_neighbors);
        let mut idx = Vec::new();
        let mut bounds = Vec::with_capacity(m + 1);
        let mut rel = Vec::new();
        for (&c, group) in centers.iter().zip(&groups) {
            bounds.push(idx.len());
            for &i in group {
                idx.push(i);
                rel.extend((0..3).map(|a| pos[i][a] - pos[c][a]));
            }
        }
        bounds.push(idx.len());
        let rel = g.leaf(Tensor::new(idx.len(), 3, rel)?);
        let gathered = g.gather_rows(feats, Arc::new(idx))?;
        let rows = g.concat_cols(&[rel, gathered])?;
        let h = mlp(g, p, &level.layers, rows, self.slope)?;
        let pooled = g.segment_max(h, &bounds)?;
        Ok((centers.iter().map(|&c| pos[c]).collect(), pooled))
    }

    /// Evaluates the score without keeping a graph.
    pub fn score(&self, store: &ParamStore, xyz: &[[f64; 3]], field: &[f64]) -> Result<f64> {
        let mut g = Graph::new();
        let p = store.bind(&mut g);
        let f = g.leaf(Tensor::column(field));
        let s = self.discriminate(&mut g, &p, xyz, f)?;
        Ok(g.item(s))
    }
}
