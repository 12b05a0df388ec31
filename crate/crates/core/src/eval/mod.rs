//! Chamfer evaluation of completions and the ablation sweeps.

mod ablation;
mod report;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{subsample, PartialMode, ShapeRecord};
use crate::error::{Error, Result};
use crate::geometry::{
    half_space_cut_along, nearest_sq_distances, sample_surface, Chamfer, KdTree, PointCloud,
};
use crate::train::{complete, Model};

pub use ablation::{
    ablate_density, ablate_network, ablate_partiality, DensityRow, NetworkRow, PartialityRow,
    density_csv, network_csv, partiality_csv, NETWORK_SETTINGS, REFERENCE_NETWORK_CD,
};
pub use report::{curve_csv, eval_csv, CURVE_CSV_HEADER, EVAL_CSV_HEADER};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Points sampled on each surface for the Chamfer distance.
    pub eval_points: usize,
    /// Grid resolution of the completed field.
    pub resolution: usize,
    /// Sub-sample the partial input to this many points.
    pub input_points: Option<usize>,
    pub density_counts: Vec<usize>,
    pub partiality_ratios: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            eval_points: 30_000,
            resolution: 64,
            input_points: None,
            density_counts: vec![50, 100, 250, 500, 1000, 2000, 4000, 8000],
            partiality_ratios: (1..=20).map(|i| i as f64 * 0.05).collect(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_points == 0 {
            return Err(Error::Config("eval.eval_points must be positive".into()));
        }
        if self.resolution < 2 {
            return Err(Error::Config("eval.resolution must be at least 2".into()));
        }
        if self.input_points == Some(0) || self.density_counts.contains(&0) {
            return Err(Error::Config("eval input point counts must be positive".into()));
        }
        if let Some(r) = self.partiality_ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::Config(format!("eval.partiality_ratios: {r} outside (0, 1]")));
        }
        Ok(())
    }
}

/// How the partial input of every test shape is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InputSpec {
    /// Fixed retained ratio instead of the test-mode distribution.
    pub ratio: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeEval {
    pub shape_id: String,
    pub cd: f64,
    pub gen_to_gt: f64,
    pub gt_to_gen: f64,
    /// One-sided distance from the full shape to the raw partial input.
    pub gt_to_partial: f64,
    pub input_points: usize,
}

/// Fraction of per-point squared distances at or below `threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub fraction_gen_to_gt: f64,
    pub fraction_gt_to_gen: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Successful completions in input order.
    pub shapes: Vec<ShapeEval>,
    /// Shapes whose completion had no surface.
    pub failures: Vec<String>,
    pub curve: Vec<CurvePoint>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl EvalReport {
    pub fn mean_cd(&self) -> f64 {
        mean(self.shapes.iter().map(|s| s.cd))
    }

    pub fn mean_gen_to_gt(&self) -> f64 {
        mean(self.shapes.iter().map(|s| s.gen_to_gt))
    }

    pub fn mean_gt_to_gen(&self) -> f64 {
        mean(self.shapes.iter().map(|s| s.gt_to_gen))
    }

    /// Internal consistency: every CD is the sum of its one-sided terms and
    /// the curves are non-decreasing and end at 1.
    pub fn check(&self) -> Result<()> {
        for s in &self.shapes {
            if (s.cd - (s.gen_to_gt + s.gt_to_gen)).abs() > 1e-12 {
                return Err(Error::Diagnostic(format!("{}: CD is not the sum of its terms", s.shape_id)));
            }
        }
        let monotone = self.curve.windows(2).all(|w| {
            w[0].threshold <= w[1].threshold
                && w[0].fraction_gen_to_gt <= w[1].fraction_gen_to_gt
                && w[0].fraction_gt_to_gen <= w[1].fraction_gt_to_gen
        });
        let ends = self.shapes.is_empty()
            || self
                .curve
                .last()
                .is_some_and(|p| p.fraction_gen_to_gt == 1.0 && p.fraction_gt_to_gen == 1.0);
        if !monotone || !ends {
            return Err(Error::Diagnostic("cumulative curve is not a distribution".into()));
        }
        Ok(())
    }

    /// Mean one-sided distance from the full shapes to their raw partial
    /// inputs: the score of returning the input unchanged.
    pub fn mean_gt_to_partial(&self) -> f64 {
        mean(self.shapes.iter().map(|s| s.gt_to_partial))
    }
}

/// Thresholds of the cumulative curve: 0 to 0.05 in steps of 0.001.
pub fn curve_thresholds() -> Vec<f64> {
    (0..=50).map(|i| i as f64 * 1e-3).collect()
}

/// Cumulative curve over the pooled per-point squared distances. A final
/// point at the largest distance is appended when the grid ends below it.
pub fn cumulative_curve(gen_to_gt: &[f64], gt_to_gen: &[f64]) -> Vec<CurvePoint> {
    let mut a = gen_to_gt.to_vec();
    let mut b = gt_to_gen.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let frac = |xs: &[f64], t: f64| {
        if xs.is_empty() {
            0.0
        } else {
            xs.partition_point(|&x| x <= t) as f64 / xs.len() as f64
        }
    };
    let mut thresholds = curve_thresholds();
    let last = a.last().copied().unwrap_or(0.0).max(b.last().copied().unwrap_or(0.0));
    if last > *thresholds.last().unwrap() {
        thresholds.push(last);
    }
    thresholds
        .into_iter()
        .map(|t| CurvePoint {
            threshold: t,
            fraction_gen_to_gt: frac(&a, t),
            fraction_gt_to_gen: frac(&b, t),
        })
        .collect()
}

/// Test-time partial input: cut the cached surface, then optionally
/// sub-sample the retained points.
pub fn test_partial<R: Rng + ?Sized>(record: &ShapeRecord, input: InputSpec, rng: &mut R) -> Result<PointCloud> {
    let ratio = match input.ratio {
        Some(r) => r,
        None => PartialMode::Test.draw_ratio(rng),
    };
    let dir: [f64; 3] = UnitSphere.sample(rng);
    let cut = half_space_cut_along(&record.surface, ratio, dir)?;
    Ok(match input.points {
        Some(n) => subsample(&cut, n, rng),
        None => cut,
    })
}

struct Outcome {
    eval: ShapeEval,
    gen_dists: Vec<f64>,
    gt_dists: Vec<f64>,
}

fn shape_rngs(seed: u64, i: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut a = ChaCha8Rng::seed_from_u64(seed);
    a.set_stream(2 * i as u64 + 1);
    let mut b = ChaCha8Rng::seed_from_u64(seed);
    b.set_stream(2 * i as u64 + 2);
    (a, b)
}

fn evaluate_shape(
    model: &Model,
    record: &ShapeRecord,
    index: usize,
    cfg: &EvalConfig,
    input: InputSpec,
    seed: u64,
) -> Result<Option<Outcome>> {
    let (mut input_rng, mut eval_rng) = shape_rngs(seed, index);
    let partial = test_partial(record, input, &mut input_rng)?;
    let gt = sample_surface(&record.mesh, cfg.eval_points, &mut eval_rng)?;
    let mesh = match complete(model, &partial, cfg.resolution) {
        Ok(m) => m,
        Err(Error::EmptySurface) => return Ok(None),
        Err(e) => return Err(e),
    };
    let gen = sample_surface(&mesh, cfg.eval_points, &mut eval_rng)?;
    let gen_tree = KdTree::new(&gen.points);
    let gt_tree = KdTree::new(&gt.points);
    let gen_dists = nearest_sq_distances(&gen.points, &gt_tree);
    let gt_dists = nearest_sq_distances(&gt.points, &gen_tree);
    let c = Chamfer {
        a_to_b: mean(gen_dists.iter().copied()),
        b_to_a: mean(gt_dists.iter().copied()),
    };
    let partial_tree = KdTree::new(&partial.points);
    let gt_to_partial = mean(nearest_sq_distances(&gt.points, &partial_tree).into_iter());
    Ok(Some(Outcome {
        eval: ShapeEval {
            shape_id: record.id.clone(),
            cd: c.total(),
            gen_to_gt: c.a_to_b,
            gt_to_gen: c.b_to_a,
            gt_to_partial,
            input_points: partial.len(),
        },
        gen_dists,
        gt_dists,
    }))
}

/// Completes every record from a test-mode partial input and compares the
/// result with the full shape. Completions without a surface are listed as
/// failures and left out of the means.
pub fn eval_completion(
    model: &Model,
    records: &[&ShapeRecord],
    cfg: &EvalConfig,
    seed: u64,
) -> Result<EvalReport> {
    let input = InputSpec {
        ratio: None,
        points: cfg.input_points,
    };
    eval_with_input(model, records, cfg, input, seed)
}

pub fn eval_with_input(
    model: &Model,
    records: &[&ShapeRecord],
    cfg: &EvalConfig,
    input: InputSpec,
    seed: u64,
) -> Result<EvalReport> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::InvalidInput("no test shapes".into()));
    }
    let outcomes: Vec<Option<Outcome>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| evaluate_shape(model, r, i, cfg, input, seed))
        .collect::<Result<_>>()?;
    let mut report = EvalReport {
        shapes: Vec::new(),
        failures: Vec::new(),
        curve: Vec::new(),
    };
    let mut gen_all = Vec::new();
    let mut gt_all = Vec::new();
    for (r, o) in records.iter().zip(outcomes) {
        match o {
            Some(o) => {
                gen_all.extend(o.gen_dists);
                gt_all.extend(o.gt_dists);
                report.shapes.push(o.eval);
            }
            None => report.failures.push(r.id.clone()),
        }
    }
    report.curve = cumulative_curve(&gen_all, &gt_all);
    Ok(report)
}
