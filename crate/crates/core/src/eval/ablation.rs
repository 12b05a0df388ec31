use std::fmt::Write as _;

use super::{eval_completion, eval_with_input, EvalConfig, InputSpec};
use crate::data::ShapeRecord;
use crate::error::{Error, Result};
use crate::nn::DiscriminatorKind;
use crate::train::{Model, TrainSetup, TrainState};

#[derive(Clone, Debug, PartialEq)]
pub struct DensityRow {
    pub requested: usize,
    /// Mean number of input points actually used.
    pub mean_input_points: f64,
    /// The request exceeded some partial input and was clamped.
    pub clamped: bool,
    pub cd: f64,
    pub failures: usize,
}

/// Mean CD with the partial inputs sub-sampled to each count.
pub fn ablate_density(
    model: &Model,
    records: &[&ShapeRecord],
    counts: &[usize],
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Vec<DensityRow>> {
    counts
        .iter()
        .map(|&n| {
            let cfg = EvalConfig {
                input_points: Some(n),
                ..cfg.clone()
            };
            let report = eval_completion(model, records, &cfg, seed)?;
            let used: Vec<f64> = report.shapes.iter().map(|s| s.input_points as f64).collect();
            Ok(DensityRow {
                requested: n,
                mean_input_points: used.iter().sum::<f64>() / used.len().max(1) as f64,
                clamped: report.shapes.iter().any(|s| s.input_points < n),
                cd: report.mean_cd(),
                failures: report.failures.len(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialityRow {
    pub ratio: f64,
    pub cd: f64,
    pub gen_to_gt: f64,
    pub gt_to_gen: f64,
    pub failures: usize,
}

/// Mean distances with every input cut to a fixed retained ratio.
pub fn ablate_partiality(
    model: &Model,
    records: &[&ShapeRecord],
    ratios: &[f64],
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Vec<PartialityRow>> {
    ratios
        .iter()
        .map(|&ratio| {
            let input = InputSpec {
                ratio: Some(ratio),
                points: cfg.input_points,
            };
            let report = eval_with_input(model, records, cfg, input, seed)?;
            let gen_to_gt = report.mean_gen_to_gt();
            let gt_to_gen = report.mean_gt_to_gen();
            Ok(PartialityRow {
                ratio,
                cd: gen_to_gt + gt_to_gen,
                gen_to_gt,
                gt_to_gen,
                failures: report.failures.len(),
            })
        })
        .collect()
}

/// The four critic / normal-loss combinations.
pub const NETWORK_SETTINGS: [(&str, DiscriminatorKind, bool); 4] = [
    ("(i)", DiscriminatorKind::PointNet, false),
    ("(ii)", DiscriminatorKind::PointNet, true),
    ("(iii)", DiscriminatorKind::PointNetPlusPlus, false),
    ("(iv)", DiscriminatorKind::PointNetPlusPlus, true),
];

/// Full-scale reference mean CDs (x10³) of the four settings.
pub const REFERENCE_NETWORK_CD: [f64; 4] = [12.30, 12.90, 10.82, 10.70];

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkRow {
    pub tag: &'static str,
    pub discriminator: DiscriminatorKind,
    pub normal_loss: bool,
    pub cd: f64,
    pub failures: usize,
    /// Epoch at which training produced a non-finite value.
    pub diverged_at: Option<usize>,
}

/// Trains one model per setting from the same seed and evaluates each.
pub fn ablate_network(
    train: &[&ShapeRecord],
    test: &[&ShapeRecord],
    setup: &TrainSetup,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Vec<NetworkRow>> {
    let mut rows = Vec::new();
    for &(tag, kind, normal_loss) in &NETWORK_SETTINGS {
        let mut s = setup.clone();
        s.net.discriminator = kind;
        if !normal_loss {
            s.loss.norm = 0.0;
        }
        let mut state = TrainState::new(s, seed)?;
        let mut row = NetworkRow {
            tag,
            discriminator: kind,
            normal_loss,
            cd: f64::NAN,
            failures: 0,
            diverged_at: None,
        };
        let mut ok = true;
        while !state.is_finished() {
            match state.train_epoch(train) {
                Ok(_) => {}
                Err(Error::Diverged { epoch, .. }) => {
                    row.diverged_at = Some(epoch);
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ok {
            let report = eval_completion(&state.model, test, cfg, seed)?;
            row.cd = report.mean_cd();
            row.failures = report.failures.len();
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn density_csv(rows: &[DensityRow]) -> String {
    let mut out = String::from("count,mean_input_points,clamped,cd,failures\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.requested, r.mean_input_points, r.clamped, r.cd, r.failures
        );
    }
    out
}

pub fn partiality_csv(rows: &[PartialityRow]) -> String {
    let mut out = String::from("ratio,cd,gen_to_gt,gt_to_gen,failures\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.ratio, r.cd, r.gen_to_gt, r.gt_to_gen, r.failures
        );
    }
    out
}

pub fn network_csv(rows: &[NetworkRow]) -> String {
    let mut out = String::from("setting,discriminator,normal_loss,cd,failures,diverged_at\n");
    for r in rows {
        let kind = match r.discriminator {
            DiscriminatorKind::PointNet => "pointnet",
            DiscriminatorKind::PointNetPlusPlus => "pointnet++",
        };
        let diverged = r.diverged_at.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.tag, kind, r.normal_loss, r.cd, r.failures, diverged
        );
    }
    let _ = write!(out, "# full-scale reference mean CD x10^3, not reproducible here:");
    for (s, v) in NETWORK_SETTINGS.iter().zip(REFERENCE_NETWORK_CD) {
        let _ = write!(out, " {} {v:.2}", s.0);
    }
    out.push('\n');
    out
}
