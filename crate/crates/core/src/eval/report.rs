use std::fmt::Write as _;

use super::EvalReport;

pub const EVAL_CSV_HEADER: &str = "shape_id,cd,gen_to_gt,gt_to_gen";
pub const CURVE_CSV_HEADER: &str = "threshold,fraction_gen_to_gt,fraction_gt_to_gen";

/// Per-shape distances, unscaled.
pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = format!("{EVAL_CSV_HEADER}\n");
    for s in &report.shapes {
        let _ = writeln!(out, "{},{},{},{}", s.shape_id, s.cd, s.gen_to_gt, s.gt_to_gen);
    }
    out
}

pub fn curve_csv(report: &EvalReport) -> String {
    let mut out = format!("{CURVE_CSV_HEADER}\n");
    for p in &report.curve {
        let _ = writeln!(
            out,
            "{},{},{}",
            p.threshold, p.fraction_gen_to_gt, p.fraction_gt_to_gen
        );
    }
    out
}

impl EvalReport {
    /// Summary with distances scaled by 10³.
    pub fn summary(&self) -> String {
        let k = 1e3;
        let mut out = String::new();
        let _ = writeln!(out, "shapes evaluated: {}", self.shapes.len());
        let _ = writeln!(out, "failed completions (no surface): {}", self.failures.len());
        for id in &self.failures {
            let _ = writeln!(out, "  failed: {id}");
        }
        let _ = writeln!(out, "distances are mean squared nearest-neighbour distances x 10^3");
        let _ = writeln!(out, "mean CD:            {:.3}", k * self.mean_cd());
        let _ = writeln!(out, "mean gen -> g.t.:   {:.3}", k * self.mean_gen_to_gt());
        let _ = writeln!(out, "mean g.t. -> gen:   {:.3}", k * self.mean_gt_to_gen());
        let _ = writeln!(out, "mean g.t. -> input: {:.3}", k * self.mean_gt_to_partial());
        let _ = writeln!(
            out,
            "cumulative curves use squared per-point distances, thresholds 0 to 0.05"
        );
        out
    }
}
