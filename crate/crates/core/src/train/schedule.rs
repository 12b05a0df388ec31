use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Progressive point counts: each stage doubles the number of query and
/// input points, the last stage continues for the refinement epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub stages: Vec<usize>,
    pub epochs_per_stage: usize,
    pub refinement_epochs: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            stages: vec![128, 256, 512],
            epochs_per_stage: 60,
            refinement_epochs: 100,
        }
    }
}

impl Schedule {
    /// 1024 up to 32768 points, 300 epochs per stage and 1000 refinement epochs.
    pub fn full_scale() -> Self {
        Schedule {
            stages: (0..6).map(|i| 1024 << i).collect(),
            epochs_per_stage: 300,
            refinement_epochs: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("schedule: {msg}")));
        if self.stages.is_empty() || self.stages[0] == 0 {
            return bad("stages must start with a positive point count".into());
        }
        if let Some(w) = self.stages.windows(2).find(|w| w[1] != 2 * w[0]) {
            return bad(format!("stage counts must double, got {} then {}", w[0], w[1]));
        }
        if self.epochs_per_stage == 0 {
            return bad("epochs_per_stage must be positive".into());
        }
        Ok(())
    }

    pub fn total_epochs(&self) -> usize {
        self.stages.len() * self.epochs_per_stage + self.refinement_epochs
    }

    /// Zero-based stage index of a zero-based epoch.
    pub fn stage_of(&self, epoch: usize) -> usize {
        (epoch / self.epochs_per_stage).min(self.stages.len() - 1)
    }

    pub fn points_at(&self, epoch: usize) -> usize {
        self.stages[self.stage_of(epoch)]
    }
}
