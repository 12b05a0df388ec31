//! Run configuration: one TOML file with a section per component.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::CorpusSpec;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::nn::NetConfig;
use crate::train::{LossWeights, OptimConfig, Schedule, TrainSetup};

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "SDFC_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Run directory; relative paths resolve against the config file.
    pub dir: PathBuf,
    /// Save a checkpoint every this many epochs, 0 for only the final one.
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("run"),
            checkpoint_every: 10,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusSpec,
    pub network: NetConfig,
    pub loss: LossWeights,
    pub schedule: Schedule,
    pub optim: OptimConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.train_setup().validate()?;
        self.eval.validate()
    }

    pub fn train_setup(&self) -> TrainSetup {
        TrainSetup {
            net: self.network.clone(),
            loss: self.loss.clone(),
            schedule: self.schedule.clone(),
            optim: self.optim.clone(),
        }
    }

    /// Parses and validates; unknown keys are errors.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a file, applies the seed override from the environment and
    /// makes relative paths absolute against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.output.dir = base.join(&cfg.output.dir);
        if let Some(src) = &cfg.corpus.source {
            cfg.corpus.source = Some(base.join(src));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.output.dir.join("corpus")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output.dir.join("checkpoint.sdfc")
    }
}
