use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LossWeights, Schedule};
use crate::autodiff::{ParamStore, RmsProp};
use crate::error::{Error, Result};
use crate::nn::{check_layout, Discriminator, Encoder, Generator, NetConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub lr_d: f64,
    pub lr_g: f64,
    /// RMSProp smoothing constant.
    pub alpha: f64,
    pub eps: f64,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr_d: 1e-3,
            lr_g: 1e-4,
            alpha: 0.99,
            eps: 1e-8,
            batch_size: 4,
        }
    }
}

impl OptimConfig {
    /// Full-scale learning rates: 1e-5 for the critic, 1e-3 for encoder and
    /// generator.
    pub fn full_scale() -> Self {
        OptimConfig {
            lr_d: 1e-5,
            lr_g: 1e-3,
            ..OptimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lr_d) || !positive(self.lr_g) || !positive(self.eps) {
            return Err(Error::Config("optim: learning rates and eps must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("optim.alpha {} outside (0, 1)", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("optim.batch_size must be positive".into()));
        }
        Ok(())
    }

    pub fn critic(&self) -> RmsProp {
        RmsProp {
            lr: self.lr_d,
            alpha: self.alpha,
            eps: self.eps,
        }
    }

    pub fn generator(&self) -> RmsProp {
        RmsProp {
            lr: self.lr_g,
            alpha: self.alpha,
            eps: self.eps,
        }
    }
}

/// Everything that determines a training run apart from the data and seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSetup {
    pub net: NetConfig,
    pub loss: LossWeights,
    pub schedule: Schedule,
    pub optim: OptimConfig,
}

impl TrainSetup {
    /// Full-scale networks, weights, learning rates and schedule.
    pub fn full_scale() -> Self {
        TrainSetup {
            net: NetConfig::full_scale(),
            loss: LossWeights::full_scale(),
            schedule: Schedule::full_scale(),
            optim: OptimConfig::full_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        self.loss.validate()?;
        self.schedule.validate()?;
        self.optim.validate()
    }
}

/// The three networks with their parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub encoder: Encoder,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub enc: ParamStore,
    pub gen: ParamStore,
    pub disc: ParamStore,
}

impl Model {
    pub fn new(net: &NetConfig, seed: u64) -> Result<Self> {
        net.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (encoder, enc) = Encoder::new(net, &mut rng)?;
        let (generator, gen) = Generator::new(net, &mut rng)?;
        let (discriminator, disc) = Discriminator::new(net, &mut rng)?;
        Ok(Model {
            encoder,
            generator,
            discriminator,
            enc,
            gen,
            disc,
        })
    }

    /// Architecture from `net` with previously trained parameters.
    pub fn with_params(net: &NetConfig, enc: ParamStore, gen: ParamStore, disc: ParamStore) -> Result<Self> {
        let mut m = Model::new(net, 0)?;
        check_layout(&m.enc, &enc)?;
        check_layout(&m.gen, &gen)?;
        check_layout(&m.disc, &disc)?;
        m.enc = enc;
        m.gen = gen;
        m.disc = disc;
        Ok(m)
    }
}
