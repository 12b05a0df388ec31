use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::losses::{generator_objective, loss_gan, surface_terms, total_loss};
use super::{Model, TrainSetup};
use crate::autodiff::{Graph, ParamStore, Tensor};
use crate::codec::{Reader, Writer};
use crate::data::{draw_partial, PartialMode, ShapeRecord};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

const MAGIC: &[u8; 8] = b"SDFCTRN\0";
const VERSION: u32 = 1;

pub const LOSS_CSV_HEADER: &str = "epoch,stage,wasserstein,gp,rec,norm,total";

/// Per-epoch means of the loss terms over all training shapes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub stage: usize,
    pub wasserstein: f64,
    pub gp: f64,
    pub rec: f64,
    pub norm: f64,
    pub total: f64,
}

impl EpochLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.epoch, self.stage, self.wasserstein, self.gp, self.rec, self.norm, self.total
        )
    }
}

/// Loss history as CSV with header.
pub fn loss_csv(history: &[EpochLog]) -> String {
    let mut out = format!("{LOSS_CSV_HEADER}\n");
    for log in history {
        let _ = writeln!(out, "{}", log.csv_row());
    }
    out
}

/// One shape's random draws for a training step.
#[derive(Clone, Debug)]
pub struct Sample<'a> {
    pub record: &'a ShapeRecord,
    /// Indices into the record's SDF pool.
    pub pool_indices: Vec<usize>,
    pub queries: Vec<[f64; 3]>,
    pub d_full: Vec<f64>,
    pub partial: PointCloud,
    /// Gradient-penalty interpolation weight.
    pub lambda: f64,
}

impl<'a> Sample<'a> {
    /// `points` query locations drawn from the precomputed pool and a
    /// training-mode partial input sub-sampled from `points` surface points.
    pub fn draw<R: Rng + ?Sized>(record: &'a ShapeRecord, points: usize, rng: &mut R) -> Result<Self> {
        let pool = record.sdf.len();
        if pool == 0 {
            return Err(Error::InvalidInput(format!("{}: empty sdf pool", record.id)));
        }
        let pool_indices = index::sample(rng, pool, points.min(pool)).into_vec();
        let queries = pool_indices.iter().map(|&i| record.sdf.query(i)).collect();
        let d_full = pool_indices.iter().map(|&i| record.sdf.distance(i)).collect();
        let partial = draw_partial(record, PartialMode::Train, Some(points), rng)?;
        Ok(Sample {
            record,
            pool_indices,
            queries,
            d_full,
            partial,
            lambda: rng.random(),
        })
    }

    fn describe(&self) -> String {
        format!(
            "{} (queries {}, partial points {}, lambda {})",
            self.record.id,
            self.queries.len(),
            self.partial.len(),
            self.lambda
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CriticLog {
    pub wasserstein: f64,
    pub gp: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeneratorLog {
    pub adversarial: f64,
    pub rec: f64,
    pub norm: f64,
}

/// Model, optimizer state and history of a training run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub setup: TrainSetup,
    pub seed: u64,
    /// Number of completed epochs.
    pub epoch: usize,
    pub history: Vec<EpochLog>,
    pub model: Model,
}

fn mean_of(grads: Vec<Vec<Tensor>>) -> Vec<Tensor> {
    let n = grads.len() as f64;
    let mut iter = grads.into_iter();
    let mut acc = iter.next().expect("non-empty batch");
    for g in iter {
        for (a, b) in acc.iter_mut().zip(g) {
            a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
        }
    }
    for a in &mut acc {
        a.data_mut().iter_mut().for_each(|x| *x /= n);
    }
    acc
}

fn gradient_values(g: &Graph, vars: &[crate::autodiff::Var]) -> Vec<Tensor> {
    vars.iter().map(|&v| g.value(v).clone()).collect()
}

impl TrainState {
    pub fn new(setup: TrainSetup, seed: u64) -> Result<Self> {
        setup.validate()?;
        let model = Model::new(&setup.net, seed)?;
        Ok(TrainState {
            setup,
            seed,
            epoch: 0,
            history: Vec::new(),
            model,
        })
    }

    /// Stage of the next epoch to run.
    pub fn stage(&self) -> usize {
        self.setup.schedule.stage_of(self.epoch)
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.setup.schedule.total_epochs()
    }

    /// Random stream of one epoch; independent of how training was split
    /// into sessions.
    pub fn epoch_rng(&self, epoch: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch as u64 + 1);
        rng
    }

    fn check_normals(&self, samples: &[Sample]) -> Result<()> {
        if self.setup.loss.norm > 0.0 {
            if let Some(s) = samples.iter().find(|s| s.partial.normals.is_none()) {
                return Err(Error::InvalidInput(format!(
                    "{}: normal loss needs surface normals",
                    s.record.id
                )));
            }
        }
        Ok(())
    }

    /// Critic loss gradients for one shape, with the generator output detached.
    fn critic_sample(&self, s: &Sample) -> Result<(Vec<Tensor>, CriticLog)> {
        let m = &self.model;
        let z = m.encoder.encode_points(&m.enc, &s.partial.points)?;
        let d_rec = m.generator.evaluate(&m.gen, &z, &s.queries)?;
        let mut g = Graph::new();
        let p = m.disc.bind(&mut g);
        let d_full = g.leaf(Tensor::column(&s.d_full));
        let d_rec = g.leaf(Tensor::column(&d_rec));
        let terms = loss_gan(
            &m.discriminator,
            &mut g,
            &p,
            &s.queries,
            d_full,
            d_rec,
            s.lambda,
            self.setup.loss.gp,
        )?;
        let grads = g.grad_allow_unused(terms.objective, &p, false)?;
        Ok((
            gradient_values(&g, &grads),
            CriticLog {
                wasserstein: terms.wasserstein,
                gp: terms.gp,
            },
        ))
    }

    /// Encoder and generator gradients for one shape; the critic is a constant.
    fn generator_sample(&self, s: &Sample) -> Result<(Vec<Tensor>, GeneratorLog)> {
        let m = &self.model;
        let w = &self.setup.loss;
        let mut g = Graph::new();
        let pe = m.enc.bind(&mut g);
        let pg = m.gen.bind(&mut g);
        let pd = m.disc.bind(&mut g);
        let input = g.leaf(Tensor::from_points(&s.partial.points));
        let z = m.encoder.encode(&mut g, &pe, input)?;
        let u = g.leaf(Tensor::from_points(&s.queries));
        let d_rec = m.generator.generate(&mut g, &pg, u, z)?;
        let score = m.discriminator.discriminate(&mut g, &pd, &s.queries, d_rec)?;
        let v_part = g.leaf(Tensor::from_points(&s.partial.points));
        let normals = match (&s.partial.normals, w.norm > 0.0) {
            (Some(n), true) => Some(Tensor::from_points(n)),
            _ => None,
        };
        let (rec, norm) = surface_terms(&m.generator, &mut g, &pg, z, v_part, normals.as_ref())?;
        let objective = generator_objective(&mut g, w, score, rec, norm)?;
        let log = GeneratorLog {
            adversarial: g.item(score),
            rec: g.item(rec),
            norm: norm.map_or(0.0, |n| g.item(n)),
        };
        let wrt: Vec<_> = pe.iter().chain(&pg).copied().collect();
        let grads = g.grad_allow_unused(objective, &wrt, false)?;
        Ok((gradient_values(&g, &grads), log))
    }

    /// One critic update on a drawn batch. Returns the batch-mean terms.
    pub fn critic_update(&mut self, samples: &[Sample]) -> Result<CriticLog> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let results: Vec<_> = samples
            .par_iter()
            .map(|s| self.critic_sample(s))
            .collect::<Result<_>>()?;
        let n = results.len() as f64;
        let log = CriticLog {
            wasserstein: results.iter().map(|r| r.1.wasserstein).sum::<f64>() / n,
            gp: results.iter().map(|r| r.1.gp).sum::<f64>() / n,
        };
        let grads = mean_of(results.into_iter().map(|r| r.0).collect());
        let opt = self.setup.optim.critic();
        self.model.disc.rmsprop_step(&grads, &opt)?;
        Ok(log)
    }

    /// One joint encoder and generator update on a drawn batch.
    pub fn generator_update(&mut self, samples: &[Sample]) -> Result<GeneratorLog> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        self.check_normals(samples)?;
        let results: Vec<_> = samples
            .par_iter()
            .map(|s| self.generator_sample(s))
            .collect::<Result<_>>()?;
        let n = results.len() as f64;
        let log = GeneratorLog {
            adversarial: results.iter().map(|r| r.1.adversarial).sum::<f64>() / n,
            rec: results.iter().map(|r| r.1.rec).sum::<f64>() / n,
            norm: results.iter().map(|r| r.1.norm).sum::<f64>() / n,
        };
        let mut grads = mean_of(results.into_iter().map(|r| r.0).collect());
        let gen_grads = grads.split_off(self.model.enc.len());
        let opt = self.setup.optim.generator();
        // validate both before touching either store
        for t in grads.iter().chain(&gen_grads) {
            if !t.is_finite() {
                return Err(Error::Diagnostic("non-finite encoder/generator gradient".into()));
            }
        }
        self.model.enc.rmsprop_step(&grads, &opt)?;
        self.model.gen.rmsprop_step(&gen_grads, &opt)?;
        Ok(log)
    }

    /// Critic step followed by an encoder and generator step on the same draws.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        batch: &[&ShapeRecord],
        points: usize,
        rng: &mut R,
    ) -> Result<(CriticLog, GeneratorLog)> {
        let samples = batch
            .iter()
            .map(|r| Sample::draw(r, points, rng))
            .collect::<Result<Vec<_>>>()?;
        self.check_normals(&samples)?;
        let epoch = self.epoch;
        let diverged = |e: Error, samples: &[Sample]| match e {
            Error::Diagnostic(msg) => {
                let mut detail = format!("{msg}; batch:");
                for s in samples {
                    let _ = write!(detail, "\n  {}", s.describe());
                }
                Error::Diverged { epoch, detail }
            }
            other => other,
        };
        let c = self.critic_update(&samples).map_err(|e| diverged(e, &samples))?;
        let g = self.generator_update(&samples).map_err(|e| diverged(e, &samples))?;
        Ok((c, g))
    }

    /// Runs the next epoch over `records` and appends its log.
    pub fn train_epoch(&mut self, records: &[&ShapeRecord]) -> Result<EpochLog> {
        if records.is_empty() {
            return Err(Error::InvalidInput("no training shapes".into()));
        }
        let epoch = self.epoch;
        let stage = self.stage();
        let points = self.setup.schedule.stages[stage];
        let mut rng = self.epoch_rng(epoch);
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        for chunk in order.chunks(self.setup.optim.batch_size) {
            let batch: Vec<&ShapeRecord> = chunk.iter().map(|&i| records[i]).collect();
            let (c, g) = self.train_step(&batch, points, &mut rng)?;
            let k = batch.len() as f64;
            sums[0] += c.wasserstein * k;
            sums[1] += c.gp * k;
            sums[2] += g.rec * k;
            sums[3] += g.norm * k;
        }
        let n = records.len() as f64;
        let [wasserstein, gp, rec, norm] = sums.map(|s| s / n);
        let log = EpochLog {
            epoch,
            stage,
            wasserstein,
            gp,
            rec,
            norm,
            total: total_loss(&self.setup.loss, wasserstein, gp, rec, norm),
        };
        self.history.push(log);
        self.epoch += 1;
        Ok(log)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let setup = toml::to_string(&self.setup)
            .map_err(|e| Error::Config(format!("cannot serialize setup: {e}")))?;
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u64(self.seed);
        w.u64(self.epoch as u64);
        w.blob(setup.as_bytes());
        w.u64(self.history.len() as u64);
        for h in &self.history {
            w.u64(h.epoch as u64);
            w.u64(h.stage as u64);
            w.f64s(&[h.wasserstein, h.gp, h.rec, h.norm, h.total]);
        }
        for store in [&self.model.enc, &self.model.gen, &self.model.disc] {
            store.write(&mut w);
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "training checkpoint");
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let seed = r.u64()?;
        let epoch = r.u64()? as usize;
        let setup = std::str::from_utf8(r.blob()?).map_err(|_| r.err("setup is not UTF-8"))?;
        let setup: TrainSetup =
            toml::from_str(setup).map_err(|e| r.err(format!("setup: {}", e.message())))?;
        setup.validate().map_err(|e| r.err(e.to_string()))?;
        let count = r.u64()?;
        let count = r.count(count, 56)?;
        let mut history = Vec::with_capacity(count);
        for _ in 0..count {
            let epoch = r.u64()? as usize;
            let stage = r.u64()? as usize;
            let v = r.f64s(5)?;
            history.push(EpochLog {
                epoch,
                stage,
                wasserstein: v[0],
                gp: v[1],
                rec: v[2],
                norm: v[3],
                total: v[4],
            });
        }
        let enc = ParamStore::read(&mut r)?;
        let gen = ParamStore::read(&mut r)?;
        let disc = ParamStore::read(&mut r)?;
        r.finish()?;
        if history.len() != epoch || history.iter().enumerate().any(|(i, h)| h.epoch != i) {
            return Err(Error::format("training checkpoint", "history does not match epoch count"));
        }
        let model = Model::with_params(&setup.net, enc, gen, disc)
            .map_err(|e| Error::format("training checkpoint", e.to_string()))?;
        Ok(TrainState {
            setup,
            seed,
            epoch,
            history,
            model,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        TrainState::from_bytes(&fs::read(path)?).map_err(|e| match e {
            Error::Format { msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                msg,
            },
            other => other,
        })
    }
}
