//! Loss terms, the alternating critic / generator loop with progressive point
//! counts, training checkpoints and shape completion.

mod complete;
mod losses;
mod model;
mod schedule;
mod state;

pub use complete::{complete, GRID_EXTENT};
pub use losses::{
    generator_objective, gradient_penalty, loss_gan, loss_norm, loss_rec, surface_terms,
    total_loss, Critic, CriticTerms, ImplicitField, LossWeights,
};
pub use model::{Model, OptimConfig, TrainSetup};
pub use schedule::Schedule;
pub use state::{
    loss_csv, CriticLog, EpochLog, GeneratorLog, Sample, TrainState, LOSS_CSV_HEADER,
};
