//! Shape completion of partial point clouds with a conditional signed-distance
//! generator trained against a point-set critic (WGAN-GP).
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: meshes, sampling, exact signed distances, marching cubes and
//!   Chamfer distance.
//! * [`autodiff`]: a tape-based reverse-mode engine with double-backward support
//!   and the RMSProp update.
//! * [`nn`]: the PointNet encoder, conditional SDF generator and point-set
//!   discriminator.
//! * [`train`]: loss terms, the alternating training loop and completion.
//! * [`data`]: procedural corpora, preprocessing and partial-input sampling.
//! * [`eval`]: Chamfer evaluation and the ablation sweeps.

pub mod autodiff;
pub mod data;
mod codec;
pub mod config;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
