//! Reverse-mode automatic differentiation over dense `f64` matrices.

mod graph;
mod params;
mod tensor;

pub use graph::{Graph, Var};
pub use params::{Param, ParamStore, RmsProp};
pub use tensor::Tensor;
