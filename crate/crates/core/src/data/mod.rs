//! Procedural corpora, mesh preprocessing, splits and partial-input sampling.

mod corpus;
mod partial;
mod preprocess;
mod shapes;

pub use corpus::{generate_toy_corpus, preprocess_directory, split, Corpus, CorpusSpec, Discard};
pub use partial::{draw_partial, subsample, PartialMode};
pub use preprocess::{
    preprocess, PreprocessConfig, Preprocessed, ShapeRecord, Split, DISCONTINUOUS, NOT_WATERTIGHT,
    TOO_FEW_INSIDE,
};
pub use shapes::{random_rotation, AnalyticShape, Family, Primitive};
