//! Supervised manifold embedding from random-forest proximities.
//!
//! The pipeline trains a CART random forest, turns its out-of-bag leaf
//! co-occurrences into a proximity kernel, diffuses that kernel as a Markov
//! operator for an entropy-selected number of steps, and embeds the resulting
//! log-potential distances with classical MDS followed by SMACOF refinement.
//!
//! Alongside the embedding itself the crate ships the evaluation harness used
//! to judge it: k-NN cross-validated variable regression, noise augmentation
//! experiments, and `mtry` × `t` robustness sweeps.
//!
//! Data-parallel loops (trees, proximity rows, SMACOF rows, CV folds, repeats)
//! run on rayon when the default `parallel` feature is enabled and fall back
//! to plain iterators otherwise. Results are bit-identical either way.

#[macro_use]
mod par;

pub mod data;
pub mod diffusion;
pub mod embed;
pub mod error;
pub mod eval;
pub mod forest;
mod linalg;
pub mod seed;

pub use data::{
    load_csv, noise_augment, preprocess, Dataset, FeatureKind, LabelVector, MissingPolicy,
    RawDataset, Task, TaskHint, Variable, VariableValues,
};
pub use diffusion::{DiffusionState, PotentialDistances, PotentialTransform};
pub use embed::{Embedding, EmbeddingMethod, RfPhateOutput, RfPhateParams};
pub use error::{Error, ErrorClass, Result};
pub use eval::{EvalReport, Metric, SweepGrid, TargetScale};
pub use forest::{Forest, ForestParams, Mtry, ProximityKernel, ProximityNormalization};
pub use seed::RandomSeed;
