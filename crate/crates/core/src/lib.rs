//! Compositional generalization in kernel models.
//!
//! Task generators over component tuples, compositionally structured
//! kernels parameterized by salience, minimal-norm kernel interpolation,
//! conjunction-wise additivity analysis and closed-form reference results.

pub mod analysis;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod oracles;
pub mod par;
pub mod random_reps;
pub mod solver;
pub mod space;
pub mod sweep;
pub mod tasks;

pub use error::{Error, Result};
pub use geometry::{GramMatrix, SalienceProfile, SimilarityTable};
pub use solver::{fit, predict, KernelModel, PredictionReport};
pub use space::{CompInput, ComponentSpace, Conjunction, ConjunctionSet};
pub use tasks::{CompositionalDataset, Split, TaskKind};
