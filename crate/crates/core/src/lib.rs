//! Exact and tree-reweighted MAP inference for discrete pairwise Markov
//! random fields.

pub mod error;
pub mod experiment;
pub mod instances;
pub mod lp;
pub mod model;
pub mod treedp;
pub mod trees;
pub mod trw;

pub use error::{Error, Result};
pub use model::{Assignment, PairwiseMrf, Potentials};
