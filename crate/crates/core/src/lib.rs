//! Directed-graph spectral toolkit and soft-directional graph convolutions.
//!
//! The pipeline turns an attributed digraph into an irreducible, aperiodic
//! "combinatorial" graph by merging in a feature-similarity sorting graph
//! ([`features`]), computes the random-walk stationary distribution and the
//! Diglacian operator family on it ([`markov`]), derives commute-time
//! proximity from the fundamental matrix, and trains node classifiers that
//! mix undirected and directed propagation with learned weights ([`model`]).
//!
//! [`oracle`] holds brute-force checks that share no code with the
//! implementations they verify; [`verify`] runs them as a suite.

pub mod container;
pub mod data;
pub mod error;
pub mod features;
pub mod graph;
pub mod markov;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use features::{CombinatorialGraph, FeatureMatrix, SortedIndex};
pub use graph::{DegreeVector, DiGraph};
pub use markov::{CommuteModel, DiglacianOps, PfprChain};
pub use model::{ModelKind, PropagationSet, TrainConfig};
pub use sparse::{CsrMatrix, DenseMatrix};
