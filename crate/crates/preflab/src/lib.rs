//! Order-aware node classification on unattributed graphs.
//!
//! Nodes of a plain graph have no features, so a dense graph network must be
//! fed *positional* embeddings — and which node gets which embedding row is
//! an arbitrary choice. This crate implements that choice as a first-class
//! object: labeling strategies assign embedding rows to nodes, training
//! minimizes loss over several sampled assignments per example, and
//! inference searches assignments for the most confident one.
//!
//! Start with the runnable examples:
//!
//! - `permutations` — graph/output group actions and automorphisms
//! - `labeling_strategies` — every embedding-assignment strategy side by side
//! - `gradient_check` — analytic gradients vs. finite differences
//! - `equivariance` — the generalized-equivariance guarantee, checked exhaustively
//! - `inference_modes` — plain vs. sampled vs. exhaustive prediction
//! - `mis_end_to_end` — train on maximum-independent-set instances
//! - `sat_end_to_end` — train on satisfiability certificates
//! - `sweep` — sensitivity to the number of training/inference samples

pub mod checkpoint;
pub mod error;
pub mod graph;
pub mod harness;
pub mod infer;
pub mod labeling;
pub mod mis;
pub mod nn;
pub mod sat;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
