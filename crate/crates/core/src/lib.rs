//! Percolation laboratory for d-dimensional Hamming graphs.
//!
//! H(d, n) is the Cartesian product of d complete graphs on n vertices.
//! This crate samples Bernoulli bond percolation on it, analyzes the
//! component structure of the outcomes, evaluates the closed forms that
//! describe the connectivity threshold window, and runs the hyperplane
//! exploration diagnostics that explain why the threshold location does
//! not depend on the dimension.
//!
//! Modules:
//!
//! * [`graph`] — deterministic structure: vertex/edge coding, neighbors,
//!   hyperplanes; no randomness, nothing materialized.
//! * [`percolation`] — reproducible sampling of edge subgraphs and
//!   union-find connectivity analysis.
//! * [`theory`] — closed-form evaluators plus exact brute-force oracles
//!   on tiny instances.
//! * [`exploration`] — level splits, edge classification, quorum events,
//!   and the two-active-vertex exploration over a sampled graph.
//! * [`harness`] — experiment configuration, replication orchestration,
//!   statistics, and CSV/JSONL persistence behind the `hperc` binary.

pub mod error;
pub mod exploration;
pub mod graph;
pub mod harness;
pub mod percolation;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
