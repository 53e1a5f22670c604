//! Summary-based cardinality estimation for multi-join queries over
//! edge-labeled graphs, built on cardinality estimation graphs (CEGs).
//!
//! The pieces, bottom up:
//!
//! - [`graph`]: the data graph, one binary relation per edge label.
//! - [`query`]: query graphs, connected subqueries and cycles.
//! - [`oracle`]: exact match counts, degree statistics and walk sampling.
//! - [`catalogue`]: the Markov table of small-pattern statistics.
//! - [`ceg`]: CEG construction (optimistic, cycle-closing, MOLP, cover-based)
//!   and path algorithms.
//! - [`estimators`]: the optimistic heuristics, the P* oracle and MOLP.
//! - [`sketch`]: bound-sketch partitioning.
//! - [`eval`]: q-error records, summaries and workload runs.

pub mod bits;
pub mod catalogue;
pub mod ceg;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod exec;
pub mod fixtures;
pub mod graph;
pub mod oracle;
pub mod query;
pub mod sketch;
pub mod workload;

pub use error::{Error, Result};
