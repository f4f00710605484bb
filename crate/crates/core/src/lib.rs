//! Reuse-aware planning and materialization for iterative workflow DAGs.
//!
//! An iterative development session repeatedly edits and re-runs a workflow
//! expressed as a DAG of operators. Most edits touch a small part of the
//! graph, so most intermediate results from the previous run are still valid.
//! This crate decides, for every node of every run,
//!
//! * whether to **load** a previously stored result, **compute** it fresh, or
//!   **prune** it entirely (skip it because nothing downstream needs it), and
//! * which freshly computed results to **materialize** to disk, under a
//!   storage budget, so that future runs have something to load.
//!
//! The load/compute/prune decision is solved exactly: it reduces to
//! project selection, which in turn is solved by a min-cut on a small flow
//! network ([`oep`], [`psp`], [`flow`]). The materialization decision is
//! NP-hard, so it is made online by a streaming heuristic ([`omp`]).
//! [`engine`] ties both together with a content-addressed artifact store
//! ([`store`]) and change detection over Merkle-style node signatures
//! ([`change`]). [`oracle`] holds the brute-force reference implementations
//! the optimizers are tested against.

pub mod change;
pub mod dag;
pub mod engine;
mod error;
pub mod flow;
pub mod oep;
pub mod omp;
pub mod oracle;
pub mod psp;
pub mod report;
pub mod store;
pub mod synth;
pub mod workflow;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
