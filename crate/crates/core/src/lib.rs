//! Policy mining for relationship-based (ReBAC) and attribute-based (ABAC)
//! access control from access control lists, over object models in which
//! some attribute values are `unknown`.
//!
//! The crate is organised bottom-up:
//!
//! - [`tvl`]: Kleene three-valued logic, labeled feature vectors and DNF
//!   formulas with validity/coverage checks.
//! - [`tree`]: multi-way (T/F/U) decision trees scored by information gain,
//!   with feature cost as tie-breaker.
//! - [`learner`]: learns a DNF formula that exactly characterizes the
//!   T-labeled vectors of a dataset, eliminating `f = U` path conditions.
//! - [`model`]: class models, object models, path navigation with
//!   `unknown`, truth values of conditions and constraints, rules, policy
//!   meaning and weighted structural complexity (WSC).
//! - [`features`]: candidate atomic conditions/constraints and labeled
//!   feature vectors for one (subject type, resource type, action) task.
//! - [`miner`]: the end-to-end mining pipeline and rule improvement.
//! - [`metrics`]: syntactic and semantic policy similarity.
//! - [`datagen`]: synthetic object models with ground-truth rules and
//!   unknown-value injection.
//! - [`io`]: JSON/CSV document formats and run manifests.
//! - [`cli`]: the `rebac-miner` command line.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod cli;
pub mod datagen;
pub mod error;
pub mod features;
pub mod io;
pub mod learner;
pub mod metrics;
pub mod miner;
pub mod model;
pub mod tree;
pub mod tvl;

pub use error::{Error, Result};
