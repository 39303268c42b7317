//! Feature-importance estimation for tabular classification data.
//!
//! The crate trains a self-attention network (SAN) whose attention layer is in
//! bijection with the input features, and reads feature importances directly off
//! that layer. Three classical rankers (ReliefF, binned mutual information,
//! random-forest impurity importance) serve as baselines, and two analysis
//! harnesses compare the resulting rankings:
//!
//! - [`ranking`] — fuzzy-Jaccard similarity curves over top-n cutoffs and their
//!   Simpson-rule areas,
//! - [`eval`] — top-n classification sweeps with stratified cross-validation and
//!   a logistic-regression scorer.
//!
//! Everything is deterministic given an explicit seed: datasets are immutable
//! after construction and models are pure functions of `(data, config)`.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod importance;
pub mod ranking;
pub mod san;
pub mod tabular;

pub use error::{Error, Result};
pub use importance::{ImportanceVector, Method};
pub use san::{SanConfig, SanModel};
pub use tabular::{Dataset, FoldPlan, StandardizationParams};
