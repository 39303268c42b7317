//! Classical feature rankers used as comparison baselines: multi-class
//! ReliefF, equal-frequency binned mutual information, and random-forest
//! impurity importance with Genie3-style per-tree aggregation.

mod forest;
mod mutual_info;
mod relieff;

pub use forest::{predict_forest, random_forest_importance, ForestParams, MaxFeatures};
pub use mutual_info::mutual_information;
pub use relieff::{relieff, ReliefFParams};
