//! Robustness verification and certified training for decision-stump and
//! decision-tree ensembles under zero / finite-p / infinity norm
//! perturbations.
//!
//! Verification is exact where tractable (zero norm, infinity norm, single
//! trees, small brute-force instances) and sound-but-incomplete where the
//! exact problem is intractable (a budget-discretized dynamic program for
//! stump ensembles, multi-level clique enumeration for tree ensembles).
//! Training minimizes a verified upper bound on the robust exponential loss,
//! so every fitted model ships with certificates by construction.

mod error;

pub mod dataset;
pub mod geometry;
pub mod model;
pub mod serialize;
pub mod stump_verifier;
pub mod trainer;
pub mod tree_verifier;

mod budget;

pub use error::{Error, Result};
pub use geometry::{AxisBox, Norm, PerturbationSpec};
pub use model::{
    aggregate_features, FeatureAggregate, Sample, Stump, StumpEnsemble, TreeEnsemble, TreeNode,
};
pub use serialize::{deserialize_model, serialize_model, Model};
pub use stump_verifier::{StumpVerifier, VerificationResult};
pub use trainer::{train_stumps, train_trees, RoundStats, TrainConfig};
pub use tree_verifier::{verify_single_tree, MultiLevelConfig, TreeVerifier};
