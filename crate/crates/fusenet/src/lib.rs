//! Joint training of one network per dataset, coupled through a robust
//! fusion penalty on concatenated adjacent-layer parameters.
//!
//! Instead of hand-picking which layers a group of related datasets should
//! share, the coupled objective penalizes pairwise differences of
//! layer-pair parameters through a saturating robust norm. Reweighted least
//! squares turns that into a sequence of quadratically coupled problems, each
//! solved by block-coordinate descent: one network trains at a time against
//! the weighted average of the others. Pairs of datasets that stay close keep
//! pulling on each other; pairs that drift apart are cut loose. The final
//! influence weights double as a per-layer "sharing graph" over datasets.
//!
//! The crate also carries the convex homogeneous-case counterparts (joint
//! SVMs with squared-norm fusion, joint logistic regressions with L1 fusion)
//! and the plumbing they all share: dense matrices, a deterministic seeded
//! generator, and a finite-difference gradient oracle used by the tests.

pub mod convex;
pub mod error;
pub mod fusion;
pub mod graph;
pub mod network;
pub mod numerics;
pub mod trainer;

pub use error::{Error, Result};
pub use fusion::{FusionState, PairTensor};
pub use network::{
    Activation, Dataset, LayerParams, LossKind, NetworkSpec, ParamEnsemble,
};
pub use numerics::{Matrix, Rng};
pub use trainer::{TrainConfig, TrainHistory, TrainMode};
