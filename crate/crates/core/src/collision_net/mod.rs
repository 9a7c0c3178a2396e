//! Learned self-collision avoidance for the hand.
//!
//! Pipeline: sample configurations uniformly within limits, label them with
//! the capsule oracle, train a per-link collision predictor (BCE), then train
//! a corrector against the frozen predictor with
//! `alpha * MSE(q_hat, q) + beta * mean_i p_i(q_hat)`. At runtime the
//! predictor gates the corrector.

mod correct;
mod dataset;
mod grid;
mod nets;
mod train;

pub use correct::{correct, CollisionGuard, CollisionPredictor, ConfigCorrector, CorrectionResult, DEFAULT_GATE_THRESHOLD};
pub use dataset::{generate_dataset, generate_dataset_with_splits, CollisionDataset, Split, SplitFractions, SHARD_SIZE};
pub use grid::{grid_search, GridCell, GridResult};
pub use nets::{ccn_loss, cpn_loss, link_accuracy, Ccn, CollisionNetDoc, Cpn, JointNormalizer, LossParts, NetKind, CCN_HIDDEN, CPN_HIDDEN};
pub use train::{
    correction_quality, oracle_collision_rate, train_ccn, train_ccn_from, train_cpn, train_cpn_from, CorrectionQuality,
    EpochRecord, TrainingConfig, TrainingReport,
};
