//! Audience-level influence indicator.
//!
//! A pairwise estimator predicts `p_ij(c)`, the probability that user `j`
//! spreads content `c` after exposure from user `i`. The influence score of
//! an audience is the best initiator's mean spread probability.

mod estimator;
mod influence;
mod mann_whitney;
mod metrics;
mod permutation;
mod train;

pub use estimator::{AudienceScorer, EstimatorShape, PairwiseEstimator, CHECKPOINT_KIND};
pub use influence::{influence_from_matrix, influence_score, InfluenceReport, ScoreMode};
pub use mann_whitney::{
    mann_whitney_exact, mann_whitney_normal, mann_whitney_u, MannWhitney, PValueMethod, EXACT_MAX_TOTAL,
};
pub use metrics::{auc, classification_metrics, midranks, ClassificationMetrics};
pub use permutation::{derangement, permutation_study, PermutationStudy};
pub use train::{evaluate_examples, predict_examples, train_estimator, ExampleSet, TrainConfig, TrainReport};
