//! Reinforcement-learned editor: a tanh-Gaussian policy over interpretable
//! editing dimensions, rolled out through an editing agent and trained with
//! REINFORCE against the influence indicator.

mod action;
mod policy;
mod reinforce;
mod reward;
mod rollout;
mod train;

pub use action::{ActionDim, ActionSpace, ActionVector, Modality, ACTION_LIMIT};
pub use policy::{
    log_density, PolicyGrads, PolicyNetwork, PolicyOutput, PolicyShape, SampledAction, CHECKPOINT_KIND, LOG_STD_MAX,
    LOG_STD_MIN, SIGMA_FLOOR, TANH_EPS,
};
pub use reinforce::{discounted_returns, reinforce_update, UpdateDiagnostics};
pub use reward::{consistency, gain_only_value, reward, reward_parts, reward_value, RewardKind, RewardParts};
pub use rollout::{rollout, rollout_from, ActionSelect, Step, Trajectory, Truncation};
pub use train::{train_editor, write_curve_csv, CurveRow, EditorConfig, EditorTrainReport};

use crate::embedding::Embedding;
use crate::indicator::AudienceScorer;
use crate::Result;

/// Influence of a content embedding on a fixed audience.
pub trait DiffusionScorer: Send + Sync {
    fn influence(&self, content: &Embedding) -> Result<f64>;
}

impl DiffusionScorer for AudienceScorer {
    fn influence(&self, content: &Embedding) -> Result<f64> {
        self.score(content)
    }
}

/// Adapts a closure into a [`DiffusionScorer`].
pub struct FnScorer<F>(pub F);

impl<F> DiffusionScorer for FnScorer<F>
where
    F: Fn(&Embedding) -> Result<f64> + Send + Sync,
{
    fn influence(&self, content: &Embedding) -> Result<f64> {
        (self.0)(content)
    }
}
