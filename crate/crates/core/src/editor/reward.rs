use serde::{Deserialize, Serialize};

use crate::embedding::{cosine, Embedding};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// Influence gain weighted by semantic consistency.
    #[default]
    Full,
    /// Influence gain alone (ablation).
    GainOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParts {
    pub delta_l: f64,
    pub consistency: f64,
    pub reward: f64,
}

/// `sqrt(dL * C)` for `dL >= 0`, else `-sqrt(-dL * (1 - C))`.
///
/// The reward carries the IEEE sign of `dL` even where its magnitude is zero
/// (`C = 0` with a gain, `C = 1` with a loss, or `dL = -0.0`).
pub fn reward_value(delta_l: f64, consistency: f64) -> f64 {
    if delta_l >= 0.0 {
        (delta_l * consistency).sqrt()
    } else {
        -(-delta_l * (1.0 - consistency)).sqrt()
    }
}

/// `sign(dL) * sqrt(|dL|)`.
pub fn gain_only_value(delta_l: f64) -> f64 {
    if delta_l >= 0.0 {
        delta_l.sqrt()
    } else {
        -(-delta_l).sqrt()
    }
}

/// Cosine similarity clamped to `[0, 1]`; identical embeddings give exactly 1.
pub fn consistency(current: &Embedding, origin: &Embedding) -> Result<f64> {
    if current == origin && current.norm() > 0.0 {
        return Ok(1.0);
    }
    Ok(cosine(current, origin)?.clamp(0.0, 1.0))
}

pub fn reward_parts(
    kind: RewardKind,
    l_current: f64,
    l_origin: f64,
    f_current: &Embedding,
    f_origin: &Embedding,
) -> Result<RewardParts> {
    let delta_l = l_current - l_origin;
    let c = consistency(f_current, f_origin)?;
    let reward = match kind {
        RewardKind::Full => reward_value(delta_l, c),
        RewardKind::GainOnly => gain_only_value(delta_l),
    };
    Ok(RewardParts {
        delta_l,
        consistency: c,
        reward,
    })
}

pub fn reward(l_current: f64, l_origin: f64, f_current: &Embedding, f_origin: &Embedding) -> Result<f64> {
    Ok(reward_parts(RewardKind::Full, l_current, l_origin, f_current, f_origin)?.reward)
}
