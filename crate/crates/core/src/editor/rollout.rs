use serde::{Deserialize, Serialize};

use super::policy::{log_density, PolicyNetwork};
use super::reward::{reward_parts, RewardKind, RewardParts};
use super::{ActionVector, DiffusionScorer};
use crate::agents::{ContentState, EditAgent};
use crate::embedding::Embedding;
use crate::rng::Rng;
use crate::{Error, Result};

/// How actions are chosen during a rollout.
pub enum ActionSelect<'a> {
    Sample(&'a mut Rng),
    /// `tanh(mu)`, for evaluation.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Embedding the action was chosen at.
    pub state: Embedding,
    pub action: ActionVector,
    pub pre_tanh: Vec<f64>,
    pub log_density: f64,
    pub revised: ContentState,
    pub influence: f64,
    pub reward: RewardParts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    /// Index of the step whose edit failed.
    pub step: usize,
    pub refused: bool,
    /// Attempts made when a remote call gave up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub origin: ContentState,
    pub origin_influence: f64,
    pub steps: Vec<Step>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<Truncation>,
}

impl Trajectory {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward.reward).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.truncated.is_none()
    }

    /// Last successfully revised state, or the origin.
    pub fn final_state(&self) -> &ContentState {
        self.steps.last().map(|s| &s.revised).unwrap_or(&self.origin)
    }

    pub fn final_influence(&self) -> f64 {
        self.steps.last().map(|s| s.influence).unwrap_or(self.origin_influence)
    }
}

pub fn rollout(
    policy: &PolicyNetwork,
    agent: &dyn EditAgent,
    scorer: &dyn DiffusionScorer,
    origin: &ContentState,
    horizon: usize,
    kind: RewardKind,
    select: ActionSelect<'_>,
) -> Result<Trajectory> {
    let l0 = scorer.influence(&origin.embedding)?;
    rollout_from(policy, agent, scorer, origin, l0, horizon, kind, select)
}

/// Rollout with a precomputed origin influence. Every reward compares against
/// the origin. A failing edit ends the trajectory and flags it as truncated;
/// scorer and policy failures are returned as errors.
#[allow(clippy::too_many_arguments)]
pub fn rollout_from(
    policy: &PolicyNetwork,
    agent: &dyn EditAgent,
    scorer: &dyn DiffusionScorer,
    origin: &ContentState,
    origin_influence: f64,
    horizon: usize,
    kind: RewardKind,
    mut select: ActionSelect<'_>,
) -> Result<Trajectory> {
    if policy.state_dim() != origin.embedding.dim() {
        return Err(Error::shape("rollout state", policy.state_dim(), origin.embedding.dim()));
    }
    let mut traj = Trajectory {
        origin: origin.clone(),
        origin_influence,
        steps: Vec::with_capacity(horizon),
        truncated: None,
    };
    for t in 0..horizon {
        let current = traj.final_state().clone();
        let (action, pre_tanh, log_dens) = match &mut select {
            ActionSelect::Sample(rng) => {
                let s = policy.sample_action(&current.embedding, rng)?;
                (s.action, s.pre_tanh, s.log_density)
            }
            ActionSelect::Mean => {
                let out = policy.distribution(&current.embedding)?;
                let a = ActionVector::clamped(out.mean.iter().map(|m| m.tanh()).collect())?;
                let ld = log_density(&out, &out.mean, &a);
                (a, out.mean, ld)
            }
        };
        let revised = match agent.edit(&current, &action, policy.space()) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("edit of {} failed at step {t}: {e}", origin.id);
                traj.truncated = Some(Truncation {
                    step: t,
                    refused: matches!(e, Error::Refused(_)),
                    attempts: match e {
                        Error::Transport { attempts, .. } => Some(attempts),
                        _ => None,
                    },
                    reason: e.to_string(),
                });
                break;
            }
        };
        let influence = scorer.influence(&revised.embedding)?;
        let reward = reward_parts(kind, influence, origin_influence, &revised.embedding, &origin.embedding)?;
        traj.steps.push(Step {
            state: current.embedding,
            action,
            pre_tanh,
            log_density: log_dens,
            revised,
            influence,
            reward,
        });
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{IdentityAgent, MockAgent};
    use crate::editor::{ActionSpace, FnScorer, PolicyShape};
    use crate::rng;

    fn setup() -> (PolicyNetwork, MockAgent, ContentState) {
        let d = 6;
        let policy = PolicyNetwork::new(d, ActionSpace::text(), PolicyShape { hidden: 8, ..Default::default() }, &mut rng::seeded(1)).unwrap();
        let dirs = (0..6)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                Embedding::new(v).unwrap()
            })
            .collect();
        let agent = MockAgent::from_directions(dirs, 0.3).unwrap();
        let origin = ContentState::from_embedding(Embedding::new(vec![0.0, 0.6, 0.0, 0.8, 0.0, 0.0]).unwrap());
        (policy, agent, origin)
    }

    /// Influence grows along the first axis.
    fn first_axis() -> FnScorer<impl Fn(&Embedding) -> Result<f64>> {
        FnScorer(|e: &Embedding| Ok(0.5 + 0.4 * e.values()[0]))
    }

    #[test]
    fn identity_agent_gives_zero_rewards() {
        let (policy, _, origin) = setup();
        let t = rollout(&policy, &IdentityAgent, &first_axis(), &origin, 3, RewardKind::Full, ActionSelect::Sample(&mut rng::seeded(2))).unwrap();
        assert_eq!(t.rewards(), vec![0.0; 3]);
    }

    #[test]
    fn positive_move_along_influence_direction() {
        let (_, agent, origin) = setup();
        let policy = crate::editor::policy::constant_policy(6, ActionSpace::text(), 5.0, -5.0);
        let t = rollout(&policy, &agent, &first_axis(), &origin, 3, RewardKind::Full, ActionSelect::Mean).unwrap();
        assert!(t.steps[0].reward.reward > 0.0);
        assert!(t.steps[0].action.values()[0] > 0.99);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let (policy, agent, origin) = setup();
        let run = |s| rollout(&policy, &agent, &first_axis(), &origin, 3, RewardKind::Full, ActionSelect::Sample(&mut rng::seeded(s))).unwrap();
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    struct FailAt(usize, std::sync::atomic::AtomicUsize);

    impl EditAgent for FailAt {
        fn name(&self) -> &str {
            "fail"
        }

        fn edit(&self, s: &ContentState, _: &ActionVector, _: &ActionSpace) -> Result<ContentState> {
            let n = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            if n == self.0 {
                Err(Error::Refused("policy".into()))
            } else {
                Ok(s.clone())
            }
        }
    }

    #[test]
    fn agent_failure_truncates() {
        let (policy, _, origin) = setup();
        let agent = FailAt(1, Default::default());
        let t = rollout(&policy, &agent, &first_axis(), &origin, 3, RewardKind::Full, ActionSelect::Mean).unwrap();
        assert_eq!(t.steps.len(), 1);
        let tr = t.truncated.unwrap();
        assert_eq!(tr.step, 1);
        assert!(tr.refused);
    }
}
