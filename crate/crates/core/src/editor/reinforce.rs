use serde::{Deserialize, Serialize};

use super::policy::{PolicyNetwork, LOG_STD_MAX, LOG_STD_MIN};
use super::rollout::Trajectory;
use crate::nn::AdamState;
use crate::{Error, Result};

/// `J_t = r_t + gamma * J_{t+1}`, computed backwards.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    /// Mean of `J_0` over complete trajectories.
    pub mean_return: f64,
    pub mean_reward_per_step: Vec<f64>,
    /// Mean clamped log-std over visited states and action dimensions.
    pub mean_log_std: f64,
    /// Fraction of visited (state, dimension) pairs whose log-std sits at a clamp bound.
    pub clamped_fraction: f64,
    pub complete: usize,
    pub truncated: usize,
    /// No parameter step was taken.
    pub skipped: bool,
}

/// One policy-gradient ascent step on the complete trajectories of a batch:
/// `grad = (1/B) sum_i sum_t grad log pi(a_t | s_t) * (J_{i,t} - b_t)`, with
/// `b_t` the batch mean return at step `t` when `use_baseline` is set and 0
/// otherwise. Truncated trajectories are excluded from `B`.
pub fn reinforce_update(
    policy: &mut PolicyNetwork,
    adam: &mut AdamState,
    batch: &[Trajectory],
    gamma: f64,
    use_baseline: bool,
) -> Result<UpdateDiagnostics> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("policy update needs at least one trajectory".into()));
    }
    let complete: Vec<&Trajectory> = batch.iter().filter(|t| t.is_complete() && !t.steps.is_empty()).collect();
    let truncated = batch.len() - complete.len();
    let horizon = complete.iter().map(|t| t.steps.len()).max().unwrap_or(0);

    let returns: Vec<Vec<f64>> = complete.iter().map(|t| discounted_returns(&t.rewards(), gamma)).collect();
    let mut baseline = vec![0.0; horizon];
    let mut reward_sum = vec![0.0; horizon];
    let mut counts = vec![0usize; horizon];
    for (t, j) in complete.iter().zip(&returns) {
        for (k, s) in t.steps.iter().enumerate() {
            baseline[k] += j[k];
            reward_sum[k] += s.reward.reward;
            counts[k] += 1;
        }
    }
    let mean_reward_per_step: Vec<f64> = reward_sum.iter().zip(&counts).map(|(s, &c)| s / c.max(1) as f64).collect();
    if use_baseline {
        baseline.iter_mut().zip(&counts).for_each(|(b, &c)| *b /= c.max(1) as f64);
    } else {
        baseline.iter_mut().for_each(|b| *b = 0.0);
    }

    let (mut ls_sum, mut ls_n, mut at_clamp) = (0.0, 0usize, 0usize);
    for t in &complete {
        for s in &t.steps {
            let out = policy.distribution(&s.state)?;
            for (raw, ls) in out.raw_log_std.iter().zip(&out.log_std) {
                ls_sum += ls;
                ls_n += 1;
                if *raw <= LOG_STD_MIN || *raw >= LOG_STD_MAX {
                    at_clamp += 1;
                }
            }
        }
    }

    let mut diag = UpdateDiagnostics {
        mean_return: if complete.is_empty() {
            0.0
        } else {
            returns.iter().map(|j| j[0]).sum::<f64>() / complete.len() as f64
        },
        mean_reward_per_step,
        mean_log_std: if ls_n == 0 { 0.0 } else { ls_sum / ls_n as f64 },
        clamped_fraction: if ls_n == 0 { 0.0 } else { at_clamp as f64 / ls_n as f64 },
        complete: complete.len(),
        truncated,
        skipped: true,
    };
    if complete.is_empty() {
        log::warn!("all {truncated} trajectories truncated; skipping policy update");
        return Ok(diag);
    }

    let b = complete.len() as f64;
    let mut grads = policy.zero_grads();
    let mut any = false;
    for (t, j) in complete.iter().zip(&returns) {
        for (k, s) in t.steps.iter().enumerate() {
            let w = (j[k] - baseline[k]) / b;
            if w != 0.0 {
                any = true;
                policy.accumulate_log_prob_grad(&s.state, &s.pre_tanh, w, &mut grads)?;
            }
        }
    }
    if !any {
        return Ok(diag);
    }
    // Adam descends, so hand it the negated ascent direction.
    grads.scale(-1.0);
    let names = policy.block_names();
    let g = grads.blocks();
    adam.step(&mut policy.blocks_mut(), &g, &names)?;
    diag.skipped = false;
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ContentState;
    use crate::editor::policy::fixed_policy;
    use crate::editor::rollout::{Step, Truncation};
    use crate::editor::{log_density, ActionSpace, PolicyShape, RewardParts};
    use crate::embedding::Embedding;
    use crate::nn::AdamConfig;
    use crate::rng::{self, Rng};

    #[test]
    fn hand_returns() {
        assert_eq!(discounted_returns(&[1.0, 1.0, 1.0], 0.5), vec![1.75, 1.5, 1.0]);
        assert!(discounted_returns(&[], 0.9).is_empty());
    }

    proptest::proptest! {
        #[test]
        fn return_recursion(r in proptest::collection::vec(-1.0f64..1.0, 1..8), g in 0.0f64..1.0) {
            let j = discounted_returns(&r, g);
            for t in 0..r.len() {
                let next = if t + 1 < r.len() { j[t + 1] } else { 0.0 };
                proptest::prop_assert_eq!(j[t], r[t] + g * next);
            }
        }
    }

    fn bandit_traj(policy: &PolicyNetwork, state: &Embedding, rng: &mut Rng, reward: impl Fn(f64) -> f64) -> Trajectory {
        let s = policy.sample_action(state, rng).unwrap();
        let r = reward(s.action.values()[0]);
        let origin = ContentState::from_embedding(state.clone());
        Trajectory {
            origin: origin.clone(),
            origin_influence: 0.0,
            steps: vec![Step {
                state: state.clone(),
                action: s.action,
                pre_tanh: s.pre_tanh,
                log_density: s.log_density,
                revised: origin,
                influence: 0.0,
                reward: RewardParts {
                    delta_l: r,
                    consistency: 1.0,
                    reward: r,
                },
            }],
            truncated: None,
        }
    }

    fn adam_for(p: &PolicyNetwork, lr: f64) -> AdamState {
        AdamState::new(AdamConfig::with_learning_rate(lr), &p.block_sizes())
    }

    #[test]
    fn empty_batch_is_an_error() {
        let mut p = fixed_policy(0.0, 0.0);
        let mut adam = adam_for(&p, 0.1);
        assert!(reinforce_update(&mut p, &mut adam, &[], 0.9, false).is_err());
    }

    #[test]
    fn zero_returns_leave_parameters_unchanged() {
        let s = Embedding::new(vec![1.0]).unwrap();
        let mut p = fixed_policy(0.2, -0.5);
        let before = p.clone();
        let batch: Vec<_> = (0..4).map(|i| bandit_traj(&p, &s, &mut rng::seeded(i), |_| 0.0)).collect();
        let mut adam = adam_for(&p, 0.1);
        let d = reinforce_update(&mut p, &mut adam, &batch, 0.9, false).unwrap();
        assert!(d.skipped);
        assert_eq!(p, before);
    }

    #[test]
    fn fully_truncated_batch_skips() {
        let s = Embedding::new(vec![1.0]).unwrap();
        let mut p = fixed_policy(0.2, -0.5);
        let before = p.clone();
        let mut t = bandit_traj(&p, &s, &mut rng::seeded(0), |_| 1.0);
        t.truncated = Some(Truncation {
            step: 0,
            refused: false,
            attempts: Some(4),
            reason: "timeout".into(),
        });
        let mut adam = adam_for(&p, 0.1);
        let d = reinforce_update(&mut p, &mut adam, &[t], 0.9, false).unwrap();
        assert!(d.skipped && d.truncated == 1);
        assert_eq!(p, before);
    }

    #[test]
    fn positive_return_raises_log_density_of_taken_action() {
        let s = Embedding::new(vec![0.3, -0.7]).unwrap();
        let shape = PolicyShape { hidden: 8, ..Default::default() };
        let mut p = PolicyNetwork::new(2, ActionSpace::text(), shape, &mut rng::seeded(4)).unwrap();
        let t = bandit_traj(&p, &s, &mut rng::seeded(5), |_| 1.0);
        let step = &t.steps[0];
        let before = log_density(&p.distribution(&s).unwrap(), &step.pre_tanh, &step.action);
        let mut adam = adam_for(&p, 1e-4);
        reinforce_update(&mut p, &mut adam, &[t.clone()], 0.9, false).unwrap();
        let after = log_density(&p.distribution(&s).unwrap(), &step.pre_tanh, &step.action);
        assert!(after > before, "{after} <= {before}");
    }

    #[test]
    fn quadratic_bandit_converges() {
        let target = 0.5;
        let s = Embedding::new(vec![1.0]).unwrap();
        let mut hits = 0;
        for seed in 0..5 {
            let space = ActionSpace {
                modality: crate::editor::Modality::Text,
                dims: vec![ActionSpace::text().dims[0].clone()],
            };
            let shape = PolicyShape { hidden: 16, ..Default::default() };
            let mut p = PolicyNetwork::new(1, space, shape, &mut rng::stream(seed, "bandit-init")).unwrap();
            let mut adam = adam_for(&p, 1e-2);
            let mut r = rng::stream(seed, "bandit");
            for _ in 0..500 {
                let batch: Vec<_> = (0..16).map(|_| bandit_traj(&p, &s, &mut r, |a| -(a - target) * (a - target))).collect();
                reinforce_update(&mut p, &mut adam, &batch, 0.9, true).unwrap();
            }
            let a = p.mean_action(&s).unwrap().values()[0];
            if (a - target).abs() < 0.1 {
                hits += 1;
            }
        }
        assert!(hits >= 4, "{hits}/5 seeds converged");
    }
}
