use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::policy::PolicyNetwork;
use super::reinforce::reinforce_update;
use super::reward::RewardKind;
use super::rollout::{rollout_from, ActionSelect};
use super::DiffusionScorer;
use crate::agents::{ContentState, EditAgent};
use crate::nn::{AdamConfig, AdamState};
use crate::{rng, Error, Result};

/// Log-std clamp occupancy above which training is reported as diverging.
const DIVERGING_SIGMA_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditorConfig {
    pub episodes: usize,
    pub horizon: usize,
    /// Trajectories per episode.
    pub batch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub use_baseline: bool,
    pub reward: RewardKind,
    pub seed: u64,
    /// Checkpoint cadence in episodes; 0 disables checkpoints.
    pub checkpoint_every: usize,
}

impl Default for EditorConfig {
    fn default() -> Self {
        Self {
            episodes: 350,
            horizon: 3,
            batch_size: 16,
            gamma: 0.9,
            learning_rate: 1e-4,
            use_baseline: false,
            reward: RewardKind::Full,
            seed: 0,
            checkpoint_every: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub episode: usize,
    pub mean_return: f64,
    pub mean_reward_step: Vec<f64>,
    pub mean_log_std: f64,
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EditorTrainReport {
    pub curve: Vec<CurveRow>,
    pub warnings: Vec<String>,
    pub truncated: usize,
}

impl EditorTrainReport {
    /// Mean of `mean_return` over a range of episodes.
    pub fn mean_return(&self, range: std::ops::Range<usize>) -> f64 {
        let rows = &self.curve[range.start.min(self.curve.len())..range.end.min(self.curve.len())];
        rows.iter().map(|r| r.mean_return).sum::<f64>() / rows.len().max(1) as f64
    }
}

/// Trains the policy for `cfg.episodes` episodes. Each episode rolls out
/// `batch_size` messages drawn from `train` and takes one policy step.
/// `on_checkpoint(episode, policy)` fires every `checkpoint_every` episodes
/// and after the last one.
pub fn train_editor(
    policy: &mut PolicyNetwork,
    agent: &dyn EditAgent,
    scorer: &dyn DiffusionScorer,
    train: &[ContentState],
    cfg: &EditorConfig,
    mut on_checkpoint: impl FnMut(usize, &PolicyNetwork) -> Result<()>,
) -> Result<EditorTrainReport> {
    if cfg.episodes > 0 && train.is_empty() {
        return Err(Error::InvalidInput("editor training needs at least one message".into()));
    }
    if cfg.batch_size == 0 || cfg.horizon == 0 {
        return Err(Error::InvalidInput("batch size and horizon must be positive".into()));
    }
    let origin_l: Vec<f64> = train.iter().map(|s| scorer.influence(&s.embedding)).collect::<Result<_>>()?;
    let mut adam = AdamState::new(AdamConfig::with_learning_rate(cfg.learning_rate), &policy.block_sizes());
    let mut pick = rng::stream(cfg.seed, "editor-messages");
    let mut noise = rng::stream(cfg.seed, "editor-actions");
    let mut report = EditorTrainReport::default();

    for episode in 1..=cfg.episodes {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let k = pick.random_range(0..train.len());
            batch.push(rollout_from(
                policy,
                agent,
                scorer,
                &train[k],
                origin_l[k],
                cfg.horizon,
                cfg.reward,
                ActionSelect::Sample(&mut noise),
            )?);
        }
        let diag = reinforce_update(policy, &mut adam, &batch, cfg.gamma, cfg.use_baseline).map_err(|e| match e {
            Error::Numeric(m) => Error::Numeric(format!("episode {episode}, lr {}: {m}", cfg.learning_rate)),
            other => other,
        })?;
        if diag.clamped_fraction > DIVERGING_SIGMA_FRACTION {
            let w = format!(
                "episode {episode}: log-std at its clamp for {:.0}% of states",
                100.0 * diag.clamped_fraction
            );
            log::warn!("{w}");
            report.warnings.push(w);
        }
        report.truncated += diag.truncated;
        let mut per_step = diag.mean_reward_per_step;
        per_step.resize(cfg.horizon, 0.0);
        report.curve.push(CurveRow {
            episode,
            mean_return: diag.mean_return,
            mean_reward_step: per_step,
            mean_log_std: diag.mean_log_std,
            truncated: diag.truncated,
        });
        if (cfg.checkpoint_every > 0 && episode % cfg.checkpoint_every == 0) || episode == cfg.episodes {
            on_checkpoint(episode, policy)?;
        }
    }
    Ok(report)
}

/// `episode,mean_return,mean_reward_step1..T,mean_log_std`.
pub fn write_curve_csv(path: &Path, curve: &[CurveRow], horizon: usize) -> Result<()> {
    let mut out = String::from("episode,mean_return");
    for t in 1..=horizon {
        let _ = write!(out, ",mean_reward_step{t}");
    }
    out.push_str(",mean_log_std\n");
    for r in curve {
        let _ = write!(out, "{},{}", r.episode, r.mean_return);
        for t in 0..horizon {
            let _ = write!(out, ",{}", r.mean_reward_step.get(t).copied().unwrap_or(0.0));
        }
        let _ = writeln!(out, ",{}", r.mean_log_std);
    }
    crate::io::write_string(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::MockAgent;
    use crate::editor::{ActionSpace, FnScorer, PolicyShape};
    use crate::embedding::Embedding;

    fn world() -> (PolicyNetwork, MockAgent, Vec<ContentState>) {
        let d = 8;
        let policy = PolicyNetwork::new(d, ActionSpace::text(), PolicyShape { hidden: 16, ..Default::default() }, &mut rng::seeded(1)).unwrap();
        let dirs = (0..6)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                Embedding::new(v).unwrap()
            })
            .collect();
        let agent = MockAgent::from_directions(dirs, 0.4).unwrap();
        let mut r = rng::seeded(2);
        let train = (0..12)
            .map(|_| {
                let mut v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
                v[0] = -0.5;
                ContentState::from_embedding(Embedding::new(v).unwrap().normalized().unwrap())
            })
            .collect();
        (policy, agent, train)
    }

    fn scorer() -> FnScorer<impl Fn(&Embedding) -> Result<f64>> {
        FnScorer(|e: &Embedding| Ok(1.0 / (1.0 + (-3.0 * e.values()[0]).exp())))
    }

    #[test]
    fn zero_episodes_leave_policy_unchanged() {
        let (mut p, agent, train) = world();
        let before = p.clone();
        let cfg = EditorConfig { episodes: 0, ..Default::default() };
        let rep = train_editor(&mut p, &agent, &scorer(), &train, &cfg, |_, _| Ok(())).unwrap();
        assert!(rep.curve.is_empty());
        assert_eq!(p, before);
    }

    #[test]
    fn returns_improve_and_checkpoints_fire() {
        let (mut p, agent, train) = world();
        let cfg = EditorConfig {
            episodes: 120,
            batch_size: 8,
            learning_rate: 3e-3,
            seed: 5,
            ..Default::default()
        };
        let mut fired = Vec::new();
        let rep = train_editor(&mut p, &agent, &scorer(), &train, &cfg, |e, _| {
            fired.push(e);
            Ok(())
        })
        .unwrap();
        assert_eq!(fired, vec![50, 100, 120]);
        assert!(rep.mean_return(70..120) > rep.mean_return(0..50));
    }

    #[test]
    fn curve_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let rows = vec![CurveRow {
            episode: 1,
            mean_return: 0.5,
            mean_reward_step: vec![0.1, 0.2, 0.3],
            mean_log_std: -0.5,
            truncated: 0,
        }];
        write_curve_csv(&path, &rows, 3).unwrap();
        let s = std::fs::read_to_string(path).unwrap();
        assert_eq!(
            s,
            "episode,mean_return,mean_reward_step1,mean_reward_step2,mean_reward_step3,mean_log_std\n1,0.5,0.1,0.2,0.3,-0.5\n"
        );
    }
}
