//! Test-set selection, baseline editors and evaluation reports.

mod report;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use report::{write_ablation_csv, AblationRow, EvalReport, EvalSuite, MessageResult};

use crate::agents::{ContentState, EditAgent};
use crate::editor::{
    consistency, reward_parts, rollout_from, ActionSelect, ActionSpace, ActionVector, DiffusionScorer, PolicyNetwork,
    RewardKind,
};
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const DEFAULT_GREEDY_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSplit {
    pub train: Vec<ContentState>,
    pub test: Vec<ContentState>,
    /// Influence of every pooled message, in pool order.
    pub scores: Vec<(String, f64)>,
}

/// Scores the first `n_pool` messages and holds out the `n_test` with the
/// lowest influence (ties by id). The rest, in pool order, is the train set.
pub fn select_test_set(
    messages: &[ContentState],
    scorer: &dyn DiffusionScorer,
    n_pool: usize,
    n_test: usize,
) -> Result<TestSplit> {
    if messages.len() < n_pool {
        return Err(Error::InvalidInput(format!(
            "message pool has {} messages, {n_pool} required",
            messages.len()
        )));
    }
    if n_test > n_pool {
        return Err(Error::InvalidInput(format!("test size {n_test} exceeds pool size {n_pool}")));
    }
    let pool = &messages[..n_pool];
    let scores: Vec<(String, f64)> = pool
        .iter()
        .map(|m| Ok((m.id.clone(), scorer.influence(&m.embedding)?)))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| scores[a].1.total_cmp(&scores[b].1).then_with(|| scores[a].0.cmp(&scores[b].0)));
    let mut is_test = vec![false; pool.len()];
    order[..n_test].iter().for_each(|&i| is_test[i] = true);
    let test = order[..n_test].iter().map(|&i| pool[i].clone()).collect();
    let train = pool.iter().zip(&is_test).filter(|(_, t)| !**t).map(|(m, _)| m.clone()).collect();
    Ok(TestSplit { train, test, scores })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    pub final_state: ContentState,
    pub final_influence: f64,
    /// Selected action per step; `None` when every candidate failed.
    pub actions: Vec<Option<ActionVector>>,
    pub failures: usize,
}

/// Per step, draws `k` actions uniformly from `(-1, 1)^n`, applies each to the
/// current message and keeps the revision with the highest reward against the
/// origin (first wins ties). Failed candidates are dropped; a step where all
/// fail leaves the message unchanged.
#[allow(clippy::too_many_arguments)]
pub fn greedy_search(
    agent: &dyn EditAgent,
    scorer: &dyn DiffusionScorer,
    space: &ActionSpace,
    origin: &ContentState,
    origin_influence: f64,
    horizon: usize,
    k: usize,
    kind: RewardKind,
    rng: &mut Rng,
) -> Result<GreedyOutcome> {
    if k == 0 {
        return Err(Error::InvalidInput("greedy search needs k >= 1".into()));
    }
    let mut current = origin.clone();
    let mut current_l = origin_influence;
    let mut actions = Vec::with_capacity(horizon);
    let mut failures = 0;
    for _ in 0..horizon {
        let mut best: Option<(f64, ActionVector, ContentState, f64)> = None;
        for _ in 0..k {
            let a = ActionVector::clamped((0..space.len()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
            let revised = match agent.edit(&current, &a, space) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("greedy candidate for {} failed: {e}", origin.id);
                    failures += 1;
                    continue;
                }
            };
            let l = scorer.influence(&revised.embedding)?;
            let r = reward_parts(kind, l, origin_influence, &revised.embedding, &origin.embedding)?.reward;
            if best.as_ref().is_none_or(|b| r > b.0) {
                best = Some((r, a, revised, l));
            }
        }
        match best {
            Some((_, a, s, l)) => {
                actions.push(Some(a));
                current = s;
                current_l = l;
            }
            None => actions.push(None),
        }
    }
    Ok(GreedyOutcome {
        final_state: current,
        final_influence: current_l,
        actions,
        failures,
    })
}

/// How a test message is edited during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Strategy<'a> {
    /// Deterministic mean actions of a trained policy.
    Policy(&'a PolicyNetwork),
    Greedy { k: usize, seed: u64 },
    /// Greedy with a single candidate, i.e. uniformly random actions.
    Random { seed: u64 },
    /// No edit at all.
    Identity,
}

impl Strategy<'_> {
    pub fn label(&self) -> String {
        match self {
            Strategy::Policy(_) => "learned".into(),
            Strategy::Greedy { k, .. } => format!("greedy-k{k}"),
            Strategy::Random { .. } => "random".into(),
            Strategy::Identity => "identity".into(),
        }
    }
}

/// Edits every test message for `horizon` steps and records influence before
/// and after. Messages whose origin influence is 0 are excluded and counted.
pub fn evaluate(
    strategy: Strategy<'_>,
    test: &[ContentState],
    agent: &dyn EditAgent,
    scorer: &dyn DiffusionScorer,
    space: &ActionSpace,
    horizon: usize,
) -> Result<EvalReport> {
    let mut rng = match strategy {
        Strategy::Greedy { seed, .. } | Strategy::Random { seed } => rng::stream(seed, "evaluation-greedy"),
        _ => rng::stream(0, "evaluation-unused"),
    };
    let mut rows = Vec::with_capacity(test.len());
    let mut excluded = Vec::new();
    for m in test {
        let l0 = scorer.influence(&m.embedding)?;
        if l0 <= 0.0 {
            excluded.push(m.id.clone());
            continue;
        }
        let (final_state, l1, truncated) = match strategy {
            Strategy::Policy(p) => {
                let t = rollout_from(p, agent, scorer, m, l0, horizon, RewardKind::Full, ActionSelect::Mean)?;
                (t.final_state().clone(), t.final_influence(), t.truncated.is_some())
            }
            Strategy::Greedy { k, .. } => {
                let g = greedy_search(agent, scorer, space, m, l0, horizon, k, RewardKind::Full, &mut rng)?;
                (g.final_state, g.final_influence, g.actions.iter().any(Option::is_none))
            }
            Strategy::Random { .. } => {
                let g = greedy_search(agent, scorer, space, m, l0, horizon, 1, RewardKind::Full, &mut rng)?;
                (g.final_state, g.final_influence, g.actions.iter().any(Option::is_none))
            }
            Strategy::Identity => (m.clone(), l0, false),
        };
        rows.push(MessageResult {
            id: m.id.clone(),
            l_origin: l0,
            l_final: l1,
            relative_gain: (l1 - l0) / l0,
            consistency: consistency(&final_state.embedding, &m.embedding)?,
            final_id: final_state.id,
            truncated,
        });
    }
    Ok(EvalReport::new(strategy.label(), rows, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{IdentityAgent, MockAgent};
    use crate::editor::FnScorer;
    use crate::embedding::Embedding;

    fn msg(id: &str, v: Vec<f64>) -> ContentState {
        ContentState::new(id, None, Embedding::new(v).unwrap().normalized().unwrap())
    }

    fn first_axis() -> FnScorer<impl Fn(&Embedding) -> Result<f64>> {
        FnScorer(|e: &Embedding| Ok(1.0 / (1.0 + (-4.0 * e.values()[0]).exp())))
    }

    fn world() -> (MockAgent, Vec<ContentState>) {
        let d = 8;
        let dirs = (0..6)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                Embedding::new(v).unwrap()
            })
            .collect();
        let mut r = rng::seeded(3);
        let msgs = (0..30)
            .map(|i| {
                let mut v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
                v[0] = r.random_range(-0.8..0.0);
                msg(&format!("m{i:02}"), v)
            })
            .collect();
        (MockAgent::from_directions(dirs, 0.4).unwrap(), msgs)
    }

    #[test]
    fn planted_scores_select_lowest() {
        let msgs: Vec<_> = (1..=200).map(|i| msg(&format!("m{i:03}"), vec![i as f64, 1.0])).collect();
        let scorer = FnScorer(|e: &Embedding| Ok(e.values()[0] / e.values()[1]));
        let raw: Vec<ContentState> = msgs
            .iter()
            .enumerate()
            .map(|(i, m)| ContentState::new(m.id.clone(), None, Embedding::new(vec![(i + 1) as f64, 1.0]).unwrap()))
            .collect();
        let s = select_test_set(&raw, &scorer, 200, 40).unwrap();
        let ids: Vec<_> = s.test.iter().map(|m| m.id.clone()).collect();
        assert_eq!(ids, (1..=40).map(|i| format!("m{i:03}")).collect::<Vec<_>>());
        assert_eq!(s.train.len(), 160);
    }

    #[test]
    fn boundary_ties_go_by_id() {
        let scorer = FnScorer(|_: &Embedding| Ok(0.5));
        let msgs: Vec<_> = ["c", "a", "b"].iter().map(|id| msg(id, vec![1.0, 0.0])).collect();
        let s = select_test_set(&msgs, &scorer, 3, 2).unwrap();
        assert_eq!(s.test.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(s.train[0].id, "c");
    }

    #[test]
    fn empty_test_and_small_pool() {
        let (_, msgs) = world();
        let s = select_test_set(&msgs, &first_axis(), 10, 0).unwrap();
        assert!(s.test.is_empty() && s.train.len() == 10);
        assert!(select_test_set(&msgs, &first_axis(), 31, 5).is_err());
    }

    #[test]
    fn identity_editor_gains_nothing() {
        let (agent, msgs) = world();
        for strat in [Strategy::Identity, Strategy::Random { seed: 1 }] {
            let ag: &dyn EditAgent = if matches!(strat, Strategy::Identity) { &agent } else { &IdentityAgent };
            let rep = evaluate(strat, &msgs, ag, &first_axis(), &ActionSpace::text(), 3).unwrap();
            assert_eq!(rep.mean_gain, 0.0);
            assert_eq!(rep.mean_consistency, 1.0);
        }
    }

    #[test]
    fn wider_greedy_gains_more() {
        let (agent, msgs) = world();
        let space = ActionSpace::text();
        let g1 = evaluate(Strategy::Random { seed: 4 }, &msgs, &agent, &first_axis(), &space, 3).unwrap();
        let g32 = evaluate(Strategy::Greedy { k: 32, seed: 4 }, &msgs, &agent, &first_axis(), &space, 3).unwrap();
        assert!(g32.mean_gain > g1.mean_gain);
    }

    #[test]
    fn greedy_is_deterministic_and_k1_matches_random() {
        let (agent, msgs) = world();
        let space = ActionSpace::text();
        let run = |k| {
            let mut r = rng::seeded(8);
            greedy_search(&agent, &first_axis(), &space, &msgs[0], 0.3, 3, k, RewardKind::Full, &mut r).unwrap()
        };
        assert_eq!(run(4), run(4));
        let a = evaluate(Strategy::Random { seed: 2 }, &msgs, &agent, &first_axis(), &space, 3).unwrap();
        let b = evaluate(Strategy::Greedy { k: 1, seed: 2 }, &msgs, &agent, &first_axis(), &space, 3).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn zero_origin_influence_is_excluded() {
        let (agent, msgs) = world();
        let scorer = FnScorer(|e: &Embedding| Ok(if e.values()[1] > 0.0 { 0.0 } else { 0.4 }));
        let rep = evaluate(Strategy::Identity, &msgs, &agent, &scorer, &ActionSpace::text(), 3).unwrap();
        assert_eq!(rep.rows.len() + rep.excluded.len(), msgs.len());
        assert!(!rep.excluded.is_empty());
    }
}
