//! In-memory building blocks shared by the command-line tool and the tests:
//! dataset construction, indicator fitting, audience scoring and the
//! editor workspace.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::agents::{ContentState, MockAgent, MockAgentConfig};
use crate::dataset::{
    build_quadruples, negative_sample, split, AudienceGroup, FeatureTable, InteractionRecord, LabelRules, ProfileStore,
    SplitOutcome, SplitRatio, TrainingQuadruple,
};
use crate::editor::{ActionSpace, PolicyNetwork, PolicyShape};
use crate::embedding::{Embedding, EmbeddingProvider, Standardizer};
use crate::evaluation::{select_test_set, TestSplit};
use crate::indicator::{
    evaluate_examples, permutation_study, train_estimator, AudienceScorer, ClassificationMetrics, EstimatorShape,
    ExampleSet, PairwiseEstimator, PermutationStudy, ScoreMode, TrainConfig, TrainReport,
};
use crate::synthetic::SyntheticWorld;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBuild {
    pub split: SplitOutcome,
    pub train_quadruples: Vec<TrainingQuadruple>,
    pub test_quadruples: Vec<TrainingQuadruple>,
    /// Records skipped for having no interactors.
    pub empty_records: Vec<String>,
}

/// Splits records into user- and message-disjoint halves, then builds and
/// class-balances quadruples on each side.
pub fn build_dataset(records: &[InteractionRecord], ratio: SplitRatio, rules: LabelRules, seed: u64) -> Result<DatasetBuild> {
    for r in records {
        r.validate()?;
    }
    let empty_records = records
        .iter()
        .filter(|r| r.distinct_interactors().is_empty())
        .map(|r| r.content_id.clone())
        .collect();
    let outcome = split(records, ratio, seed)?;
    let quads = |recs: &[InteractionRecord]| -> Result<Vec<TrainingQuadruple>> {
        let mut all = Vec::new();
        for r in recs {
            all.extend(build_quadruples(r, rules)?);
        }
        Ok(negative_sample(&all, seed))
    };
    Ok(DatasetBuild {
        train_quadruples: quads(&outcome.train)?,
        test_quadruples: quads(&outcome.test)?,
        split: outcome,
        empty_records,
    })
}

pub fn embed_records(records: &[InteractionRecord], provider: &dyn EmbeddingProvider) -> Result<HashMap<String, Embedding>> {
    let contents: Vec<_> = records.iter().map(InteractionRecord::content).collect();
    let vectors = provider.embed_many(&contents)?;
    Ok(records.iter().map(|r| r.content_id.clone()).zip(vectors).collect())
}

/// Features and standardizer for indicator training and evaluation.
pub struct IndicatorData {
    pub store: ProfileStore,
    pub train: FeatureTable,
    pub test: FeatureTable,
    pub standardizer: Standardizer,
    /// Users dropped from quadruples for lack of a usable history.
    pub dropped_users: BTreeSet<String>,
}

pub fn indicator_data(build: &DatasetBuild, provider: &dyn EmbeddingProvider) -> Result<IndicatorData> {
    let records: Vec<InteractionRecord> = build.split.train.iter().chain(&build.split.test).cloned().collect();
    indicator_data_from(&records, &build.train_quadruples, &build.test_quadruples, provider)
}

/// Profiles are built over `records`; the standardizer is fit on the train
/// features only.
pub fn indicator_data_from(
    records: &[InteractionRecord],
    train_quadruples: &[TrainingQuadruple],
    test_quadruples: &[TrainingQuadruple],
    provider: &dyn EmbeddingProvider,
) -> Result<IndicatorData> {
    let store = ProfileStore::build(records, embed_records(records, provider)?)?;
    let (train_q, mut dropped) = store.filter_quadruples(train_quadruples.to_vec());
    let (test_q, d2) = store.filter_quadruples(test_quadruples.to_vec());
    dropped.extend(d2);
    if !dropped.is_empty() {
        log::warn!("{} users without usable history dropped from quadruples", dropped.len());
    }
    let train = FeatureTable::build(&train_q, &store)?;
    let test = FeatureTable::build(&test_q, &store)?;
    let standardizer = Standardizer::fit(train.features.iter())?;
    Ok(IndicatorData {
        store,
        train,
        test,
        standardizer,
        dropped_users: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorMetrics {
    pub epoch_losses: Vec<f64>,
    pub train: ClassificationMetrics,
    pub test: ClassificationMetrics,
    pub train_examples: usize,
    pub test_examples: usize,
}

pub fn fit_indicator(data: &IndicatorData, shape: EstimatorShape, cfg: &TrainConfig) -> Result<(PairwiseEstimator, IndicatorMetrics)> {
    let mut est = PairwiseEstimator::new(shape, data.standardizer.clone(), &mut rng::stream(cfg.seed, "indicator-init"))?;
    let train = ExampleSet::new(&data.train, &data.standardizer)?;
    let test = ExampleSet::new(&data.test, &data.standardizer)?;
    let TrainReport { epoch_losses, .. } = train_estimator(&mut est, &train, cfg)?;
    let metrics = IndicatorMetrics {
        epoch_losses,
        train: evaluate_examples(&est, &train, 0.5)?,
        test: evaluate_examples(&est, &test, 0.5)?,
        train_examples: train.len(),
        test_examples: test.len(),
    };
    Ok((est, metrics))
}

/// Member features of an audience, each leaving out `exclude` from the
/// member's history. Members left with no history are skipped.
pub fn audience_features(store: &ProfileStore, group: &AudienceGroup, exclude: Option<&str>) -> Result<Vec<Embedding>> {
    let mut out = Vec::with_capacity(group.members.len());
    for m in &group.members {
        match store.feature(m, exclude) {
            Ok(f) => out.push(f),
            Err(Error::EmptyHistory(_)) => log::debug!("audience {}: member {m} has no history", group.group_id),
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyAudience);
    }
    Ok(out)
}

pub fn audience_scorer(est: &PairwiseEstimator, features: &[Embedding], mode: ScoreMode) -> Result<AudienceScorer> {
    let std: Vec<_> = features.iter().map(|f| est.standardize(f)).collect::<Result<_>>()?;
    AudienceScorer::new(est, &std, mode)
}

/// Observed versus deranged (content, audience) pairs over `records`.
/// Audience features leave out the scored content.
pub fn record_permutation_study(
    est: &PairwiseEstimator,
    store: &ProfileStore,
    records: &[InteractionRecord],
    seed: u64,
    mode: ScoreMode,
) -> Result<PermutationStudy> {
    let groups: Vec<AudienceGroup> = records.iter().map(InteractionRecord::audience).collect();
    permutation_study(records.len(), seed, |c, a| {
        let cid = &records[c].content_id;
        let content = store
            .content_embedding(cid)
            .ok_or_else(|| Error::InvalidInput(format!("no embedding for content {cid}")))?;
        let scorer = audience_scorer(est, &audience_features(store, &groups[a], Some(cid))?, mode)?;
        scorer.score(content)
    })
}

/// Everything the editor needs for one audience.
pub struct EditorWorkspace {
    pub scorer: AudienceScorer,
    pub agent: MockAgent,
    pub space: ActionSpace,
    pub messages: TestSplit,
}

pub fn embed_messages(items: &[(String, crate::embedding::Content)], provider: &dyn EmbeddingProvider) -> Result<Vec<ContentState>> {
    let contents: Vec<_> = items.iter().map(|(_, c)| c.clone()).collect();
    let vectors = provider.embed_many(&contents)?;
    Ok(items
        .iter()
        .zip(vectors)
        .map(|((id, c), e)| ContentState::new(id.clone(), Some(c.clone()), e))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditorSetup {
    pub step_size: f64,
    pub n_pool: usize,
    pub n_test: usize,
    pub agent_seed: u64,
    pub mode: ScoreMode,
}

/// Scores the world's draft pool for the target audience and builds the
/// mock agent whose first direction is the target topic.
pub fn synthetic_editor_workspace(
    world: &SyntheticWorld,
    embed_seed: u64,
    est: &PairwiseEstimator,
    store: &ProfileStore,
    audience: &AudienceGroup,
    setup: &EditorSetup,
) -> Result<EditorWorkspace> {
    let embedder = world.embedder(embed_seed);
    let scorer = audience_scorer(est, &audience_features(store, audience, None)?, setup.mode)?;
    let items: Vec<_> = world
        .pool
        .iter()
        .map(|m| (m.id.clone(), crate::embedding::Content::text(m.text.clone())))
        .collect();
    let states = embed_messages(&items, &embedder)?;
    let messages = select_test_set(&states, &scorer, setup.n_pool, setup.n_test)?;
    let space = ActionSpace::text();
    let agent = MockAgent::new(&MockAgentConfig {
        dim: world.config.dim,
        action_dims: space.len(),
        step_size: setup.step_size,
        seed: setup.agent_seed,
        planted: Some(world.target_direction(&embedder)),
    })?;
    Ok(EditorWorkspace {
        scorer,
        agent,
        space,
        messages,
    })
}

pub fn new_policy(dim: usize, space: ActionSpace, shape: PolicyShape, seed: u64) -> Result<PolicyNetwork> {
    PolicyNetwork::new(dim, space, shape, &mut rng::stream(seed, "policy-init"))
}
