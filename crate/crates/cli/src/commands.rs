//! One function per subcommand. Each writes its artifacts and returns the
//! metrics that go into the run log.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use docg_core::dataset::{build_quadruples, split, write_jsonl, InteractionRecord, SplitRatio};
use docg_core::editor::{
    rollout_from, train_editor, write_curve_csv, ActionSelect, EditorTrainReport, PolicyNetwork, RewardKind, Trajectory,
};
use docg_core::embedding::{content_hash, EmbeddingProvider};
use docg_core::evaluation::{evaluate, write_ablation_csv, AblationRow, EvalSuite, Strategy};
use docg_core::indicator::{influence_score, InfluenceReport, CHECKPOINT_KIND as ESTIMATOR_KIND};
use docg_core::pipeline::{self, IndicatorMetrics};
use docg_core::synthetic::SyntheticWorld;
use docg_core::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::WorkspaceConfig;
use crate::workspace::{content_for, input_state, write_json, write_text, SplitManifest, Workspace, DATASET_DIR, ESTIMATOR, POLICY};

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(crate::config::sha256_hex(&bytes))
}

#[derive(Debug, Clone, Default)]
pub struct BuildDatasetArgs {
    pub interactions: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub split: Option<String>,
}

pub fn build_dataset(ws: &Workspace, args: &BuildDatasetArgs) -> Result<Value> {
    let cfg = &ws.cfg;
    let input = args
        .interactions
        .clone()
        .or_else(|| cfg.dataset.interactions.clone())
        .ok_or_else(|| Error::InvalidInput("no interactions file given (--interactions or dataset.interactions)".into()))?;
    if !input.exists() {
        return Err(Error::InvalidInput(format!("interactions file {} does not exist", input.display())));
    }
    let seed = args.seed.unwrap_or(cfg.seeds.dataset);
    let ratio_text = args.split.clone().unwrap_or_else(|| cfg.dataset.split.clone());
    let ratio: SplitRatio = ratio_text.parse()?;
    let out = args.out.clone().unwrap_or_else(|| ws.path(DATASET_DIR));
    let records = docg_core::dataset::read_interactions(&input)?;
    let rules = cfg.dataset.rules();
    let build = pipeline::build_dataset(&records, ratio, rules, seed)?;

    let all_pairs = |recs: &[InteractionRecord]| -> Result<usize> {
        recs.iter().map(|r| build_quadruples(r, rules).map(|q| q.len())).sum()
    };
    let before = all_pairs(&build.split.train)? + all_pairs(&build.split.test)?;
    let quads: Vec<_> = build.train_quadruples.iter().chain(&build.test_quadruples).cloned().collect();
    let positives = quads.iter().filter(|q| q.y == 1).count();

    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    write_jsonl(&out.join("interactions.jsonl"), &records)?;
    write_jsonl(&out.join("quadruples.jsonl"), &quads)?;
    let ids = |recs: &[InteractionRecord]| recs.iter().map(|r| r.content_id.clone()).collect::<Vec<_>>();
    let manifest = SplitManifest {
        config_hash: ws.config_hash().to_owned(),
        seed,
        ratio: ratio_text.clone(),
        strategy: build.split.strategy.to_owned(),
        components: build.split.components,
        train: ids(&build.split.train),
        test: ids(&build.split.test),
        dropped: build.split.dropped.clone(),
    };
    write_json(&out.join("split.json"), &manifest)?;
    let drops = json!({
        "config_hash": ws.config_hash(),
        "records_without_interactors": build.empty_records,
        "records_dropped_by_split": build.split.dropped.len(),
        "negatives_dropped_by_sampling": before - quads.len(),
    });
    write_json(&out.join("drops.json"), &drops)?;
    let counts = json!({
        "records": records.len(),
        "train_records": build.split.train.len(),
        "test_records": build.split.test.len(),
        "train_quadruples": build.train_quadruples.len(),
        "test_quadruples": build.test_quadruples.len(),
        "positives": positives,
        "negatives": quads.len() - positives,
    });
    let manifest = json!({
        "config_hash": ws.config_hash(),
        "seed": seed,
        "split": ratio_text,
        "include_origin_as_target_positive": rules.include_origin_as_target_positive,
        "source_sha256": sha256_file(&input)?,
        "counts": counts,
        "files": ["interactions.jsonl", "quadruples.jsonl", "split.json", "drops.json"],
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(counts)
}

#[derive(Debug, Clone, Default)]
pub struct TrainIndicatorArgs {
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct IndicatorMetricsFile<'a> {
    config_hash: &'a str,
    #[serde(flatten)]
    metrics: &'a IndicatorMetrics,
    dropped_users: &'a BTreeSet<String>,
}

pub fn train_indicator(ws: &Workspace, args: &TrainIndicatorArgs) -> Result<Value> {
    let data = ws.load_dataset()?;
    let provider = ws.provider()?;
    let seed = args.seed.unwrap_or(ws.cfg.seeds.indicator);
    let mut tc = ws.cfg.indicator.train(seed);
    if let Some(e) = args.epochs {
        tc.epochs = e;
    }
    let feats = pipeline::indicator_data_from(&data.records, &data.train_quadruples, &data.test_quadruples, &*provider)?;
    let (est, metrics) = pipeline::fit_indicator(&feats, ws.cfg.indicator.shape(), &tc)?;
    est.save(&ws.path(ESTIMATOR), &ws.header(ESTIMATOR_KIND, seed))?;
    let file = IndicatorMetricsFile {
        config_hash: ws.config_hash(),
        metrics: &metrics,
        dropped_users: &feats.dropped_users,
    };
    write_json(&ws.path("indicator/metrics.json"), &file)?;
    Ok(serde_json::to_value(&metrics)?)
}

#[derive(Debug, Clone, Default)]
pub struct ScoreArgs {
    pub audience: Option<String>,
    pub content_id: Option<String>,
    pub message: Option<String>,
}

pub fn score(ws: &Workspace, args: &ScoreArgs) -> Result<InfluenceReport> {
    let data = ws.load_dataset()?;
    let est = ws.load_estimator()?;
    let provider = ws.provider()?;
    let store = ws.profile_store(&data, &*provider)?;
    let group = data.audience(&ws.audience_id(args.audience.as_deref())?)?;
    let (content_id, embedding, exclude) = match (&args.content_id, &args.message) {
        (Some(id), None) => {
            let e = store
                .content_embedding(id)
                .ok_or_else(|| Error::InvalidInput(format!("no dataset record {id:?}")))?
                .clone();
            (id.clone(), e, Some(id.as_str()))
        }
        (None, Some(text)) => {
            let c = content_for(ws.cfg.editor.modality, text.clone());
            let id = format!("msg-{}", &content_hash(&c)[..16]);
            (id, provider.embed(&c)?, None)
        }
        _ => return Err(Error::InvalidInput("give exactly one of --content-id or --message".into())),
    };
    // Members without any usable history cannot be scored and are left out.
    let mut members = Vec::new();
    let mut feats = Vec::new();
    for m in &group.members {
        match store.feature(m, exclude) {
            Ok(f) => {
                members.push(m.clone());
                feats.push(est.standardize(&f)?);
            }
            Err(Error::EmptyHistory(_)) => log::warn!("audience member {m} has no history; skipped"),
            Err(e) => return Err(e),
        }
    }
    let usable = docg_core::dataset::AudienceGroup::new(group.group_id.clone(), members)?;
    influence_score(&est, &content_id, &est.standardize(&embedding)?, &usable, &feats, ws.cfg.indicator.mode())
}

pub fn permutation_test(ws: &Workspace, seed: Option<u64>) -> Result<Value> {
    let data = ws.load_dataset()?;
    let est = ws.load_estimator()?;
    let provider = ws.provider()?;
    let store = ws.profile_store(&data, &*provider)?;
    let seed = seed.unwrap_or(ws.cfg.seeds.evaluation);
    let study = pipeline::record_permutation_study(&est, &store, &data.records, seed, ws.cfg.indicator.mode())?;
    let summary = json!({
        "pairs": study.observed.len(),
        "mean_observed": study.mean_observed,
        "mean_permuted": study.mean_permuted,
        "u": study.test.u,
        "p_value": study.test.p_value,
    });
    let mut file = serde_json::to_value(&study)?;
    file["config_hash"] = json!(ws.config_hash());
    file["seed"] = json!(seed);
    file["content_ids"] = json!(data.records.iter().map(|r| &r.content_id).collect::<Vec<_>>());
    write_json(&ws.path("indicator/permutation.json"), &file)?;
    Ok(summary)
}

#[derive(Debug, Clone, Default)]
pub struct EditorArgs {
    pub audience: Option<String>,
    pub messages: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub seed: Option<u64>,
}

struct EditorEnv {
    scorer: docg_core::indicator::AudienceScorer,
    agent: Box<dyn docg_core::agents::EditAgent>,
    messages: docg_core::evaluation::TestSplit,
    group_id: String,
}

fn editor_env(ws: &Workspace, args: &EditorArgs) -> Result<EditorEnv> {
    // Agent configuration problems surface before any artifact is read.
    let provider = ws.provider()?;
    let agent = ws.agent(provider.clone())?;
    let data = ws.load_dataset()?;
    let est = ws.load_estimator()?;
    let store = ws.profile_store(&data, &*provider)?;
    let group_id = ws.audience_id(args.audience.as_deref())?;
    let scorer = ws.scorer(&est, &store, &data.audience(&group_id)?)?;
    let messages = ws.messages(args.messages.as_deref(), &*provider, &scorer)?;
    Ok(EditorEnv {
        scorer,
        agent,
        messages,
        group_id,
    })
}

fn train_policy(
    ws: &Workspace,
    env: &EditorEnv,
    seed: u64,
    reward: RewardKind,
    episodes: Option<usize>,
    checkpoints: Option<&Path>,
) -> Result<(PolicyNetwork, EditorTrainReport)> {
    let mut policy = pipeline::new_policy(ws.dim(), ws.space(), ws.cfg.editor.shape(), seed)?;
    let mut ec = ws.cfg.editor.train(seed);
    ec.reward = reward;
    if let Some(e) = episodes {
        ec.episodes = e;
    }
    let header = ws.header(docg_core::editor::CHECKPOINT_KIND, seed);
    let report = train_editor(&mut policy, &*env.agent, &env.scorer, &env.messages.train, &ec, |episode, p| match checkpoints {
        Some(dir) => p.save(&dir.join(format!("episode-{episode:05}.json")), &header),
        None => Ok(()),
    })?;
    Ok((policy, report))
}

pub fn train_editor_cmd(ws: &Workspace, args: &EditorArgs) -> Result<Value> {
    let env = editor_env(ws, args)?;
    let seed = args.seed.unwrap_or(ws.cfg.seeds.editor);
    let (policy, report) = train_policy(ws, &env, seed, ws.cfg.editor.reward, args.episodes, Some(&ws.path("editor/checkpoints")))?;
    policy.save(&ws.path(POLICY), &ws.header(docg_core::editor::CHECKPOINT_KIND, seed))?;
    write_curve_csv(&ws.path("editor/curve.csv"), &report.curve, ws.cfg.editor.horizon)?;
    let n = report.curve.len();
    let metrics = json!({
        "episodes": n,
        "first50_mean_return": report.mean_return(0..50.min(n)),
        "last50_mean_return": report.mean_return(n.saturating_sub(50)..n),
        "truncated_trajectories": report.truncated,
        "warnings": report.warnings,
    });
    let file = json!({
        "config_hash": ws.config_hash(),
        "audience": env.group_id,
        "seed": seed,
        "train_messages": env.messages.train.iter().map(|m| &m.id).collect::<Vec<_>>(),
        "test_messages": env.messages.test.iter().map(|m| &m.id).collect::<Vec<_>>(),
        "metrics": metrics,
    });
    write_json(&ws.path("editor/training.json"), &file)?;
    Ok(metrics)
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateArgs {
    pub editor: EditorArgs,
    pub ablation: bool,
}

pub fn evaluate_cmd(ws: &Workspace, args: &EvaluateArgs) -> Result<Value> {
    let env = editor_env(ws, &args.editor)?;
    let policy = ws.load_policy()?;
    let space = ws.space();
    let horizon = ws.cfg.editor.horizon;
    let e = &ws.cfg.evaluation;
    let seed = ws.cfg.seeds.evaluation;
    let test = &env.messages.test;
    let run = |s: Strategy<'_>| evaluate(s, test, &*env.agent, &env.scorer, &space, horizon);
    let suite = EvalSuite {
        reports: vec![
            run(Strategy::Policy(&policy))?,
            run(Strategy::Greedy { k: e.greedy_k, seed })?,
            run(Strategy::Random { seed })?,
        ],
    };
    let mut ablation = Vec::new();
    if args.ablation {
        let base = args.editor.seed.unwrap_or(ws.cfg.seeds.editor);
        for s in 0..e.ablation_seeds as u64 {
            for reward in [RewardKind::Full, RewardKind::GainOnly] {
                let (p, _) = train_policy(ws, &env, base + s, reward, args.editor.episodes, None)?;
                let r = run(Strategy::Policy(&p))?;
                ablation.push(AblationRow {
                    reward,
                    seed: base + s,
                    mean_gain: r.mean_gain,
                    mean_consistency: r.mean_consistency,
                });
            }
        }
        write_ablation_csv(&ws.path("eval/ablation.csv"), &ablation)?;
    }
    let report = json!({
        "config_hash": ws.config_hash(),
        "audience": env.group_id,
        "horizon": horizon,
        "test_messages": test.iter().map(|m| &m.id).collect::<Vec<_>>(),
        "reports": suite.reports,
        "ablation": ablation,
    });
    write_json(&ws.path("eval/report.json"), &report)?;
    let mut md = format!("Audience `{}`, {} test messages, horizon {horizon}.\n\n", env.group_id, test.len());
    md.push_str(&suite.to_markdown());
    if !ablation.is_empty() {
        md.push_str("\n| Reward | Seed | Diffusion Gain | Consistency |\n|---|---:|---:|---:|\n");
        for a in &ablation {
            let _ = writeln!(md, "| {:?} | {} | {:.2}% | {:.4} |", a.reward, a.seed, 100.0 * a.mean_gain, a.mean_consistency);
        }
    }
    write_text(&ws.path("eval/report.md"), &md)?;
    Ok(json!({
        "methods": suite.reports.iter().map(|r| json!({"method": r.method, "mean_gain": r.mean_gain, "mean_consistency": r.mean_consistency})).collect::<Vec<_>>(),
        "ablation_rows": ablation.len(),
    }))
}

#[derive(Debug, Clone)]
pub struct OptimizeArgs {
    pub message: String,
    pub audience: Option<String>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepView {
    pub step: usize,
    pub action: Vec<(String, f64)>,
    pub content: Option<String>,
    pub embedding_id: String,
    pub influence: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeOutcome {
    pub audience: String,
    pub original: String,
    pub original_id: String,
    pub final_content: Option<String>,
    pub final_id: String,
    pub l_before: f64,
    pub l_after: f64,
    pub relative_gain: f64,
    pub steps: Vec<StepView>,
    /// Set when an edit was refused; the last accepted content is kept.
    pub truncated: Option<docg_core::editor::Truncation>,
}

pub fn optimize(ws: &Workspace, args: &OptimizeArgs) -> Result<OptimizeOutcome> {
    let provider = ws.provider()?;
    let agent = ws.agent(provider.clone())?;
    let data = ws.load_dataset()?;
    let est = ws.load_estimator()?;
    let policy = ws.load_policy()?;
    let store = ws.profile_store(&data, &*provider)?;
    let group_id = ws.audience_id(args.audience.as_deref())?;
    let scorer = ws.scorer(&est, &store, &data.audience(&group_id)?)?;
    let content = content_for(ws.cfg.editor.modality, args.message.clone());
    let id = format!("msg-{}", &content_hash(&content)[..16]);
    let origin = input_state(&id, content, &*provider as &dyn EmbeddingProvider)?;
    let l0 = scorer.score(&origin.embedding)?;
    let steps = args.steps.unwrap_or(ws.cfg.editor.horizon);
    let traj: Trajectory = rollout_from(&policy, &*agent, &scorer, &origin, l0, steps, ws.cfg.editor.reward, ActionSelect::Mean)?;
    if let Some(t) = traj.truncated.as_ref().filter(|t| !t.refused) {
        return Err(Error::Transport {
            attempts: t.attempts.unwrap_or(1),
            message: format!("edit step {} failed: {}", t.step + 1, t.reason),
        });
    }
    let names = policy.space().names();
    let step_views = traj
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| StepView {
            step: k + 1,
            action: names.iter().map(|n| n.to_string()).zip(s.action.values().iter().copied()).collect(),
            content: s.revised.content.as_ref().map(|c| c.as_str().to_owned()),
            embedding_id: s.revised.id.clone(),
            influence: s.influence,
            reward: s.reward.reward,
        })
        .collect();
    let last = traj.final_state();
    let l1 = traj.final_influence();
    Ok(OptimizeOutcome {
        audience: group_id,
        original: args.message.clone(),
        original_id: id,
        final_content: last.content.as_ref().map(|c| c.as_str().to_owned()),
        final_id: last.id.clone(),
        l_before: l0,
        l_after: l1,
        relative_gain: if l0 > 0.0 { (l1 - l0) / l0 } else { 0.0 },
        steps: step_views,
        truncated: traj.truncated.clone(),
    })
}

impl OptimizeOutcome {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "audience:  {}", self.audience);
        let _ = writeln!(s, "original:  {} [{}]", self.original, self.original_id);
        for st in &self.steps {
            let acts: Vec<String> = st.action.iter().map(|(n, v)| format!("{n}={v:+.2}")).collect();
            let _ = writeln!(s, "step {}: {}  L={:.4} reward={:+.4}", st.step, acts.join(" "), st.influence, st.reward);
            if let Some(c) = &st.content {
                let _ = writeln!(s, "         {c}");
            }
        }
        let _ = writeln!(
            s,
            "final:     {} [{}]",
            self.final_content.as_deref().unwrap_or("(embedding only)"),
            self.final_id
        );
        let _ = writeln!(
            s,
            "influence: {:.4} -> {:.4} ({:+.2}%)",
            self.l_before,
            self.l_after,
            100.0 * self.relative_gain
        );
        if let Some(t) = &self.truncated {
            let _ = writeln!(s, "truncated: step {} refused ({}); kept the last accepted content", t.step + 1, t.reason);
        }
        s
    }
}

/// Writes a synthetic world plus a matching config into `out`.
pub fn synth(out: &Path, seed: u64) -> Result<Value> {
    let mut cfg = WorkspaceConfig::synthetic_preset(seed);
    let world = SyntheticWorld::generate(&cfg.synthetic, cfg.seeds.synthetic)?;
    // Target an audience on the test side of the split that build-dataset
    // will reproduce.
    let outcome = split(&world.records, cfg.dataset.ratio()?, cfg.seeds.dataset)?;
    let audience = world
        .target_audience(&outcome.test)
        .ok_or_else(|| Error::InvalidInput("synthetic world has no target-topic post in its test split".into()))?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_owned(),
        source: e,
    })?;
    write_jsonl(&out.join("interactions.jsonl"), &world.records)?;
    write_jsonl(&out.join("drafts.jsonl"), &world.pool)?;
    cfg.dataset.interactions = Some("interactions.jsonl".into());
    cfg.evaluation.messages = Some("drafts.jsonl".into());
    cfg.evaluation.audience = Some(audience.clone());
    write_text(&out.join("docg.toml"), &cfg.to_toml()?)?;
    Ok(json!({
        "records": world.records.len(),
        "drafts": world.pool.len(),
        "audience": audience,
    }))
}
