//! Artifact layout, run logs and the shared loading steps behind every
//! command.
//!
//! ```text
//! <dir>/dataset/{interactions.jsonl, quadruples.jsonl, split.json, drops.json, manifest.json}
//! <dir>/indicator/{estimator.json, metrics.json, permutation.json}
//! <dir>/editor/{policy.json, checkpoints/, curve.csv, training.json}
//! <dir>/eval/{report.json, report.md, ablation.csv}
//! <dir>/runs/<unix-ms>-<hash>/run.json
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use docg_core::agents::{
    ContentState, EditAgent, MockAgent, MockAgentConfig, RemoteAgentConfig, RemoteImageAgent, RemoteTextAgent,
};
use docg_core::dataset::{read_interactions, read_jsonl, AudienceGroup, InteractionRecord, ProfileStore, TrainingQuadruple};
use docg_core::editor::{ActionSpace, Modality, PolicyNetwork};
use docg_core::embedding::{CachedProvider, Content, EmbeddingProvider, RemoteEmbedder, RemoteEmbedderConfig, SyntheticEmbedder};
use docg_core::evaluation::{select_test_set, TestSplit};
use docg_core::indicator::{AudienceScorer, PairwiseEstimator};
use docg_core::nn::checkpoint::CheckpointHeader;
use docg_core::pipeline;
use docg_core::synthetic::DraftMessage;
use docg_core::transport::{AuditLog, HttpTransport, RemoteClient, RetryPolicy};
use docg_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{AgentKind, ProviderKind, WorkspaceConfig};

pub const DATASET_DIR: &str = "dataset";
pub const ESTIMATOR: &str = "indicator/estimator.json";
pub const POLICY: &str = "editor/policy.json";

/// Split manifest written next to the quadruples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub config_hash: String,
    pub seed: u64,
    pub ratio: String,
    pub strategy: String,
    pub components: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub dropped: Vec<String>,
}

/// Dataset artifacts read back from disk.
pub struct LoadedDataset {
    pub records: Vec<InteractionRecord>,
    pub train_records: Vec<InteractionRecord>,
    pub test_records: Vec<InteractionRecord>,
    pub train_quadruples: Vec<TrainingQuadruple>,
    pub test_quadruples: Vec<TrainingQuadruple>,
    pub split: SplitManifest,
}

impl LoadedDataset {
    pub fn audience(&self, group_id: &str) -> Result<AudienceGroup> {
        self.records
            .iter()
            .find(|r| r.content_id == group_id)
            .map(InteractionRecord::audience)
            .ok_or_else(|| Error::InvalidInput(format!("no dataset record {group_id:?} to take an audience from")))
    }
}

pub struct Workspace {
    pub cfg: WorkspaceConfig,
    hash: String,
}

fn missing(path: PathBuf, hint: &str) -> Error {
    Error::MissingArtifact {
        path,
        hint: hint.to_owned(),
    }
}

impl Workspace {
    pub fn new(cfg: WorkspaceConfig) -> Self {
        let hash = cfg.hash();
        Self { cfg, hash }
    }

    pub fn root(&self) -> &Path {
        &self.cfg.workspace.dir
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root().join(rel)
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    pub fn header(&self, kind: &str, seed: u64) -> CheckpointHeader {
        CheckpointHeader::new(kind, seed, self.cfg.embedding.dim, &self.hash)
    }

    pub fn dim(&self) -> usize {
        self.cfg.embedding.dim
    }

    pub fn remote_client(&self) -> Result<RemoteClient> {
        let r = &self.cfg.remote;
        let transport = Arc::new(HttpTransport::new(Duration::from_millis(r.timeout_ms)));
        let mut client = RemoteClient::new(
            transport,
            RetryPolicy {
                max_retries: r.max_retries,
                backoff: Duration::from_millis(r.backoff_ms),
            },
        );
        if let Some(key) = &r.api_key {
            client = client.with_bearer_token(key);
        }
        if r.audit {
            std::fs::create_dir_all(self.root()).map_err(|e| Error::Io {
                path: self.root().to_owned(),
                source: e,
            })?;
            client = client.with_audit(Arc::new(AuditLog::to_file(&self.path("remote-audit.jsonl"))?));
        }
        Ok(client)
    }

    pub fn synthetic_embedder(&self) -> SyntheticEmbedder {
        let e = &self.cfg.embedding;
        SyntheticEmbedder::new(e.dim, self.cfg.seeds.embedding, e.topic_weight)
    }

    pub fn provider(&self) -> Result<Arc<dyn EmbeddingProvider>> {
        let e = &self.cfg.embedding;
        Ok(match e.provider {
            ProviderKind::Synthetic => Arc::new(self.synthetic_embedder()),
            ProviderKind::Remote => {
                let endpoint = self.cfg.remote.embed_endpoint.clone().ok_or_else(|| {
                    Error::Unconfigured(format!(
                        "embedding provider is remote but no endpoint is set (remote.embed_endpoint or {})",
                        crate::config::ENV_EMBED_ENDPOINT
                    ))
                })?;
                let remote = RemoteEmbedder::new(
                    self.remote_client()?,
                    RemoteEmbedderConfig {
                        endpoint,
                        model_id: e.model_id.clone(),
                        dim: e.dim,
                        batch_size: e.batch_size,
                    },
                );
                if e.cache {
                    Arc::new(CachedProvider::open(remote, &self.path("embeddings.jsonl"))?)
                } else {
                    Arc::new(remote)
                }
            }
        })
    }

    pub fn space(&self) -> ActionSpace {
        ActionSpace::for_modality(self.cfg.editor.modality)
    }

    pub fn agent(&self, provider: Arc<dyn EmbeddingProvider>) -> Result<Box<dyn EditAgent>> {
        let a = &self.cfg.agent;
        let space = self.space();
        match a.kind {
            AgentKind::Mock => {
                let planted = match (a.planted_topic, self.cfg.embedding.provider) {
                    (None, _) => None,
                    (Some(t), ProviderKind::Synthetic) => Some(self.synthetic_embedder().topic_direction(t)),
                    (Some(_), ProviderKind::Remote) => {
                        return Err(Error::Config("agent.planted_topic needs synthetic embeddings".into()))
                    }
                };
                Ok(Box::new(MockAgent::new(&MockAgentConfig {
                    dim: self.dim(),
                    action_dims: space.len(),
                    step_size: a.step_size,
                    seed: self.cfg.seeds.agent,
                    planted,
                })?))
            }
            AgentKind::Remote => {
                let r = &self.cfg.remote;
                let rc = RemoteAgentConfig {
                    text_endpoint: r.text_endpoint.clone(),
                    text_model: a.text_model.clone(),
                    image_endpoint: r.image_endpoint.clone(),
                    image_model: a.image_model.clone(),
                    image_size: a.image_size.clone(),
                };
                // Check configuration before touching the filesystem.
                if rc.text_endpoint.is_none() {
                    return Err(Error::Unconfigured(format!(
                        "remote agent needs a text endpoint (remote.text_endpoint or {})",
                        crate::config::ENV_TEXT_ENDPOINT
                    )));
                }
                if space.modality == Modality::Image && rc.image_endpoint.is_none() {
                    return Err(Error::Unconfigured(format!(
                        "remote image agent needs an image endpoint (remote.image_endpoint or {})",
                        crate::config::ENV_IMAGE_ENDPOINT
                    )));
                }
                let client = self.remote_client()?;
                Ok(match space.modality {
                    Modality::Text => Box::new(RemoteTextAgent::new(client, &rc, provider)?),
                    Modality::Image => Box::new(RemoteImageAgent::new(client, &rc, provider)?),
                })
            }
        }
    }

    pub fn load_dataset(&self) -> Result<LoadedDataset> {
        let dir = self.path(DATASET_DIR);
        let hint = "run `docg build-dataset` first";
        let split: SplitManifest = read_artifact(&dir.join("split.json"), hint)?;
        let records_path = dir.join("interactions.jsonl");
        if !records_path.exists() {
            return Err(missing(records_path, hint));
        }
        let records = read_interactions(&records_path)?;
        let quads_path = dir.join("quadruples.jsonl");
        if !quads_path.exists() {
            return Err(missing(quads_path, hint));
        }
        let quads: Vec<TrainingQuadruple> = read_jsonl(&quads_path)?;
        let train_ids: HashSet<&str> = split.train.iter().map(String::as_str).collect();
        let test_ids: HashSet<&str> = split.test.iter().map(String::as_str).collect();
        let pick = |ids: &HashSet<&str>| -> Vec<InteractionRecord> {
            records.iter().filter(|r| ids.contains(r.content_id.as_str())).cloned().collect()
        };
        let (train_records, test_records) = (pick(&train_ids), pick(&test_ids));
        let (train_quadruples, test_quadruples) = quads.into_iter().partition(|q| train_ids.contains(q.content_id.as_str()));
        Ok(LoadedDataset {
            train_records,
            test_records,
            records,
            train_quadruples,
            test_quadruples,
            split,
        })
    }

    pub fn load_estimator(&self) -> Result<PairwiseEstimator> {
        let path = self.path(ESTIMATOR);
        if !path.exists() {
            return Err(missing(path, "run `docg train-indicator` first"));
        }
        Ok(PairwiseEstimator::load(&path, Some(self.dim()))?.0)
    }

    pub fn load_policy(&self) -> Result<PolicyNetwork> {
        let path = self.path(POLICY);
        if !path.exists() {
            return Err(missing(path, "run `docg train-editor` first"));
        }
        let (p, _) = PolicyNetwork::load(&path, Some(self.dim()))?;
        if p.space().modality != self.cfg.editor.modality {
            return Err(Error::Checkpoint(format!(
                "policy was trained for {:?} content, config asks for {:?}",
                p.space().modality,
                self.cfg.editor.modality
            )));
        }
        Ok(p)
    }

    /// Profiles over every dataset record, embedded with the configured
    /// provider.
    pub fn profile_store(&self, data: &LoadedDataset, provider: &dyn EmbeddingProvider) -> Result<ProfileStore> {
        ProfileStore::build(&data.records, pipeline::embed_records(&data.records, provider)?)
    }

    pub fn scorer(&self, est: &PairwiseEstimator, store: &ProfileStore, group: &AudienceGroup) -> Result<AudienceScorer> {
        let features = pipeline::audience_features(store, group, None)?;
        pipeline::audience_scorer(est, &features, self.cfg.indicator.mode())
    }

    pub fn audience_id(&self, flag: Option<&str>) -> Result<String> {
        flag.map(str::to_owned)
            .or_else(|| self.cfg.evaluation.audience.clone())
            .ok_or_else(|| Error::InvalidInput("no audience given (--audience or evaluation.audience)".into()))
    }

    /// Candidate messages embedded and split into editor-training and
    /// bottom-score test sets.
    pub fn messages(&self, flag: Option<&Path>, provider: &dyn EmbeddingProvider, scorer: &AudienceScorer) -> Result<TestSplit> {
        let path = flag
            .map(Path::to_owned)
            .or_else(|| self.cfg.evaluation.messages.clone())
            .ok_or_else(|| Error::InvalidInput("no candidate messages given (--messages or evaluation.messages)".into()))?;
        if !path.exists() {
            return Err(Error::InvalidInput(format!("messages file {} does not exist", path.display())));
        }
        let drafts: Vec<DraftMessage> = read_jsonl(&path)?;
        let modality = self.cfg.editor.modality;
        let items: Vec<(String, Content)> = drafts
            .into_iter()
            .map(|d| (d.id, content_for(modality, d.text)))
            .collect();
        let states = pipeline::embed_messages(&items, provider)?;
        select_test_set(&states, scorer, self.cfg.evaluation.n_pool, self.cfg.evaluation.n_test)
    }

    /// Appends `runs/<unix-ms>-<hash>/run.json`.
    pub fn record_run(&self, command: &str, started: Instant, metrics: Value) -> Result<PathBuf> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        let runs = self.path("runs");
        let stem = format!("{now}-{}", self.cfg.short_hash());
        let mut dir = runs.join(&stem);
        let mut n = 1;
        while dir.exists() {
            dir = runs.join(format!("{stem}-{n}"));
            n += 1;
        }
        let log = serde_json::json!({
            "command": command,
            "config_hash": self.hash,
            "seeds": self.cfg.seeds,
            "started_unix_ms": now.saturating_sub(started.elapsed().as_millis()),
            "duration_ms": started.elapsed().as_millis(),
            "metrics": metrics,
        });
        let path = dir.join("run.json");
        write_json(&path, &log)?;
        Ok(path)
    }
}

pub fn content_for(modality: Modality, text: String) -> Content {
    match modality {
        Modality::Text => Content::text(text),
        Modality::Image => Content::Image { prompt: text, url: None },
    }
}

pub fn read_artifact<T: for<'de> Deserialize<'de>>(path: &Path, hint: &str) -> Result<T> {
    if !path.exists() {
        return Err(missing(path.to_owned(), hint));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_owned(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// State for one message before any edit.
pub fn input_state(id: &str, content: Content, provider: &dyn EmbeddingProvider) -> Result<ContentState> {
    let e = provider.embed(&content)?;
    Ok(ContentState::new(id, Some(content), e))
}
