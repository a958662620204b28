//! Workspace configuration: one TOML file, environment overrides for remote
//! endpoints and keys, and a content hash that every artifact records.

use std::path::{Path, PathBuf};

use docg_core::dataset::{LabelRules, SplitRatio};
use docg_core::editor::{EditorConfig, Modality, PolicyShape, RewardKind};
use docg_core::indicator::{EstimatorShape, ScoreMode, TrainConfig};
use docg_core::synthetic::WorldConfig;
use docg_core::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ENV_TEXT_ENDPOINT: &str = "DOCG_TEXT_ENDPOINT";
pub const ENV_IMAGE_ENDPOINT: &str = "DOCG_IMAGE_ENDPOINT";
pub const ENV_EMBED_ENDPOINT: &str = "DOCG_EMBED_ENDPOINT";
pub const ENV_API_KEY: &str = "DOCG_API_KEY";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkspaceConfig {
    pub workspace: PathsConfig,
    pub seeds: Seeds,
    pub embedding: EmbeddingConfig,
    pub dataset: DatasetConfig,
    pub indicator: IndicatorConfig,
    pub editor: EditorSection,
    pub agent: AgentConfig,
    pub evaluation: EvaluationConfig,
    pub remote: RemoteConfig,
    pub synthetic: WorldConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Artifact root. Relative paths resolve against the config file.
    pub dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from(".") }
    }
}

/// One named seed per source of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    /// Train/test split and negative sampling.
    pub dataset: u64,
    /// Synthetic embedder topic and noise directions.
    pub embedding: u64,
    /// Estimator initialisation and batch order.
    pub indicator: u64,
    /// Policy initialisation, message draws and action noise.
    pub editor: u64,
    /// Mock agent edit directions.
    pub agent: u64,
    /// Greedy and random baselines.
    pub evaluation: u64,
    /// Synthetic world generation.
    pub synthetic: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Self {
            dataset: seed,
            embedding: seed,
            indicator: seed,
            editor: seed,
            agent: seed,
            evaluation: seed,
            synthetic: seed,
        }
    }
}

impl Default for Seeds {
    fn default() -> Self {
        Self::all(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub provider: ProviderKind,
    pub dim: usize,
    /// Share of a synthetic embedding taken by its `#topicN` tags.
    pub topic_weight: f64,
    pub model_id: String,
    pub batch_size: usize,
    /// Keep remote embeddings in `<dir>/embeddings.jsonl`.
    pub cache: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Synthetic,
            dim: 16,
            topic_weight: 0.7,
            model_id: "clip-vit-b-32".into(),
            batch_size: 32,
            cache: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub interactions: Option<PathBuf>,
    /// Train:test ratio such as `4:1`.
    pub split: String,
    pub include_origin_as_target_positive: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            interactions: None,
            split: "4:1".into(),
            include_origin_as_target_positive: false,
        }
    }
}

impl DatasetConfig {
    pub fn ratio(&self) -> Result<SplitRatio> {
        self.split.parse()
    }

    pub fn rules(&self) -> LabelRules {
        LabelRules {
            include_origin_as_target_positive: self.include_origin_as_target_positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicatorConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub m1_hidden: usize,
    pub latent: usize,
    pub m2_hidden: usize,
    pub exclude_self_pairs: bool,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = EstimatorShape::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            m1_hidden: s.m1_hidden,
            latent: s.latent,
            m2_hidden: s.m2_hidden,
            exclude_self_pairs: false,
        }
    }
}

impl IndicatorConfig {
    pub fn shape(&self) -> EstimatorShape {
        EstimatorShape {
            m1_hidden: self.m1_hidden,
            latent: self.latent,
            m2_hidden: self.m2_hidden,
        }
    }

    pub fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
        }
    }

    pub fn mode(&self) -> ScoreMode {
        ScoreMode::from_exclude_self(self.exclude_self_pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EditorSection {
    pub modality: Modality,
    pub episodes: usize,
    pub horizon: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub use_baseline: bool,
    pub reward: RewardKind,
    pub checkpoint_every: usize,
    pub hidden: usize,
    pub init_log_std: f64,
}

impl Default for EditorSection {
    fn default() -> Self {
        let e = EditorConfig::default();
        let p = PolicyShape::default();
        Self {
            modality: Modality::Text,
            episodes: e.episodes,
            horizon: e.horizon,
            batch_size: e.batch_size,
            gamma: e.gamma,
            learning_rate: e.learning_rate,
            use_baseline: e.use_baseline,
            reward: e.reward,
            checkpoint_every: e.checkpoint_every,
            hidden: p.hidden,
            init_log_std: p.init_log_std,
        }
    }
}

impl EditorSection {
    pub fn train(&self, seed: u64) -> EditorConfig {
        EditorConfig {
            episodes: self.episodes,
            horizon: self.horizon,
            batch_size: self.batch_size,
            gamma: self.gamma,
            learning_rate: self.learning_rate,
            use_baseline: self.use_baseline,
            reward: self.reward,
            seed,
            checkpoint_every: self.checkpoint_every,
        }
    }

    pub fn shape(&self) -> PolicyShape {
        PolicyShape {
            hidden: self.hidden,
            init_log_std: self.init_log_std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Mock agent move length per unit action.
    pub step_size: f64,
    /// Plant the synthetic direction of this topic as the first edit
    /// direction (synthetic embeddings only).
    pub planted_topic: Option<usize>,
    pub text_model: String,
    pub image_model: String,
    pub image_size: String,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            kind: AgentKind::Mock,
            step_size: 0.25,
            planted_topic: None,
            text_model: "gpt-4".into(),
            image_model: "pixart-alpha".into(),
            image_size: "512x512".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Candidate messages, JSONL `{id, text}`.
    pub messages: Option<PathBuf>,
    /// Content id of the dataset record whose audience is targeted.
    pub audience: Option<String>,
    pub n_pool: usize,
    pub n_test: usize,
    pub greedy_k: usize,
    /// Editor seeds per reward kind in the ablation.
    pub ablation_seeds: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            messages: None,
            audience: None,
            n_pool: 50,
            n_test: 10,
            greedy_k: docg_core::evaluation::DEFAULT_GREEDY_K,
            ablation_seeds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub text_endpoint: Option<String>,
    pub image_endpoint: Option<String>,
    pub embed_endpoint: Option<String>,
    /// Never written back out; prefer the environment variable.
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    /// Append every request and outcome to `<dir>/remote-audit.jsonl`.
    pub audit: bool,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            text_endpoint: None,
            image_endpoint: None,
            embed_endpoint: None,
            api_key: None,
            timeout_ms: 30_000,
            max_retries: 3,
            backoff_ms: 500,
            audit: true,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl WorkspaceConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`, resolves relative paths against its directory and
    /// applies environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.workspace.dir);
        if let Some(p) = self.dataset.interactions.as_mut() {
            fix(p);
        }
        if let Some(p) = self.evaluation.messages.as_mut() {
            fix(p);
        }
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        let set = |slot: &mut Option<String>, key: &str| {
            if let Some(v) = get(key).filter(|v| !v.is_empty()) {
                *slot = Some(v);
            }
        };
        set(&mut self.remote.text_endpoint, ENV_TEXT_ENDPOINT);
        set(&mut self.remote.image_endpoint, ENV_IMAGE_ENDPOINT);
        set(&mut self.remote.embed_endpoint, ENV_EMBED_ENDPOINT);
        set(&mut self.remote.api_key, ENV_API_KEY);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.embedding.dim == 0 {
            return bad("embedding.dim must be positive");
        }
        self.dataset.ratio()?;
        if self.indicator.epochs == 0 || self.indicator.batch_size == 0 {
            return bad("indicator.epochs and indicator.batch_size must be positive");
        }
        if !(self.indicator.learning_rate > 0.0 && self.editor.learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.editor.batch_size == 0 || self.editor.horizon == 0 {
            return bad("editor.batch_size and editor.horizon must be positive");
        }
        if !(0.0..=1.0).contains(&self.editor.gamma) {
            return bad("editor.gamma must lie in [0, 1]");
        }
        if !(self.agent.step_size > 0.0) {
            return bad("agent.step_size must be positive");
        }
        if self.evaluation.n_test == 0 || self.evaluation.n_test > self.evaluation.n_pool {
            return bad("evaluation needs 0 < n_test <= n_pool");
        }
        if self.evaluation.greedy_k == 0 {
            return bad("evaluation.greedy_k must be positive");
        }
        Ok(())
    }

    /// SHA-256 over everything that affects results. The workspace path and
    /// the API key are left out, and input files count by content rather
    /// than location, so copies of a workspace hash alike.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workspace = PathsConfig::default();
        c.remote.api_key = None;
        let by_content = |p: &mut Option<PathBuf>| {
            if let Some(bytes) = p.as_ref().and_then(|p| std::fs::read(p).ok()) {
                *p = Some(format!("sha256:{}", sha256_hex(&bytes)).into());
            }
        };
        by_content(&mut c.dataset.interactions);
        by_content(&mut c.evaluation.messages);
        sha256_hex(&serde_json::to_vec(&c).expect("config serialises"))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_owned()
    }

    /// Settings tuned for the planted synthetic world.
    pub fn synthetic_preset(seed: u64) -> Self {
        let world = WorldConfig::default();
        Self {
            seeds: Seeds::all(seed),
            embedding: EmbeddingConfig {
                dim: world.dim,
                topic_weight: world.topic_weight,
                ..Default::default()
            },
            indicator: IndicatorConfig {
                batch_size: 32,
                exclude_self_pairs: true,
                ..Default::default()
            },
            editor: EditorSection {
                batch_size: 32,
                learning_rate: 3e-3,
                use_baseline: true,
                ..Default::default()
            },
            agent: AgentConfig {
                planted_topic: Some(world.target_topic),
                ..Default::default()
            },
            synthetic: world,
            ..Default::default()
        }
    }
}
