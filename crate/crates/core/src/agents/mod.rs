//! Editing agents: turn an action vector into a revised piece of content.

mod mock;
mod prompt;
mod remote;

use serde::{Deserialize, Serialize};

pub use mock::{MockAgent, MockAgentConfig};
pub use prompt::{instructions, render_prompt, EditInstruction, FIDELITY_CLAUSE, OMIT_BELOW};
pub use remote::{RemoteAgentConfig, RemoteImageAgent, RemoteTextAgent};

use crate::editor::{ActionSpace, ActionVector};
use crate::embedding::{Content, Embedding};
use crate::{rng, Result};

/// A message as the editor sees it: an identifier, the payload when there is
/// one, and its embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentState {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<Content>,
    pub embedding: Embedding,
}

impl ContentState {
    pub fn new(id: impl Into<String>, content: Option<Content>, embedding: Embedding) -> Self {
        Self {
            id: id.into(),
            content,
            embedding,
        }
    }

    /// State known only by its embedding; the id is derived from its bits.
    pub fn from_embedding(embedding: Embedding) -> Self {
        let bytes: Vec<u8> = embedding.values().iter().flat_map(|v| v.to_bits().to_le_bytes()).collect();
        Self {
            id: format!("emb-{:016x}", rng::digest64(&[&bytes])),
            content: None,
            embedding,
        }
    }
}

pub trait EditAgent: Send + Sync {
    fn name(&self) -> &str;

    fn edit(&self, state: &ContentState, action: &ActionVector, space: &ActionSpace) -> Result<ContentState>;
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityAgent;

impl EditAgent for IdentityAgent {
    fn name(&self) -> &str {
        "identity"
    }

    fn edit(&self, state: &ContentState, action: &ActionVector, space: &ActionSpace) -> Result<ContentState> {
        action.check_space(space)?;
        Ok(state.clone())
    }
}
