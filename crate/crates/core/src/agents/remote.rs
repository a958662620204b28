//! Agents backed by remote generative services.
//!
//! Text service (chat style): request `{model, messages, temperature: 0}`,
//! response `{choices: [{message: {content, refusal?}, finish_reason}]}`.
//! Image service: request `{model, prompt, size}`, response `{url}` or
//! `{data: [{url}]}`.
//!
//! A refusal is either a non-null `refusal` field, a `content_filter` finish
//! reason, or an empty reply; it surfaces as [`Error::Refused`].

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::render_prompt;
use super::{ContentState, EditAgent};
use crate::editor::{ActionSpace, ActionVector, Modality};
use crate::embedding::{content_hash, Content, EmbeddingProvider};
use crate::transport::RemoteClient;
use crate::{Error, Result};

const SYSTEM_PROMPT: &str = "You edit social media posts. Follow the requested adjustments and reply with the revised text only.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteAgentConfig {
    pub text_endpoint: Option<String>,
    pub text_model: String,
    pub image_endpoint: Option<String>,
    pub image_model: String,
    pub image_size: String,
}

impl Default for RemoteAgentConfig {
    fn default() -> Self {
        Self {
            text_endpoint: None,
            text_model: "gpt-4".into(),
            image_endpoint: None,
            image_model: "pixart-alpha".into(),
            image_size: "512x512".into(),
        }
    }
}

fn chat(client: &RemoteClient, endpoint: &str, model: &str, prompt: &str) -> Result<String> {
    let body = json!({
        "model": model,
        "messages": [
            { "role": "system", "content": SYSTEM_PROMPT },
            { "role": "user", "content": prompt },
        ],
        "temperature": 0,
    });
    let resp = client.call(endpoint, &body)?;
    let choice = resp
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| Error::InvalidInput("chat response has no choices".into()))?;
    let message = choice.get("message").unwrap_or(&Value::Null);
    if let Some(r) = message.get("refusal").and_then(Value::as_str) {
        return Err(Error::Refused(r.to_string()));
    }
    if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
        return Err(Error::Refused("content filter".into()));
    }
    match message.get("content").and_then(Value::as_str).map(str::trim) {
        Some(t) if !t.is_empty() => Ok(t.to_string()),
        _ => Err(Error::Refused("empty reply".into())),
    }
}

fn payload_text(state: &ContentState) -> Result<&str> {
    state
        .content
        .as_ref()
        .map(Content::as_str)
        .ok_or_else(|| Error::InvalidInput(format!("content {} has no payload for a remote agent", state.id)))
}

fn endpoint<'a>(e: &'a Option<String>, what: &str) -> Result<&'a str> {
    e.as_deref()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::Unconfigured(format!("{what} endpoint is not set")))
}

fn revised_state(content: Content, embedder: &dyn EmbeddingProvider) -> Result<ContentState> {
    let embedding = embedder.embed(&content)?;
    let id = format!("rev-{}", &content_hash(&content)[..16]);
    Ok(ContentState::new(id, Some(content), embedding))
}

/// Rewrites text through a chat-style service.
pub struct RemoteTextAgent {
    client: RemoteClient,
    endpoint: String,
    model: String,
    embedder: Arc<dyn EmbeddingProvider>,
}

impl RemoteTextAgent {
    pub fn new(client: RemoteClient, cfg: &RemoteAgentConfig, embedder: Arc<dyn EmbeddingProvider>) -> Result<Self> {
        Ok(Self {
            client,
            endpoint: endpoint(&cfg.text_endpoint, "text agent")?.to_string(),
            model: cfg.text_model.clone(),
            embedder,
        })
    }
}

impl EditAgent for RemoteTextAgent {
    fn name(&self) -> &str {
        "remote-text"
    }

    fn edit(&self, state: &ContentState, action: &ActionVector, space: &ActionSpace) -> Result<ContentState> {
        action.check_space(space)?;
        let prompt = render_prompt(action, space, payload_text(state)?);
        let text = chat(&self.client, &self.endpoint, &self.model, &prompt)?;
        revised_state(Content::text(text), self.embedder.as_ref())
    }
}

/// Message to text-to-image prompt (chat call), then prompt to image (second call).
pub struct RemoteImageAgent {
    client: RemoteClient,
    text_endpoint: String,
    image_endpoint: String,
    cfg: RemoteAgentConfig,
    embedder: Arc<dyn EmbeddingProvider>,
}

impl RemoteImageAgent {
    pub fn new(client: RemoteClient, cfg: &RemoteAgentConfig, embedder: Arc<dyn EmbeddingProvider>) -> Result<Self> {
        Ok(Self {
            client,
            text_endpoint: endpoint(&cfg.text_endpoint, "text agent")?.to_string(),
            image_endpoint: endpoint(&cfg.image_endpoint, "image agent")?.to_string(),
            cfg: cfg.clone(),
            embedder,
        })
    }
}

impl EditAgent for RemoteImageAgent {
    fn name(&self) -> &str {
        "remote-image"
    }

    fn edit(&self, state: &ContentState, action: &ActionVector, space: &ActionSpace) -> Result<ContentState> {
        action.check_space(space)?;
        if space.modality != Modality::Image {
            return Err(Error::InvalidInput("image agent needs the image action space".into()));
        }
        let prompt = render_prompt(action, space, payload_text(state)?);
        let t2i = chat(&self.client, &self.text_endpoint, &self.cfg.text_model, &prompt)?;
        let body = json!({ "model": self.cfg.image_model, "prompt": t2i, "size": self.cfg.image_size });
        let resp = self.client.call(&self.image_endpoint, &body)?;
        let url = resp
            .get("url")
            .or_else(|| resp.get("data").and_then(|d| d.get(0)).and_then(|d| d.get("url")))
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Refused("image service returned no image".into()))?;
        revised_state(
            Content::Image {
                prompt: t2i,
                url: Some(url.to_string()),
            },
            self.embedder.as_ref(),
        )
    }
}
