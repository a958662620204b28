use serde_json::{json, Value};

use super::{Content, Embedding, EmbeddingProvider};
use crate::transport::RemoteClient;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    pub model_id: String,
    pub dim: usize,
    pub batch_size: usize,
}

/// Client for a JSON embedding service:
/// request `{model_id, inputs: [string]}`, response `{vectors: [[f64]]}`.
pub struct RemoteEmbedder {
    client: RemoteClient,
    config: RemoteEmbedderConfig,
}

impl RemoteEmbedder {
    pub fn new(client: RemoteClient, config: RemoteEmbedderConfig) -> Self {
        Self { client, config }
    }

    fn input_of(content: &Content) -> Result<String> {
        if content.is_empty() {
            return Err(Error::InvalidInput("cannot embed empty content".into()));
        }
        Ok(match content {
            Content::Text { text } => text.clone(),
            Content::Image { url: Some(u), .. } => u.clone(),
            Content::Image { prompt, url: None } => prompt.clone(),
        })
    }

    fn request(&self, inputs: Vec<String>) -> Result<Vec<Embedding>> {
        let n = inputs.len();
        let body = json!({ "model_id": self.config.model_id, "inputs": inputs });
        let resp = self.client.call(&self.config.endpoint, &body)?;
        let vectors = resp
            .get("vectors")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidInput("embedding response lacks `vectors`".into()))?;
        if vectors.len() != n {
            return Err(Error::shape("embedding response vectors", n, vectors.len()));
        }
        vectors
            .iter()
            .map(|v| {
                let vals: Vec<f64> = serde_json::from_value(v.clone())?;
                if vals.len() != self.config.dim {
                    return Err(Error::Config(format!(
                        "remote embedding has dim {}, configured dim is {}",
                        vals.len(),
                        self.config.dim
                    )));
                }
                Embedding::new(vals)
            })
            .collect()
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn embed(&self, content: &Content) -> Result<Embedding> {
        let mut v = self.request(vec![Self::input_of(content)?])?;
        Ok(v.remove(0))
    }

    fn embed_many(&self, contents: &[Content]) -> Result<Vec<Embedding>> {
        let inputs = contents.iter().map(Self::input_of).collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(self.config.batch_size.max(1)) {
            out.extend(self.request(chunk.to_vec())?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;
    use std::time::Duration;

    use super::*;
    use crate::transport::testing::{FnTransport, ScriptedTransport};
    use crate::transport::{RetryPolicy, TransportError};

    fn cfg(dim: usize) -> RemoteEmbedderConfig {
        RemoteEmbedderConfig {
            endpoint: "http://embed".into(),
            model_id: "clip-test".into(),
            dim,
            batch_size: 2,
        }
    }

    fn retry() -> RetryPolicy {
        RetryPolicy {
            max_retries: 1,
            backoff: Duration::ZERO,
        }
    }

    #[test]
    fn batches_preserve_order() {
        // vector = [len(input), index-in-batch]
        let t = FnTransport(|_: &str, body: &Value| {
            assert_eq!(body["model_id"], "clip-test");
            let inputs = body["inputs"].as_array().unwrap();
            let vecs: Vec<Vec<f64>> = inputs
                .iter()
                .map(|s| vec![s.as_str().unwrap().len() as f64, 1.0])
                .collect();
            Ok(json!({ "vectors": vecs }))
        });
        let e = RemoteEmbedder::new(RemoteClient::new(Arc::new(t), retry()), cfg(2));
        let contents: Vec<Content> = ["a", "bbb", "cc", "dddd", "e"].iter().map(|s| Content::text(*s)).collect();
        let out = e.embed_many(&contents).unwrap();
        let lens: Vec<f64> = out.iter().map(|v| v.values()[0]).collect();
        assert_eq!(lens, vec![1.0, 3.0, 2.0, 4.0, 1.0]);
    }

    #[test]
    fn wrong_dimension_is_a_config_error() {
        let t = ScriptedTransport::always(Ok(json!({ "vectors": [[1.0, 2.0, 3.0]] })));
        let e = RemoteEmbedder::new(RemoteClient::new(Arc::new(t), retry()), cfg(2));
        assert!(matches!(e.embed(&Content::text("x")), Err(Error::Config(_))));
    }

    #[test]
    fn transport_failure_carries_attempts() {
        let t = ScriptedTransport::always(Err(TransportError::Timeout));
        let e = RemoteEmbedder::new(RemoteClient::new(Arc::new(t), retry()), cfg(2));
        assert!(matches!(e.embed(&Content::text("x")), Err(Error::Transport { attempts: 2, .. })));
    }
}
