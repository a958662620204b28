//! Deterministic stand-in for a pretrained encoder.
//!
//! Each content string hashes (with the seed) to a pseudo-random unit vector.
//! Tokens of the form `#topicN` additionally pull the vector toward a fixed
//! direction for topic `N`:
//!
//! `e = normalize((1 - w) * hash_vector + w * normalize(sum of topic directions))`
//!
//! Topic directions for the first `min(dim, MAX_ORTHOGONAL_TOPICS)` ids are
//! mutually orthonormal.

use std::sync::OnceLock;

use rand_distr::{Distribution, StandardNormal};

use super::{Content, Embedding, EmbeddingProvider};
use crate::{rng, Error, Result};

const MAX_ORTHOGONAL_TOPICS: usize = 32;
const TOPIC_PREFIX: &str = "#topic";

#[derive(Debug)]
pub struct SyntheticEmbedder {
    dim: usize,
    seed: u64,
    topic_weight: f64,
    topics: OnceLock<Vec<Embedding>>,
}

impl Clone for SyntheticEmbedder {
    fn clone(&self) -> Self {
        Self::new(self.dim, self.seed, self.topic_weight)
    }
}

impl SyntheticEmbedder {
    pub fn new(dim: usize, seed: u64, topic_weight: f64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            seed,
            topic_weight: topic_weight.clamp(0.0, 1.0),
            topics: OnceLock::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn topic_weight(&self) -> f64 {
        self.topic_weight
    }

    fn gaussian_unit(&self, label: &[u8]) -> Embedding {
        let key = rng::digest64(&[&self.seed.to_le_bytes(), label]);
        let mut r = rng::seeded(key);
        loop {
            let v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut r)).collect();
            if let Ok(e) = Embedding(v).normalized() {
                return e;
            }
        }
    }

    fn orthogonal_topics(&self) -> &[Embedding] {
        self.topics.get_or_init(|| {
            let n = self.dim.min(MAX_ORTHOGONAL_TOPICS);
            let mut basis: Vec<Embedding> = Vec::with_capacity(n);
            let mut k = 0u64;
            while basis.len() < n {
                let mut v = self
                    .gaussian_unit(format!("topic-basis-{k}").as_bytes())
                    .into_values();
                k += 1;
                for b in &basis {
                    let proj: f64 = v.iter().zip(b.values()).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b.values()).for_each(|(x, y)| *x -= proj * y);
                }
                if let Ok(u) = Embedding(v).normalized() {
                    if u.norm() > 0.5 {
                        basis.push(u);
                    }
                }
            }
            basis
        })
    }

    /// Fixed unit direction associated with topic `id`.
    pub fn topic_direction(&self, id: usize) -> Embedding {
        match self.orthogonal_topics().get(id) {
            Some(t) => t.clone(),
            None => self.gaussian_unit(format!("topic-extra-{id}").as_bytes()),
        }
    }

    /// Topic ids mentioned in `text` as `#topicN`, in order of appearance.
    pub fn topic_tags(text: &str) -> Vec<usize> {
        text.split(|c: char| c.is_whitespace() || c == ',' || c == '.')
            .filter_map(|tok| tok.strip_prefix(TOPIC_PREFIX))
            .filter_map(|rest| rest.parse().ok())
            .collect()
    }

    fn embed_str(&self, kind: &str, s: &str) -> Result<Embedding> {
        if s.trim().is_empty() {
            return Err(Error::InvalidInput("cannot embed empty content".into()));
        }
        let mut label = kind.as_bytes().to_vec();
        label.push(0);
        label.extend_from_slice(s.as_bytes());
        let base = self.gaussian_unit(&label);
        let tags = Self::topic_tags(s);
        if tags.is_empty() || self.topic_weight == 0.0 {
            return Ok(base);
        }
        let mut dir = vec![0.0; self.dim];
        for t in tags {
            dir.iter_mut()
                .zip(self.topic_direction(t).values())
                .for_each(|(a, b)| *a += b);
        }
        let w = self.topic_weight;
        let mixed: Vec<f64> = match Embedding(dir).normalized() {
            Ok(d) => base
                .values()
                .iter()
                .zip(d.values())
                .map(|(b, t)| (1.0 - w) * b + w * t)
                .collect(),
            Err(_) => base.into_values(),
        };
        Embedding(mixed).normalized().or_else(|_| Ok(self.gaussian_unit(&label)))
    }
}

impl EmbeddingProvider for SyntheticEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, content: &Content) -> Result<Embedding> {
        match content {
            Content::Text { text } => self.embed_str("text", text),
            Content::Image { prompt, url } => {
                let s = if prompt.trim().is_empty() {
                    url.as_deref().unwrap_or("")
                } else {
                    prompt
                };
                self.embed_str("image", s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::cosine;

    #[test]
    fn same_string_same_vector() {
        let e = SyntheticEmbedder::new(16, 9, 0.6);
        let a = e.embed(&Content::text("hello world")).unwrap();
        let b = e.embed(&Content::text("hello world")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_strings_differ() {
        let e = SyntheticEmbedder::new(16, 9, 0.6);
        for i in 0..50 {
            let a = e.embed(&Content::text(format!("message {i}"))).unwrap();
            let b = e.embed(&Content::text(format!("message {}", i + 1000))).unwrap();
            assert!(cosine(&a, &b).unwrap() < 1.0);
        }
    }

    #[test]
    fn outputs_have_unit_norm() {
        let e = SyntheticEmbedder::new(32, 1, 0.7);
        for s in ["a", "#topic2 b", "#topic1 #topic3 mixed", "#topic40 far"] {
            let v = e.embed(&Content::text(s)).unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12, "{s}");
        }
    }

    #[test]
    fn seed_changes_output() {
        let a = SyntheticEmbedder::new(8, 1, 0.0).embed(&Content::text("x")).unwrap();
        let b = SyntheticEmbedder::new(8, 2, 0.0).embed(&Content::text("x")).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn topic_directions_are_orthonormal() {
        let e = SyntheticEmbedder::new(16, 4, 0.5);
        for i in 0..6 {
            for j in 0..6 {
                let d = e.topic_direction(i).dot(&e.topic_direction(j));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn topic_tag_pulls_toward_direction() {
        let e = SyntheticEmbedder::new(16, 4, 0.7);
        let t = e.topic_direction(2);
        let tagged = e.embed(&Content::text("#topic2 match day")).unwrap();
        let plain = e.embed(&Content::text("match day")).unwrap();
        assert!(tagged.dot(&t) > 0.6);
        assert!(tagged.dot(&t) > plain.dot(&t));
    }

    #[test]
    fn tag_parsing() {
        assert_eq!(SyntheticEmbedder::topic_tags("a #topic3, b #topic12. #topicx"), vec![3, 12]);
    }

    #[test]
    fn empty_content_is_rejected() {
        let e = SyntheticEmbedder::new(4, 0, 0.5);
        assert!(e.embed(&Content::text("  ")).is_err());
    }
}
