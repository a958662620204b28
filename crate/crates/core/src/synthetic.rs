//! Planted synthetic world for closed-loop experiments.
//!
//! Users live in disjoint communities. Each community pairs two topics `a`
//! and `b` and has fans of each. A post on topic `a` is written by a fan of
//! `b` and drawn into interaction mostly by fans of `a` (and vice versa), so
//! interactors are topic-aligned with what they spread while the poster is
//! not. Posts carry a `#topicN` tag that the synthetic embedder turns into a
//! fixed direction.
//!
//! The world also holds a pool of draft messages to be edited for the
//! audience of one target-topic post.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::InteractionRecord;
use crate::embedding::{Embedding, SyntheticEmbedder};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub dim: usize,
    pub topics: usize,
    pub communities: usize,
    pub fans_per_topic: usize,
    pub posts_per_topic: usize,
    /// Chance that a fan of a post's topic interacts with it.
    pub fan_interact: f64,
    /// Chance that a fan of the other topic interacts.
    pub other_interact: f64,
    pub topic_weight: f64,
    /// Topic whose audience the editor targets.
    pub target_topic: usize,
    pub pool_size: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            topics: 6,
            communities: 24,
            fans_per_topic: 6,
            posts_per_topic: 4,
            fan_interact: 0.7,
            other_interact: 0.02,
            topic_weight: 0.7,
            target_topic: 0,
            pool_size: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftMessage {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub config: WorldConfig,
    pub records: Vec<InteractionRecord>,
    pub pool: Vec<DraftMessage>,
}

fn tagged(prefix: &str, n: usize, topic: usize) -> String {
    format!("{prefix} {n} #topic{topic}")
}

impl SyntheticWorld {
    pub fn generate(config: &WorldConfig, seed: u64) -> Result<Self> {
        if config.topics < 2 || config.topics > config.dim {
            return Err(Error::Config(format!(
                "synthetic world needs 2..={} topics, got {}",
                config.dim, config.topics
            )));
        }
        if config.target_topic >= config.topics || config.fans_per_topic == 0 || config.posts_per_topic == 0 {
            return Err(Error::Config("synthetic world: invalid target topic or empty communities".into()));
        }
        let mut r = rng::stream(seed, "synthetic-world");
        let mut records = Vec::new();
        let mut post = 0usize;
        for g in 0..config.communities {
            // Every topic appears in some community; the target topic in many.
            let a = if g % 2 == 0 { config.target_topic } else { g / 2 % config.topics };
            let mut b = r.random_range(0..config.topics - 1);
            if b >= a {
                b += 1;
            }
            let fans = |side: char| -> Vec<String> { (0..config.fans_per_topic).map(|m| format!("u{g:03}{side}{m}")).collect() };
            let sides = [(a, fans('a'), fans('b')), (b, fans('b'), fans('a'))];
            // Posters cycle through a shuffled side so nobody posts twice
            // before everyone has posted once.
            let mut posters: Vec<Vec<String>> = sides.iter().map(|(_, _, other)| other.clone()).collect();
            posters.iter_mut().for_each(|p| p.shuffle(&mut r));
            for n in 0..config.posts_per_topic {
                for (s, (topic, own, other)) in sides.iter().enumerate() {
                    let origin = posters[s][n % other.len()].clone();
                    let mut interactors: Vec<String> = own.iter().filter(|_| r.random_bool(config.fan_interact)).cloned().collect();
                    if interactors.is_empty() {
                        interactors.push(own.choose(&mut r).expect("non-empty community").clone());
                    }
                    interactors.extend(other.iter().filter(|u| **u != origin && r.random_bool(config.other_interact)).cloned());
                    records.push(InteractionRecord {
                        content_id: format!("c{post:05}"),
                        text: tagged("post", post, *topic),
                        image_prompt: None,
                        origin_user: origin,
                        interactors,
                        ts: post as i64,
                    });
                    post += 1;
                }
            }
        }
        let pool = (0..config.pool_size)
            .map(|i| {
                let topic = r.random_range(0..config.topics);
                DraftMessage {
                    id: format!("d{i:04}"),
                    text: tagged("draft", i, topic),
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            records,
            pool,
        })
    }

    pub fn embedder(&self, seed: u64) -> SyntheticEmbedder {
        SyntheticEmbedder::new(self.config.dim, seed, self.config.topic_weight)
    }

    pub fn target_direction(&self, embedder: &SyntheticEmbedder) -> Embedding {
        embedder.topic_direction(self.config.target_topic)
    }

    /// Group id of the target-topic post with the most interactors (ties by id)
    /// among `records`.
    pub fn target_audience(&self, records: &[InteractionRecord]) -> Option<String> {
        let tag = format!("#topic{}", self.config.target_topic);
        records
            .iter()
            .filter(|r| r.text.split_whitespace().any(|t| t == tag))
            .min_by(|x, y| {
                y.distinct_interactors()
                    .len()
                    .cmp(&x.distinct_interactors().len())
                    .then_with(|| x.content_id.cmp(&y.content_id))
            })
            .map(|r| r.content_id.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{split, SplitRatio};

    #[test]
    fn deterministic() {
        let c = WorldConfig::default();
        assert_eq!(SyntheticWorld::generate(&c, 4).unwrap(), SyntheticWorld::generate(&c, 4).unwrap());
        assert_ne!(SyntheticWorld::generate(&c, 4).unwrap(), SyntheticWorld::generate(&c, 5).unwrap());
    }

    #[test]
    fn records_are_valid_and_origin_is_off_topic() {
        let w = SyntheticWorld::generate(&WorldConfig::default(), 1).unwrap();
        for rec in &w.records {
            rec.validate().unwrap();
            assert!(!rec.interactors.is_empty());
            // Posters belong to the side that does not follow the post's topic.
            let side = |u: &str| u.as_bytes()[4];
            let fans = rec.interactors.iter().filter(|u| side(u) != side(&rec.origin_user)).count();
            assert!(fans >= 1);
        }
        assert!(w.target_audience(&w.records).is_some());
    }

    #[test]
    fn communities_allow_a_disjoint_split() {
        let w = SyntheticWorld::generate(&WorldConfig::default(), 2).unwrap();
        let s = split(&w.records, SplitRatio::default(), 0).unwrap();
        assert_eq!(s.strategy, "component");
        assert!(s.dropped.is_empty());
        assert!(!s.test.is_empty());
    }
}
