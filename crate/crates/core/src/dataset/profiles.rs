use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use super::{InteractionRecord, TrainingQuadruple};
use crate::embedding::{user_feature, Embedding};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserProfile {
    pub user_id: String,
    pub history: Vec<String>,
    pub feature: Embedding,
}

/// Per-user content histories within one split, with the content embeddings
/// needed to turn them into features.
#[derive(Debug, Clone)]
pub struct ProfileStore {
    histories: BTreeMap<String, Vec<String>>,
    embeddings: HashMap<String, Embedding>,
}

impl ProfileStore {
    /// A user's history is every content they posted or interacted with.
    pub fn build(records: &[InteractionRecord], embeddings: HashMap<String, Embedding>) -> Result<Self> {
        let mut histories: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for r in records {
            if !embeddings.contains_key(&r.content_id) {
                return Err(Error::InvalidInput(format!("no embedding for content {}", r.content_id)));
            }
            let mut push = |u: &str| {
                let h = histories.entry(u.to_owned()).or_default();
                if h.last() != Some(&r.content_id) {
                    h.push(r.content_id.clone());
                }
            };
            push(&r.origin_user);
            for u in r.distinct_interactors() {
                push(u);
            }
        }
        Ok(Self { histories, embeddings })
    }

    pub fn users(&self) -> impl Iterator<Item = &str> {
        self.histories.keys().map(String::as_str)
    }

    pub fn history(&self, user: &str) -> &[String] {
        self.histories.get(user).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn content_embedding(&self, content_id: &str) -> Option<&Embedding> {
        self.embeddings.get(content_id)
    }

    /// Mean history embedding, optionally leaving out one content.
    pub fn feature(&self, user: &str, exclude: Option<&str>) -> Result<Embedding> {
        let items: Vec<Embedding> = self
            .history(user)
            .iter()
            .filter(|c| Some(c.as_str()) != exclude)
            .map(|c| self.embeddings[c].clone())
            .collect();
        if items.is_empty() {
            return Err(Error::EmptyHistory(user.to_owned()));
        }
        user_feature(&items)
    }

    pub fn profile(&self, user: &str) -> Result<UserProfile> {
        Ok(UserProfile {
            user_id: user.to_owned(),
            history: self.history(user).to_vec(),
            feature: self.feature(user, None)?,
        })
    }

    /// Splits quadruples into those whose users both have a history outside
    /// the quadruple's own content, and the set of users that do not.
    pub fn filter_quadruples(&self, quads: Vec<TrainingQuadruple>) -> (Vec<TrainingQuadruple>, BTreeSet<String>) {
        let mut missing = BTreeSet::new();
        let has = |u: &str, c: &str| self.history(u).iter().any(|h| h != c);
        let kept = quads
            .into_iter()
            .filter(|q| {
                let mut ok = true;
                for u in [&q.u_i, &q.u_j] {
                    if !has(u, &q.content_id) {
                        missing.insert(u.clone());
                        ok = false;
                    }
                }
                ok
            })
            .collect();
        (kept, missing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexedExample {
    pub i: usize,
    pub j: usize,
    pub c: usize,
    pub y: f64,
}

/// Deduplicated raw features referenced by a list of quadruples. User
/// features exclude the quadruple's own content.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub features: Vec<Embedding>,
    pub examples: Vec<IndexedExample>,
}

impl FeatureTable {
    pub fn build(quads: &[TrainingQuadruple], store: &ProfileStore) -> Result<Self> {
        let mut features = Vec::new();
        let mut index: HashMap<(u8, String, String), usize> = HashMap::new();
        let mut intern = |key: (u8, String, String), make: &dyn Fn() -> Result<Embedding>| -> Result<usize> {
            if let Some(&k) = index.get(&key) {
                return Ok(k);
            }
            features.push(make()?);
            index.insert(key, features.len() - 1);
            Ok(features.len() - 1)
        };
        let mut examples = Vec::with_capacity(quads.len());
        for q in quads {
            let cid = q.content_id.as_str();
            let i = intern((0, q.u_i.clone(), cid.to_owned()), &|| store.feature(&q.u_i, Some(cid)))?;
            let j = intern((0, q.u_j.clone(), cid.to_owned()), &|| store.feature(&q.u_j, Some(cid)))?;
            let c = intern((1, String::new(), cid.to_owned()), &|| {
                store
                    .content_embedding(cid)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("no embedding for content {cid}")))
            })?;
            examples.push(IndexedExample {
                i,
                j,
                c,
                y: q.y as f64,
            });
        }
        Ok(Self { features, examples })
    }
}
