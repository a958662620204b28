//! Interaction logs to labelled training quadruples.
//!
//! Every record defines an audience: the origin poster followed by the
//! distinct interactors. Ordered pairs `(i, j)` over that audience are
//! positive when `i` is the poster and `j` an interactor, or when both are
//! interactors. Everything else is negative.

mod profiles;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use profiles::{FeatureTable, IndexedExample, ProfileStore, UserProfile};
pub use split::{split, SplitOutcome, SplitRatio};

use crate::embedding::Content;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub content_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_prompt: Option<String>,
    pub origin_user: String,
    pub interactors: Vec<String>,
    #[serde(default)]
    pub ts: i64,
}

impl InteractionRecord {
    pub fn content(&self) -> Content {
        match &self.image_prompt {
            Some(p) if self.text.trim().is_empty() => Content::Image {
                prompt: p.clone(),
                url: None,
            },
            _ => Content::text(self.text.clone()),
        }
    }

    /// Interactors in first-appearance order with duplicates removed.
    pub fn distinct_interactors(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.interactors
            .iter()
            .map(String::as_str)
            .filter(|u| seen.insert(*u))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.content_id.is_empty() {
            return Err(Error::InvalidInput("record has an empty content_id".into()));
        }
        if self.origin_user.is_empty() {
            return Err(Error::InvalidInput(format!("record {} has no origin_user", self.content_id)));
        }
        if self.interactors.iter().any(|u| *u == self.origin_user) {
            return Err(Error::InvalidInput(format!(
                "record {}: origin user {} is also listed as an interactor",
                self.content_id, self.origin_user
            )));
        }
        if self.content().is_empty() {
            return Err(Error::InvalidInput(format!("record {} has no content", self.content_id)));
        }
        Ok(())
    }

    /// The audience of this record: poster first, then interactors.
    pub fn audience(&self) -> AudienceGroup {
        let mut members = vec![self.origin_user.clone()];
        members.extend(self.distinct_interactors().into_iter().map(str::to_owned));
        AudienceGroup {
            group_id: self.content_id.clone(),
            members,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingQuadruple {
    pub u_i: String,
    pub u_j: String,
    pub content_id: String,
    pub y: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceGroup {
    pub group_id: String,
    pub members: Vec<String>,
}

impl AudienceGroup {
    pub fn new(group_id: impl Into<String>, members: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        if let Some(dup) = members.iter().find(|m| !seen.insert(m.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate audience member {dup}")));
        }
        Ok(Self {
            group_id: group_id.into(),
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelRules {
    /// Treat `(interactor, poster)` pairs as positive too.
    pub include_origin_as_target_positive: bool,
}

/// All ordered pairs over the record's audience with their labels. Records
/// without interactors yield nothing.
pub fn build_quadruples(record: &InteractionRecord, rules: LabelRules) -> Result<Vec<TrainingQuadruple>> {
    record.validate()?;
    let interactors = record.distinct_interactors();
    if interactors.is_empty() {
        log::warn!("record {} has no interactors; skipped", record.content_id);
        return Ok(Vec::new());
    }
    let origin = record.origin_user.as_str();
    let members: Vec<&str> = std::iter::once(origin).chain(interactors).collect();
    let mut out = Vec::with_capacity(members.len() * (members.len() - 1));
    for &ui in &members {
        for &uj in &members {
            if ui == uj {
                continue;
            }
            let positive = (ui == origin) // rule 1: poster -> interactor
                || uj != origin // rule 2: interactor -> interactor
                || rules.include_origin_as_target_positive;
            out.push(TrainingQuadruple {
                u_i: ui.to_owned(),
                u_j: uj.to_owned(),
                content_id: record.content_id.clone(),
                y: positive as u8,
            });
        }
    }
    Ok(out)
}

/// Keeps every positive and, per content, `min(#neg, #pos)` negatives drawn
/// uniformly without replacement. Relative order of kept items is preserved.
pub fn negative_sample(quadruples: &[TrainingQuadruple], seed: u64) -> Vec<TrainingQuadruple> {
    let mut r = rng::stream(seed, "negative-sample");
    // BTreeMap over first-appearance rank keeps the draw order stable.
    let mut first_seen: BTreeMap<usize, &str> = BTreeMap::new();
    let mut groups: std::collections::HashMap<&str, (usize, Vec<usize>)> = Default::default();
    for (k, q) in quadruples.iter().enumerate() {
        let entry = groups.entry(q.content_id.as_str()).or_insert_with(|| {
            first_seen.insert(k, q.content_id.as_str());
            (0, Vec::new())
        });
        if q.y == 1 {
            entry.0 += 1;
        } else {
            entry.1.push(k);
        }
    }
    let mut keep = vec![false; quadruples.len()];
    for (k, q) in quadruples.iter().enumerate() {
        keep[k] = q.y == 1;
    }
    for cid in first_seen.values() {
        let (pos, negs) = &groups[cid];
        let n = (*pos).min(negs.len());
        for i in index::sample(&mut r, negs.len(), n).into_iter() {
            keep[negs[i]] = true;
        }
    }
    quadruples
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(q, _)| q.clone())
        .collect()
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidInput(format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads and validates an interactions file; duplicate content ids are rejected.
pub fn read_interactions(path: &Path) -> Result<Vec<InteractionRecord>> {
    let records: Vec<InteractionRecord> = read_jsonl(path)?;
    let mut ids = HashSet::new();
    for r in &records {
        r.validate()?;
        if !ids.insert(r.content_id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate content_id {}", r.content_id)));
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(id: &str, origin: &str, inter: &[&str]) -> InteractionRecord {
        InteractionRecord {
            content_id: id.into(),
            text: format!("post {id}"),
            image_prompt: None,
            origin_user: origin.into(),
            interactors: inter.iter().map(|s| s.to_string()).collect(),
            ts: 0,
        }
    }

    fn pairs(qs: &[TrainingQuadruple], y: u8) -> Vec<(String, String)> {
        let mut v: Vec<_> = qs
            .iter()
            .filter(|q| q.y == y)
            .map(|q| (q.u_i.clone(), q.u_j.clone()))
            .collect();
        v.sort();
        v
    }

    fn p(a: &str, b: &str) -> (String, String) {
        (a.into(), b.into())
    }

    #[test]
    fn two_interactors() {
        let q = build_quadruples(&rec("c", "A", &["B", "C"]), LabelRules::default()).unwrap();
        assert_eq!(pairs(&q, 1), vec![p("A", "B"), p("A", "C"), p("B", "C"), p("C", "B")]);
        assert_eq!(pairs(&q, 0), vec![p("B", "A"), p("C", "A")]);
    }

    #[test]
    fn single_interactor() {
        let q = build_quadruples(&rec("c", "A", &["B"]), LabelRules::default()).unwrap();
        assert_eq!(pairs(&q, 1), vec![p("A", "B")]);
        assert_eq!(pairs(&q, 0), vec![p("B", "A")]);
    }

    #[test]
    fn duplicate_interactor_is_ignored() {
        let a = build_quadruples(&rec("c", "A", &["B", "C"]), LabelRules::default()).unwrap();
        let b = build_quadruples(&rec("c", "A", &["B", "C", "B"]), LabelRules::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn origin_toggle_flips_target_pairs() {
        let rules = LabelRules {
            include_origin_as_target_positive: true,
        };
        let q = build_quadruples(&rec("c", "A", &["B", "C"]), rules).unwrap();
        assert!(q.iter().all(|q| q.y == 1));
    }

    #[test]
    fn empty_interactors_skip() {
        assert!(build_quadruples(&rec("c", "A", &[]), LabelRules::default()).unwrap().is_empty());
    }

    #[test]
    fn origin_among_interactors_is_invalid() {
        assert!(build_quadruples(&rec("c", "A", &["A", "B"]), LabelRules::default()).is_err());
    }

    fn synthetic_quads(id: &str, pos: usize, neg: usize) -> Vec<TrainingQuadruple> {
        (0..pos + neg)
            .map(|k| TrainingQuadruple {
                u_i: format!("u{k}"),
                u_j: format!("v{k}"),
                content_id: id.into(),
                y: (k < pos) as u8,
            })
            .collect()
    }

    #[test]
    fn negatives_are_capped_at_positive_count() {
        let mut q = synthetic_quads("a", 4, 10);
        q.extend(synthetic_quads("b", 4, 2));
        let s = negative_sample(&q, 3);
        let count = |id: &str, y: u8| s.iter().filter(|x| x.content_id == id && x.y == y).count();
        assert_eq!((count("a", 1), count("a", 0)), (4, 4));
        assert_eq!((count("b", 1), count("b", 0)), (4, 2));
        assert_eq!(s, negative_sample(&q, 3));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let recs = vec![rec("a", "A", &["B"]), rec("b", "C", &["D", "E"])];
        write_jsonl(&path, &recs).unwrap();
        assert_eq!(read_interactions(&path).unwrap(), recs);
    }
}

#[cfg(test)]
pub(crate) use tests::rec as test_record;
