//! User- and message-disjoint train/test split.
//!
//! Records are grouped into connected components of the "shares a user"
//! relation. Components are shuffled under the seed and greedily packed into
//! the test side until it reaches its target size. When that is impossible
//! (one giant component), records are assigned individually and any record
//! touching users from both sides is dropped.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::InteractionRecord;
use crate::{rng, Error, Result};

/// One record for each side of the split.
pub const MIN_RECORDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub test: u32,
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self { train: 4, test: 1 }
    }
}

impl std::str::FromStr for SplitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("split ratio must look like 4:1, got {s:?}"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        let train: u32 = a.trim().parse().map_err(|_| bad())?;
        let test: u32 = b.trim().parse().map_err(|_| bad())?;
        if train == 0 || test == 0 {
            return Err(bad());
        }
        Ok(Self { train, test })
    }
}

impl std::fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.train, self.test)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub train: Vec<InteractionRecord>,
    pub test: Vec<InteractionRecord>,
    /// Records discarded to keep the user sets disjoint.
    pub dropped: Vec<String>,
    pub components: usize,
    pub strategy: &'static str,
}

fn members(r: &InteractionRecord) -> impl Iterator<Item = &str> {
    std::iter::once(r.origin_user.as_str()).chain(r.interactors.iter().map(String::as_str))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn components(records: &[InteractionRecord]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind((0..records.len()).collect());
    let mut owner: HashMap<&str, usize> = HashMap::new();
    for (k, r) in records.iter().enumerate() {
        for u in members(r) {
            match owner.get(u) {
                Some(&o) => uf.union(o, k),
                None => {
                    owner.insert(u, k);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index_of: HashMap<usize, usize> = HashMap::new();
    for k in 0..records.len() {
        let root = uf.find(k);
        let g = *index_of.entry(root).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(k);
    }
    groups
}

pub fn split(records: &[InteractionRecord], ratio: SplitRatio, seed: u64) -> Result<SplitOutcome> {
    if records.len() < MIN_RECORDS {
        return Err(Error::Split(format!(
            "need at least {MIN_RECORDS} records, got {}",
            records.len()
        )));
    }
    let n = records.len();
    let target =
        ((n as f64) * ratio.test as f64 / (ratio.train + ratio.test) as f64).round().max(1.0) as usize;
    let mut r = rng::stream(seed, "split");

    let mut comps = components(records);
    let n_comps = comps.len();
    comps.shuffle(&mut r);
    let mut is_test = vec![false; n];
    let mut filled = 0;
    for c in &comps {
        if filled + c.len() <= target {
            c.iter().for_each(|&k| is_test[k] = true);
            filled += c.len();
        }
    }
    if filled > 0 && filled < n {
        return Ok(assemble(records, &is_test, Vec::new(), n_comps, "component"));
    }

    // Record-level fallback.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut is_test = vec![false; n];
    order[..target.min(n - 1)].iter().for_each(|&k| is_test[k] = true);
    let test_users: BTreeSet<&str> = (0..n)
        .filter(|&k| is_test[k])
        .flat_map(|k| members(&records[k]))
        .collect();
    let mut keep = vec![true; n];
    let mut dropped = Vec::new();
    for k in 0..n {
        if !is_test[k] && members(&records[k]).any(|u| test_users.contains(u)) {
            keep[k] = false;
            dropped.push(records[k].content_id.clone());
        }
    }
    let train_n = (0..n).filter(|&k| keep[k] && !is_test[k]).count();
    if train_n == 0 {
        let shared: Vec<&str> = test_users.iter().take(10).copied().collect();
        return Err(Error::Split(format!(
            "every training candidate shares users with the test side ({} records, {} components; shared users include {})",
            n,
            n_comps,
            shared.join(", ")
        )));
    }
    let kept: Vec<InteractionRecord> = records
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(r, _)| r.clone())
        .collect();
    let kept_test: Vec<bool> = (0..n).filter(|&k| keep[k]).map(|k| is_test[k]).collect();
    Ok(assemble(&kept, &kept_test, dropped, n_comps, "record"))
}

fn assemble(
    records: &[InteractionRecord],
    is_test: &[bool],
    dropped: Vec<String>,
    components: usize,
    strategy: &'static str,
) -> SplitOutcome {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, &t) in records.iter().zip(is_test) {
        if t {
            test.push(r.clone());
        } else {
            train.push(r.clone());
        }
    }
    SplitOutcome {
        train,
        test,
        dropped,
        components,
        strategy,
    }
}
