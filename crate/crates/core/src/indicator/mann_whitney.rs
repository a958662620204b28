//! Two-sided Mann–Whitney U test.
//!
//! Small samples use the exact permutation distribution of the rank sum,
//! conditional on the observed ties. Larger samples use the normal
//! approximation with tie and continuity corrections.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::metrics::midranks;
use crate::{Error, Result};

/// Largest pooled sample size handled by the exact method.
pub const EXACT_MAX_TOTAL: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub method: PValueMethod,
}

fn pooled_ranks(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("Mann-Whitney needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Numeric("Mann-Whitney sample contains NaN".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    Ok(midranks(&pooled))
}

fn u_statistic(ranks: &[f64], n1: usize) -> f64 {
    ranks[..n1].iter().sum::<f64>() - (n1 * (n1 + 1)) as f64 / 2.0
}

/// Exact method when `a.len() + b.len() <= EXACT_MAX_TOTAL`, otherwise normal.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.len() + b.len() <= EXACT_MAX_TOTAL {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    let ranks = pooled_ranks(a, b)?;
    let n = ranks.len();
    if n > EXACT_MAX_TOTAL {
        return Err(Error::InvalidInput(format!(
            "exact Mann-Whitney supports at most {EXACT_MAX_TOTAL} observations, got {n}"
        )));
    }
    let n1 = a.len();
    // Doubled midranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r) as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[m][s]: subsets of size m with doubled rank sum s
    let mut counts = vec![vec![0u64; max_sum + 1]; n1 + 1];
    counts[0][0] = 1;
    for &r in &doubled {
        for m in (1..=n1).rev() {
            let (lo, hi) = counts.split_at_mut(m);
            let (prev, cur) = (&lo[m - 1], &mut hi[0]);
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let dist = &counts[n1];
    let total: u64 = dist.iter().sum();
    let observed: usize = doubled[..n1].iter().sum();
    let le: u64 = dist[..=observed].iter().sum();
    let ge: u64 = dist[observed..].iter().sum();
    let tail = le.min(ge) as f64 / total as f64;
    Ok(MannWhitney {
        u: u_statistic(&ranks, n1),
        p_value: (2.0 * tail).min(1.0),
        method: PValueMethod::Exact,
    })
}

pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    let ranks = pooled_ranks(a, b)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let u = u_statistic(&ranks, a.len());
    let mu = n1 * n2 / 2.0;

    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut k = 0;
    while k < sorted.len() {
        let mut end = k + 1;
        while end < sorted.len() && sorted[end] == sorted[k] {
            end += 1;
        }
        let t = (end - k) as f64;
        tie_term += t * t * t - t;
        k = end;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - mu).abs() - 0.5) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * std.sf(z)).min(1.0)
    };
    Ok(MannWhitney {
        u,
        p_value,
        method: PValueMethod::Normal,
    })
}
