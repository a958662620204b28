use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mann_whitney::{mann_whitney_u, MannWhitney};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationStudy {
    pub observed: Vec<f64>,
    pub permuted: Vec<f64>,
    pub mean_observed: f64,
    pub mean_permuted: f64,
    /// `assignment[k]` is the audience paired with content `k` in the permuted set.
    pub assignment: Vec<usize>,
    pub test: MannWhitney,
}

/// Uniformly random permutation with no fixed points (rejection sampling).
pub fn derangement(n: usize, r: &mut Rng) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("a derangement needs at least 2 items, got {n}")));
    }
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(r);
        if p.iter().enumerate().all(|(i, &j)| i != j) {
            return Ok(p);
        }
    }
}

/// Scores each content against its observed audience and against a deranged
/// audience, then compares the two samples. `score(content, audience)`
/// returns the influence score of that pairing.
pub fn permutation_study<F>(n: usize, seed: u64, mut score: F) -> Result<PermutationStudy>
where
    F: FnMut(usize, usize) -> Result<f64>,
{
    let assignment = derangement(n, &mut rng::stream(seed, "permutation-study"))?;
    let observed = (0..n).map(|k| score(k, k)).collect::<Result<Vec<_>>>()?;
    let permuted = (0..n).map(|k| score(k, assignment[k])).collect::<Result<Vec<_>>>()?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let test = mann_whitney_u(&observed, &permuted)?;
    Ok(PermutationStudy {
        mean_observed: mean(&observed),
        mean_permuted: mean(&permuted),
        observed,
        permuted,
        assignment,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derangements_have_no_fixed_points() {
        let mut r = rng::seeded(4);
        for n in 2..20 {
            let p = derangement(n, &mut r).unwrap();
            let mut sorted = p.clone();
            sorted.sort();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            assert!(p.iter().enumerate().all(|(i, &j)| i != j));
        }
    }

    #[test]
    fn fewer_than_two_pairs_is_an_error() {
        assert!(permutation_study(1, 0, |_, _| Ok(0.5)).is_err());
    }

    #[test]
    fn matched_pairs_score_higher() {
        let s = permutation_study(40, 1, |c, a| Ok(if c == a { 0.8 } else { 0.3 } + c as f64 * 1e-3)).unwrap();
        assert!(s.mean_observed > s.mean_permuted);
        assert!(s.test.p_value < 1e-6);
    }

    #[test]
    fn unrelated_scores_are_not_significant() {
        let s = permutation_study(30, 2, |_, a| Ok(a as f64)).unwrap();
        assert!(s.test.p_value > 0.5);
    }
}
