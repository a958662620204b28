use serde::{Deserialize, Serialize};

use super::PairwiseEstimator;
use crate::dataset::AudienceGroup;
use crate::embedding::Standardized;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Row mean over every `j` in the audience, `j = i` included.
    #[default]
    Literal,
    /// Row mean over `j != i`.
    ExcludeSelf,
}

impl ScoreMode {
    pub fn from_exclude_self(exclude: bool) -> Self {
        if exclude {
            ScoreMode::ExcludeSelf
        } else {
            ScoreMode::Literal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub content_id: String,
    pub group_id: String,
    pub score: f64,
    pub initiator: String,
    pub row_means: Vec<f64>,
}

/// Row means of `p`, the largest of them and its row. Ties go to the lowest
/// row index.
pub fn influence_from_matrix(p: &[Vec<f64>], mode: ScoreMode) -> Result<(f64, usize, Vec<f64>)> {
    let n = p.len();
    if n == 0 {
        return Err(Error::EmptyAudience);
    }
    if mode == ScoreMode::ExcludeSelf && n == 1 {
        return Err(Error::InvalidInput(
            "a single-member audience has no pairs once self pairs are excluded".into(),
        ));
    }
    let mut means = Vec::with_capacity(n);
    for (i, row) in p.iter().enumerate() {
        if row.len() != n {
            return Err(Error::shape("influence matrix row", n, row.len()));
        }
        let m = match mode {
            ScoreMode::Literal => row.iter().sum::<f64>() / n as f64,
            ScoreMode::ExcludeSelf => {
                row.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, v)| v)
                    .sum::<f64>()
                    / (n - 1) as f64
            }
        };
        means.push(m);
    }
    let mut best = 0;
    for (i, &m) in means.iter().enumerate().skip(1) {
        if m > means[best] {
            best = i;
        }
    }
    Ok((means[best], best, means))
}

/// `L_U(c) = max_i mean_j p_ij(c)` over the audience members, whose
/// standardized features are given in member order.
pub fn influence_score(
    est: &PairwiseEstimator,
    content_id: &str,
    f_c: &Standardized,
    audience: &AudienceGroup,
    members: &[Standardized],
    mode: ScoreMode,
) -> Result<InfluenceReport> {
    if audience.is_empty() {
        return Err(Error::EmptyAudience);
    }
    if members.len() != audience.len() {
        return Err(Error::shape("audience member features", audience.len(), members.len()));
    }
    let mut p = Vec::with_capacity(members.len());
    for fi in members {
        let row = members
            .iter()
            .map(|fj| est.predict_pair(fi, fj, f_c))
            .collect::<Result<Vec<_>>>()?;
        p.push(row);
    }
    let (score, best, row_means) = influence_from_matrix(&p, mode)?;
    Ok(InfluenceReport {
        content_id: content_id.to_owned(),
        group_id: audience.group_id.clone(),
        score,
        initiator: audience.members[best].clone(),
        row_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tie_goes_to_first_member() {
        let (l, i, means) = influence_from_matrix(&[vec![0.2, 0.8], vec![0.4, 0.6]], ScoreMode::Literal).unwrap();
        assert_eq!(means, vec![0.5, 0.5]);
        assert_eq!((l, i), (0.5, 0));
    }

    #[test]
    fn constant_matrix_scores_the_constant() {
        let p = vec![vec![0.3; 4]; 4];
        assert!((influence_from_matrix(&p, ScoreMode::Literal).unwrap().0 - 0.3).abs() < 1e-15);
        assert!((influence_from_matrix(&p, ScoreMode::ExcludeSelf).unwrap().0 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_member_boundary() {
        assert_eq!(influence_from_matrix(&[vec![0.7]], ScoreMode::Literal).unwrap().0, 0.7);
        assert!(influence_from_matrix(&[vec![0.7]], ScoreMode::ExcludeSelf).is_err());
        assert!(matches!(influence_from_matrix(&[], ScoreMode::Literal), Err(Error::EmptyAudience)));
    }

    #[test]
    fn exclude_self_drops_diagonal() {
        let (l, i, _) = influence_from_matrix(&[vec![0.9, 0.1], vec![0.3, 0.0]], ScoreMode::ExcludeSelf).unwrap();
        assert_eq!((l, i), (0.3, 1));
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..8).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(0.0f64..0.5, n), n))
    }

    proptest! {
        #[test]
        fn constant_shift_keeps_initiator(p in matrix(), shift in 0.0f64..0.5) {
            let (_, i, _) = influence_from_matrix(&p, ScoreMode::Literal).unwrap();
            let q: Vec<Vec<f64>> = p.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
            let (_, k, _) = influence_from_matrix(&q, ScoreMode::Literal).unwrap();
            // Shifting can only merge near-ties through rounding; compare exact means.
            let means: Vec<f64> = q.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
            prop_assert!(k == i || means[k] == means[i]);
        }

        #[test]
        fn member_order_does_not_change_score(p in matrix(), rot in 0usize..8) {
            let n = p.len();
            let perm: Vec<usize> = (0..n).map(|k| (k + rot) % n).collect();
            let q: Vec<Vec<f64>> = perm.iter().map(|&a| perm.iter().map(|&b| p[a][b]).collect()).collect();
            let (l1, _, _) = influence_from_matrix(&p, ScoreMode::Literal).unwrap();
            let (l2, _, _) = influence_from_matrix(&q, ScoreMode::Literal).unwrap();
            prop_assert!((l1 - l2).abs() < 1e-12);
        }
    }
}
