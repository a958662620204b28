use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, Standardized, Standardizer};
use crate::nn::checkpoint::{CheckpointHeader, MlpRecord};
use crate::nn::{sigmoid, Activation, Mlp};
use crate::{rng::Rng, Error, Result};

pub const CHECKPOINT_KIND: &str = "pairwise-estimator";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimatorShape {
    pub m1_hidden: usize,
    pub latent: usize,
    pub m2_hidden: usize,
}

impl Default for EstimatorShape {
    fn default() -> Self {
        Self {
            m1_hidden: 256,
            latent: 128,
            m2_hidden: 128,
        }
    }
}

/// `p_ij(c) = sigmoid(M2(M1(f_i) ++ M1(f_j) ++ M1(f_c)))` with a shared `M1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseEstimator {
    m1: Mlp,
    m2: Mlp,
    standardizer: Standardizer,
}

impl PairwiseEstimator {
    pub fn new(shape: EstimatorShape, standardizer: Standardizer, rng: &mut Rng) -> Result<Self> {
        let d = standardizer.dim();
        let m1 = Mlp::glorot(
            &[d, shape.m1_hidden, shape.latent],
            &[Activation::Relu, Activation::Identity],
            rng,
        )?;
        let m2 = Mlp::glorot(
            &[3 * shape.latent, shape.m2_hidden, 1],
            &[Activation::Relu, Activation::Identity],
            rng,
        )?;
        Self::from_parts(m1, m2, standardizer)
    }

    pub fn from_parts(m1: Mlp, m2: Mlp, standardizer: Standardizer) -> Result<Self> {
        if m1.in_dim() != standardizer.dim() {
            return Err(Error::shape("M1 input vs standardizer", standardizer.dim(), m1.in_dim()));
        }
        if m2.in_dim() != 3 * m1.out_dim() {
            return Err(Error::shape("M2 input (3 x M1 output)", 3 * m1.out_dim(), m2.in_dim()));
        }
        if m2.out_dim() != 1 {
            return Err(Error::shape("M2 output", 1, m2.out_dim()));
        }
        if m2.layers().len() < 2 {
            return Err(Error::InvalidInput("M2 needs a hidden layer".into()));
        }
        Ok(Self { m1, m2, standardizer })
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.m1.out_dim()
    }

    pub fn m1(&self) -> &Mlp {
        &self.m1
    }

    pub fn m2(&self) -> &Mlp {
        &self.m2
    }

    pub(crate) fn nets_mut(&mut self) -> (&mut Mlp, &mut Mlp) {
        (&mut self.m1, &mut self.m2)
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn standardize(&self, e: &Embedding) -> Result<Standardized> {
        self.standardizer.apply(e)
    }

    pub fn project(&self, f: &Standardized) -> Result<Vec<f64>> {
        self.m1.predict(f.values())
    }

    pub fn logit_pair(&self, f_i: &Standardized, f_j: &Standardized, f_c: &Standardized) -> Result<f64> {
        let mut h = self.project(f_i)?;
        h.extend(self.project(f_j)?);
        h.extend(self.project(f_c)?);
        Ok(self.m2.predict(&h)?[0])
    }

    pub fn predict_pair(&self, f_i: &Standardized, f_j: &Standardized, f_c: &Standardized) -> Result<f64> {
        self.logit_pair(f_i, f_j, f_c).map(sigmoid)
    }

    pub fn save(&self, path: &Path, header: &CheckpointHeader) -> Result<()> {
        let file = EstimatorFile {
            header: header.clone(),
            m1: (&self.m1).into(),
            m2: (&self.m2).into(),
            standardizer: self.standardizer.clone(),
        };
        crate::io::write_json(path, &file)
    }

    pub fn load(path: &Path, expected_dim: Option<usize>) -> Result<(Self, CheckpointHeader)> {
        let file: EstimatorFile = crate::io::read_json(path)?;
        file.header.check(CHECKPOINT_KIND, expected_dim)?;
        let est = Self::from_parts(file.m1.try_into()?, file.m2.try_into()?, file.standardizer)?;
        if est.dim() != file.header.embedding_dim {
            return Err(Error::Checkpoint("header dim disagrees with M1 input".into()));
        }
        Ok((est, file.header))
    }
}

#[derive(Serialize, Deserialize)]
struct EstimatorFile {
    header: CheckpointHeader,
    m1: MlpRecord,
    m2: MlpRecord,
    standardizer: Standardizer,
}

/// Scores many (initiator, target) pairs for one audience against varying
/// contents. M2's first layer is split into three column blocks so member
/// projections are computed once per audience instead of once per pair.
#[derive(Debug, Clone)]
pub struct AudienceScorer {
    est: PairwiseEstimator,
    /// `W[:, 0..k] M1(f_i)` per member.
    src: Vec<Vec<f64>>,
    /// `W[:, k..2k] M1(f_j)` per member.
    dst: Vec<Vec<f64>>,
    mode: super::ScoreMode,
}

impl AudienceScorer {
    pub fn new(est: &PairwiseEstimator, members: &[Standardized], mode: super::ScoreMode) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyAudience);
        }
        let k = est.latent_dim();
        let first = &est.m2.layers()[0];
        let mut src = Vec::with_capacity(members.len());
        let mut dst = Vec::with_capacity(members.len());
        for m in members {
            let z = est.project(m)?;
            src.push(first.partial_preactivate(0, &z));
            dst.push(first.partial_preactivate(k, &z));
        }
        Ok(Self {
            est: est.clone(),
            src,
            dst,
            mode,
        })
    }

    pub fn estimator(&self) -> &PairwiseEstimator {
        &self.est
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    /// Full `p_ij` matrix for a content feature.
    pub fn matrix(&self, f_c: &Standardized) -> Result<Vec<Vec<f64>>> {
        let k = self.est.latent_dim();
        let first = &self.est.m2.layers()[0];
        let zc = self.est.project(f_c)?;
        let mut content: Vec<f64> = first.partial_preactivate(2 * k, &zc);
        content.iter_mut().zip(first.bias()).for_each(|(c, b)| *c += b);
        let mut z0 = vec![0.0; content.len()];
        let mut out = Vec::with_capacity(self.len());
        for s in &self.src {
            let mut row = Vec::with_capacity(self.len());
            for d in &self.dst {
                for (((z, a), b), c) in z0.iter_mut().zip(s).zip(d).zip(&content) {
                    *z = a + b + c;
                }
                row.push(sigmoid(self.est.m2.predict_from_first_preactivation(&z0)[0]));
            }
            out.push(row);
        }
        Ok(out)
    }

    pub fn mode(&self) -> super::ScoreMode {
        self.mode
    }

    pub fn score_standardized(&self, f_c: &Standardized) -> Result<f64> {
        Ok(super::influence_from_matrix(&self.matrix(f_c)?, self.mode)?.0)
    }

    pub fn score(&self, content: &Embedding) -> Result<f64> {
        self.score_standardized(&self.est.standardize(content)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::DenseLayer;
    use crate::rng;

    pub(crate) fn unit_standardizer(d: usize) -> Standardizer {
        Standardizer::from_parts(vec![0.0; d], vec![1.0; d]).unwrap()
    }

    pub(crate) fn small_estimator(d: usize, seed: u64) -> PairwiseEstimator {
        let shape = EstimatorShape {
            m1_hidden: 6,
            latent: 4,
            m2_hidden: 5,
        };
        PairwiseEstimator::new(shape, unit_standardizer(d), &mut rng::seeded(seed)).unwrap()
    }

    fn st(v: &[f64]) -> Standardized {
        Standardized::from_raw(v.to_vec())
    }

    #[test]
    fn zero_output_layer_gives_one_half() {
        let est = small_estimator(3, 1);
        let mut layers = est.m2().layers().to_vec();
        let last = layers.pop().unwrap();
        layers.push(DenseLayer::zeros(last.in_dim(), 1, Activation::Identity).unwrap());
        let est = PairwiseEstimator::from_parts(est.m1().clone(), Mlp::new(layers).unwrap(), unit_standardizer(3)).unwrap();
        let p = est.predict_pair(&st(&[1.0, 2.0, 3.0]), &st(&[-1.0, 0.0, 4.0]), &st(&[0.5, 0.5, 0.5])).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn pairs_are_directional() {
        let est = small_estimator(3, 7);
        let (a, b, c) = (st(&[1.0, -2.0, 0.3]), st(&[-0.5, 0.9, 1.4]), st(&[0.2, 0.2, -0.7]));
        assert_ne!(est.predict_pair(&a, &b, &c).unwrap(), est.predict_pair(&b, &a, &c).unwrap());
    }

    #[test]
    fn hand_set_single_unit_network() {
        // M1: x -> relu(1*x) -> 1*h ; M2: relu(h_i + 2 h_j - h_c) -> 0.5*z - 0.25
        let l = |i, o, w: Vec<f64>, b: Vec<f64>, a| DenseLayer::from_parts(i, o, a, w, b).unwrap();
        let m1 = Mlp::new(vec![
            l(1, 1, vec![1.0], vec![0.0], Activation::Relu),
            l(1, 1, vec![1.0], vec![0.0], Activation::Identity),
        ])
        .unwrap();
        let m2 = Mlp::new(vec![
            l(3, 1, vec![1.0, 2.0, -1.0], vec![0.0], Activation::Relu),
            l(1, 1, vec![0.5], vec![-0.25], Activation::Identity),
        ])
        .unwrap();
        let est = PairwiseEstimator::from_parts(m1, m2, unit_standardizer(1)).unwrap();
        // h = (0.5, 1.0, 0.0); z = 0.5 + 2.0 = 2.5; logit = 1.0
        let p = est.predict_pair(&st(&[0.5]), &st(&[1.0]), &st(&[-3.0])).unwrap();
        assert!((p - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn concatenation_contract_is_checked() {
        let mut r = rng::seeded(0);
        let m1 = Mlp::glorot(&[2, 3], &[Activation::Relu], &mut r).unwrap();
        let m2 = Mlp::glorot(&[8, 2, 1], &[Activation::Relu, Activation::Identity], &mut r).unwrap();
        assert!(PairwiseEstimator::from_parts(m1, m2, unit_standardizer(2)).is_err());
    }

    #[test]
    fn audience_scorer_matches_pairwise_predictions() {
        let est = small_estimator(4, 3);
        let mut r = rng::seeded(5);
        use rand::Rng as _;
        let mut v = || st(&(0..4).map(|_| r.random_range(-2.0..2.0)).collect::<Vec<_>>());
        let members: Vec<Standardized> = (0..6).map(|_| v()).collect();
        let c = v();
        let scorer = AudienceScorer::new(&est, &members, crate::indicator::ScoreMode::Literal).unwrap();
        let m = scorer.matrix(&c).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let p = est.predict_pair(&members[i], &members[j], &c).unwrap();
                assert!((m[i][j] - p).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("est.json");
        let est = small_estimator(3, 11);
        est.save(&path, &CheckpointHeader::new(CHECKPOINT_KIND, 11, 3, "abc")).unwrap();
        let (back, header) = PairwiseEstimator::load(&path, Some(3)).unwrap();
        assert_eq!(back, est);
        assert_eq!(header.config_hash, "abc");
        assert!(PairwiseEstimator::load(&path, Some(4)).is_err());
    }
}
