//! Tanh-squashed Gaussian policy `a = tanh(mu(s) + sigma(s) * eps)`.

use std::f64::consts::PI;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::action::{ActionSpace, ActionVector, ACTION_LIMIT};
use crate::embedding::Embedding;
use crate::nn::checkpoint::{CheckpointHeader, MlpRecord};
use crate::nn::{Activation, DenseLayer, Mlp, MlpGrads};
use crate::rng::Rng;
use crate::{Error, Result};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub const SIGMA_FLOOR: f64 = 1e-3;
/// Stabiliser inside the tanh change-of-variables term.
pub const TANH_EPS: f64 = 1e-6;
pub const CHECKPOINT_KIND: &str = "editor-policy";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyShape {
    pub hidden: usize,
    /// Initial bias of the log-std head.
    pub init_log_std: f64,
}

impl Default for PolicyShape {
    fn default() -> Self {
        Self {
            hidden: 128,
            init_log_std: -0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    space: ActionSpace,
    trunk: Mlp,
    mean_head: Mlp,
    log_std_head: Mlp,
}

/// Distribution parameters at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    /// Unclamped log-std head output.
    pub raw_log_std: Vec<f64>,
    pub log_std: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledAction {
    pub action: ActionVector,
    /// `mu + sigma * eps` before squashing.
    pub pre_tanh: Vec<f64>,
    pub log_density: f64,
}

#[derive(Debug, Clone)]
pub struct PolicyGrads {
    pub trunk: MlpGrads,
    pub mean_head: MlpGrads,
    pub log_std_head: MlpGrads,
}

impl PolicyGrads {
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut v = self.trunk.blocks();
        v.extend(self.mean_head.blocks());
        v.extend(self.log_std_head.blocks());
        v
    }

    pub fn scale(&mut self, s: f64) {
        self.trunk.scale(s);
        self.mean_head.scale(s);
        self.log_std_head.scale(s);
    }
}

impl PolicyNetwork {
    pub fn new(dim: usize, space: ActionSpace, shape: PolicyShape, rng: &mut Rng) -> Result<Self> {
        let k = space.len();
        let trunk = Mlp::glorot(&[dim, shape.hidden], &[Activation::Relu], rng)?;
        let mean_head = Mlp::glorot(&[shape.hidden, k], &[Activation::Identity], rng)?;
        let ls = DenseLayer::from_parts(
            shape.hidden,
            k,
            Activation::Identity,
            vec![0.0; shape.hidden * k],
            vec![shape.init_log_std; k],
        )?;
        Self::from_parts(space, trunk, mean_head, Mlp::new(vec![ls])?)
    }

    pub fn from_parts(space: ActionSpace, trunk: Mlp, mean_head: Mlp, log_std_head: Mlp) -> Result<Self> {
        for (name, head) in [("mean head", &mean_head), ("log-std head", &log_std_head)] {
            if head.in_dim() != trunk.out_dim() {
                return Err(Error::shape(format!("{name} input"), trunk.out_dim(), head.in_dim()));
            }
            if head.out_dim() != space.len() {
                return Err(Error::shape(format!("{name} output"), space.len(), head.out_dim()));
            }
        }
        Ok(Self {
            space,
            trunk,
            mean_head,
            log_std_head,
        })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn state_dim(&self) -> usize {
        self.trunk.in_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.space.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut v = self.trunk.block_sizes();
        v.extend(self.mean_head.block_sizes());
        v.extend(self.log_std_head.block_sizes());
        v
    }

    pub fn block_names(&self) -> Vec<String> {
        let mut v = self.trunk.block_names("trunk.");
        v.extend(self.mean_head.block_names("mean."));
        v.extend(self.log_std_head.block_names("log_std."));
        v
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.trunk.blocks_mut();
        v.extend(self.mean_head.blocks_mut());
        v.extend(self.log_std_head.blocks_mut());
        v
    }

    pub fn zero_grads(&self) -> PolicyGrads {
        PolicyGrads {
            trunk: MlpGrads::zeros_like(&self.trunk),
            mean_head: MlpGrads::zeros_like(&self.mean_head),
            log_std_head: MlpGrads::zeros_like(&self.log_std_head),
        }
    }

    pub fn distribution(&self, state: &Embedding) -> Result<PolicyOutput> {
        let h = self.trunk.predict(state.values())?;
        let mean = self.mean_head.predict(&h)?;
        let raw_log_std = self.log_std_head.predict(&h)?;
        let out = Self::finish(mean, raw_log_std);
        if out.mean.iter().chain(&out.sigma).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("policy produced a non-finite mean or sigma".into()));
        }
        Ok(out)
    }

    fn finish(mean: Vec<f64>, raw_log_std: Vec<f64>) -> PolicyOutput {
        let log_std: Vec<f64> = raw_log_std.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect();
        let sigma = log_std.iter().map(|v| v.exp().max(SIGMA_FLOOR)).collect();
        PolicyOutput {
            mean,
            raw_log_std,
            log_std,
            sigma,
        }
    }

    /// Action for a given noise vector.
    pub fn action_with_noise(&self, state: &Embedding, eps: &[f64]) -> Result<SampledAction> {
        if eps.len() != self.action_dim() {
            return Err(Error::shape("noise vector", self.action_dim(), eps.len()));
        }
        let out = self.distribution(state)?;
        let pre_tanh: Vec<f64> = out.mean.iter().zip(&out.sigma).zip(eps).map(|((m, s), e)| m + s * e).collect();
        let action = ActionVector::clamped(pre_tanh.iter().map(|u| u.tanh()).collect())?;
        let log_density = log_density(&out, &pre_tanh, &action);
        if !log_density.is_finite() {
            return Err(Error::Numeric("non-finite action log-density".into()));
        }
        Ok(SampledAction {
            action,
            pre_tanh,
            log_density,
        })
    }

    pub fn sample_action(&self, state: &Embedding, rng: &mut Rng) -> Result<SampledAction> {
        let eps: Vec<f64> = (0..self.action_dim()).map(|_| StandardNormal.sample(rng)).collect();
        self.action_with_noise(state, &eps)
    }

    /// `tanh(mu(s))`, used for deterministic evaluation.
    pub fn mean_action(&self, state: &Embedding) -> Result<ActionVector> {
        let out = self.distribution(state)?;
        ActionVector::clamped(out.mean.iter().map(|m| m.tanh()).collect())
    }

    /// Adds `weight * grad_theta log pi(a | s)` for the action with the given
    /// pre-tanh value. The squashing correction does not depend on the
    /// parameters, so only the Gaussian part contributes.
    pub fn accumulate_log_prob_grad(
        &self,
        state: &Embedding,
        pre_tanh: &[f64],
        weight: f64,
        grads: &mut PolicyGrads,
    ) -> Result<()> {
        if pre_tanh.len() != self.action_dim() {
            return Err(Error::shape("pre-tanh action", self.action_dim(), pre_tanh.len()));
        }
        let (h, trunk_tape) = self.trunk.forward(state.values())?;
        let (mean, mean_tape) = self.mean_head.forward(&h)?;
        let (raw, ls_tape) = self.log_std_head.forward(&h)?;
        let out = Self::finish(mean, raw);
        let mut d_mean = Vec::with_capacity(pre_tanh.len());
        let mut d_ls = Vec::with_capacity(pre_tanh.len());
        for k in 0..pre_tanh.len() {
            let z = (pre_tanh[k] - out.mean[k]) / out.sigma[k];
            d_mean.push(weight * z / out.sigma[k]);
            let active = out.raw_log_std[k] > LOG_STD_MIN
                && out.raw_log_std[k] < LOG_STD_MAX
                && out.log_std[k].exp() > SIGMA_FLOOR;
            d_ls.push(if active { weight * (z * z - 1.0) } else { 0.0 });
        }
        let mut dh = self.mean_head.backward_accumulate(&mean_tape, &d_mean, &mut grads.mean_head)?;
        let dh2 = self.log_std_head.backward_accumulate(&ls_tape, &d_ls, &mut grads.log_std_head)?;
        dh.iter_mut().zip(&dh2).for_each(|(a, b)| *a += b);
        self.trunk.backward_accumulate(&trunk_tape, &dh, &mut grads.trunk)?;
        Ok(())
    }

    pub fn save(&self, path: &Path, header: &CheckpointHeader) -> Result<()> {
        let file = PolicyFile {
            header: header.clone(),
            action_space: self.space.clone(),
            trunk: (&self.trunk).into(),
            mean_head: (&self.mean_head).into(),
            log_std_head: (&self.log_std_head).into(),
        };
        crate::io::write_json(path, &file)
    }

    pub fn load(path: &Path, expected_dim: Option<usize>) -> Result<(Self, CheckpointHeader)> {
        let file: PolicyFile = crate::io::read_json(path)?;
        file.header.check(CHECKPOINT_KIND, expected_dim)?;
        let p = Self::from_parts(
            file.action_space,
            file.trunk.try_into()?,
            file.mean_head.try_into()?,
            file.log_std_head.try_into()?,
        )?;
        if p.state_dim() != file.header.embedding_dim {
            return Err(Error::Checkpoint("header dim disagrees with policy input".into()));
        }
        Ok((p, file.header))
    }
}

/// Gaussian log-density of `pre_tanh` minus the tanh change-of-variables term.
pub fn log_density(out: &PolicyOutput, pre_tanh: &[f64], action: &ActionVector) -> f64 {
    let mut lp = 0.0;
    for k in 0..pre_tanh.len() {
        let z = (pre_tanh[k] - out.mean[k]) / out.sigma[k];
        lp += -0.5 * z * z - out.sigma[k].ln() - 0.5 * (2.0 * PI).ln();
        let a = action.values()[k].clamp(-ACTION_LIMIT, ACTION_LIMIT);
        lp -= (1.0 - a * a + TANH_EPS).ln();
    }
    lp
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    header: CheckpointHeader,
    action_space: ActionSpace,
    trunk: MlpRecord,
    mean_head: MlpRecord,
    log_std_head: MlpRecord,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    /// One-unit policy whose head outputs are set directly through biases.
    pub(crate) fn fixed_policy(mean: f64, log_std: f64) -> PolicyNetwork {
        let space = ActionSpace {
            modality: super::super::Modality::Text,
            dims: vec![super::super::ActionDim {
                name: "x".into(),
                description: "x".into(),
            }],
        };
        let l = |b: f64| Mlp::new(vec![DenseLayer::from_parts(1, 1, Activation::Identity, vec![0.0], vec![b]).unwrap()]).unwrap();
        PolicyNetwork::from_parts(space, l(0.0), l(mean), l(log_std)).unwrap()
    }

    /// Policy that ignores its state: every dimension has the given mean and log-std.
    pub(crate) fn constant_policy(state_dim: usize, space: ActionSpace, mean: f64, log_std: f64) -> PolicyNetwork {
        let k = space.len();
        let trunk = Mlp::new(vec![DenseLayer::from_parts(state_dim, 1, Activation::Identity, vec![0.0; state_dim], vec![0.0]).unwrap()]).unwrap();
        let head = |b: f64| Mlp::new(vec![DenseLayer::from_parts(1, k, Activation::Identity, vec![0.0; k], vec![b; k]).unwrap()]).unwrap();
        PolicyNetwork::from_parts(space, trunk, head(mean), head(log_std)).unwrap()
    }

    fn s1() -> Embedding {
        Embedding::new(vec![1.0]).unwrap()
    }

    #[test]
    fn zero_noise_at_zero_mean_gives_zero_action() {
        let p = fixed_policy(0.0, LOG_STD_MIN);
        assert_eq!(p.action_with_noise(&s1(), &[0.0]).unwrap().action.values(), &[0.0]);
    }

    #[test]
    fn large_mean_saturates() {
        let p = fixed_policy(10.0, LOG_STD_MIN);
        let a = p.action_with_noise(&s1(), &[0.0]).unwrap().action.values()[0];
        assert!(a > 0.99999 && a < 1.0);
    }

    #[test]
    fn hand_evaluated_action_and_density() {
        let p = fixed_policy(0.5, 0.5f64.ln());
        let s = p.action_with_noise(&s1(), &[1.0]).unwrap();
        assert!((s.action.values()[0] - 1.0f64.tanh()).abs() < 1e-15);
        assert!((s.action.values()[0] - 0.7615941559557649).abs() < 1e-15);
        let a = 1.0f64.tanh();
        let expect = -0.5 - 0.5f64.ln() - 0.5 * (2.0 * PI).ln() - (1.0 - a * a + TANH_EPS).ln();
        assert!((s.log_density - expect).abs() < 1e-12);
    }

    #[test]
    fn sampled_actions_stay_inside_and_have_finite_density() {
        let mut r = rng::seeded(1);
        let p = PolicyNetwork::new(4, ActionSpace::text(), PolicyShape::default(), &mut r).unwrap();
        let s = Embedding::new(vec![0.5, -0.5, 0.5, -0.5]).unwrap();
        for _ in 0..200 {
            let a = p.sample_action(&s, &mut r).unwrap();
            assert!(a.action.values().iter().all(|v| v.abs() < 1.0));
            assert!(a.log_density.is_finite());
        }
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let mut r = rng::seeded(3);
        let p = PolicyNetwork::new(3, ActionSpace::text(), PolicyShape { hidden: 5, init_log_std: -0.3 }, &mut r).unwrap();
        let s = Embedding::new(vec![0.3, -0.8, 0.6]).unwrap();
        let sample = p.sample_action(&s, &mut r).unwrap();
        let mut g = p.zero_grads();
        p.accumulate_log_prob_grad(&s, &sample.pre_tanh, 1.0, &mut g).unwrap();
        let analytic: Vec<f64> = g.blocks().iter().flat_map(|b| b.to_vec()).collect();

        let gauss = |q: &PolicyNetwork| {
            let out = q.distribution(&s).unwrap();
            log_density(&out, &sample.pre_tanh, &sample.action)
        };
        let h = 1e-6;
        let mut idx = 0;
        let n_blocks = p.block_sizes().len();
        for b in 0..n_blocks {
            for k in 0..p.block_sizes()[b] {
                let mut plus = p.clone();
                plus.blocks_mut()[b][k] += h;
                let mut minus = p.clone();
                minus.blocks_mut()[b][k] -= h;
                let fd = (gauss(&plus) - gauss(&minus)) / (2.0 * h);
                let a = analytic[idx];
                assert!((fd - a).abs() <= 1e-5 * (1.0 + a.abs()), "block {b} idx {k}: {a} vs {fd}");
                idx += 1;
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.json");
        let p = PolicyNetwork::new(4, ActionSpace::image(), PolicyShape::default(), &mut rng::seeded(2)).unwrap();
        p.save(&path, &CheckpointHeader::new(CHECKPOINT_KIND, 2, 4, "h")).unwrap();
        let (q, _) = PolicyNetwork::load(&path, Some(4)).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.space().len(), 8);
    }

    #[test]
    fn sample_histogram_matches_density() {
        let p = fixed_policy(0.3, 0.6f64.ln());
        let s = s1();
        let out = p.distribution(&s).unwrap();
        let n = 100_000;
        let bins = 20;
        let mut counts = vec![0usize; bins];
        let mut r = rng::seeded(17);
        for _ in 0..n {
            let a = p.sample_action(&s, &mut r).unwrap().action.values()[0];
            counts[(((a + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let width = 2.0 / bins as f64;
        let sub = 2000;
        for (b, &c) in counts.iter().enumerate() {
            let lo = -1.0 + b as f64 * width;
            let mass: f64 = (0..sub)
                .map(|i| {
                    let a = lo + (i as f64 + 0.5) * width / sub as f64;
                    let av = ActionVector::new(vec![a]).unwrap();
                    log_density(&out, &[a.atanh()], &av).exp()
                })
                .sum::<f64>()
                * width
                / sub as f64;
            let expected = n as f64 * mass;
            let tol = 3.0 * (n as f64 * mass * (1.0 - mass)).sqrt() + 1.0;
            assert!((c as f64 - expected).abs() <= tol, "bin {b}: {c} vs {expected:.1}");
        }
    }
}

#[cfg(test)]
pub(crate) use tests::{constant_policy, fixed_policy};
