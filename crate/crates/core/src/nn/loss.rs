//! Binary cross-entropy.

use super::activation::sigmoid;
use crate::{Error, Result};

/// Probabilities are clamped into `[P_EPS, 1 - P_EPS]` before taking logs.
pub const P_EPS: f64 = 1e-7;

/// Mean BCE over probabilities, with `dL/dp` per element.
pub fn bce_loss(p: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_labels(p.len(), y)?;
    let m = p.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (&pi, &yi) in p.iter().zip(y) {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::Numeric(format!("probability {pi} outside [0, 1]")));
        }
        let q = pi.clamp(P_EPS, 1.0 - P_EPS);
        loss -= yi * q.ln() + (1.0 - yi) * (1.0 - q).ln();
        grad.push((q - yi) / (q * (1.0 - q)) / m);
    }
    Ok((loss / m, grad))
}

/// Mean BCE evaluated from logits in log-sum-exp form, with `dL/dz`.
pub fn bce_with_logits(z: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_labels(z.len(), y)?;
    let m = z.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(z.len());
    for (&zi, &yi) in z.iter().zip(y) {
        if !zi.is_finite() {
            return Err(Error::Numeric(format!("non-finite logit {zi}")));
        }
        loss += zi.max(0.0) - zi * yi + (-zi.abs()).exp().ln_1p();
        grad.push((sigmoid(zi) - yi) / m);
    }
    Ok((loss / m, grad))
}

fn check_labels(n: usize, y: &[f64]) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if y.len() != n {
        return Err(Error::shape("labels", n, y.len()));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!("label {bad} is not binary")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_is_near_zero() {
        let (l, _) = bce_loss(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!(l < 1e-6);
    }

    #[test]
    fn uninformative_predictor_costs_ln2() {
        let (l, _) = bce_loss(&[0.5; 4], &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn hand_value() {
        let (l, _) = bce_loss(&[0.9, 0.2], &[1.0, 0.0]).unwrap();
        let expect = -(0.9f64.ln() + 0.8f64.ln()) / 2.0;
        assert!((l - expect).abs() < 1e-15);
        assert!((l - 0.164_252_033_486_018).abs() < 1e-12);
    }

    #[test]
    fn probability_gradient_matches_finite_difference() {
        let p = [0.3, 0.8, 0.55];
        let y = [1.0, 0.0, 1.0];
        let (_, g) = bce_loss(&p, &y).unwrap();
        for k in 0..3 {
            let h = 1e-6;
            let mut hi = p;
            let mut lo = p;
            hi[k] += h;
            lo[k] -= h;
            let fd = (bce_loss(&hi, &y).unwrap().0 - bce_loss(&lo, &y).unwrap().0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn logits_agree_with_probabilities() {
        let z = [-2.0, 0.3, 4.0];
        let y = [0.0, 1.0, 1.0];
        let p: Vec<f64> = z.iter().map(|&v| sigmoid(v)).collect();
        let (a, _) = bce_with_logits(&z, &y).unwrap();
        let (b, _) = bce_loss(&p, &y).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn logit_form_is_finite_over_wide_range() {
        for i in 0..=100 {
            let z = -50.0 + i as f64;
            for y in [0.0, 1.0] {
                let (l, g) = bce_with_logits(&[z], &[y]).unwrap();
                assert!(l.is_finite() && g[0].is_finite());
            }
        }
    }

    #[test]
    fn rejects_out_of_range_probability() {
        assert!(matches!(bce_loss(&[1.5], &[1.0]), Err(Error::Numeric(_))));
        assert!(matches!(bce_loss(&[f64::NAN], &[1.0]), Err(Error::Numeric(_))));
    }
}
