//! Binary focal loss on logits: `-alpha * (1 - p_t)^gamma * ln(p_t)`, averaged
//! over valid pixels.
//!
//! `p_t` is `sigmoid(z)` for flood pixels and `1 - sigmoid(z)` otherwise;
//! `alpha` weights every pixel equally.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams<T> {
    pub gamma: T,
    pub alpha: T,
}

impl<T: Scalar> Default for FocalParams<T> {
    fn default() -> Self {
        Self {
            gamma: T::lit(2.0),
            alpha: T::lit(0.25),
        }
    }
}

/// `ln(sigmoid(s))` without overflow.
#[inline]
fn log_sigmoid<T: Scalar>(s: T) -> T {
    if s >= T::zero() {
        -(-s).exp().ln_1p()
    } else {
        s - s.exp().ln_1p()
    }
}

#[inline]
fn sigmoid<T: Scalar>(s: T) -> T {
    if s >= T::zero() {
        T::one() / (T::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (T::one() + e)
    }
}

/// Per-pixel loss and its derivative with respect to the logit.
#[inline]
fn pixel<T: Scalar>(z: T, target: bool, p: FocalParams<T>) -> (T, T) {
    // signed logit: p_t = sigmoid(s)
    let s = if target { z } else { -z };
    let log_pt = log_sigmoid(s);
    let pt = sigmoid(s);
    let q = sigmoid(-s); // 1 - p_t, accurate when p_t is near 1
    let mod_factor = if p.gamma == T::zero() { T::one() } else { q.powf(p.gamma) };
    let loss = -p.alpha * mod_factor * log_pt;
    // dL/ds = alpha * q^gamma * (gamma * p_t * ln p_t - q)
    let d_s = p.alpha * mod_factor * (p.gamma * pt * log_pt - q);
    (loss, if target { d_s } else { -d_s })
}

fn check_shapes(logits: usize, targets: usize, valid: Option<&[bool]>) -> Result<()> {
    if logits != targets || valid.is_some_and(|v| v.len() != logits) {
        return Err(Error::Shape(format!(
            "logits ({logits}), targets ({targets}) and valid mask must have equal length"
        )));
    }
    Ok(())
}

pub fn focal_loss<T: Scalar>(logits: &[T], targets: &[bool], valid: Option<&[bool]>, params: FocalParams<T>) -> Result<T> {
    Ok(focal_loss_with_grad(logits, targets, valid, params)?.0)
}

/// Mean focal loss and its gradient with respect to each logit (zero at
/// invalid pixels).
pub fn focal_loss_with_grad<T: Scalar>(
    logits: &[T],
    targets: &[bool],
    valid: Option<&[bool]>,
    params: FocalParams<T>,
) -> Result<(T, Vec<T>)> {
    check_shapes(logits.len(), targets.len(), valid)?;
    let is_valid = |i: usize| valid.map_or(true, |v| v[i]);
    let n = (0..logits.len()).filter(|&i| is_valid(i)).count();
    if n == 0 {
        return Err(Error::UndefinedLoss);
    }
    let inv_n = T::one() / T::from_count(n);
    let mut total = T::zero();
    let mut grad = vec![T::zero(); logits.len()];
    for (i, (&z, &t)) in logits.iter().zip(targets).enumerate() {
        if !is_valid(i) {
            continue;
        }
        let (l, d) = pixel(z, t, params);
        total = total + l;
        grad[i] = d * inv_n;
    }
    Ok((total * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_zero_alpha_one_is_bce() {
        let logits = [-3.0f64, -0.2, 0.0, 0.7, 4.0, 12.0];
        let targets = [false, true, true, false, true, false];
        let p = FocalParams { gamma: 0.0, alpha: 1.0 };
        let fl = focal_loss(&logits, &targets, None, p).unwrap();
        let bce: f64 = logits
            .iter()
            .zip(&targets)
            .map(|(&z, &t)| {
                let prob = 1.0 / (1.0 + (-z as f64).exp());
                if t {
                    -prob.ln()
                } else {
                    -(1.0 - prob).ln()
                }
            })
            .sum::<f64>()
            / 6.0;
        assert!((fl - bce).abs() < 1e-9, "{fl} vs {bce}");
    }

    #[test]
    fn half_probability_point() {
        let p = FocalParams { gamma: 2.0, alpha: 1.0 };
        let fl = focal_loss(&[0.0f64], &[true], None, p).unwrap();
        assert!((fl - 0.25 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_goes_to_zero() {
        let p = FocalParams::default();
        let fl = focal_loss(&[40.0f64, -40.0], &[true, false], None, p).unwrap();
        assert!(fl >= 0.0 && fl < 1e-15);
    }

    #[test]
    fn extreme_logits_stay_finite() {
        let p = FocalParams::default();
        let (l, g) = focal_loss_with_grad(&[-1e4f64, 1e4], &[true, false], None, p).unwrap();
        assert!(l.is_finite() && g.iter().all(|v| v.is_finite()));
        let (l, _) = focal_loss_with_grad(&[-200.0f32, 200.0], &[true, false], None, FocalParams::default()).unwrap();
        assert!(l.is_finite());
    }

    #[test]
    fn invalid_pixels_are_ignored() {
        let p = FocalParams::default();
        let a = focal_loss(&[0.3f64, 100.0], &[true, false], Some(&[true, false]), p).unwrap();
        let b = focal_loss(&[0.3f64], &[true], None, p).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            focal_loss(&[0.3f64], &[true], Some(&[false]), p).unwrap_err(),
            Error::UndefinedLoss
        ));
        assert!(matches!(focal_loss(&[0.3f64], &[true, false], None, p).unwrap_err(), Error::Shape(_)));
    }
}
