use serde::{Deserialize, Serialize};

use super::ZonalStats;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// First quartiles of the rp100 and pwb populations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartileStats {
    pub rp100_q1: f64,
    pub pwb_q1: f64,
}

/// Quantile by linear interpolation between order statistics at position
/// `(n - 1) * q` of the sorted values.
pub fn quantile_linear<T: Scalar>(values: &[T], q: T) -> Result<T> {
    if values.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("quantile input must not contain NaN"));
    let pos = T::from_count(sorted.len() - 1) * q;
    let lo = pos.floor();
    let frac = pos - lo;
    let i = lo.to_usize().unwrap_or(0).min(sorted.len() - 1);
    if frac == T::zero() || i + 1 >= sorted.len() {
        return Ok(sorted[i]);
    }
    Ok(sorted[i] + frac * (sorted[i + 1] - sorted[i]))
}

pub fn compute_quartiles(stats: &[ZonalStats]) -> Result<QuartileStats> {
    let rp100: Vec<f64> = stats.iter().map(|s| s.rp100 as f64).collect();
    let pwb: Vec<f64> = stats.iter().map(|s| s.pwb as f64).collect();
    Ok(QuartileStats {
        rp100_q1: quantile_linear(&rp100, 0.25)?,
        pwb_q1: quantile_linear(&pwb, 0.25)?,
    })
}
