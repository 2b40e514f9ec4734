use alloc::vec::Vec;

use super::math;
use crate::error::{invalid, Result};

/// Probabilities below this are clamped before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-30;

/// A value computed with [`PROB_FLOOR`] clamping; `floored` records whether
/// the clamp was hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floored {
    pub value: f64,
    pub floored: bool,
}

fn check_logits(logits: &[f64], temperature: f64) -> Result<()> {
    if logits.is_empty() {
        return Err(invalid("softmax of an empty vector"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(invalid("temperature must be a positive finite number"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite logit"));
    }
    Ok(())
}

/// `softmax(logits / temperature)` with max subtraction.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_logits(logits, temperature)?;
    Ok(softmax_unchecked(logits, temperature))
}

pub(crate) fn softmax_unchecked(logits: &[f64], temperature: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .map(|&l| math::exp((l - max) / temperature))
        .collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// `log softmax(logits / temperature)`.
pub fn log_softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_logits(logits, temperature)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits
        .iter()
        .map(|&l| math::exp((l - max) / temperature))
        .sum();
    let log_z = math::ln(total);
    Ok(logits
        .iter()
        .map(|&l| (l - max) / temperature - log_z)
        .collect())
}

/// `-ln dist[target]`, clamping the probability at [`PROB_FLOOR`].
pub fn cross_entropy(dist: &[f64], target: usize) -> Result<Floored> {
    if target >= dist.len() {
        return Err(invalid(alloc::format!(
            "target {target} out of range for a distribution of length {}",
            dist.len()
        )));
    }
    validate_distribution(dist)?;
    let p = dist[target];
    let floored = p < PROB_FLOOR;
    let value = -math::ln(p.max(PROB_FLOOR));
    Ok(Floored {
        value: if value == 0.0 { 0.0 } else { value },
        floored,
    })
}

/// Finite, non-negative, sums to one within `1e-9`.
pub(crate) fn validate_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(invalid("empty distribution"));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("distribution has negative or non-finite entries"));
    }
    let total: f64 = p.iter().sum();
    if math::abs(total - 1.0) > 1e-9 {
        return Err(invalid(alloc::format!("distribution sums to {total}")));
    }
    Ok(())
}
