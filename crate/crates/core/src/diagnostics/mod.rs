//! Checks that a trained model behaves as a constrained sampler should:
//! divergences between constrained and unconstrained step distributions,
//! sequence log-probabilities, enforcement rates, the log-log
//! proportionality regression and an exact enumeration oracle.

mod divergence;
mod oracle;
mod synthetic;

pub use divergence::{divergence, DivergenceKind};
pub use oracle::{oracle_constrained_distribution, OracleResult, ORACLE_LIMIT};
pub use synthetic::MarkovChain;

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::model::Checkpoint;
use crate::numerics::{math, Floored};
use crate::sampler::{generate_with_rng, step_distributions, ConstraintSet, EnforceMode};

/// `sqrt(D(p_unconstrained(.|s_<t) || p_constrained(.|s_<t)))` for each step
/// of the realized sequence `seq`, both sides teacher-forced on `seq`.
pub fn divergence_trace(
    checkpoint: &Checkpoint,
    cs: &ConstraintSet,
    seq: &[usize],
    kind: DivergenceKind,
) -> Result<Vec<f64>> {
    let constrained = step_distributions(checkpoint, cs, seq)?;
    let unconstrained = step_distributions(checkpoint, &ConstraintSet::empty(cs.length()), seq)?;
    unconstrained
        .iter()
        .zip(&constrained)
        .map(|(u, c)| Ok(math::sqrt(divergence(kind, &u.probs, &c.probs)?.value)))
        .collect()
}

/// `sum_t ln p(s_t | s_<t)` under `cs`; an empty set gives the
/// unconstrained log-probability.
pub fn sequence_log_prob(checkpoint: &Checkpoint, cs: &ConstraintSet, seq: &[usize]) -> Result<Floored> {
    let dists = step_distributions(checkpoint, cs, seq)?;
    let mut value = 0.0;
    let mut floored = false;
    for (d, &s) in dists.iter().zip(seq) {
        let lp = d.log_prob(s);
        value += lp.value;
        floored |= lp.floored;
    }
    Ok(Floored { value, floored })
}

/// Fraction of `samples` generations that satisfy every constraint.
pub fn enforcement_rate(
    checkpoint: &Checkpoint,
    cs: &ConstraintSet,
    samples: usize,
    seed: u64,
    mode: EnforceMode,
) -> Result<f64> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0usize;
    for _ in 0..samples {
        let rec = generate_with_rng(checkpoint, cs, 1.0, mode, &mut rng)?;
        if cs.is_satisfied_by(&rec.sequence) {
            ok += 1;
        }
    }
    Ok(ok as f64 / samples as f64)
}

/// Log-probabilities of constrained samples under both models, with the
/// least-squares line `log p_con = slope * log p_unc + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    /// `(log p_unconstrained(s), log p_constrained(s))`.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
}

impl RatioReport {
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        let (slope, intercept) = least_squares(&points)?;
        Ok(Self {
            points,
            slope,
            intercept,
        })
    }

    pub fn samples(&self) -> usize {
        self.points.len()
    }
}

fn least_squares(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(invalid("regression needs at least two points"));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("all samples have the same unconstrained log-probability"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Samples `samples` sequences from the constrained model (learned mode,
/// temperature 1) and regresses their constrained log-probability on the
/// unconstrained one.
pub fn ratio_report(checkpoint: &Checkpoint, cs: &ConstraintSet, samples: usize, seed: u64) -> Result<RatioReport> {
    if samples < 2 {
        return Err(invalid("need at least two samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let free = ConstraintSet::empty(cs.length());
    let mut points = Vec::with_capacity(samples);
    for _ in 0..samples {
        let rec = generate_with_rng(checkpoint, cs, 1.0, EnforceMode::Learned, &mut rng)?;
        let con: f64 = rec
            .distributions
            .iter()
            .zip(&rec.sequence)
            .map(|(d, &s)| d.log_prob(s).value)
            .sum();
        let unc = sequence_log_prob(checkpoint, &free, &rec.sequence)?.value;
        points.push((unc, con));
    }
    RatioReport::from_points(points)
}
