use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::numerics::ops::validate_distribution;
use crate::numerics::{math, Floored, PROB_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    /// `sum p_i ln(p_i / q_i)`.
    KullbackLeibler,
    /// `KL(q || p)`.
    ReversedKullbackLeibler,
    /// `KL(p || q) + KL(q || p)`.
    Jeffreys,
    /// `KL(p || m)/2 + KL(q || m)/2` with `m = (p + q)/2`.
    JensenShannon,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 4] = [
        DivergenceKind::KullbackLeibler,
        DivergenceKind::ReversedKullbackLeibler,
        DivergenceKind::Jeffreys,
        DivergenceKind::JensenShannon,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            DivergenceKind::KullbackLeibler => "kl",
            DivergenceKind::ReversedKullbackLeibler => "reversed-kl",
            DivergenceKind::Jeffreys => "jeffreys",
            DivergenceKind::JensenShannon => "js",
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DivergenceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| invalid(alloc::format!("unknown divergence `{s}`")))
    }
}

/// KL in nats with `0 ln(0/q) = 0`; `q_i = 0` under `p_i > 0` is floored.
fn kl(p: &[f64], q: &[f64]) -> Floored {
    let mut value = 0.0;
    let mut floored = false;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        let qi = if qi < PROB_FLOOR {
            floored = true;
            PROB_FLOOR
        } else {
            qi
        };
        value += pi * math::ln(pi / qi);
    }
    Floored {
        value: value.max(0.0),
        floored,
    }
}

pub fn divergence(kind: DivergenceKind, p: &[f64], q: &[f64]) -> Result<Floored> {
    if p.len() != q.len() {
        return Err(invalid("distributions differ in length"));
    }
    validate_distribution(p)?;
    validate_distribution(q)?;
    Ok(match kind {
        DivergenceKind::KullbackLeibler => kl(p, q),
        DivergenceKind::ReversedKullbackLeibler => kl(q, p),
        DivergenceKind::Jeffreys => {
            let (a, b) = (kl(p, q), kl(q, p));
            Floored {
                value: a.value + b.value,
                floored: a.floored || b.floored,
            }
        }
        DivergenceKind::JensenShannon => {
            let m: alloc::vec::Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
            Floored {
                value: 0.5 * kl(p, &m).value + 0.5 * kl(q, &m).value,
                floored: false,
            }
        }
    })
}
