use alloc::vec::Vec;

use rand::seq::index;
use rand::RngCore;

use super::math;
use super::{Matrix, ParameterStore};
use crate::error::{invalid, Error, Result};

/// Outcome of [`finite_difference_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
    pub max_relative_error: f64,
    pub checked: usize,
    /// The store had no parameters; the error is 0 by convention.
    pub vacuous: bool,
}

/// Compares analytic gradients to central differences on randomly chosen
/// scalar parameters.
///
/// `loss` must run a forward pass and accumulate gradients into the store it
/// is given (it is called with zeroed gradients first). It must be
/// deterministic: dropout off, fixed seeds. The store's values and gradients
/// are restored before returning.
pub fn finite_difference_check<F, R>(
    store: &mut ParameterStore,
    mut loss: F,
    epsilon: f64,
    samples: usize,
    rng: &mut R,
) -> Result<GradCheck>
where
    F: FnMut(&mut ParameterStore) -> Result<f64>,
    R: RngCore + ?Sized,
{
    if !(epsilon > 0.0) || samples == 0 {
        return Err(invalid("epsilon and sample count must be positive"));
    }
    let total = store.scalar_count();
    if total == 0 {
        return Ok(GradCheck {
            max_relative_error: 0.0,
            checked: 0,
            vacuous: true,
        });
    }

    store.zero_grad();
    let base = loss(store)?;
    let analytic: Vec<Matrix> = store.ids().map(|id| store.grad(id).clone()).collect();

    store.zero_grad();
    let again = loss(store)?;
    if again.to_bits() != base.to_bits() {
        return Err(Error::CheckInvalid(alloc::format!(
            "loss changed between identical evaluations ({base} vs {again})"
        )));
    }

    let picks = index::sample(rng, total, samples.min(total));
    let mut max_rel: f64 = 0.0;
    for flat in picks.iter() {
        let (id, k) = store.locate(flat);
        let original = store.value(id).data()[k];

        store.value_mut(id).data_mut()[k] = original + epsilon;
        let plus = loss(store)?;
        store.value_mut(id).data_mut()[k] = original - epsilon;
        let minus = loss(store)?;
        store.value_mut(id).data_mut()[k] = original;

        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[id.index()].data()[k];
        let rel = math::abs(a - numeric) / (math::abs(a) + math::abs(numeric)).max(1e-8);
        if !rel.is_finite() {
            return Err(Error::CheckInvalid("non-finite loss during perturbation".into()));
        }
        max_rel = max_rel.max(rel);
    }

    for (id, g) in store.ids().collect::<Vec<_>>().into_iter().zip(analytic) {
        *store.grad_mut(id) = g;
    }
    Ok(GradCheck {
        max_relative_error: max_rel,
        checked: picks.len(),
        vacuous: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tape;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_is_nearly_exact() {
        let mut store = ParameterStore::new();
        let id = store
            .insert("w", Matrix::from_vec(2, 3, vec![0.5, -1.0, 2.0, 0.1, 3.0, -0.7]).unwrap())
            .unwrap();
        let coeff = Matrix::from_vec(2, 3, vec![1.0, 2.0, 0.5, 4.0, 1.5, 3.0]).unwrap();
        let loss = |s: &mut ParameterStore| {
            let mut tape = Tape::new();
            let w = tape.param(s, id);
            let c = tape.constant(coeff.clone());
            let sq = tape.mul(w, w);
            let weighted = tape.mul(sq, c);
            let total = tape.sum(weighted);
            let l = tape.scale(total, 0.5);
            tape.backward(l, s)?;
            Ok(tape.value(l).as_scalar())
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let check = finite_difference_check(&mut store, loss, 1e-5, 6, &mut rng).unwrap();
        assert_eq!(check.checked, 6);
        assert!(check.max_relative_error < 1e-8, "{check:?}");
    }

    #[test]
    fn empty_store_is_vacuous() {
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let check = finite_difference_check(&mut store, |_| Ok(0.0), 1e-5, 10, &mut rng).unwrap();
        assert!(check.vacuous);
        assert_eq!(check.max_relative_error, 0.0);
    }

    #[test]
    fn nondeterministic_loss_is_rejected() {
        let mut store = ParameterStore::new();
        store.insert("w", Matrix::filled(1, 1, 1.0)).unwrap();
        let mut calls = 0.0;
        let loss = |_: &mut ParameterStore| {
            calls += 1.0;
            Ok(calls)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = finite_difference_check(&mut store, loss, 1e-5, 1, &mut rng).unwrap_err();
        assert!(matches!(err, Error::CheckInvalid(_)));
    }
}
