use num_complex::Complex64;

use super::field::Field;
use super::params::{probabilities, RbmParams};
use super::sampler::{metropolis_chain, DEFAULT_BURN_IN_SWEEPS};
use crate::error::{check_len, Error, Result};
use crate::lattice::{Configuration, LocalOperator};

/// `O_loc(σ) = Σ_σ' ⟨σ|O|σ'⟩ ψ(σ')/ψ(σ)` with `ψ = exp(ℰ/2)`.
pub fn local_observable<T: Field>(
    params: &RbmParams<T>,
    sigma: &Configuration,
    op: &(impl LocalOperator + ?Sized),
) -> Result<Complex64> {
    check_len(params.n_visible(), op.n_sites())?;
    check_len(params.n_visible(), sigma.len())?;
    Ok(local_value(
        |c| params.log_psi(c).expect("length checked"),
        sigma,
        op,
    ))
}

/// Local estimator for any wavefunction given by its log-amplitude.
pub fn local_value(
    log_psi: impl Fn(&Configuration) -> Complex64,
    sigma: &Configuration,
    op: &(impl LocalOperator + ?Sized),
) -> Complex64 {
    let here = log_psi(sigma);
    let mut total = Complex64::new(0.0, 0.0);
    for (other, value) in op.row(sigma) {
        if other == *sigma {
            total += value;
        } else {
            total += value * (log_psi(&other) - here).exp();
        }
    }
    total
}

/// Sample mean of `Re O_loc` and its naive standard error.
pub fn estimate_from_samples<T: Field>(
    params: &RbmParams<T>,
    op: &(impl LocalOperator + ?Sized),
    samples: &[Configuration],
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    let values = samples
        .iter()
        .map(|s| local_observable(params, s, op).map(|v| v.re))
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_and_stderr(&values))
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `⟨O⟩ ≈ mean O_loc` over `n_samples` Metropolis samples (default burn-in,
/// thinning `N`).
pub fn estimate_expectation<T: Field>(
    params: &RbmParams<T>,
    op: &(impl LocalOperator + ?Sized),
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (samples, _) = metropolis_chain(
        params,
        n_samples,
        DEFAULT_BURN_IN_SWEEPS,
        params.n_visible(),
        seed,
    );
    estimate_from_samples(params, op, &samples)
}

/// `Σ_σ p(σ) O_loc(σ)` by enumeration.
pub fn exact_expectation<T: Field>(
    params: &RbmParams<T>,
    op: &(impl LocalOperator + ?Sized),
) -> Result<Complex64> {
    let n = params.n_visible();
    let mut total = Complex64::new(0.0, 0.0);
    for (s, p) in probabilities(params)?.iter().enumerate() {
        if *p > 0.0 {
            total += local_observable(params, &Configuration::from_index(s as u64, n), op)? * *p;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{expectation_pauli, solve_spectrum};
    use crate::lattice::{mean_spin, LatticeGeometry, Pauli, PauliSumHamiltonian, RydbergModel};
    use crate::rbm::params::rbm_statevector;

    #[test]
    fn diagonal_and_identity_operators() {
        let p = RbmParams::<Complex64>::random_all(3, 3, 0.5, 1);
        let id = PauliSumHamiltonian::parse("1 III").unwrap();
        let z = PauliSumHamiltonian::parse("0.7 ZIZ").unwrap();
        for s in 0..8 {
            let c = Configuration::from_index(s, 3);
            assert!((local_observable(&p, &c, &id).unwrap() - 1.0).norm() < 1e-15);
            let sign = if c.get(0) == c.get(2) { 0.7 } else { -0.7 };
            assert!((local_observable(&p, &c, &z).unwrap() - sign).norm() < 1e-15);
        }
        let (m, e) = estimate_expectation(&p, &id, 50, 2).unwrap();
        assert_eq!((m, e), (1.0, 0.0));
    }

    #[test]
    fn exact_expectation_matches_dense() {
        let p = RbmParams::<Complex64>::random_all(3, 2, 0.6, 2);
        let psi = rbm_statevector(&p).unwrap();
        let ham = PauliSumHamiltonian::parse("0.5 XIZ\n-1.2 YYI\n0.3 ZZZ").unwrap();
        let got = exact_expectation(&p, &ham).unwrap();
        assert!((got.re - expectation_pauli(&psi, &ham).unwrap()).abs() < 1e-12);
        assert!(got.im.abs() < 1e-12);
    }

    #[test]
    fn sampled_spin_within_three_standard_errors() {
        let p = RbmParams::<f64>::random_all(5, 5, 0.6, 3);
        let op = mean_spin(5, Pauli::Z);
        let exact = exact_expectation(&p, &op).unwrap().re;
        let (m, err) = estimate_expectation(&p, &op, 20_000, 4).unwrap();
        assert!(
            (m - exact).abs() < 3.0 * err + 1e-3,
            "{m} ± {err} vs {exact}"
        );
    }

    #[test]
    fn eigenstate_has_constant_local_energy() {
        let model =
            RydbergModel::new(LatticeGeometry::square(3).unwrap(), 1.0, 1.1, 3.0, 3).unwrap();
        let spec = solve_spectrum(&model, 1).unwrap();
        let log_amp = |c: &Configuration| spec.ground.amplitude(c.to_index()).ln();
        // The eigensolver residual is absolute, so the ratio error grows as
        // 1/|ψ(σ)|; check the configurations carrying real weight.
        for s in (0..512u64).filter(|s| spec.ground.amplitude(*s).norm() > 1e-2) {
            let e = local_value(log_amp, &Configuration::from_index(s, 9), &model);
            assert!(
                (e.re - spec.e0).abs() < 1e-7,
                "{s}: {} vs {}",
                e.re,
                spec.e0
            );
        }
    }
}
