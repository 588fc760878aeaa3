use num_complex::Complex64;

use super::field::Field;
use super::params::{all_log_weights, probabilities, RbmParams};
use crate::data::{MeasurementBasis, MeasurementRecord};
use crate::error::{check_len, Error, Result};
use crate::exact::basis_rotation;
use crate::lattice::{Configuration, Pauli};
use crate::linalg::log_sum_exp;

/// Default cap on non-`Z` sites in one measurement basis.
pub const DEFAULT_ROTATION_LIMIT: usize = 16;

fn accumulate<T: Field>(acc: &mut [Complex64], d: &[T], weight: Complex64) {
    for (a, x) in acc.iter_mut().zip(d) {
        *a += weight * x.to_complex();
    }
}

/// `⟨∂ℰ⟩` over a set of configurations, in parameter-buffer order.
pub fn mean_derivatives<T: Field>(
    params: &RbmParams<T>,
    samples: &[Configuration],
) -> Result<Vec<Complex64>> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); params.n_params()];
    let mut d = vec![T::zero(); params.n_params()];
    let w = Complex64::new(1.0 / samples.len() as f64, 0.0);
    for s in samples {
        check_len(params.n_visible(), s.len())?;
        params.energy_derivatives(s.bits(), &params.hidden_fields(s.bits()), &mut d);
        accumulate(&mut acc, &d, w);
    }
    Ok(acc)
}

/// `⟨∂ℰ⟩` under the exact model distribution (enumeration).
pub fn exact_model_derivatives<T: Field>(params: &RbmParams<T>) -> Result<Vec<Complex64>> {
    let n = params.n_visible();
    let probs = probabilities(params)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); params.n_params()];
    let mut d = vec![T::zero(); params.n_params()];
    for (s, p) in probs.iter().enumerate() {
        let c = Configuration::from_index(s as u64, n);
        params.energy_derivatives(c.bits(), &params.hidden_fields(c.bits()), &mut d);
        accumulate(&mut acc, &d, Complex64::new(*p, 0.0));
    }
    Ok(acc)
}

fn combine<T: Field>(model: &[Complex64], data: &[Complex64]) -> Vec<T> {
    model
        .iter()
        .zip(data)
        .map(|(m, d)| T::from_gradient(m - d))
        .collect()
}

/// Gradient of the negative log-likelihood of Z-basis data:
/// `⟨∂ℰ⟩_model − ⟨∂ℰ⟩_data`, mapped to real-component form by
/// [`Field::from_gradient`].
pub fn nll_gradient<T: Field>(
    params: &RbmParams<T>,
    data: &[Configuration],
    model_samples: &[Configuration],
) -> Result<Vec<T>> {
    Ok(combine(
        &mean_derivatives(params, model_samples)?,
        &mean_derivatives(params, data)?,
    ))
}

/// [`nll_gradient`] with the model term computed exactly.
pub fn exact_nll_gradient<T: Field>(
    params: &RbmParams<T>,
    data: &[Configuration],
) -> Result<Vec<T>> {
    Ok(combine(
        &exact_model_derivatives(params)?,
        &mean_derivatives(params, data)?,
    ))
}

/// Exact `−(1/|D|) Σ log p(σ)` over Z-basis data.
pub fn nll<T: Field>(params: &RbmParams<T>, data: &[Configuration]) -> Result<f64> {
    let log_z = log_sum_exp(&all_log_weights(params)?);
    let mut total = 0.0;
    for s in data {
        total += params.effective_energy(s)?.re();
    }
    Ok(log_z - total / data.len() as f64)
}

/// Reference-basis terms of `⟨σ|U(τ)|ψ⟩ = Σ_σ' Π_j U_j[σ_j, σ'_j] ψ(σ')`:
/// each entry is `(σ', log of the summand)`.
fn rotated_terms<T: Field>(
    params: &RbmParams<T>,
    basis: &MeasurementBasis,
    outcome: &Configuration,
    limit: usize,
) -> Result<Vec<(Vec<u8>, Complex64)>> {
    check_len(params.n_visible(), basis.len())?;
    check_len(params.n_visible(), outcome.len())?;
    let rotated = basis.rotated_sites();
    if rotated.len() > limit {
        return Err(Error::TooLarge {
            sites: rotated.len(),
            limit,
        });
    }
    let units: Vec<[[Complex64; 2]; 2]> = rotated
        .iter()
        .map(|&j| basis_rotation(basis.ops()[j]))
        .collect();
    let mut out = Vec::with_capacity(1 << rotated.len());
    let mut sigma = outcome.bits().to_vec();
    for m in 0..1usize << rotated.len() {
        let mut log_u = Complex64::new(0.0, 0.0);
        for (k, &j) in rotated.iter().enumerate() {
            let v = ((m >> k) & 1) as u8;
            sigma[j] = v;
            log_u += units[k][outcome.get(j) as usize][v as usize].ln();
        }
        let e = params
            .energy_from_fields(&sigma, &params.hidden_fields(&sigma))
            .to_complex();
        out.push((sigma.clone(), log_u + e * 0.5));
    }
    Ok(out)
}

fn complex_log_sum_exp(terms: impl Iterator<Item = Complex64> + Clone) -> Complex64 {
    let shift = terms
        .clone()
        .map(|t| t.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: Complex64 = terms.map(|t| (t - shift).exp()).sum();
    sum.ln() + shift
}

/// `log⟨σ|U(τ)|ψ⟩` with the unnormalized `ψ = exp(ℰ/2)`.
pub fn rotated_log_amplitude<T: Field>(
    params: &RbmParams<T>,
    basis: &MeasurementBasis,
    outcome: &Configuration,
) -> Result<Complex64> {
    rotated_log_amplitude_limited(params, basis, outcome, DEFAULT_ROTATION_LIMIT)
}

pub fn rotated_log_amplitude_limited<T: Field>(
    params: &RbmParams<T>,
    basis: &MeasurementBasis,
    outcome: &Configuration,
    limit: usize,
) -> Result<Complex64> {
    let terms = rotated_terms(params, basis, outcome, limit)?;
    Ok(complex_log_sum_exp(terms.iter().map(|t| t.1)))
}

/// `Σ_k w_k ∂ℰ(σ'_k)` with `w_k` the share of term `k` in the rotated
/// amplitude; for an all-`Z` basis this is `∂ℰ(σ)`.
fn rotated_derivatives<T: Field>(
    params: &RbmParams<T>,
    record: &MeasurementRecord,
    limit: usize,
    acc: &mut [Complex64],
    scale: f64,
) -> Result<()> {
    let terms = rotated_terms(params, &record.basis, &record.outcome, limit)?;
    let log_a = complex_log_sum_exp(terms.iter().map(|t| t.1));
    let mut d = vec![T::zero(); params.n_params()];
    for (sigma, log_term) in &terms {
        let w = (log_term - log_a).exp() * scale;
        params.energy_derivatives(sigma, &params.hidden_fields(sigma), &mut d);
        accumulate(acc, &d, w);
    }
    Ok(())
}

fn data_term<T: Field>(
    params: &RbmParams<T>,
    records: &[MeasurementRecord],
    limit: usize,
) -> Result<Vec<Complex64>> {
    if records.is_empty() {
        return Err(Error::invalid("empty data batch"));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); params.n_params()];
    let scale = 1.0 / records.len() as f64;
    for r in records {
        rotated_derivatives(params, r, limit, &mut acc, scale)?;
    }
    Ok(acc)
}

/// Gradient of `−mean log p(x)` with `p(x) = |⟨σ|U(τ)|ψ⟩|²/⟨ψ|ψ⟩`, the
/// normalization term estimated from `model_samples`.
pub fn multi_basis_nll_gradient<T: Field>(
    params: &RbmParams<T>,
    records: &[MeasurementRecord],
    model_samples: &[Configuration],
) -> Result<Vec<T>> {
    Ok(combine(
        &mean_derivatives(params, model_samples)?,
        &data_term(params, records, DEFAULT_ROTATION_LIMIT)?,
    ))
}

/// [`multi_basis_nll_gradient`] with the normalization term exact.
pub fn exact_multi_basis_nll_gradient<T: Field>(
    params: &RbmParams<T>,
    records: &[MeasurementRecord],
) -> Result<Vec<T>> {
    Ok(combine(
        &exact_model_derivatives(params)?,
        &data_term(params, records, DEFAULT_ROTATION_LIMIT)?,
    ))
}

/// Exact `−mean log p(x)` over multi-basis records.
pub fn multi_basis_nll<T: Field>(
    params: &RbmParams<T>,
    records: &[MeasurementRecord],
) -> Result<f64> {
    let log_z = log_sum_exp(&all_log_weights(params)?);
    let mut total = 0.0;
    for r in records {
        total += 2.0 * rotated_log_amplitude(params, &r.basis, &r.outcome)?.re;
    }
    Ok(log_z - total / records.len() as f64)
}

/// True when every record was measured in the computational basis.
pub fn all_z_basis(records: &[MeasurementRecord]) -> bool {
    records
        .iter()
        .all(|r| r.basis.ops().iter().all(|p| *p == Pauli::Z))
}
