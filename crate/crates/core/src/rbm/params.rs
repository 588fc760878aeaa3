use num_complex::Complex64;

use super::field::Field;
use crate::checkpoint::Checkpoint;
use crate::error::{check_len, Error, Result};
use crate::exact::StateVector;
use crate::lattice::Configuration;
use crate::linalg::log_sum_exp;
use crate::rng::{stream_rng, Stream};

/// Largest visible layer handled by full enumeration.
pub const ENUMERATION_LIMIT: usize = 20;

/// RBM parameters in one flat buffer: weights `W[i, j]` (hidden `i`,
/// visible `j`, row-major), then visible biases `b`, then hidden biases `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams<T: Field> {
    n_visible: usize,
    n_hidden: usize,
    data: Vec<T>,
}

impl<T: Field> RbmParams<T> {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            n_visible,
            n_hidden,
            data: vec![T::zero(); n_hidden * n_visible + n_visible + n_hidden],
        }
    }

    /// Zero biases and Gaussian weights (each real component with standard
    /// deviation `std`).
    pub fn random(n_visible: usize, n_hidden: usize, std: f64, seed: u64) -> Self {
        let mut p = Self::zeros(n_visible, n_hidden);
        let mut rng = stream_rng(seed, Stream::RbmInit, 0);
        for w in p.weights_mut() {
            *w = T::gaussian(&mut rng, std);
        }
        p
    }

    /// Every parameter (biases included) Gaussian with standard deviation `std`.
    pub fn random_all(n_visible: usize, n_hidden: usize, std: f64, seed: u64) -> Self {
        let mut p = Self::zeros(n_visible, n_hidden);
        let mut rng = stream_rng(seed, Stream::RbmInit, 1);
        for w in &mut p.data {
            *w = T::gaussian(&mut rng, std);
        }
        p
    }

    pub fn from_parts(
        n_visible: usize,
        n_hidden: usize,
        weights: &[T],
        visible: &[T],
        hidden: &[T],
    ) -> Result<Self> {
        check_len(n_hidden * n_visible, weights.len())?;
        check_len(n_visible, visible.len())?;
        check_len(n_hidden, hidden.len())?;
        let mut data = weights.to_vec();
        data.extend_from_slice(visible);
        data.extend_from_slice(hidden);
        Ok(Self {
            n_visible,
            n_hidden,
            data,
        })
    }

    pub fn from_flat(n_visible: usize, n_hidden: usize, data: Vec<T>) -> Result<Self> {
        check_len(n_hidden * n_visible + n_visible + n_hidden, data.len())?;
        Ok(Self {
            n_visible,
            n_hidden,
            data,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    /// Hidden-unit density `n_h / N`.
    pub fn alpha(&self) -> f64 {
        self.n_hidden as f64 / self.n_visible as f64
    }

    pub fn n_params(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn weights(&self) -> &[T] {
        &self.data[..self.n_hidden * self.n_visible]
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        let n = self.n_hidden * self.n_visible;
        &mut self.data[..n]
    }

    pub fn visible_bias(&self) -> &[T] {
        let s = self.n_hidden * self.n_visible;
        &self.data[s..s + self.n_visible]
    }

    pub fn visible_bias_mut(&mut self) -> &mut [T] {
        let s = self.n_hidden * self.n_visible;
        &mut self.data[s..s + self.n_visible]
    }

    pub fn hidden_bias(&self) -> &[T] {
        &self.data[self.n_hidden * self.n_visible + self.n_visible..]
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [T] {
        let s = self.n_hidden * self.n_visible + self.n_visible;
        &mut self.data[s..]
    }

    pub fn weight(&self, i: usize, j: usize) -> T {
        self.data[i * self.n_visible + j]
    }

    fn check(&self, sigma: &[u8]) -> Result<()> {
        check_len(self.n_visible, sigma.len())
    }

    /// `θ_i = Σ_j W_ij σ_j + c_i`.
    pub fn hidden_fields(&self, sigma: &[u8]) -> Vec<T> {
        let mut theta = self.hidden_bias().to_vec();
        for (i, t) in theta.iter_mut().enumerate() {
            let row = &self.data[i * self.n_visible..][..self.n_visible];
            for (w, &s) in row.iter().zip(sigma) {
                if s == 1 {
                    *t += *w;
                }
            }
        }
        theta
    }

    /// `ℰ` from precomputed hidden fields.
    pub fn energy_from_fields(&self, sigma: &[u8], theta: &[T]) -> T {
        let mut e = T::zero();
        for (b, &s) in self.visible_bias().iter().zip(sigma) {
            if s == 1 {
                e += *b;
            }
        }
        for t in theta {
            e += t.softplus();
        }
        e
    }

    /// `ℰ(σ) = Σ_j b_j σ_j + Σ_i log(1 + exp(θ_i))`.
    pub fn effective_energy(&self, sigma: &Configuration) -> Result<T> {
        self.check(sigma.bits())?;
        Ok(self.energy_from_fields(sigma.bits(), &self.hidden_fields(sigma.bits())))
    }

    /// `log ψ(σ) = ℰ(σ)/2`.
    pub fn log_psi(&self, sigma: &Configuration) -> Result<Complex64> {
        Ok(self.effective_energy(sigma)?.to_complex() * 0.5)
    }

    /// `∂ℰ/∂θ` for every parameter, in buffer order, written into `out`.
    pub fn energy_derivatives(&self, sigma: &[u8], theta: &[T], out: &mut [T]) {
        let nv = self.n_visible;
        let nh = self.n_hidden;
        debug_assert_eq!(out.len(), self.data.len());
        for i in 0..nh {
            let s = theta[i].sigmoid();
            let row = &mut out[i * nv..][..nv];
            for (o, &v) in row.iter_mut().zip(sigma) {
                *o = if v == 1 { s } else { T::zero() };
            }
            out[nh * nv + nv + i] = s;
        }
        for (j, &v) in sigma.iter().enumerate() {
            out[nh * nv + j] = T::from_real(v as f64);
        }
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        Checkpoint::new(T::as_reals(&self.data).to_vec())
            .with("kind", "rbm")
            .with("field", T::NAME)
            .with("n_visible", self.n_visible)
            .with("n_hidden", self.n_hidden)
            .with("alpha", self.alpha())
            .with("layout", "W[hidden,visible],b[visible],c[hidden]")
            .with("seed", seed)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.get("kind") != Some("rbm") || ck.get("field") != Some(T::NAME) {
            return Err(Error::invalid(format!(
                "checkpoint is not a {} RBM",
                T::NAME
            )));
        }
        Self::from_flat(
            ck.require("n_visible")?,
            ck.require("n_hidden")?,
            T::from_reals(&ck.params),
        )
    }
}

/// Free-function form of [`RbmParams::effective_energy`].
pub fn effective_energy<T: Field>(params: &RbmParams<T>, sigma: &Configuration) -> Result<T> {
    params.effective_energy(sigma)
}

/// Unnormalized log-probability `Re ℰ(σ)` (the model weights `exp(Re ℰ)`).
pub fn log_prob_unnormalized<T: Field>(
    params: &RbmParams<T>,
    sigma: &Configuration,
) -> Result<f64> {
    Ok(params.effective_energy(sigma)?.re())
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        Err(Error::TooLarge {
            sites: n,
            limit: ENUMERATION_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// `Re ℰ(σ)` for all `2^N` configurations in basis-index order.
pub fn all_log_weights<T: Field>(params: &RbmParams<T>) -> Result<Vec<f64>> {
    let n = params.n_visible();
    check_enumerable(n)?;
    Ok((0..1u64 << n)
        .map(|s| {
            let c = Configuration::from_index(s, n);
            params
                .energy_from_fields(c.bits(), &params.hidden_fields(c.bits()))
                .re()
        })
        .collect())
}

pub fn log_partition_function<T: Field>(params: &RbmParams<T>) -> Result<f64> {
    Ok(log_sum_exp(&all_log_weights(params)?))
}

/// `Z = Σ_σ exp(Re ℰ(σ))` by enumeration.
pub fn partition_function<T: Field>(params: &RbmParams<T>) -> Result<f64> {
    Ok(log_partition_function(params)?.exp())
}

/// Normalized model distribution over basis indices.
pub fn probabilities<T: Field>(params: &RbmParams<T>) -> Result<Vec<f64>> {
    let lw = all_log_weights(params)?;
    let lz = log_sum_exp(&lw);
    Ok(lw.iter().map(|l| (l - lz).exp()).collect())
}

/// Normalized `ψ(σ) = exp(ℰ(σ)/2)` as a dense state.
pub fn rbm_statevector<T: Field>(params: &RbmParams<T>) -> Result<StateVector> {
    let n = params.n_visible();
    check_enumerable(n)?;
    let logs: Vec<Complex64> = (0..1u64 << n)
        .map(|s| {
            let c = Configuration::from_index(s, n);
            params
                .energy_from_fields(c.bits(), &params.hidden_fields(c.bits()))
                .to_complex()
                * 0.5
        })
        .collect();
    let shift = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let amps = logs.iter().map(|l| (l - shift).exp()).collect();
    StateVector::new(amps, n)?.normalized()
}

/// `Σ_h exp(−E(σ, h))` with `E(σ, h) = −Σ b σ − Σ c h − Σ h W σ`, by
/// enumerating all `2^{n_h}` hidden states.
pub fn hidden_sum_brute_force<T: Field>(
    params: &RbmParams<T>,
    sigma: &Configuration,
) -> Result<Complex64> {
    params.check(sigma.bits())?;
    let nh = params.n_hidden();
    if nh > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            sites: nh,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut visible = Complex64::new(0.0, 0.0);
    for (b, &s) in params.visible_bias().iter().zip(sigma.bits()) {
        if s == 1 {
            visible += b.to_complex();
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for h in 0..1u64 << nh {
        let mut e = visible;
        for i in 0..nh {
            if (h >> i) & 1 == 1 {
                e += params.hidden_bias()[i].to_complex();
                for (j, &s) in sigma.bits().iter().enumerate() {
                    if s == 1 {
                        e += params.weight(i, j).to_complex();
                    }
                }
            }
        }
        total += e.exp();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameter_examples() {
        let p = RbmParams::<f64>::zeros(3, 4);
        for s in 0..8 {
            let e = p
                .effective_energy(&Configuration::from_index(s, 3))
                .unwrap();
            assert!((e - 4.0 * 2f64.ln()).abs() < 1e-14);
        }
        let p = RbmParams::<f64>::zeros(2, 2);
        assert!((partition_function(&p).unwrap() - 16.0).abs() < 1e-12);
        let probs = probabilities(&p).unwrap();
        assert!(probs.iter().all(|q| (q - 0.25).abs() < 1e-15));

        let mut p = RbmParams::<f64>::zeros(2, 3);
        p.visible_bias_mut().copy_from_slice(&[1.0, 1.0]);
        let e = p.effective_energy(&"10".parse().unwrap()).unwrap();
        assert!((e - (1.0 + 3.0 * 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn marginalization_identity() {
        let real = RbmParams::<f64>::random_all(2, 2, 0.8, 3);
        let cplx = RbmParams::<Complex64>::random_all(3, 4, 0.8, 4);
        for s in 0..4 {
            let c = Configuration::from_index(s, 2);
            let want = hidden_sum_brute_force(&real, &c).unwrap();
            let got = real.effective_energy(&c).unwrap().exp();
            assert!((got - want.re).abs() <= 1e-12 * want.norm());
        }
        for s in 0..8 {
            let c = Configuration::from_index(s, 3);
            let want = hidden_sum_brute_force(&cplx, &c).unwrap();
            let got = cplx.effective_energy(&c).unwrap().exp();
            assert!((got - want).norm() <= 1e-12 * want.norm());
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = RbmParams::<f64>::random_all(4, 3, 0.7, 9);
        let sigma: Configuration = "1011".parse().unwrap();
        let mut d = vec![0.0; p.n_params()];
        p.energy_derivatives(sigma.bits(), &p.hidden_fields(sigma.bits()), &mut d);
        let h = 1e-6;
        for k in 0..p.n_params() {
            let mut a = p.clone();
            a.as_mut_slice()[k] += h;
            let mut b = p.clone();
            b.as_mut_slice()[k] -= h;
            let fd = (a.effective_energy(&sigma).unwrap() - b.effective_energy(&sigma).unwrap())
                / (2.0 * h);
            assert!((fd - d[k]).abs() < 1e-6, "param {k}: {fd} vs {}", d[k]);
        }
    }

    #[test]
    fn statevector_is_normalized_square_root() {
        let p = RbmParams::<f64>::random_all(5, 5, 0.5, 1);
        let psi = rbm_statevector(&p).unwrap();
        let probs = probabilities(&p).unwrap();
        for (a, q) in psi.amplitudes().iter().zip(&probs) {
            assert!((a.norm_sqr() - q).abs() < 1e-14);
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = RbmParams::<Complex64>::random(4, 4, 0.01, 2);
        let back = RbmParams::<Complex64>::from_checkpoint(&p.to_checkpoint(2)).unwrap();
        assert_eq!(back, p);
        assert!(RbmParams::<f64>::from_checkpoint(&p.to_checkpoint(2)).is_err());
    }
}
