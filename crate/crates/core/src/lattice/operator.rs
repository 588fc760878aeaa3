use num_complex::Complex64;

use super::{
    connected_configs, Configuration, Pauli, PauliString, PauliSumHamiltonian, PauliTerm,
    RydbergModel,
};

/// Operator given by its sparse rows `⟨σ|O|σ'⟩`, the input of local
/// estimators such as `O_loc(σ) = Σ_σ' ⟨σ|O|σ'⟩ ψ(σ')/ψ(σ)`.
pub trait LocalOperator {
    fn n_sites(&self) -> usize;

    /// Non-zero `(σ', ⟨σ|O|σ'⟩)`.
    fn row(&self, sigma: &Configuration) -> Vec<(Configuration, Complex64)>;
}

impl LocalOperator for PauliSumHamiltonian {
    fn n_sites(&self) -> usize {
        PauliSumHamiltonian::n_sites(self)
    }

    fn row(&self, sigma: &Configuration) -> Vec<(Configuration, Complex64)> {
        // Pauli sums with real coefficients are Hermitian, so the row is the
        // conjugated column.
        self.row_index(sigma.to_index())
            .into_iter()
            .map(|(t, v)| (Configuration::from_index(t, sigma.len()), v.conj()))
            .collect()
    }
}

impl LocalOperator for RydbergModel {
    fn n_sites(&self) -> usize {
        RydbergModel::n_sites(self)
    }

    fn row(&self, sigma: &Configuration) -> Vec<(Configuration, Complex64)> {
        let mut out = Vec::with_capacity(sigma.len() + 1);
        out.push((
            sigma.clone(),
            Complex64::new(self.diagonal_energy_index(sigma.to_index()), 0.0),
        ));
        out.extend(
            connected_configs(sigma, self)
                .into_iter()
                .map(|(c, v)| (c, Complex64::new(v, 0.0))),
        );
        out
    }
}

/// `(1/N) Σ_j ½ P_j`: per-site average of the spin-½ operator along `op`.
///
/// With `op = Z` this is `⟨Sᶻ⟩` with `+½` on an empty site.
pub fn mean_spin(n: usize, op: Pauli) -> PauliSumHamiltonian {
    let terms = (0..n)
        .map(|j| PauliTerm::new(0.5 / n as f64, PauliString::single(n, j, op)))
        .collect();
    PauliSumHamiltonian::new(terms).expect("uniform lengths")
}
