//! Lowest eigenpairs of the Rydberg Hamiltonian.
//!
//! Small Hilbert spaces go through a dense symmetric eigensolver. Larger ones
//! use block Davidson with the diagonal as preconditioner and thick restarts
//! onto the current Ritz vectors; the off-diagonal part of the Rydberg
//! Hamiltonian is a uniform single-flip drive, so the diagonal dominates the
//! spectrum's structure and the preconditioner is effective.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng as _;

use super::hamiltonian::{
    build_dense_hamiltonian_limited, build_dense_pauli_matrix, build_sparse_hamiltonian,
    SparseHamiltonian,
};
use super::state::StateVector;
use crate::error::{Error, Result};
use crate::lattice::{PauliSumHamiltonian, RydbergModel};
use crate::rng::rng_from_seed;

/// Required bound on `‖Hv − Ev‖` for every returned eigenpair.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Dense below [`SolverOptions::dense_below_dim`], Davidson above.
    Auto,
    Dense,
    Davidson,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub kind: SolverKind,
    pub dense_below_dim: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_subspace: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            kind: SolverKind::Auto,
            dense_below_dim: 256,
            tolerance: 1e-10,
            max_iterations: 2000,
            max_subspace: 40,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub e0: f64,
    /// First excited energy, present when at least two states were requested.
    pub e1: Option<f64>,
    /// `|e0 − e1|`.
    pub gap: Option<f64>,
    pub ground: StateVector,
    /// All computed levels, ascending.
    pub energies: Vec<f64>,
    pub states: Vec<StateVector>,
    pub residuals: Vec<f64>,
}

impl SpectrumResult {
    /// Gap from `e0` to the first level more than `degeneracy_tol` above it.
    ///
    /// In the ordered phase of an even lattice the two Néel patterns form a
    /// doublet whose splitting is exponentially small; this skips it and
    /// returns the gap to the next excitation. `None` if every computed level
    /// lies inside the ground manifold.
    pub fn gap_above_ground_manifold(&self, degeneracy_tol: f64) -> Option<f64> {
        self.energies
            .iter()
            .skip(1)
            .map(|e| e - self.e0)
            .find(|g| *g > degeneracy_tol)
    }

    /// Number of computed levels within `degeneracy_tol` of `e0`.
    pub fn ground_multiplicity(&self, degeneracy_tol: f64) -> usize {
        self.energies
            .iter()
            .filter(|e| *e - self.e0 <= degeneracy_tol)
            .count()
    }
}

pub fn solve_spectrum(model: &RydbergModel, n_states: usize) -> Result<SpectrumResult> {
    solve_spectrum_with(model, n_states, &SolverOptions::default())
}

pub fn solve_spectrum_with(
    model: &RydbergModel,
    n_states: usize,
    opts: &SolverOptions,
) -> Result<SpectrumResult> {
    if n_states == 0 {
        return Err(Error::invalid("n_states must be at least 1"));
    }
    let n = model.n_sites();
    let dim = 1usize << n;
    let n_states = n_states.min(dim);
    let use_dense = match opts.kind {
        SolverKind::Dense => true,
        SolverKind::Davidson => false,
        SolverKind::Auto => dim <= opts.dense_below_dim,
    };
    let sparse = build_sparse_hamiltonian(model)?;
    let (energies, vectors) = if use_dense {
        dense_lowest(
            &build_dense_hamiltonian_limited(model, super::hamiltonian::DEFAULT_DENSE_LIMIT)?,
            n_states,
        )
    } else {
        davidson(
            |v, out| sparse.matvec(v, out),
            sparse.diagonal(),
            n_states,
            opts,
        )?
    };
    finish(&sparse, n, energies, vectors)
}

fn finish(
    h: &SparseHamiltonian,
    n: usize,
    energies: Vec<f64>,
    vectors: Vec<Vec<f64>>,
) -> Result<SpectrumResult> {
    let mut residuals = Vec::with_capacity(energies.len());
    let mut hv = vec![0.0; h.dim()];
    for (e, v) in energies.iter().zip(&vectors) {
        h.matvec(v, &mut hv);
        let r = hv
            .iter()
            .zip(v)
            .map(|(a, b)| (a - e * b).powi(2))
            .sum::<f64>()
            .sqrt();
        residuals.push(r);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > RESIDUAL_TOLERANCE {
        return Err(Error::NotConverged {
            iterations: 0,
            residual: worst,
        });
    }
    let states = vectors
        .into_iter()
        .map(|mut v| {
            fix_sign(&mut v);
            StateVector::from_real(&v, n)
        })
        .collect::<Result<Vec<_>>>()?;
    let e0 = energies[0];
    let e1 = energies.get(1).copied();
    Ok(SpectrumResult {
        e0,
        e1,
        gap: e1.map(|e| (e - e0).abs()),
        ground: states[0].clone(),
        energies,
        states,
        residuals,
    })
}

/// Make the largest-magnitude component positive.
fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_lowest(h: &DMatrix<f64>, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .take(k)
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (energies, vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

/// Orthogonalize `t` against `basis` (two passes) and normalize. Returns
/// `false` if nothing independent is left.
fn orthonormalize(t: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let before = dot(t, t).sqrt();
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, t);
            axpy(-c, b, t);
        }
    }
    let after = dot(t, t).sqrt();
    if after <= 1e-10 * before.max(1e-300) || after == 0.0 {
        return false;
    }
    t.iter_mut().for_each(|x| *x /= after);
    true
}

/// Block Davidson for the `k` lowest eigenpairs of a real symmetric operator.
pub fn davidson<F>(
    matvec: F,
    diag: &[f64],
    k: usize,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = diag.len();
    let k = k.min(dim);
    let max_sub = opts.max_subspace.max(3 * k + 2).min(dim);
    let mut rng = rng_from_seed(opts.seed);

    // Start from the unit vectors of the lowest diagonal entries, perturbed
    // so that every symmetry sector is represented.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let n_init = (k + 2).min(dim);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_sub);
    let mut candidates = 0;
    while basis.len() < n_init && candidates < dim + n_init {
        let mut v: Vec<f64> = (0..dim)
            .map(|_| 1e-3 * (rng.random::<f64>() - 0.5))
            .collect();
        if candidates < dim {
            v[order[candidates]] += 1.0;
        }
        candidates += 1;
        if orthonormalize(&mut v, &basis) {
            let mut w = vec![0.0; dim];
            matvec(&v, &mut w);
            basis.push(v);
            images.push(w);
        }
    }

    let mut worst = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let m = basis.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let x = dot(&basis[i], &images[j]);
                t[(i, j)] = x;
                t[(j, i)] = x;
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let ritz = |col: usize, src: &[Vec<f64>]| -> Vec<f64> {
            let mut x = vec![0.0; dim];
            for (i, s) in src.iter().enumerate() {
                axpy(eig.eigenvectors[(i, col)], s, &mut x);
            }
            x
        };

        let mut thetas = Vec::with_capacity(k);
        let mut xs = Vec::with_capacity(k);
        let mut corrections = Vec::new();
        worst = 0.0f64;
        for &col in order.iter().take(k) {
            let theta = eig.eigenvalues[col];
            let x = ritz(col, &basis);
            let hx = ritz(col, &images);
            let r: Vec<f64> = hx.iter().zip(&x).map(|(a, b)| a - theta * b).collect();
            let rn = dot(&r, &r).sqrt();
            worst = worst.max(rn);
            if rn > opts.tolerance {
                let c: Vec<f64> = r
                    .iter()
                    .zip(diag)
                    .map(|(ri, d)| {
                        let denom = theta - d;
                        let denom = if denom.abs() < 1e-8 {
                            1e-8f64.copysign(denom)
                        } else {
                            denom
                        };
                        ri / denom
                    })
                    .collect();
                corrections.push(c);
            }
            thetas.push(theta);
            xs.push(x);
        }
        if corrections.is_empty() {
            return Ok((thetas, xs));
        }

        if m + corrections.len() > max_sub {
            let keep = (2 * k).max(k + 2).min(m);
            let new_basis: Vec<Vec<f64>> =
                order.iter().take(keep).map(|&c| ritz(c, &basis)).collect();
            let new_images: Vec<Vec<f64>> =
                order.iter().take(keep).map(|&c| ritz(c, &images)).collect();
            basis = new_basis;
            images = new_images;
        }
        let mut added = 0;
        for mut c in corrections {
            if basis.len() >= max_sub {
                break;
            }
            if orthonormalize(&mut c, &basis) {
                let mut w = vec![0.0; dim];
                matvec(&c, &mut w);
                basis.push(c);
                images.push(w);
                added += 1;
            }
        }
        if added == 0 {
            // Preconditioned directions collapsed; fall back to a random kick.
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            if basis.len() >= max_sub {
                basis.truncate(k);
                images.truncate(k);
            }
            if orthonormalize(&mut v, &basis) {
                let mut w = vec![0.0; dim];
                matvec(&v, &mut w);
                basis.push(v);
                images.push(w);
            }
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual: worst,
    })
}

/// Dense ground state of a Pauli-sum Hamiltonian (complex Hermitian).
pub fn pauli_ground_state(ham: &PauliSumHamiltonian) -> Result<(f64, StateVector)> {
    let h = build_dense_pauli_matrix(ham)?;
    let eig = nalgebra::SymmetricEigen::new(h);
    let (idx, e0) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::invalid("empty Hamiltonian"))?;
    let v: Vec<Complex64> = eig.eigenvectors.column(idx).iter().copied().collect();
    Ok((e0, StateVector::new(v, ham.n_sites())?.normalized()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeGeometry;

    fn model(lx: usize, ly: usize, delta: f64) -> RydbergModel {
        RydbergModel::new(LatticeGeometry::new(lx, ly).unwrap(), 1.0, delta, 3.0, 3).unwrap()
    }

    #[test]
    fn single_site_closed_form() {
        // [[0, -1/2], [-1/2, -2]] has eigenvalues -1 ± √5/2.
        let s = solve_spectrum(&model(1, 1, 2.0), 2).unwrap();
        assert!((s.e0 - (-1.0 - 5f64.sqrt() / 2.0)).abs() < 1e-12);
        assert!((s.e1.unwrap() - (-1.0 + 5f64.sqrt() / 2.0)).abs() < 1e-12);
        assert!((s.gap.unwrap() - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dense_and_davidson_agree() {
        for delta in [-3.0, 0.5, 1.7, 4.0] {
            let m = model(3, 3, delta);
            let dense = solve_spectrum_with(
                &m,
                3,
                &SolverOptions {
                    kind: SolverKind::Dense,
                    ..Default::default()
                },
            )
            .unwrap();
            let dav = solve_spectrum_with(
                &m,
                3,
                &SolverOptions {
                    kind: SolverKind::Davidson,
                    ..Default::default()
                },
            )
            .unwrap();
            for (a, b) in dense.energies.iter().zip(&dav.energies) {
                assert!((a - b).abs() < 1e-8, "{delta}: {a} vs {b}");
            }
            assert!(dav.residuals.iter().all(|r| *r <= RESIDUAL_TOLERANCE));
        }
    }

    #[test]
    fn variational_bound() {
        let m = model(3, 2, 1.0);
        let s = solve_spectrum(&m, 1).unwrap();
        let h = build_sparse_hamiltonian(&m).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            let mut v: Vec<f64> = (0..64).map(|_| rng.random::<f64>() - 0.5).collect();
            let n = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            let mut hv = vec![0.0; 64];
            h.matvec(&v, &mut hv);
            assert!(dot(&v, &hv) >= s.e0 - 1e-12);
        }
        assert!(s.e1.is_none());
    }

    #[test]
    fn rejects_zero_states() {
        assert!(solve_spectrum(&model(2, 2, 0.0), 0).is_err());
    }

    #[test]
    fn pauli_ground_state_of_zz() {
        let h = PauliSumHamiltonian::parse("1 ZZ\n0.5 XI\n0.5 IX").unwrap();
        let (e0, psi) = pauli_ground_state(&h).unwrap();
        let dense = build_dense_pauli_matrix(&h).unwrap();
        let v = nalgebra::DVector::from_vec(psi.amplitudes().to_vec());
        let r = (&dense * &v - v.map(|x| x * e0)).norm();
        assert!(r < 1e-10);
    }
}
