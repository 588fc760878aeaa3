use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::eigen::SpectrumResult;
use super::state::StateVector;
use crate::error::{check_len, Result};
use crate::lattice::{LatticeGeometry, PauliSumHamiltonian};

fn check_geometry(state: &StateVector, geometry: &LatticeGeometry) -> Result<()> {
    check_len(geometry.n_sites(), state.n_sites())
}

/// Staggered magnetization `⟨|N⁻¹ Σ_r (−1)^{x+y} Sᶻ(r)|⟩` with `Sᶻ = +½` on an
/// empty site and `−½` on an excited one.
///
/// The operator is diagonal, so the absolute value is taken per basis state
/// before averaging. A symmetric superposition of both checkerboards then
/// reads 0.5, as a single checkerboard does.
pub fn staggered_magnetization(state: &StateVector, geometry: &LatticeGeometry) -> Result<f64> {
    check_geometry(state, geometry)?;
    let n = geometry.n_sites();
    let signs: Vec<f64> = (0..n).map(|i| geometry.stagger_sign(i)).collect();
    let probs = state.probabilities();
    let mut total = 0.0;
    for (s, p) in probs.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let m: f64 = signs
            .iter()
            .enumerate()
            .map(|(j, sign)| {
                if (s >> j) & 1 == 1 {
                    -0.5 * sign
                } else {
                    0.5 * sign
                }
            })
            .sum();
        total += p * (m / n as f64).abs();
    }
    Ok(total)
}

/// `⟨n̂(r)⟩` for every site.
pub fn site_occupations(state: &StateVector) -> Vec<f64> {
    let n = state.n_sites();
    let mut occ = vec![0.0; n];
    for (s, p) in state.probabilities().iter().enumerate() {
        for (j, o) in occ.iter_mut().enumerate() {
            if (s >> j) & 1 == 1 {
                *o += p;
            }
        }
    }
    occ
}

/// `n(k) = N^{-1/2} Σ_r e^{i k·r} ⟨n̂(r)⟩`.
pub fn momentum_occupation(
    state: &StateVector,
    geometry: &LatticeGeometry,
    k: (f64, f64),
) -> Result<Complex64> {
    check_geometry(state, geometry)?;
    Ok(momentum_from_occupations(
        &site_occupations(state),
        geometry,
        k,
    ))
}

pub fn momentum_from_occupations(
    occ: &[f64],
    geometry: &LatticeGeometry,
    k: (f64, f64),
) -> Complex64 {
    let n = geometry.n_sites();
    let sum: Complex64 = occ
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (x, y) = geometry.coords(i);
            Complex64::from_polar(*o, k.0 * x as f64 + k.1 * y as f64)
        })
        .sum();
    sum / (n as f64).sqrt()
}

/// Momentum grid `{2π m / (2L) : m = 0..2L−1}` per axis, which contains π for
/// any lattice size.
pub fn momentum_grid(geometry: &LatticeGeometry) -> Vec<(f64, f64)> {
    let axis = |l: usize| -> Vec<f64> { (0..2 * l).map(|m| PI * m as f64 / l as f64).collect() };
    let (kx, ky) = (axis(geometry.lx()), axis(geometry.ly()));
    let mut grid = Vec::with_capacity(kx.len() * ky.len());
    for &a in &ky {
        for &b in &kx {
            grid.push((b, a));
        }
    }
    grid
}

/// `k` on [`momentum_grid`] maximizing `|n(k)|`, skipping `k = 0`.
///
/// `n(0)` is `√N` times the mean density and bounds every other component,
/// so it is left out of the search.
pub fn momentum_peak(state: &StateVector, geometry: &LatticeGeometry) -> Result<((f64, f64), f64)> {
    check_geometry(state, geometry)?;
    let occ = site_occupations(state);
    let mut best = ((0.0, 0.0), f64::NEG_INFINITY);
    for k in momentum_grid(geometry) {
        if k == (0.0, 0.0) {
            continue;
        }
        let v = momentum_from_occupations(&occ, geometry, k).norm();
        if v > best.1 + 1e-12 {
            best = (k, v);
        }
    }
    Ok(best)
}

/// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`, real part.
pub fn expectation_pauli(state: &StateVector, ham: &PauliSumHamiltonian) -> Result<f64> {
    check_len(ham.n_sites(), state.n_sites())?;
    let amps = state.amplitudes();
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, a) in amps.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for (t, v) in ham.row_index(s as u64) {
            acc += amps[t as usize].conj() * v * a;
        }
    }
    Ok(acc.re / state.norm_sqr())
}

/// Ground-manifold state with maximal staggered density.
///
/// On even lattices deep in the ordered phase the two checkerboards form a
/// near-degenerate doublet and the eigensolver returns their symmetric and
/// antisymmetric combinations, for which every staggered one-body quantity
/// vanishes. Diagonalizing the staggered density `Σ_r (−1)^{x+y} n̂(r)` inside
/// the levels within `degeneracy_tol` of `e0` selects one Néel pattern. With
/// a non-degenerate ground state this returns the ground state itself.
pub fn ordered_ground_state(
    spectrum: &SpectrumResult,
    geometry: &LatticeGeometry,
    degeneracy_tol: f64,
) -> Result<StateVector> {
    let states: Vec<&StateVector> = spectrum
        .states
        .iter()
        .zip(&spectrum.energies)
        .filter(|(_, e)| **e - spectrum.e0 <= degeneracy_tol)
        .map(|(s, _)| s)
        .collect();
    if states.len() < 2 {
        return Ok(spectrum.ground.clone());
    }
    let n = geometry.n_sites();
    let weight: Vec<f64> = (0..1usize << n)
        .map(|s| {
            (0..n)
                .filter(|j| (s >> j) & 1 == 1)
                .map(|j| geometry.stagger_sign(j))
                .sum()
        })
        .collect();
    let m = states.len();
    let mut proj = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            proj[(a, b)] = states[a]
                .amplitudes()
                .iter()
                .zip(states[b].amplitudes())
                .zip(&weight)
                .map(|((x, y), w)| (x.conj() * y).re * w)
                .sum();
        }
    }
    let eig = SymmetricEigen::new(proj);
    let (col, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty manifold");
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
    for (a, st) in states.iter().enumerate() {
        let c = eig.eigenvectors[(a, col)];
        for (dst, src) in amps.iter_mut().zip(st.amplitudes()) {
            *dst += src * c;
        }
    }
    StateVector::new(amps, n)?.normalized()
}
