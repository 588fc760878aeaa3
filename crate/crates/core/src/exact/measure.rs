use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::state::StateVector;
use crate::data::{DatasetHeader, MeasurementBasis, MeasurementDataset, MeasurementRecord};
use crate::error::{check_len, Result};
use crate::lattice::{Configuration, Pauli};
use crate::rng::{stream_rng, Stream};

/// Single-site rotation `U(τ)` taking the `τ` eigenbasis to the computational
/// one, as `[[u00, u01], [u10, u11]]`.
///
/// `U(X)` is the Hadamard gate. `U(Y) = [[1, −i], [1, i]]/√2`, so outcome 0
/// is the `+1` eigenstate `(|0⟩ + i|1⟩)/√2`.
pub fn basis_rotation(op: Pauli) -> [[Complex64; 2]; 2] {
    let c = |re: f64, im: f64| Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2);
    match op {
        Pauli::X => [[c(1.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(-1.0, 0.0)]],
        Pauli::Y => [[c(1.0, 0.0), c(0.0, -1.0)], [c(1.0, 0.0), c(0.0, 1.0)]],
        Pauli::Z | Pauli::I => {
            let one = Complex64::new(1.0, 0.0);
            let zero = Complex64::new(0.0, 0.0);
            [[one, zero], [zero, one]]
        }
    }
}

fn apply_single(amps: &mut [Complex64], site: usize, u: &[[Complex64; 2]; 2]) {
    let bit = 1usize << site;
    for s in 0..amps.len() {
        if s & bit != 0 {
            continue;
        }
        let (a0, a1) = (amps[s], amps[s | bit]);
        amps[s] = u[0][0] * a0 + u[0][1] * a1;
        amps[s | bit] = u[1][0] * a0 + u[1][1] * a1;
    }
}

/// `⊗_j U(τ_j) |ψ⟩`.
pub fn rotate_state(state: &StateVector, basis: &MeasurementBasis) -> Result<StateVector> {
    check_len(state.n_sites(), basis.len())?;
    let mut amps = state.amplitudes().to_vec();
    for (site, op) in basis.ops().iter().enumerate() {
        if *op != Pauli::Z {
            apply_single(&mut amps, site, &basis_rotation(*op));
        }
    }
    StateVector::new(amps, state.n_sites())
}

/// Inverse of [`rotate_state`].
pub fn unrotate_state(state: &StateVector, basis: &MeasurementBasis) -> Result<StateVector> {
    check_len(state.n_sites(), basis.len())?;
    let mut amps = state.amplitudes().to_vec();
    for (site, op) in basis.ops().iter().enumerate() {
        if *op != Pauli::Z {
            let u = basis_rotation(*op);
            let dagger = [
                [u[0][0].conj(), u[1][0].conj()],
                [u[0][1].conj(), u[1][1].conj()],
            ];
            apply_single(&mut amps, site, &dagger);
        }
    }
    StateVector::new(amps, state.n_sites())
}

/// Exact Born sampler over a fixed probability vector (inverse CDF).
#[derive(Debug, Clone)]
pub struct BornSampler {
    cumulative: Vec<f64>,
}

impl BornSampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub fn draw(&self, rng: &mut impl rand::Rng) -> u64 {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as u64
    }
}

/// Draw `n_per_basis` independent outcomes in every basis of `bases`.
///
/// Basis `b` (by position) uses the `Measurements` stream with counter `b`,
/// so results are reproducible and independent of the other bases.
pub fn sample_measurements(
    state: &StateVector,
    bases: &[MeasurementBasis],
    n_per_basis: usize,
    seed: u64,
) -> Result<MeasurementDataset> {
    let n = state.n_sites();
    let mut records = Vec::with_capacity(bases.len() * n_per_basis);
    for (b, basis) in bases.iter().enumerate() {
        let rotated = rotate_state(state, basis)?;
        let sampler = BornSampler::new(&rotated.probabilities());
        let mut rng = stream_rng(seed, Stream::Measurements, b as u64);
        for _ in 0..n_per_basis {
            records.push(MeasurementRecord {
                basis: basis.clone(),
                outcome: Configuration::from_index(sampler.draw(&mut rng), n),
            });
        }
    }
    Ok(MeasurementDataset {
        header: DatasetHeader {
            n_sites: n,
            seed: Some(seed),
            ..DatasetHeader::new(n)
        },
        records,
    })
}
