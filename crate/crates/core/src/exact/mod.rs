//! Exact-diagonalization oracle: Hamiltonian matrices, lowest eigenpairs,
//! observables, basis rotations and Born-rule sampling.

mod eigen;
mod hamiltonian;
mod measure;
mod observables;
mod state;

pub use eigen::{
    davidson, pauli_ground_state, solve_spectrum, solve_spectrum_with, SolverKind, SolverOptions,
    SpectrumResult, RESIDUAL_TOLERANCE,
};
pub use hamiltonian::{
    build_dense_hamiltonian, build_dense_hamiltonian_limited, build_dense_pauli_matrix,
    build_sparse_hamiltonian, build_sparse_hamiltonian_limited, SparseHamiltonian,
    DEFAULT_DENSE_LIMIT, DEFAULT_SPARSE_LIMIT,
};
pub use measure::{basis_rotation, rotate_state, sample_measurements, unrotate_state, BornSampler};
pub use observables::{
    expectation_pauli, momentum_from_occupations, momentum_grid, momentum_occupation,
    momentum_peak, ordered_ground_state, site_occupations, staggered_magnetization,
};
pub use state::{fidelity, StateVector};

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
