//! Neural-network quantum state toolkit for two-dimensional Rydberg arrays.
//!
//! The crate is organised around the three learning workflows and the exact
//! solver they are validated against:
//!
//! - [`lattice`]: square-array geometry, the Rydberg Hamiltonian's matrix
//!   elements and generic Pauli-sum operators.
//! - [`exact`]: exact diagonalization, observables, basis rotations and
//!   Born-rule measurement sampling.
//! - [`data`]: measurement and labeled datasets with their text formats.
//! - [`optim`]: SGD, Adam and AdaDelta.
//! - [`cnn`]: convolutional phase classifier with a hand-written backward pass.
//! - [`rbm`]: restricted Boltzmann machine tomography (real and complex).
//! - [`rnn`]: autoregressive GRU wavefunction trained by variational Monte Carlo.
//! - [`cli`]: the pipelines behind the `rydberg-nqs` binary.

pub mod checkpoint;
pub mod cli;
pub mod cnn;
pub mod config;
pub mod data;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod linalg;
pub mod optim;
pub mod rbm;
pub mod rng;
pub mod rnn;

pub use error::{Error, Result};
pub use lattice::{Configuration, LatticeGeometry, PauliSumHamiltonian, RydbergModel};
