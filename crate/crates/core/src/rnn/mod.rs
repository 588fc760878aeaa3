//! Autoregressive GRU wavefunction and variational Monte Carlo.
//!
//! Sites are visited along a row-major snake. Each step feeds the one-hot
//! occupation of the previous site (a start token first) into a GRU cell and
//! reads the conditional of the current site from a softmax head.

mod network;
mod params;
mod vmc;
mod wavefunction;

pub use params::{conditional, gru_step, one_hot, GruParams, INPUT_DIM, START_TOKEN};
pub use vmc::{
    energy_and_gradient, estimate_from_samples, exact_energy, exact_energy_and_gradient,
    log_psi_gradient, per_sample_gradients, train, train_with, GradientEstimator, VmcEpoch,
    VmcHistory, VmcOptions, VmcStep,
};
pub use wavefunction::{rnn_statevector, snake_order, RnnWavefunction, ENUMERATION_LIMIT};
