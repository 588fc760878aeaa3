//! Restricted Boltzmann machine tomography.
//!
//! The visible layer holds occupations `σ_j ∈ {0, 1}`. Tracing out the hidden
//! layer gives the effective energy `ℰ(σ)`; the model distribution is
//! `p(σ) ∝ exp(Re ℰ(σ))` and the amplitude is `ψ(σ) = exp(ℰ(σ)/2)`.

mod field;
mod gradient;
mod observables;
mod params;
mod sampler;
mod train;

pub use field::Field;
pub use gradient::{
    all_z_basis, exact_model_derivatives, exact_multi_basis_nll_gradient, exact_nll_gradient,
    mean_derivatives, multi_basis_nll, multi_basis_nll_gradient, nll, nll_gradient,
    rotated_log_amplitude, rotated_log_amplitude_limited, DEFAULT_ROTATION_LIMIT,
};
pub use observables::{
    estimate_expectation, estimate_from_samples, exact_expectation, local_observable, local_value,
};
pub use params::{
    all_log_weights, effective_energy, hidden_sum_brute_force, log_partition_function,
    log_prob_unnormalized, partition_function, probabilities, rbm_statevector, RbmParams,
    ENUMERATION_LIMIT,
};
pub use sampler::{metropolis_chain, MarkovChain, DEFAULT_BURN_IN_SWEEPS};
pub use train::{
    kl_divergence, smooth, train_tomography, IterationRecord, TomographyHistory, TomographyOptions,
    TrackedObservable,
};

/// Weight scale of the default initialization.
pub const DEFAULT_INIT_STD: f64 = 0.01;
