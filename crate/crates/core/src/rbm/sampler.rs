use rand::Rng as _;

use super::field::Field;
use super::params::RbmParams;
use crate::lattice::Configuration;
use crate::rng::{stream_rng, Rng, Stream};

/// Default burn-in, in sweeps of `N` single-site proposals.
pub const DEFAULT_BURN_IN_SWEEPS: usize = 1000;

/// Persistent single-site-flip Metropolis chain over `p(σ) ∝ exp(Re ℰ(σ))`.
///
/// The hidden fields `θ` are cached, so a proposal costs `O(n_h)`.
#[derive(Debug, Clone)]
pub struct MarkovChain<T: Field> {
    sigma: Vec<u8>,
    theta: Vec<T>,
    log_weight: f64,
    rng: Rng,
    accepted: u64,
    proposed: u64,
}

impl<T: Field> MarkovChain<T> {
    /// Chain started from a uniformly random configuration.
    pub fn new(params: &RbmParams<T>, seed: u64, chain: u64) -> Self {
        let mut rng = stream_rng(seed, Stream::RbmChain, chain);
        let sigma: Vec<u8> = (0..params.n_visible())
            .map(|_| rng.random_range(0..2u8))
            .collect();
        let mut c = Self {
            sigma,
            theta: Vec::new(),
            log_weight: 0.0,
            rng,
            accepted: 0,
            proposed: 0,
        };
        c.refresh(params);
        c
    }

    /// Recompute the cached fields after the parameters changed.
    pub fn refresh(&mut self, params: &RbmParams<T>) {
        self.theta = params.hidden_fields(&self.sigma);
        self.log_weight = params.energy_from_fields(&self.sigma, &self.theta).re();
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::new(self.sigma.clone()).expect("chain holds binary values")
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn proposed(&self) -> u64 {
        self.proposed
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counters(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    /// One proposal: flip a uniformly chosen site, accept with
    /// `min(1, exp(Re ℰ(σ') − Re ℰ(σ)))`.
    pub fn step(&mut self, params: &RbmParams<T>) {
        let nv = params.n_visible();
        let j = self.rng.random_range(0..nv);
        let up = self.sigma[j] == 0;
        let mut theta = self.theta.clone();
        let w = params.weights();
        for (i, t) in theta.iter_mut().enumerate() {
            let wij = w[i * nv + j];
            if up {
                *t += wij;
            } else {
                *t = *t - wij;
            }
        }
        self.sigma[j] ^= 1;
        let proposal = params.energy_from_fields(&self.sigma, &theta).re();
        self.proposed += 1;
        let diff = proposal - self.log_weight;
        if diff >= 0.0 || self.rng.random::<f64>() < diff.exp() {
            self.theta = theta;
            self.log_weight = proposal;
            self.accepted += 1;
        } else {
            self.sigma[j] ^= 1;
        }
    }

    pub fn advance(&mut self, params: &RbmParams<T>, steps: usize) {
        for _ in 0..steps {
            self.step(params);
        }
    }

    /// `n` samples with `thin` proposals before each one.
    pub fn sample(&mut self, params: &RbmParams<T>, n: usize, thin: usize) -> Vec<Configuration> {
        (0..n)
            .map(|_| {
                self.advance(params, thin.max(1));
                self.configuration()
            })
            .collect()
    }
}

/// Fresh chain: `burn_in` sweeps, then `n_samples` configurations each
/// separated by `thin` proposals. Returns the samples and the acceptance rate
/// over the kept stretch.
pub fn metropolis_chain<T: Field>(
    params: &RbmParams<T>,
    n_samples: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
) -> (Vec<Configuration>, f64) {
    let mut chain = MarkovChain::new(params, seed, 0);
    chain.advance(params, burn_in * params.n_visible());
    chain.reset_counters();
    let samples = chain.sample(params, n_samples, thin);
    (samples, chain.acceptance_rate())
}
