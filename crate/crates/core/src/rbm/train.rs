use rand::Rng as _;

use super::field::Field;
use super::gradient::multi_basis_nll_gradient;
use super::observables::local_observable;
use super::params::{probabilities, rbm_statevector, RbmParams};
use super::sampler::{MarkovChain, DEFAULT_BURN_IN_SWEEPS};
use crate::checkpoint::csv_string;
use crate::data::{MeasurementDataset, MeasurementRecord};
use crate::error::{check_len, Error, Result};
use crate::exact::{fidelity, StateVector};
use crate::lattice::{Configuration, LocalOperator};
use crate::optim::OptimizerKind;
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone)]
pub struct TomographyOptions {
    pub iterations: usize,
    /// Data records per gradient step, drawn with replacement.
    pub n_samples_data: usize,
    /// Model samples per gradient step.
    pub n_samples: usize,
    /// Independent persistent chains sharing the model samples.
    pub n_chains: usize,
    pub burn_in_sweeps: usize,
    /// Proposals between kept samples; `None` means `N`.
    pub thin: Option<usize>,
    pub optimizer: OptimizerKind,
    /// Reported values average this many final iterations.
    pub average_last: usize,
    /// Fidelity and KL against the reference every this many iterations.
    pub diagnostics_every: usize,
    pub seed: u64,
}

impl Default for TomographyOptions {
    fn default() -> Self {
        Self {
            iterations: 1000,
            n_samples_data: 1000,
            n_samples: 2000,
            n_chains: 1,
            burn_in_sweeps: DEFAULT_BURN_IN_SWEEPS,
            thin: None,
            optimizer: OptimizerKind::adadelta(),
            average_last: 100,
            diagnostics_every: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Sample means of the tracked observables, in the order given.
    pub observables: Vec<f64>,
    pub acceptance: f64,
    pub fidelity: Option<f64>,
    /// `KL(|ψ_ref|² ‖ p_model)`.
    pub kl: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TomographyHistory {
    pub names: Vec<String>,
    pub records: Vec<IterationRecord>,
    pub average_last: usize,
}

impl TomographyHistory {
    fn tail(&self) -> &[IterationRecord] {
        let k = self.average_last.max(1).min(self.records.len());
        &self.records[self.records.len() - k..]
    }

    /// Observables averaged over the final `average_last` iterations.
    pub fn final_observables(&self) -> Vec<f64> {
        let tail = self.tail();
        (0..self.names.len())
            .map(|k| tail.iter().map(|r| r.observables[k]).sum::<f64>() / tail.len().max(1) as f64)
            .collect()
    }

    pub fn fidelity_curve(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.fidelity.map(|f| (r.iteration, f)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut header = vec!["iteration"];
        header.extend(self.names.iter().map(String::as_str));
        header.extend(["acceptance", "fidelity", "kl"]);
        let rows: Vec<Vec<f64>> = self
            .records
            .iter()
            .map(|r| {
                let mut row = vec![r.iteration as f64];
                row.extend(&r.observables);
                row.push(r.acceptance);
                row.push(r.fidelity.unwrap_or(f64::NAN));
                row.push(r.kl.unwrap_or(f64::NAN));
                row
            })
            .collect();
        csv_string(&header, &rows)
    }
}

/// Named operator whose sampled mean is logged every iteration.
pub struct TrackedObservable<'a> {
    pub name: String,
    pub operator: &'a (dyn LocalOperator + Sync),
}

impl<'a> TrackedObservable<'a> {
    pub fn new(name: impl Into<String>, operator: &'a (dyn LocalOperator + Sync)) -> Self {
        Self {
            name: name.into(),
            operator,
        }
    }
}

/// `Σ q log(q/p)` over the support of `q`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a / b).ln())
        .sum()
}

/// Fit `params` to measurement data by stochastic NLL descent.
///
/// Every iteration draws `n_samples_data` records with replacement, draws
/// `n_samples` model configurations from persistent Metropolis chains, takes
/// one optimizer step, and logs the tracked observables on the model samples.
pub fn train_tomography<T: Field>(
    params: &mut RbmParams<T>,
    dataset: &MeasurementDataset,
    observables: &[TrackedObservable<'_>],
    reference: Option<&StateVector>,
    opts: &TomographyOptions,
) -> Result<TomographyHistory> {
    let n = params.n_visible();
    check_len(n, dataset.n_sites())?;
    if dataset.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if opts.n_samples == 0 || opts.n_samples_data == 0 || opts.n_chains == 0 {
        return Err(Error::invalid("sample counts must be positive"));
    }
    for o in observables {
        check_len(n, o.operator.n_sites())?;
    }
    if let Some(r) = reference {
        check_len(n, r.n_sites())?;
    }
    let ref_probs = reference.map(StateVector::probabilities);
    let thin = opts.thin.unwrap_or(n).max(1);

    let mut optimizer = opts.optimizer.build(params.n_params() * T::WIDTH);
    let mut data_rng = stream_rng(opts.seed, Stream::RbmData, 0);
    let mut chains: Vec<MarkovChain<T>> = (0..opts.n_chains as u64)
        .map(|c| {
            let mut chain = MarkovChain::new(params, opts.seed, c);
            chain.advance(params, opts.burn_in_sweeps * n);
            chain
        })
        .collect();
    let per_chain = opts.n_samples.div_ceil(opts.n_chains);

    let mut history = TomographyHistory {
        names: observables.iter().map(|o| o.name.clone()).collect(),
        records: Vec::with_capacity(opts.iterations),
        average_last: opts.average_last,
    };
    let mut batch: Vec<MeasurementRecord> = Vec::with_capacity(opts.n_samples_data);
    for iteration in 1..=opts.iterations {
        batch.clear();
        for _ in 0..opts.n_samples_data {
            batch.push(dataset.records[data_rng.random_range(0..dataset.len())].clone());
        }
        let mut samples: Vec<Configuration> = Vec::with_capacity(per_chain * opts.n_chains);
        let (mut accepted, mut proposed) = (0, 0);
        for chain in &mut chains {
            chain.refresh(params);
            chain.reset_counters();
            samples.extend(chain.sample(params, per_chain, thin));
            accepted += chain.accepted();
            proposed += chain.proposed();
        }
        samples.truncate(opts.n_samples);

        let mut values = Vec::with_capacity(observables.len());
        for o in observables {
            let mut total = 0.0;
            for s in &samples {
                total += local_observable(params, s, o.operator)?.re;
            }
            values.push(total / samples.len() as f64);
        }

        let grad = multi_basis_nll_gradient(params, &batch, &samples)?;
        optimizer.step(T::as_reals_mut(params.as_mut_slice()), T::as_reals(&grad))?;
        if params
            .as_slice()
            .iter()
            .any(|x| !x.to_complex().is_finite())
        {
            return Err(Error::invalid(format!(
                "parameters diverged at iteration {iteration}"
            )));
        }

        let diagnose = opts.diagnostics_every > 0
            && (iteration % opts.diagnostics_every == 0 || iteration == opts.iterations);
        let (fid, kl) = match (reference, &ref_probs) {
            (Some(r), Some(q)) if diagnose => {
                let f = fidelity(&rbm_statevector(params)?, r)?;
                (Some(f), Some(kl_divergence(q, &probabilities(params)?)))
            }
            _ => (None, None),
        };
        history.records.push(IterationRecord {
            iteration,
            observables: values,
            acceptance: accepted as f64 / proposed.max(1) as f64,
            fidelity: fid,
            kl,
        });
    }
    Ok(history)
}

/// Centered moving average with window `w` (shrinking at the edges).
pub fn smooth(values: &[f64], w: usize) -> Vec<f64> {
    let half = w / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
