use std::collections::HashMap;

use super::network;
use super::wavefunction::{all_configurations, RnnWavefunction};
use crate::checkpoint::csv_string;
use crate::error::{check_len, Error, Result};
use crate::lattice::{Configuration, RydbergModel};
use crate::optim::{AdamState, Optimizer};
use crate::rng::{stream_rng, Stream};

/// Stochastic gradient form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientEstimator {
    /// `(2/N_S) Σ ∂log ψ (E_loc − E)` with the batch mean as baseline.
    Baseline,
    /// `(2/N_S) Σ ∂log ψ E_loc`.
    Plain,
}

impl GradientEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            GradientEstimator::Baseline => "baseline",
            GradientEstimator::Plain => "plain",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmcStep {
    /// Mean local energy.
    pub energy: f64,
    pub stderr: f64,
    /// Sample variance of the local energy.
    pub variance: f64,
    pub gradient: Vec<f64>,
    /// Distinct configurations in the batch.
    pub n_unique: usize,
}

fn dedupe(samples: &[Configuration]) -> (Vec<Configuration>, Vec<f64>) {
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut unique = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for s in samples {
        let k = *index.entry(s.to_index()).or_insert_with(|| {
            unique.push(s.clone());
            counts.push(0.0);
            unique.len() - 1
        });
        counts[k] += 1.0;
    }
    (unique, counts)
}

/// Energy statistics and gradient from a fixed sample set. Repeated
/// configurations are evaluated once and weighted by multiplicity.
pub fn estimate_from_samples(
    wf: &RnnWavefunction,
    model: &RydbergModel,
    samples: &[Configuration],
    estimator: GradientEstimator,
) -> Result<VmcStep> {
    if samples.is_empty() {
        return Err(Error::invalid("empty sample set"));
    }
    check_len(wf.n_sites(), model.n_sites())?;
    let (unique, counts) = dedupe(samples);
    let trace = wf.trace(&unique)?;
    let eloc = wf.local_energies_from_trace(&trace, &unique, model);
    let ns = samples.len() as f64;
    let energy = eloc.iter().zip(&counts).map(|(e, c)| e * c).sum::<f64>() / ns;
    let sq = eloc
        .iter()
        .zip(&counts)
        .map(|(e, c)| c * (e - energy).powi(2))
        .sum::<f64>();
    let variance = if samples.len() > 1 {
        sq / (ns - 1.0)
    } else {
        0.0
    };
    let baseline = match estimator {
        GradientEstimator::Baseline => energy,
        GradientEstimator::Plain => 0.0,
    };
    let weights: Vec<f64> = eloc
        .iter()
        .zip(&counts)
        .map(|(e, c)| 2.0 * c / ns * (e - baseline))
        .collect();
    let mut gradient = vec![0.0; wf.params().n_params()];
    network::backward(wf.params(), &trace, &weights, &mut gradient);
    Ok(VmcStep {
        energy,
        stderr: (variance / ns).sqrt(),
        variance,
        gradient,
        n_unique: unique.len(),
    })
}

/// Draw `n_samples` and return the baseline estimator.
pub fn energy_and_gradient(
    wf: &RnnWavefunction,
    model: &RydbergModel,
    n_samples: usize,
    seed: u64,
) -> Result<VmcStep> {
    let (samples, _) = wf.sample(n_samples, seed);
    estimate_from_samples(wf, model, &samples, GradientEstimator::Baseline)
}

/// `∂ log ψ(σ)` for one configuration.
pub fn log_psi_gradient(wf: &RnnWavefunction, sigma: &Configuration) -> Result<Vec<f64>> {
    let trace = wf.trace(std::slice::from_ref(sigma))?;
    let mut g = vec![0.0; wf.params().n_params()];
    network::backward(wf.params(), &trace, &[1.0], &mut g);
    Ok(g)
}

/// Single-sample terms `2 ∂log ψ(σ_i)(E_loc(σ_i) − b)` whose mean is the
/// estimator; `b` is the batch mean for [`GradientEstimator::Baseline`].
pub fn per_sample_gradients(
    wf: &RnnWavefunction,
    model: &RydbergModel,
    samples: &[Configuration],
    estimator: GradientEstimator,
) -> Result<Vec<Vec<f64>>> {
    let eloc = wf.local_energies(samples, model)?;
    let baseline = match estimator {
        GradientEstimator::Baseline => eloc.iter().sum::<f64>() / eloc.len() as f64,
        GradientEstimator::Plain => 0.0,
    };
    samples
        .iter()
        .zip(&eloc)
        .map(|(s, e)| {
            let g = log_psi_gradient(wf, s)?;
            Ok(g.into_iter().map(|x| 2.0 * x * (e - baseline)).collect())
        })
        .collect()
}

/// `Σ_σ p(σ) E_loc(σ)` by enumeration.
pub fn exact_energy(wf: &RnnWavefunction, model: &RydbergModel) -> Result<f64> {
    Ok(exact_energy_and_gradient(wf, model, GradientEstimator::Baseline)?.0)
}

/// Energy and `2 Σ_σ p(σ) ∂log ψ(σ)(E_loc(σ) − b)` by enumeration, with `b`
/// the exact energy or zero.
pub fn exact_energy_and_gradient(
    wf: &RnnWavefunction,
    model: &RydbergModel,
    estimator: GradientEstimator,
) -> Result<(f64, Vec<f64>)> {
    check_len(wf.n_sites(), model.n_sites())?;
    let configs = all_configurations(wf.n_sites())?;
    let trace = wf.trace(&configs)?;
    let probs: Vec<f64> = trace.total_log_prob().into_iter().map(f64::exp).collect();
    let eloc = wf.local_energies_from_trace(&trace, &configs, model);
    let energy: f64 = probs.iter().zip(&eloc).map(|(p, e)| p * e).sum();
    let baseline = match estimator {
        GradientEstimator::Baseline => energy,
        GradientEstimator::Plain => 0.0,
    };
    let weights: Vec<f64> = probs
        .iter()
        .zip(&eloc)
        .map(|(p, e)| 2.0 * p * (e - baseline))
        .collect();
    let mut g = vec![0.0; wf.params().n_params()];
    network::backward(wf.params(), &trace, &weights, &mut g);
    Ok((energy, g))
}

#[derive(Debug, Clone)]
pub struct VmcOptions {
    pub n_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub estimator: GradientEstimator,
}

impl Default for VmcOptions {
    fn default() -> Self {
        Self {
            n_samples: 500,
            epochs: 1000,
            learning_rate: 1e-3,
            seed: 1234,
            estimator: GradientEstimator::Baseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmcEpoch {
    pub epoch: usize,
    pub energy: f64,
    pub stderr: f64,
    pub variance: f64,
    pub n_unique: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VmcHistory {
    pub epochs: Vec<VmcEpoch>,
}

impl VmcHistory {
    pub fn last(&self) -> Option<&VmcEpoch> {
        self.epochs.last()
    }

    /// Mean sampled energy over the final `k` epochs.
    pub fn tail_energy(&self, k: usize) -> Option<f64> {
        let k = k.min(self.epochs.len());
        if k == 0 {
            return None;
        }
        Some(
            self.epochs[self.epochs.len() - k..]
                .iter()
                .map(|e| e.energy)
                .sum::<f64>()
                / k as f64,
        )
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .epochs
            .iter()
            .map(|e| vec![e.epoch as f64, e.energy, e.stderr, e.variance])
            .collect();
        csv_string(&["epoch", "E_mean", "E_stderr", "Var_E_loc"], &rows)
    }
}

/// VMC loop: each epoch samples, estimates, and takes one Adam step. The
/// recorded energy is that of the batch before the update.
pub fn train(
    wf: &mut RnnWavefunction,
    model: &RydbergModel,
    opts: &VmcOptions,
) -> Result<VmcHistory> {
    train_with(wf, model, opts, |_| {})
}

/// [`train`] with a per-epoch callback.
pub fn train_with(
    wf: &mut RnnWavefunction,
    model: &RydbergModel,
    opts: &VmcOptions,
    mut on_epoch: impl FnMut(&VmcEpoch),
) -> Result<VmcHistory> {
    if opts.n_samples == 0 {
        return Err(Error::invalid("n_samples must be positive"));
    }
    check_len(wf.n_sites(), model.n_sites())?;
    let mut adam = AdamState::new(wf.params().n_params(), opts.learning_rate);
    let mut history = VmcHistory::default();
    for epoch in 1..=opts.epochs {
        let mut rng = stream_rng(opts.seed, Stream::RnnSampling, epoch as u64);
        let (samples, _) = wf.sample_with(opts.n_samples, &mut rng);
        let step = estimate_from_samples(wf, model, &samples, opts.estimator)?;
        adam.step(wf.params_mut().as_mut_slice(), &step.gradient)?;
        if wf.params().as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "parameters diverged at epoch {epoch}"
            )));
        }
        let rec = VmcEpoch {
            epoch,
            energy: step.energy,
            stderr: step.stderr,
            variance: step.variance,
            n_unique: step.n_unique,
        };
        on_epoch(&rec);
        history.epochs.push(rec);
    }
    Ok(history)
}
