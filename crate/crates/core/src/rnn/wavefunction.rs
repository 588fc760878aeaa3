use super::network::{self, log_prob, Trace};
use super::params::GruParams;
use crate::checkpoint::Checkpoint;
use crate::error::{check_len, Error, Result};
use crate::exact::StateVector;
use crate::lattice::{Configuration, LatticeGeometry, RydbergModel};
use crate::rng::{stream_rng, Rng, Stream};

/// Largest chain handled by full enumeration.
pub const ENUMERATION_LIMIT: usize = 16;

/// Row-major snake: even rows left to right, odd rows right to left.
/// Entry `t` is the lattice site visited at chain position `t`.
pub fn snake_order(geometry: &LatticeGeometry) -> Vec<usize> {
    let mut order = Vec::with_capacity(geometry.n_sites());
    for y in 0..geometry.ly() {
        if y % 2 == 0 {
            order.extend((0..geometry.lx()).map(|x| geometry.index(x, y)));
        } else {
            order.extend((0..geometry.lx()).rev().map(|x| geometry.index(x, y)));
        }
    }
    order
}

/// Autoregressive wavefunction `ψ(σ) = √p(σ)` with
/// `p(σ) = Π_t p(σ_{o(t)} | σ_{o(<t)})` along a fixed site order `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnWavefunction {
    params: GruParams,
    order: Vec<usize>,
}

impl RnnWavefunction {
    pub fn new(params: GruParams, order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &s in &order {
            if s >= order.len() || std::mem::replace(&mut seen[s], true) {
                return Err(Error::invalid("site order is not a permutation"));
            }
        }
        if order.is_empty() {
            return Err(Error::invalid("empty site order"));
        }
        Ok(Self { params, order })
    }

    /// Glorot-initialized GRU on the snake path of `geometry`.
    pub fn for_lattice(geometry: &LatticeGeometry, n_hidden: usize, seed: u64) -> Self {
        Self::new(GruParams::glorot(n_hidden, seed), snake_order(geometry))
            .expect("snake order is a permutation")
    }

    pub fn n_sites(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn params(&self) -> &GruParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut GruParams {
        &mut self.params
    }

    /// Chain-ordered columns `values[t][b]` for a batch.
    pub(crate) fn columns(&self, configs: &[Configuration]) -> Result<Vec<Vec<u8>>> {
        for c in configs {
            check_len(self.n_sites(), c.len())?;
        }
        Ok(self
            .order
            .iter()
            .map(|&site| configs.iter().map(|c| c.get(site)).collect())
            .collect())
    }

    pub(crate) fn configurations(&self, trace: &Trace) -> Vec<Configuration> {
        (0..trace.batch)
            .map(|b| {
                let mut bits = vec![0u8; self.n_sites()];
                for (t, &site) in self.order.iter().enumerate() {
                    bits[site] = trace.values[t][b];
                }
                Configuration::new(bits).expect("binary values")
            })
            .collect()
    }

    pub(crate) fn trace(&self, configs: &[Configuration]) -> Result<Trace> {
        Ok(network::forward(
            &self.params,
            self.columns(configs)?,
            configs.len(),
        ))
    }

    /// Independent exact samples and their `log p(σ)`.
    pub fn sample(&self, n_samples: usize, seed: u64) -> (Vec<Configuration>, Vec<f64>) {
        self.sample_with(n_samples, &mut stream_rng(seed, Stream::RnnSampling, 0))
    }

    pub fn sample_with(&self, n_samples: usize, rng: &mut Rng) -> (Vec<Configuration>, Vec<f64>) {
        let trace = network::sample(&self.params, self.n_sites(), n_samples, rng);
        (self.configurations(&trace), trace.total_log_prob())
    }

    /// `log ψ(σ) = ½ Σ_t log p(σ_t | σ_<t)`.
    pub fn log_psi(&self, sigma: &Configuration) -> Result<f64> {
        Ok(self.log_psi_batch(std::slice::from_ref(sigma))?[0])
    }

    pub fn log_psi_batch(&self, configs: &[Configuration]) -> Result<Vec<f64>> {
        Ok(self
            .trace(configs)?
            .total_log_prob()
            .into_iter()
            .map(|l| 0.5 * l)
            .collect())
    }

    /// `E_loc(σ) = V(σ) − (Ω/2) Σ_j ψ(flip_j σ)/ψ(σ)`.
    pub fn local_energy(&self, sigma: &Configuration, model: &RydbergModel) -> Result<f64> {
        Ok(self.local_energies(std::slice::from_ref(sigma), model)?[0])
    }

    /// Batched local energies. Flipping chain position `t` leaves the
    /// conditionals before `t` and the hidden state entering `t + 1`
    /// unchanged, so each flip resumes from the cached state.
    pub fn local_energies(
        &self,
        configs: &[Configuration],
        model: &RydbergModel,
    ) -> Result<Vec<f64>> {
        check_len(self.n_sites(), model.n_sites())?;
        let trace = self.trace(configs)?;
        Ok(self.local_energies_from_trace(&trace, configs, model))
    }

    pub(crate) fn local_energies_from_trace(
        &self,
        trace: &Trace,
        configs: &[Configuration],
        model: &RydbergModel,
    ) -> Vec<f64> {
        let n = self.n_sites();
        let b = trace.batch;
        let per_step: Vec<Vec<f64>> = (0..n).map(|t| trace.log_probs(t)).collect();
        let total: Vec<f64> = (0..b)
            .map(|k| per_step.iter().map(|s| s[k]).sum())
            .collect();
        let mut prefix = vec![0.0; b];
        let mut ratio_sum = vec![0.0; b];
        if model.omega() != 0.0 {
            for t in 0..n {
                let flipped: Vec<u8> = trace.values[t].iter().map(|s| 1 - s).collect();
                let suffix = if t + 1 < n {
                    network::resume_log_prob(
                        &self.params,
                        &trace.hs[t + 1],
                        &flipped,
                        &trace.values,
                        t + 1,
                    )
                } else {
                    vec![0.0; b]
                };
                for k in 0..b {
                    let lp = prefix[k] + log_prob(trace.steps[t].gap[k], flipped[k]) + suffix[k];
                    ratio_sum[k] += (0.5 * (lp - total[k])).exp();
                    prefix[k] += per_step[t][k];
                }
            }
        }
        configs
            .iter()
            .zip(&ratio_sum)
            .map(|(c, r)| model.diagonal_energy_index(c.to_index()) - 0.5 * model.omega() * r)
            .collect()
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        let order: Vec<String> = self.order.iter().map(|s| s.to_string()).collect();
        Checkpoint::new(self.params.as_slice().to_vec())
            .with("kind", "rnn")
            .with("n_sites", self.n_sites())
            .with("n_hidden", self.params.n_hidden())
            .with("site_order", order.join(","))
            .with("input_encoding", "one-hot(0,1,start)")
            .with(
                "layout",
                "W[z;r;cand](nh x (nh+3)),b[z;r;cand],U(2 x nh),c(2)",
            )
            .with("seed", seed)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.get("kind") != Some("rnn") {
            return Err(Error::invalid("checkpoint is not an RNN"));
        }
        let order = ck
            .get("site_order")
            .ok_or_else(|| Error::invalid("missing site_order"))?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::invalid(format!("site_order: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            GruParams::from_flat(ck.require("n_hidden")?, ck.params.clone())?,
            order,
        )
    }
}

/// All `2^N` configurations in basis-index order.
pub(crate) fn all_configurations(n: usize) -> Result<Vec<Configuration>> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            sites: n,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok((0..1u64 << n)
        .map(|s| Configuration::from_index(s, n))
        .collect())
}

/// `ψ(σ)` for every basis state.
pub fn rnn_statevector(wf: &RnnWavefunction) -> Result<StateVector> {
    let configs = all_configurations(wf.n_sites())?;
    let amps: Vec<f64> = wf
        .log_psi_batch(&configs)?
        .into_iter()
        .map(f64::exp)
        .collect();
    StateVector::from_real(&amps, wf.n_sites())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snake_visits_rows_alternately() {
        let g = LatticeGeometry::new(3, 3).unwrap();
        assert_eq!(snake_order(&g), vec![0, 1, 2, 5, 4, 3, 6, 7, 8]);
        assert!(RnnWavefunction::new(GruParams::zeros(2), vec![0, 0]).is_err());
    }

    #[test]
    fn zero_parameters_give_uniform_state() {
        let wf = RnnWavefunction::new(GruParams::zeros(3), (0..5).collect()).unwrap();
        let l = wf.log_psi(&"10110".parse().unwrap()).unwrap();
        assert!((l + 2.5 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn normalized_for_random_parameters() {
        let g = LatticeGeometry::new(3, 3).unwrap();
        let mut wf = RnnWavefunction::for_lattice(&g, 6, 4);
        for (i, v) in wf.params_mut().as_mut_slice().iter_mut().enumerate() {
            *v += ((i * 7) as f64).sin();
        }
        let psi = rnn_statevector(&wf).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sample_log_probs_match_log_psi() {
        let g = LatticeGeometry::new(2, 3).unwrap();
        let wf = RnnWavefunction::for_lattice(&g, 5, 1);
        let (configs, lps) = wf.sample(50, 9);
        let again = wf.log_psi_batch(&configs).unwrap();
        for (a, b) in lps.iter().zip(&again) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
        assert_eq!(wf.sample(50, 9).0, configs);
    }

    #[test]
    fn prefix_reuse_matches_direct_ratios() {
        let g = LatticeGeometry::new(2, 2).unwrap();
        let model = RydbergModel::new(g.clone(), 1.3, 0.7, 3.0, 3).unwrap();
        let wf = RnnWavefunction::for_lattice(&g, 4, 2);
        let configs = all_configurations(4).unwrap();
        let fast = wf.local_energies(&configs, &model).unwrap();
        for (c, e) in configs.iter().zip(&fast) {
            let here = wf.log_psi(c).unwrap();
            let mut want = model.diagonal_energy_index(c.to_index());
            for j in 0..4 {
                want -= 0.5 * model.omega() * (wf.log_psi(&c.flipped(j)).unwrap() - here).exp();
            }
            assert!((e - want).abs() < 1e-12);
        }
        let diag_only = RydbergModel::new(g, 0.0, 0.7, 3.0, 3).unwrap();
        let e = wf.local_energies(&configs, &diag_only).unwrap();
        for (c, v) in configs.iter().zip(e) {
            assert_eq!(v, diag_only.diagonal_energy_index(c.to_index()));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let wf = RnnWavefunction::for_lattice(&LatticeGeometry::new(2, 2).unwrap(), 3, 5);
        assert_eq!(
            RnnWavefunction::from_checkpoint(&wf.to_checkpoint(5)).unwrap(),
            wf
        );
    }
}
