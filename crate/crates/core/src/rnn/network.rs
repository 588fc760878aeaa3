//! Batched GRU forward pass and its reverse (backpropagation through time).

use rand::Rng as _;

use super::params::{GruParams, START_TOKEN};
use crate::linalg::{gemm, gemm_ld, sigmoid, softplus, Mat};
use crate::rng::Rng;

/// `log p(s)` from the logit gap `d = l₁ − l₀`.
pub(crate) fn log_prob(d: f64, s: u8) -> f64 {
    if s == 1 {
        -softplus(-d)
    } else {
        -softplus(d)
    }
}

/// Activations of one step for a batch.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    /// Update and reset gates, `B × 2n_h` (update in the first half).
    pub zr: Vec<f64>,
    /// Candidate state, `B × n_h`.
    pub hc: Vec<f64>,
    /// Logit gap per row.
    pub gap: Vec<f64>,
}

/// One batched GRU step. Returns the cache and the new hidden states.
pub(crate) fn step(params: &GruParams, h_prev: &[f64], x: &[u8]) -> (StepCache, Vec<f64>) {
    let nh = params.n_hidden();
    let ld = params.ld();
    let b = x.len();
    let data = params.as_slice();
    let kernels = &data[params.kernels()];

    let mut zr = vec![0.0; b * 2 * nh];
    gemm(
        1.0,
        Mat::new(h_prev, b, nh),
        Mat::strided(kernels, 2 * nh, nh, ld).t(),
        0.0,
        &mut zr,
    );
    let bias_z = &data[params.gate_bias(0)];
    let bias_r = &data[params.gate_bias(1)];
    for (row, &xi) in zr.chunks_exact_mut(2 * nh).zip(x) {
        let col = nh + xi as usize;
        for i in 0..nh {
            row[i] = sigmoid(row[i] + bias_z[i] + kernels[i * ld + col]);
            row[nh + i] = sigmoid(row[nh + i] + bias_r[i] + kernels[(nh + i) * ld + col]);
        }
    }

    let mut rh = vec![0.0; b * nh];
    for ((o, row), h) in rh
        .chunks_exact_mut(nh)
        .zip(zr.chunks_exact(2 * nh))
        .zip(h_prev.chunks_exact(nh))
    {
        for i in 0..nh {
            o[i] = row[nh + i] * h[i];
        }
    }
    let cand = &kernels[params.gate_kernel(2)];
    let mut hc = vec![0.0; b * nh];
    gemm(
        1.0,
        Mat::new(&rh, b, nh),
        Mat::strided(cand, nh, nh, ld).t(),
        0.0,
        &mut hc,
    );
    let bias_c = &data[params.gate_bias(2)];
    for (row, &xi) in hc.chunks_exact_mut(nh).zip(x) {
        let col = nh + xi as usize;
        for i in 0..nh {
            row[i] = (row[i] + bias_c[i] + cand[i * ld + col]).tanh();
        }
    }

    let mut h = vec![0.0; b * nh];
    for k in 0..b {
        let (z, c, hp) = (
            &zr[k * 2 * nh..k * 2 * nh + nh],
            &hc[k * nh..(k + 1) * nh],
            &h_prev[k * nh..(k + 1) * nh],
        );
        for i in 0..nh {
            h[k * nh + i] = (1.0 - z[i]) * hp[i] + z[i] * c[i];
        }
    }

    let u = &data[params.head_kernel()];
    let c = &data[params.head_bias()];
    let gap = h
        .chunks_exact(nh)
        .map(|row| {
            let mut d = c[1] - c[0];
            for i in 0..nh {
                d += (u[nh + i] - u[i]) * row[i];
            }
            d
        })
        .collect();
    (StepCache { zr, hc, gap }, h)
}

/// Stored forward pass over `B` sequences of length `N`.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub batch: usize,
    /// `hs[t]` is the state consumed by step `t`; `hs[N]` is the last output.
    pub hs: Vec<Vec<f64>>,
    pub steps: Vec<StepCache>,
    /// `values[t][b]`: occupation at chain position `t`.
    pub values: Vec<Vec<u8>>,
}

impl Trace {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    /// Input fed to step `t`.
    pub fn input(&self, t: usize, b: usize) -> u8 {
        if t == 0 {
            START_TOKEN
        } else {
            self.values[t - 1][b]
        }
    }

    /// `log p(s_t | s_<t)` per step and row.
    pub fn log_probs(&self, t: usize) -> Vec<f64> {
        self.steps[t]
            .gap
            .iter()
            .zip(&self.values[t])
            .map(|(d, s)| log_prob(*d, *s))
            .collect()
    }

    /// `log p(s)` per row.
    pub fn total_log_prob(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.batch];
        for t in 0..self.n_steps() {
            for (o, l) in out.iter_mut().zip(self.log_probs(t)) {
                *o += l;
            }
        }
        out
    }
}

/// Teacher-forced pass over given sequences (`values[t][b]`).
pub(crate) fn forward(params: &GruParams, values: Vec<Vec<u8>>, batch: usize) -> Trace {
    let nh = params.n_hidden();
    let mut hs = vec![vec![0.0; batch * nh]];
    let mut steps = Vec::with_capacity(values.len());
    let mut x = vec![START_TOKEN; batch];
    for col in &values {
        let (cache, h) = step(params, hs.last().expect("initial state"), &x);
        steps.push(cache);
        hs.push(h);
        x.copy_from_slice(col);
    }
    Trace {
        batch,
        hs,
        steps,
        values,
    }
}

/// Ancestral sampling of `batch` sequences of length `n`. Rows draw their
/// uniforms in order, step by step.
pub(crate) fn sample(params: &GruParams, n: usize, batch: usize, rng: &mut Rng) -> Trace {
    let nh = params.n_hidden();
    let mut hs = vec![vec![0.0; batch * nh]];
    let mut steps = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut x = vec![START_TOKEN; batch];
    for _ in 0..n {
        let (cache, h) = step(params, hs.last().expect("initial state"), &x);
        let col: Vec<u8> = cache
            .gap
            .iter()
            .map(|d| u8::from(rng.random::<f64>() < sigmoid(*d)))
            .collect();
        x.copy_from_slice(&col);
        values.push(col);
        steps.push(cache);
        hs.push(h);
    }
    Trace {
        batch,
        hs,
        steps,
        values,
    }
}

/// `Σ_t log p` of steps `start..` resumed from `h_start`, where step `start`
/// is fed `first_input` and later steps the given values.
pub(crate) fn resume_log_prob(
    params: &GruParams,
    h_start: &[f64],
    first_input: &[u8],
    values: &[Vec<u8>],
    start: usize,
) -> Vec<f64> {
    let batch = first_input.len();
    let mut out = vec![0.0; batch];
    let mut h = h_start.to_vec();
    let mut x = first_input.to_vec();
    for col in &values[start..] {
        let (cache, next) = step(params, &h, &x);
        for ((o, d), s) in out.iter_mut().zip(&cache.gap).zip(col) {
            *o += log_prob(*d, *s);
        }
        h = next;
        x.copy_from_slice(col);
    }
    out
}

/// Gradient of `Σ_b weight_b · log ψ(s_b)` with `log ψ = ½ log p`, added to
/// `grad`.
pub(crate) fn backward(params: &GruParams, trace: &Trace, weights: &[f64], grad: &mut [f64]) {
    let nh = params.n_hidden();
    let ld = params.ld();
    let b = trace.batch;
    let data = params.as_slice();
    let kernels = &data[params.kernels()];
    let u = &data[params.head_kernel()];
    let (kr, br_z, br_r, br_c, ur, cr) = (
        params.kernels(),
        params.gate_bias(0),
        params.gate_bias(1),
        params.gate_bias(2),
        params.head_kernel(),
        params.head_bias(),
    );

    let mut carry = vec![0.0; b * nh];
    let mut dzr = vec![0.0; b * 2 * nh];
    let mut dac = vec![0.0; b * nh];
    let mut rh = vec![0.0; b * nh];
    let mut drh = vec![0.0; b * nh];
    for t in (0..trace.n_steps()).rev() {
        let cache = &trace.steps[t];
        let h_prev = &trace.hs[t];
        let h_new = &trace.hs[t + 1];
        let mut dh = std::mem::take(&mut carry);

        // Softmax head: ∂ log p(s)/∂gap = s − p₁.
        let mut dc = 0.0;
        for k in 0..b {
            let dd = weights[k] * 0.5 * (trace.values[t][k] as f64 - sigmoid(cache.gap[k]));
            if dd == 0.0 {
                continue;
            }
            dc += dd;
            let row = &h_new[k * nh..(k + 1) * nh];
            for i in 0..nh {
                grad[ur.start + nh + i] += dd * row[i];
                grad[ur.start + i] -= dd * row[i];
                dh[k * nh + i] += dd * (u[nh + i] - u[i]);
            }
        }
        grad[cr.start + 1] += dc;
        grad[cr.start] -= dc;

        // Interpolation and candidate.
        let mut dh_prev = vec![0.0; b * nh];
        for k in 0..b {
            let zr = &cache.zr[k * 2 * nh..(k + 1) * 2 * nh];
            let hc = &cache.hc[k * nh..(k + 1) * nh];
            let hp = &h_prev[k * nh..(k + 1) * nh];
            for i in 0..nh {
                let g = dh[k * nh + i];
                let z = zr[i];
                dzr[k * 2 * nh + i] = g * (hc[i] - hp[i]) * z * (1.0 - z);
                dac[k * nh + i] = g * z * (1.0 - hc[i] * hc[i]);
                dh_prev[k * nh + i] = g * (1.0 - z);
                rh[k * nh + i] = zr[nh + i] * hp[i];
            }
        }
        let cand = params.gate_kernel(2);
        gemm_ld(
            1.0,
            Mat::new(&dac, b, nh).t(),
            Mat::new(&rh, b, nh),
            1.0,
            &mut grad[kr.start + cand.start..kr.start + cand.end],
            ld,
        );
        gemm(
            1.0,
            Mat::new(&dac, b, nh),
            Mat::strided(&kernels[cand.clone()], nh, nh, ld),
            0.0,
            &mut drh,
        );
        for k in 0..b {
            let zr = &cache.zr[k * 2 * nh..(k + 1) * 2 * nh];
            let hp = &h_prev[k * nh..(k + 1) * nh];
            let col = nh + trace.input(t, k) as usize;
            for i in 0..nh {
                let r = zr[nh + i];
                dzr[k * 2 * nh + nh + i] = drh[k * nh + i] * hp[i] * r * (1.0 - r);
                dh_prev[k * nh + i] += drh[k * nh + i] * r;
                let a = dac[k * nh + i];
                grad[cand.start + i * ld + col] += a;
                grad[br_c.start + i] += a;
                let (gz, gr) = (dzr[k * 2 * nh + i], dzr[k * 2 * nh + nh + i]);
                grad[i * ld + col] += gz;
                grad[(nh + i) * ld + col] += gr;
                grad[br_z.start + i] += gz;
                grad[br_r.start + i] += gr;
            }
        }

        // Gates.
        gemm_ld(
            1.0,
            Mat::new(&dzr, b, 2 * nh).t(),
            Mat::new(h_prev, b, nh),
            1.0,
            &mut grad[kr.start..kr.start + 2 * nh * ld],
            ld,
        );
        gemm(
            1.0,
            Mat::new(&dzr, b, 2 * nh),
            Mat::strided(kernels, 2 * nh, nh, ld),
            1.0,
            &mut dh_prev,
        );
        carry = dh_prev;
    }
}

#[cfg(test)]
mod tests {
    use super::super::params::{conditional, gru_step, one_hot};
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn batched_step_matches_single_step() {
        let p = GruParams::glorot(5, 3);
        let h: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = [1u8, START_TOKEN];
        let (cache, out) = step(&p, &h, &x);
        for k in 0..2 {
            let want = gru_step(&p, &h[k * 5..(k + 1) * 5], &one_hot(x[k])).unwrap();
            for i in 0..5 {
                assert!((out[k * 5 + i] - want[i]).abs() < 1e-14);
            }
            let c = conditional(&p, &want).unwrap();
            assert!((sigmoid(cache.gap[k]) - c[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn sampling_trace_replays_under_teacher_forcing() {
        let p = GruParams::glorot(4, 1);
        let mut rng = rng_from_seed(5);
        let s = sample(&p, 6, 20, &mut rng);
        let f = forward(&p, s.values.clone(), 20);
        for (a, b) in s.total_log_prob().iter().zip(f.total_log_prob()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut p = GruParams::glorot(4, 2);
        for (i, v) in p.as_mut_slice().iter_mut().enumerate() {
            *v += 0.05 * ((i as f64) * 1.3).cos();
        }
        let values = vec![vec![1, 0, 1], vec![0, 0, 1], vec![1, 1, 0]];
        let weights = [0.7, -1.2, 0.4];
        let objective = |q: &GruParams| -> f64 {
            let t = forward(q, values.clone(), 3);
            t.total_log_prob()
                .iter()
                .zip(&weights)
                .map(|(l, w)| 0.5 * l * w)
                .sum()
        };
        let trace = forward(&p, values.clone(), 3);
        let mut grad = vec![0.0; p.n_params()];
        backward(&p, &trace, &weights, &mut grad);
        let h = 1e-6;
        for k in 0..p.n_params() {
            let mut a = p.clone();
            a.as_mut_slice()[k] += h;
            let mut b = p.clone();
            b.as_mut_slice()[k] -= h;
            let fd = (objective(&a) - objective(&b)) / (2.0 * h);
            let scale = fd.abs().max(grad[k].abs()).max(1e-4);
            assert!(
                (fd - grad[k]).abs() / scale < 1e-4,
                "param {k}: fd {fd} vs {}",
                grad[k]
            );
        }
    }
}
