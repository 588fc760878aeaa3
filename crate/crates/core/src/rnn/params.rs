use std::ops::Range;

use rand_distr::{Distribution, Uniform};

use crate::error::{check_len, Result};
use crate::linalg::sigmoid;
use crate::rng::{stream_rng, Stream};

/// Width of the one-hot input: occupation 0, occupation 1, start token.
pub const INPUT_DIM: usize = 3;
/// Input index of the start token fed before the first site.
pub const START_TOKEN: u8 = 2;

/// GRU cell and softmax head in one flat buffer.
///
/// Layout: the kernels `W_z`, `W_r`, `W̃` stacked as a `3n_h × (n_h + 3)`
/// row-major block acting on `[h; x]`, then the biases `b_z`, `b_r`, `b̃`,
/// then the softmax kernel `U` (`2 × n_h`) and bias `c` (2).
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    n_hidden: usize,
    data: Vec<f64>,
}

impl GruParams {
    pub fn n_params_for(n_hidden: usize) -> usize {
        3 * n_hidden * (n_hidden + INPUT_DIM) + 3 * n_hidden + 2 * n_hidden + 2
    }

    pub fn zeros(n_hidden: usize) -> Self {
        Self {
            n_hidden,
            data: vec![0.0; Self::n_params_for(n_hidden)],
        }
    }

    /// Glorot-uniform kernels and zero biases.
    pub fn glorot(n_hidden: usize, seed: u64) -> Self {
        let mut p = Self::zeros(n_hidden);
        let mut rng = stream_rng(seed, Stream::RnnInit, 0);
        let nh = n_hidden as f64;
        let gate = (6.0 / (nh + INPUT_DIM as f64 + nh)).sqrt();
        let dist = Uniform::new_inclusive(-gate, gate).expect("finite bounds");
        let r = p.kernels();
        for w in &mut p.data[r] {
            *w = dist.sample(&mut rng);
        }
        let head = (6.0 / (nh + 2.0)).sqrt();
        let dist = Uniform::new_inclusive(-head, head).expect("finite bounds");
        let r = p.head_kernel();
        for w in &mut p.data[r] {
            *w = dist.sample(&mut rng);
        }
        p
    }

    pub fn from_flat(n_hidden: usize, data: Vec<f64>) -> Result<Self> {
        check_len(Self::n_params_for(n_hidden), data.len())?;
        Ok(Self { n_hidden, data })
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_params(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Row stride of the kernel block.
    pub fn ld(&self) -> usize {
        self.n_hidden + INPUT_DIM
    }

    pub fn kernels(&self) -> Range<usize> {
        0..3 * self.n_hidden * self.ld()
    }

    /// Rows of gate `g` (0 update, 1 reset, 2 candidate) in the kernel block.
    pub fn gate_kernel(&self, g: usize) -> Range<usize> {
        let s = g * self.n_hidden * self.ld();
        s..s + self.n_hidden * self.ld()
    }

    pub fn gate_bias(&self, g: usize) -> Range<usize> {
        let s = self.kernels().end + g * self.n_hidden;
        s..s + self.n_hidden
    }

    pub fn head_kernel(&self) -> Range<usize> {
        let s = self.kernels().end + 3 * self.n_hidden;
        s..s + 2 * self.n_hidden
    }

    pub fn head_bias(&self) -> Range<usize> {
        let s = self.head_kernel().end;
        s..s + 2
    }

    fn affine(&self, g: usize, h: &[f64], x: &[f64]) -> Vec<f64> {
        let ld = self.ld();
        let k = &self.data[self.gate_kernel(g)];
        let b = &self.data[self.gate_bias(g)];
        (0..self.n_hidden)
            .map(|i| {
                let row = &k[i * ld..(i + 1) * ld];
                let mut a = b[i];
                for (w, v) in row[..self.n_hidden].iter().zip(h) {
                    a += w * v;
                }
                for (w, v) in row[self.n_hidden..].iter().zip(x) {
                    a += w * v;
                }
                a
            })
            .collect()
    }
}

/// One GRU update for a single chain:
/// `z = sig(W_z[h;x] + b_z)`, `r = sig(W_r[h;x] + b_r)`,
/// `h̃ = tanh(W̃[r⊙h; x] + b̃)`, `h' = (1−z)⊙h + z⊙h̃`.
pub fn gru_step(params: &GruParams, h_prev: &[f64], x_prev: &[f64]) -> Result<Vec<f64>> {
    check_len(params.n_hidden(), h_prev.len())?;
    check_len(INPUT_DIM, x_prev.len())?;
    let z: Vec<f64> = params
        .affine(0, h_prev, x_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let r: Vec<f64> = params
        .affine(1, h_prev, x_prev)
        .into_iter()
        .map(sigmoid)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let hc: Vec<f64> = params
        .affine(2, &rh, x_prev)
        .into_iter()
        .map(f64::tanh)
        .collect();
    Ok((0..params.n_hidden())
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * hc[i])
        .collect())
}

/// `softmax(U h + c)` over the two occupations.
pub fn conditional(params: &GruParams, h: &[f64]) -> Result<[f64; 2]> {
    check_len(params.n_hidden(), h.len())?;
    let u = &params.as_slice()[params.head_kernel()];
    let c = &params.as_slice()[params.head_bias()];
    let nh = params.n_hidden();
    let mut logits = [c[0], c[1]];
    for (k, l) in logits.iter_mut().enumerate() {
        for (w, v) in u[k * nh..(k + 1) * nh].iter().zip(h) {
            *l += w * v;
        }
    }
    let p1 = sigmoid(logits[1] - logits[0]);
    Ok([1.0 - p1, p1])
}

/// One-hot input vector for index `x` (0, 1 or the start token).
pub fn one_hot(x: u8) -> [f64; INPUT_DIM] {
    let mut v = [0.0; INPUT_DIM];
    v[x as usize] = 1.0;
    v
}
