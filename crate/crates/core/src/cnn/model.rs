//! Batched phase classifier: conv → ReLU (→ conv → ReLU) → flatten → dense
//! (ReLU) → dense → softmax, with a hand-written reverse pass.
//!
//! Activations are stored channels-last (`[batch, y, x, channel]`) so every
//! layer reduces to one GEMM over an im2col matrix.

use rand::Rng as _;

use super::layers::{relu, relu_grad, ConvLayerParams, PROB_CLAMP};
use crate::checkpoint::Checkpoint;
use crate::data::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::lattice::Configuration;
use crate::linalg::{gemm, softmax_in_place, Mat};
use crate::optim::{adam_update, AdamState};
use crate::rng::{stream_rng, Stream};

pub const N_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct CnnArchitecture {
    pub height: usize,
    pub width: usize,
    /// Output channels of each convolution layer.
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub hidden: usize,
}

impl CnnArchitecture {
    /// 32-channel 3×3 convolutions and a 64-unit hidden layer. The second
    /// convolution is only kept for lattices of at least 7×7.
    pub fn for_lattice(ly: usize, lx: usize) -> Self {
        let conv_channels = if ly.min(lx) >= 7 {
            vec![32, 32]
        } else {
            vec![32]
        };
        Self {
            height: ly,
            width: lx,
            conv_channels,
            kernel: 3,
            hidden: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv_channels.is_empty() || self.kernel == 0 || self.hidden == 0 {
            return Err(Error::invalid(
                "architecture needs a conv layer, a kernel and hidden units",
            ));
        }
        let shrink = self.conv_channels.len() * (self.kernel - 1);
        if self.height <= shrink || self.width <= shrink {
            return Err(Error::invalid(format!(
                "{}x{} input is too small for {} conv layers of size {}",
                self.height,
                self.width,
                self.conv_channels.len(),
                self.kernel
            )));
        }
        Ok(())
    }

    /// `(channels, h, w)` after each conv layer, starting from the input.
    pub fn shapes(&self) -> Vec<(usize, usize, usize)> {
        let mut out = vec![(1, self.height, self.width)];
        for &c in &self.conv_channels {
            let (_, h, w) = *out.last().unwrap();
            out.push((c, h + 1 - self.kernel, w + 1 - self.kernel));
        }
        out
    }

    pub fn flat_len(&self) -> usize {
        let (c, h, w) = *self.shapes().last().unwrap();
        c * h * w
    }

    fn layout(&self) -> Layout {
        let shapes = self.shapes();
        let mut offset = 0;
        let mut conv = Vec::new();
        for q in 0..self.conv_channels.len() {
            let len = shapes[q + 1].0 * shapes[q].0 * self.kernel * self.kernel;
            conv.push(offset..offset + len);
            offset += len;
        }
        let flat = self.flat_len();
        let w1 = offset..offset + self.hidden * flat;
        offset = w1.end;
        let b1 = offset..offset + self.hidden;
        offset = b1.end;
        let w2 = offset..offset + N_CLASSES * self.hidden;
        offset = w2.end;
        let b2 = offset..offset + N_CLASSES;
        Layout {
            conv,
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout().b2.end
    }

    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = self
            .shapes()
            .iter()
            .map(|(c, h, w)| format!("({c},{h},{w})"))
            .collect();
        parts.push(self.flat_len().to_string());
        parts.push(self.hidden.to_string());
        parts.push(N_CLASSES.to_string());
        parts.join(" -> ")
    }
}

#[derive(Debug, Clone)]
struct Layout {
    conv: Vec<std::ops::Range<usize>>,
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    arch: CnnArchitecture,
    params: Vec<f64>,
}

struct Cache {
    /// im2col matrix of each conv layer's input.
    cols: Vec<Vec<f64>>,
    /// Pre-activation output of each conv layer, `[batch·h·w, channels]`.
    z: Vec<Vec<f64>>,
    flat: Vec<f64>,
    a1: Vec<f64>,
    h1: Vec<f64>,
    probs: Vec<f64>,
}

fn im2col(input: &[f64], batch: usize, h: usize, w: usize, c: usize, k: usize) -> Vec<f64> {
    let (ho, wo) = (h + 1 - k, w + 1 - k);
    let width = c * k * k;
    let mut cols = vec![0.0; batch * ho * wo * width];
    for b in 0..batch {
        for y in 0..ho {
            for x in 0..wo {
                let row = &mut cols[((b * ho + y) * wo + x) * width..][..width];
                for my in 0..k {
                    for mx in 0..k {
                        let src = &input[((b * h + y + my) * w + x + mx) * c..][..c];
                        for (l, v) in src.iter().enumerate() {
                            row[(l * k + my) * k + mx] = *v;
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(dcols: &[f64], batch: usize, h: usize, w: usize, c: usize, k: usize) -> Vec<f64> {
    let (ho, wo) = (h + 1 - k, w + 1 - k);
    let width = c * k * k;
    let mut out = vec![0.0; batch * h * w * c];
    for b in 0..batch {
        for y in 0..ho {
            for x in 0..wo {
                let row = &dcols[((b * ho + y) * wo + x) * width..][..width];
                for my in 0..k {
                    for mx in 0..k {
                        let dst = &mut out[((b * h + y + my) * w + x + mx) * c..][..c];
                        for (l, v) in dst.iter_mut().enumerate() {
                            *v += row[(l * k + my) * k + mx];
                        }
                    }
                }
            }
        }
    }
    out
}

impl CnnModel {
    /// Glorot-uniform kernels, zero biases.
    pub fn new(arch: CnnArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        let shapes = arch.shapes();
        let mut params = vec![0.0; arch.n_params()];
        let mut rng = stream_rng(seed, Stream::CnnInit, 0);
        let mut fill =
            |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize, params: &mut [f64]| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for p in &mut params[range] {
                    *p = rng.random_range(-limit..limit);
                }
            };
        let kk = arch.kernel * arch.kernel;
        for (q, r) in layout.conv.iter().enumerate() {
            fill(
                r.clone(),
                shapes[q].0 * kk,
                shapes[q + 1].0 * kk,
                &mut params,
            );
        }
        fill(layout.w1.clone(), arch.flat_len(), arch.hidden, &mut params);
        fill(layout.w2.clone(), arch.hidden, N_CLASSES, &mut params);
        Ok(Self { arch, params })
    }

    pub fn zeros(arch: CnnArchitecture) -> Result<Self> {
        arch.validate()?;
        let n = arch.n_params();
        Ok(Self {
            arch,
            params: vec![0.0; n],
        })
    }

    pub fn from_params(arch: CnnArchitecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        check_len(arch.n_params(), params.len())?;
        Ok(Self { arch, params })
    }

    pub fn architecture(&self) -> &CnnArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Kernel of conv layer `q` in `[out, in, ky, kx]` order.
    pub fn conv_layer(&self, q: usize) -> ConvLayerParams {
        let shapes = self.arch.shapes();
        let r = self.arch.layout().conv[q].clone();
        ConvLayerParams::new(
            self.params[r].to_vec(),
            shapes[q + 1].0,
            shapes[q].0,
            self.arch.kernel,
            self.arch.kernel,
        )
        .expect("layout matches shapes")
    }

    /// Mutable view of the output-layer bias.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let r = self.arch.layout().b2;
        &mut self.params[r]
    }

    fn input_matrix(&self, configs: &[&Configuration]) -> Result<Vec<f64>> {
        let n = self.arch.height * self.arch.width;
        let mut x = Vec::with_capacity(configs.len() * n);
        for c in configs {
            check_len(n, c.len())?;
            x.extend(c.bits().iter().map(|&b| b as f64));
        }
        Ok(x)
    }

    fn forward_cache(&self, x: Vec<f64>, batch: usize) -> Cache {
        let layout = self.arch.layout();
        let shapes = self.arch.shapes();
        let k = self.arch.kernel;
        let mut cols = Vec::new();
        let mut zs = Vec::new();
        let mut act = x;
        for (q, r) in layout.conv.iter().enumerate() {
            let (c_in, h, w) = shapes[q];
            let (c_out, ho, wo) = shapes[q + 1];
            let col = im2col(&act, batch, h, w, c_in, k);
            let rows = batch * ho * wo;
            let mut z = vec![0.0; rows * c_out];
            gemm(
                1.0,
                Mat::new(&col, rows, c_in * k * k),
                Mat::new(&self.params[r.clone()], c_out, c_in * k * k).t(),
                0.0,
                &mut z,
            );
            act = z.iter().map(|&v| relu(v)).collect();
            cols.push(col);
            zs.push(z);
        }
        let flat_len = self.arch.flat_len();
        let hidden = self.arch.hidden;
        let flat = act;
        let mut a1 = vec![0.0; batch * hidden];
        for row in a1.chunks_mut(hidden) {
            row.copy_from_slice(&self.params[layout.b1.clone()]);
        }
        gemm(
            1.0,
            Mat::new(&flat, batch, flat_len),
            Mat::new(&self.params[layout.w1.clone()], hidden, flat_len).t(),
            1.0,
            &mut a1,
        );
        let h1: Vec<f64> = a1.iter().map(|&v| relu(v)).collect();
        let mut probs = vec![0.0; batch * N_CLASSES];
        for row in probs.chunks_mut(N_CLASSES) {
            row.copy_from_slice(&self.params[layout.b2.clone()]);
        }
        gemm(
            1.0,
            Mat::new(&h1, batch, hidden),
            Mat::new(&self.params[layout.w2.clone()], N_CLASSES, hidden).t(),
            1.0,
            &mut probs,
        );
        for row in probs.chunks_mut(N_CLASSES) {
            softmax_in_place(row);
        }
        Cache {
            cols,
            z: zs,
            flat,
            a1,
            h1,
            probs,
        }
    }

    /// Class distribution `P(y | σ)`.
    pub fn forward(&self, sigma: &Configuration) -> Result<[f64; 2]> {
        Ok(self.predict(&[sigma])?[0])
    }

    pub fn predict(&self, configs: &[&Configuration]) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(configs.len());
        for chunk in configs.chunks(1024) {
            let cache = self.forward_cache(self.input_matrix(chunk)?, chunk.len());
            out.extend(cache.probs.chunks(N_CLASSES).map(|p| [p[0], p[1]]));
        }
        Ok(out)
    }

    /// Mean cross-entropy of a batch and its exact gradient.
    ///
    /// Records whose clamped probability saturates contribute no gradient,
    /// matching the derivative of the clamp.
    pub fn loss_and_gradient(
        &self,
        configs: &[&Configuration],
        labels: &[u8],
    ) -> Result<(f64, Vec<f64>)> {
        self.loss_gradient_probs(configs, labels)
            .map(|(l, g, _)| (l, g))
    }

    fn loss_gradient_probs(
        &self,
        configs: &[&Configuration],
        labels: &[u8],
    ) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        check_len(configs.len(), labels.len())?;
        let batch = configs.len();
        if batch == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let cache = self.forward_cache(self.input_matrix(configs)?, batch);
        let layout = self.arch.layout();
        let shapes = self.arch.shapes();
        let k = self.arch.kernel;
        let hidden = self.arch.hidden;
        let flat_len = self.arch.flat_len();
        let mut grad = vec![0.0; self.params.len()];

        let mut loss = 0.0;
        let mut dlogits = vec![0.0; batch * N_CLASSES];
        for (b, &y) in labels.iter().enumerate() {
            if y as usize >= N_CLASSES {
                return Err(Error::invalid(format!("label {y} is not 0 or 1")));
            }
            let p = &cache.probs[b * N_CLASSES..][..N_CLASSES];
            let py = p[y as usize];
            loss -= py.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln();
            if py > PROB_CLAMP && py < 1.0 - PROB_CLAMP {
                for c in 0..N_CLASSES {
                    let onehot = if c == y as usize { 1.0 } else { 0.0 };
                    dlogits[b * N_CLASSES + c] = (p[c] - onehot) / batch as f64;
                }
            }
        }
        loss /= batch as f64;

        for row in dlogits.chunks(N_CLASSES) {
            for (g, d) in grad[layout.b2.clone()].iter_mut().zip(row) {
                *g += d;
            }
        }
        gemm(
            1.0,
            Mat::new(&dlogits, batch, N_CLASSES).t(),
            Mat::new(&cache.h1, batch, hidden),
            0.0,
            &mut grad[layout.w2.clone()],
        );
        let mut da1 = vec![0.0; batch * hidden];
        gemm(
            1.0,
            Mat::new(&dlogits, batch, N_CLASSES),
            Mat::new(&self.params[layout.w2.clone()], N_CLASSES, hidden),
            0.0,
            &mut da1,
        );
        for (d, a) in da1.iter_mut().zip(&cache.a1) {
            *d *= relu_grad(*a);
        }
        for row in da1.chunks(hidden) {
            for (g, d) in grad[layout.b1.clone()].iter_mut().zip(row) {
                *g += d;
            }
        }
        gemm(
            1.0,
            Mat::new(&da1, batch, hidden).t(),
            Mat::new(&cache.flat, batch, flat_len),
            0.0,
            &mut grad[layout.w1.clone()],
        );
        let mut dact = vec![0.0; batch * flat_len];
        gemm(
            1.0,
            Mat::new(&da1, batch, hidden),
            Mat::new(&self.params[layout.w1.clone()], hidden, flat_len),
            0.0,
            &mut dact,
        );

        for q in (0..layout.conv.len()).rev() {
            let (c_in, h, w) = shapes[q];
            let (c_out, ho, wo) = shapes[q + 1];
            let rows = batch * ho * wo;
            let width = c_in * k * k;
            let mut dz = dact;
            for (d, z) in dz.iter_mut().zip(&cache.z[q]) {
                *d *= relu_grad(*z);
            }
            gemm(
                1.0,
                Mat::new(&dz, rows, c_out).t(),
                Mat::new(&cache.cols[q], rows, width),
                0.0,
                &mut grad[layout.conv[q].clone()],
            );
            if q == 0 {
                break;
            }
            let mut dcols = vec![0.0; rows * width];
            gemm(
                1.0,
                Mat::new(&dz, rows, c_out),
                Mat::new(&self.params[layout.conv[q].clone()], c_out, width),
                0.0,
                &mut dcols,
            );
            dact = col2im(&dcols, batch, h, w, c_in, k);
        }
        Ok((loss, grad, cache.probs))
    }

    pub fn loss(&self, configs: &[&Configuration], labels: &[u8]) -> Result<f64> {
        let probs = self.predict(configs)?;
        super::layers::cross_entropy(&probs, labels)
    }

    pub fn evaluate(&self, data: &LabeledDataset) -> Result<(f64, f64)> {
        if data.is_empty() {
            return Ok((f64::NAN, f64::NAN));
        }
        let configs: Vec<&Configuration> = data.records.iter().map(|r| &r.config).collect();
        let labels: Vec<u8> = data.records.iter().map(|r| r.label).collect();
        let probs = self.predict(&configs)?;
        let loss = super::layers::cross_entropy(&probs, &labels)?;
        Ok((loss, accuracy(&probs, &labels)))
    }

    pub fn to_checkpoint(&self, seed: u64) -> Checkpoint {
        let channels: Vec<String> = self
            .arch
            .conv_channels
            .iter()
            .map(|c| c.to_string())
            .collect();
        Checkpoint::new(self.params.clone())
            .with("kind", "cnn")
            .with("height", self.arch.height)
            .with("width", self.arch.width)
            .with("conv_channels", channels.join(","))
            .with("kernel", self.arch.kernel)
            .with("hidden", self.arch.hidden)
            .with("architecture", self.arch.describe())
            .with("flatten_order", "y,x,channel")
            .with("seed", seed)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.get("kind") != Some("cnn") {
            return Err(Error::invalid("checkpoint is not a CNN"));
        }
        let conv_channels = ck
            .get("conv_channels")
            .unwrap_or("")
            .split(',')
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| Error::invalid("bad conv_channels"))
            })
            .collect::<Result<Vec<_>>>()?;
        let arch = CnnArchitecture {
            height: ck.require("height")?,
            width: ck.require("width")?,
            conv_channels,
            kernel: ck.require("kernel")?,
            hidden: ck.require("hidden")?,
        };
        Self::from_params(arch, ck.params.clone())
    }
}

/// Fraction of records whose most probable class equals the label; ties go
/// to the ordered class.
pub fn accuracy(probs: &[[f64; 2]], labels: &[u8]) -> f64 {
    if probs.is_empty() {
        return f64::NAN;
    }
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, &y)| (if p[1] >= p[0] { 1 } else { 0 }) == y)
        .count();
    hits as f64 / probs.len() as f64
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub test_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .epochs
            .iter()
            .map(|e| {
                vec![
                    e.epoch as f64,
                    e.loss,
                    e.accuracy,
                    e.test_loss,
                    e.test_accuracy,
                ]
            })
            .collect();
        crate::checkpoint::csv_string(
            &["epoch", "loss", "accuracy", "test_loss", "test_accuracy"],
            &rows,
        )
    }
}

/// Mini-batch Adam on the mean cross-entropy. Training loss and accuracy are
/// averaged over the batches of each epoch.
pub fn train(
    model: &mut CnnModel,
    train_set: &LabeledDataset,
    test_set: Option<&LabeledDataset>,
    opts: &TrainOptions,
) -> Result<TrainHistory> {
    if train_set.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let mut adam = AdamState::new(model.params.len(), opts.learning_rate);
    let mut history = TrainHistory::default();
    for epoch in 0..opts.epochs {
        let mut loss_sum = 0.0;
        let mut hits = 0.0;
        for batch in
            crate::data::batches(train_set.len(), opts.batch_size, opts.seed, epoch as u64)?
        {
            let configs: Vec<&Configuration> = batch
                .iter()
                .map(|&i| &train_set.records[i].config)
                .collect();
            let labels: Vec<u8> = batch.iter().map(|&i| train_set.records[i].label).collect();
            let (loss, grad, flat_probs) = model.loss_gradient_probs(&configs, &labels)?;
            let probs: Vec<[f64; 2]> = flat_probs.chunks(N_CLASSES).map(|p| [p[0], p[1]]).collect();
            loss_sum += loss * batch.len() as f64;
            hits += accuracy(&probs, &labels) * batch.len() as f64;
            adam_update(&mut adam, &mut model.params, &grad)?;
        }
        let (test_loss, test_accuracy) = match test_set {
            Some(t) => model.evaluate(t)?,
            None => (f64::NAN, f64::NAN),
        };
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            loss: loss_sum / train_set.len() as f64,
            accuracy: hits / train_set.len() as f64,
            test_loss,
            test_accuracy,
        });
    }
    Ok(history)
}
