//! Reference single-sample layer operations.

use crate::error::{Error, Result};
use crate::linalg::softmax_in_place;

/// Probability clamp used by [`cross_entropy`].
pub const PROB_CLAMP: f64 = 1e-12;

/// Convolution kernel `[out_channels, in_channels, ky, kx]`, no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub kernel: Vec<f64>,
    pub out_channels: usize,
    pub in_channels: usize,
    pub ky: usize,
    pub kx: usize,
}

impl ConvLayerParams {
    pub fn new(
        kernel: Vec<f64>,
        out_channels: usize,
        in_channels: usize,
        ky: usize,
        kx: usize,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || ky == 0 || kx == 0 {
            return Err(Error::invalid("kernel dimensions must be positive"));
        }
        crate::error::check_len(out_channels * in_channels * ky * kx, kernel.len())?;
        Ok(Self {
            kernel,
            out_channels,
            in_channels,
            ky,
            kx,
        })
    }

    fn at(&self, i: usize, l: usize, my: usize, mx: usize) -> f64 {
        self.kernel[((i * self.in_channels + l) * self.ky + my) * self.kx + mx]
    }
}

/// Valid cross-correlation with stride 1:
/// `out[i, y, x] = Σ_{l, my, mx} K[i, l, my, mx] · in[l, y + my, x + mx]`.
///
/// `input` is `[in_channels, h, w]`; the result is `[out, h−ky+1, w−kx+1]`.
pub fn conv2d_forward(
    input: &[f64],
    h: usize,
    w: usize,
    layer: &ConvLayerParams,
) -> Result<(Vec<f64>, usize, usize)> {
    crate::error::check_len(layer.in_channels * h * w, input.len())?;
    if h < layer.ky || w < layer.kx {
        return Err(Error::invalid(format!(
            "input {h}x{w} is smaller than the {}x{} kernel",
            layer.ky, layer.kx
        )));
    }
    let (ho, wo) = (h - layer.ky + 1, w - layer.kx + 1);
    let mut out = vec![0.0; layer.out_channels * ho * wo];
    for i in 0..layer.out_channels {
        for y in 0..ho {
            for x in 0..wo {
                let mut acc = 0.0;
                for l in 0..layer.in_channels {
                    for my in 0..layer.ky {
                        for mx in 0..layer.kx {
                            acc += layer.at(i, l, my, mx) * input[(l * h + y + my) * w + x + mx];
                        }
                    }
                }
                out[(i * ho + y) * wo + x] = acc;
            }
        }
    }
    Ok((out, ho, wo))
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Derivative of [`relu`], taking 0 at the kink.
pub fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Mean of `−ln P_n(y_n)` with `P` clamped to `[1e−12, 1 − 1e−12]`.
///
/// `probs` holds one two-class distribution per record.
pub fn cross_entropy(probs: &[[f64; 2]], labels: &[u8]) -> Result<f64> {
    crate::error::check_len(probs.len(), labels.len())?;
    if probs.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(p, &y)| -p[y as usize].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln())
        .sum();
    Ok(total / probs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_shapes_and_values() {
        let ones = ConvLayerParams::new(vec![1.0; 9], 1, 1, 3, 3).unwrap();
        let (out, ho, wo) = conv2d_forward(&vec![2.5; 64], 8, 8, &ones).unwrap();
        assert_eq!((ho, wo), (6, 6));
        assert!(out.iter().all(|&v| (v - 22.5).abs() < 1e-12));

        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let ident = ConvLayerParams::new(k, 1, 1, 3, 3).unwrap();
        let input: Vec<f64> = (0..25).map(|i| i as f64).collect();
        let (out, ho, wo) = conv2d_forward(&input, 5, 5, &ident).unwrap();
        assert_eq!((ho, wo), (3, 3));
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(out[y * 3 + x], input[(y + 1) * 5 + x + 1]);
            }
        }

        let second = ConvLayerParams::new(vec![0.1; 9], 1, 1, 3, 3).unwrap();
        let (_, h2, w2) = conv2d_forward(&vec![0.0; 36], 6, 6, &second).unwrap();
        assert_eq!((h2, w2), (4, 4));
        assert!(conv2d_forward(&[0.0; 4], 2, 2, &second).is_err());
    }

    #[test]
    fn activations() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(2.0), 2.0);
        assert_eq!(relu_grad(0.0), 0.0);
        assert_eq!(relu_grad(0.3), 1.0);
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let p = softmax(&[1f64.ln(), 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let a = softmax(&[0.3, -1.2]);
        let b = softmax(&[100.3, 98.8]);
        assert!((a[0] - b[0]).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy(&[[0.0, 1.0]], &[1]).unwrap() < 1e-11);
        let half = cross_entropy(&[[0.5, 0.5], [0.5, 0.5]], &[0, 1]).unwrap();
        assert!((half - 2f64.ln()).abs() < 1e-15);
        let wrong = cross_entropy(&[[1.0, 0.0]], &[1]).unwrap();
        assert!(wrong > 27.0);
        let worse = cross_entropy(&[[0.9, 0.1]], &[1]).unwrap();
        let better = cross_entropy(&[[0.6, 0.4]], &[1]).unwrap();
        assert!(worse > better);
    }
}
