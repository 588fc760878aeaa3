//! Convolutional phase classifier.

mod layers;
mod model;

pub use layers::{
    conv2d_forward, cross_entropy, relu, relu_grad, softmax, ConvLayerParams, PROB_CLAMP,
};
pub use model::{
    accuracy, train, CnnArchitecture, CnnModel, EpochRecord, TrainHistory, TrainOptions, N_CLASSES,
};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::lattice::Configuration;

/// Mean output of both neurons over the snapshots at one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPoint {
    pub delta: f64,
    pub disordered: f64,
    pub ordered: f64,
}

/// `f(y, δ)`: average class probabilities per detuning, sorted by `δ`.
pub fn output_signal_curve(
    model: &CnnModel,
    sets: &[(f64, Vec<Configuration>)],
) -> Result<Vec<SignalPoint>> {
    let mut curve = Vec::with_capacity(sets.len());
    for (delta, configs) in sets {
        if configs.is_empty() {
            return Err(Error::invalid(format!("no snapshots at delta={delta}")));
        }
        let refs: Vec<&Configuration> = configs.iter().collect();
        let probs = model.predict(&refs)?;
        let n = probs.len() as f64;
        curve.push(SignalPoint {
            delta: *delta,
            disordered: probs.iter().map(|p| p[0]).sum::<f64>() / n,
            ordered: probs.iter().map(|p| p[1]).sum::<f64>() / n,
        });
    }
    curve.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    Ok(curve)
}

/// Accuracy per detuning, sorted by `δ`.
pub fn accuracy_by_detuning(model: &CnnModel, data: &LabeledDataset) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for delta in data.detunings() {
        let (_, acc) = model.evaluate(&data.at_detuning(delta))?;
        out.push((delta, acc));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Detuning where the ordered and disordered signals cross, by linear
/// interpolation between the first bracketing pair of grid points.
pub fn critical_point_estimate(curve: &[SignalPoint]) -> Result<f64> {
    let diff = |p: &SignalPoint| p.ordered - p.disordered;
    for w in curve.windows(2) {
        let (a, b) = (diff(&w[0]), diff(&w[1]));
        if a == 0.0 {
            return Ok(w[0].delta);
        }
        if a.signum() != b.signum() || b == 0.0 {
            return Ok(w[0].delta + (w[1].delta - w[0].delta) * a / (a - b));
        }
    }
    match curve.last() {
        Some(p) if diff(p) == 0.0 => Ok(p.delta),
        _ => Err(Error::NoCrossing),
    }
}

/// Number of sign changes of `ordered − disordered` along the curve.
pub fn crossing_count(curve: &[SignalPoint]) -> usize {
    let signs: Vec<f64> = curve
        .iter()
        .map(|p| p.ordered - p.disordered)
        .filter(|d| *d != 0.0)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(delta: f64, ordered: f64) -> SignalPoint {
        SignalPoint {
            delta,
            disordered: 1.0 - ordered,
            ordered,
        }
    }

    #[test]
    fn crossing_interpolates() {
        let curve = vec![
            point(-1.0, 0.1),
            point(0.0, 0.3),
            point(1.0, 0.9),
            point(2.0, 0.95),
        ];
        // diff goes −0.4 → 0.8 between 0 and 1: zero at 1/3.
        let c = critical_point_estimate(&curve).unwrap();
        assert!((c - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(crossing_count(&curve), 1);
        let flat = vec![point(-1.0, 0.1), point(0.0, 0.2)];
        assert!(matches!(
            critical_point_estimate(&flat),
            Err(Error::NoCrossing)
        ));
        let exact = vec![point(-1.0, 0.1), point(0.0, 0.5), point(1.0, 0.7)];
        assert_eq!(critical_point_estimate(&exact).unwrap(), 0.0);
    }

    #[test]
    fn signals_sum_to_one() {
        let m = CnnModel::new(CnnArchitecture::for_lattice(4, 4), 2).unwrap();
        let sets = vec![
            (
                1.0,
                vec![
                    Configuration::zeros(16),
                    "1010010110100101".parse().unwrap(),
                ],
            ),
            (-2.0, vec![Configuration::zeros(16)]),
        ];
        let curve = output_signal_curve(&m, &sets).unwrap();
        assert_eq!(curve[0].delta, -2.0);
        for p in curve {
            assert!((p.ordered + p.disordered - 1.0).abs() < 1e-12);
        }
    }
}
