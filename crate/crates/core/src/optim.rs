//! First-order optimizers over flat parameter buffers.

use crate::error::{check_len, Result};

pub trait Optimizer {
    /// Apply one update `params ← params − step(grads)`.
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()>;
}

/// `θ ← θ − lr·g`.
pub fn sgd_update(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    check_len(params.len(), grads.len())?;
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        sgd_update(params, grads, self.lr)
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }
}

/// Bias-corrected Adam step.
pub fn adam_update(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    check_len(state.m.len(), params.len())?;
    check_len(params.len(), grads.len())?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

impl Optimizer for AdamState {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        adam_update(self, params, grads)
    }
}

#[derive(Debug, Clone)]
pub struct AdaDeltaState {
    pub rho: f64,
    pub eps: f64,
    pub mean_sq_grad: Vec<f64>,
    pub mean_sq_update: Vec<f64>,
}

impl AdaDeltaState {
    pub fn new(n_params: usize) -> Self {
        Self::with_params(n_params, 0.95, 1e-7)
    }

    pub fn with_params(n_params: usize, rho: f64, eps: f64) -> Self {
        Self {
            rho,
            eps,
            mean_sq_grad: vec![0.0; n_params],
            mean_sq_update: vec![0.0; n_params],
        }
    }
}

/// AdaDelta: `E[g²] ← ρE[g²] + (1−ρ)g²`,
/// `Δ = √(E[Δ²]+ε)/√(E[g²]+ε)·g`, `E[Δ²] ← ρE[Δ²] + (1−ρ)Δ²`, `θ ← θ − Δ`.
pub fn adadelta_update(state: &mut AdaDeltaState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    check_len(state.mean_sq_grad.len(), params.len())?;
    check_len(params.len(), grads.len())?;
    let (rho, eps) = (state.rho, state.eps);
    for i in 0..params.len() {
        let g = grads[i];
        let eg = &mut state.mean_sq_grad[i];
        *eg = rho * *eg + (1.0 - rho) * g * g;
        let dx = ((state.mean_sq_update[i] + eps).sqrt() / (*eg + eps).sqrt()) * g;
        let ed = &mut state.mean_sq_update[i];
        *ed = rho * *ed + (1.0 - rho) * dx * dx;
        params[i] -= dx;
    }
    Ok(())
}

impl Optimizer for AdaDeltaState {
    fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        adadelta_update(self, params, grads)
    }
}

/// Optimizer choice as recorded in run configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { lr: f64 },
    Adam { lr: f64 },
    AdaDelta { rho: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adadelta() -> Self {
        OptimizerKind::AdaDelta {
            rho: 0.95,
            eps: 1e-7,
        }
    }

    /// Parse `sgd`, `adam` or `adadelta`; `lr` is ignored by AdaDelta.
    pub fn from_name(name: &str, lr: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd { lr }),
            "adam" => Ok(OptimizerKind::Adam { lr }),
            "adadelta" => Ok(Self::adadelta()),
            other => Err(crate::error::Error::invalid(format!(
                "unknown optimizer '{other}'"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd { .. } => "sgd",
            OptimizerKind::Adam { .. } => "adam",
            OptimizerKind::AdaDelta { .. } => "adadelta",
        }
    }

    pub fn build(&self, n_params: usize) -> Box<dyn Optimizer + Send> {
        match *self {
            OptimizerKind::Sgd { lr } => Box::new(Sgd { lr }),
            OptimizerKind::Adam { lr } => Box::new(AdamState::new(n_params, lr)),
            OptimizerKind::AdaDelta { rho, eps } => {
                Box::new(AdaDeltaState::with_params(n_params, rho, eps))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimize(opt: &mut dyn Optimizer) -> (f64, usize) {
        let mut theta = [1.0f64];
        for step in 0..10_000 {
            if theta[0].abs() < 1e-3 {
                return (theta[0], step);
            }
            let g = [theta[0]];
            opt.step(&mut theta, &g).unwrap();
        }
        (theta[0], 10_000)
    }

    #[test]
    fn sgd_examples() {
        let mut p = [1.0];
        sgd_update(&mut p, &[2.0], 0.1).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
        let mut q = [1.5, -2.0];
        sgd_update(&mut q, &[0.0, 0.0], 0.3).unwrap();
        assert_eq!(q, [1.5, -2.0]);
        sgd_update(&mut q, &[4.0, 1.0], 0.0).unwrap();
        assert_eq!(q, [1.5, -2.0]);
        assert!(sgd_update(&mut q, &[1.0], 0.1).is_err());
    }

    #[test]
    fn adam_first_step() {
        let mut st = AdamState::new(1, 1e-3);
        let mut p = [0.5];
        adam_update(&mut st, &mut p, &[0.0]).unwrap();
        assert_eq!(p[0], 0.5);

        for g in [3.0, -0.2] {
            let mut st = AdamState::new(1, 1e-3);
            let mut p = [0.0];
            adam_update(&mut st, &mut p, &[g]).unwrap();
            // m̂ = g and v̂ = g², so the step is lr·g/(|g|+ε).
            let want = -1e-3 * g / (g.abs() + 1e-8);
            assert!((p[0] - want).abs() < 1e-18);
            assert!(p[0].signum() == -g.signum());
        }
    }

    #[test]
    fn adadelta_first_step_and_decay() {
        let g = 0.7;
        let mut st = AdaDeltaState::new(1);
        let mut p = [0.0];
        adadelta_update(&mut st, &mut p, &[g]).unwrap();
        let eg = (1.0 - 0.95) * g * g;
        let dx = (1e-7f64).sqrt() / (eg + 1e-7).sqrt() * g;
        assert!((p[0] + dx).abs() < 1e-18);
        assert!((st.mean_sq_grad[0] - eg).abs() < 1e-18);
        assert!((st.mean_sq_update[0] - (1.0 - 0.95) * dx * dx).abs() < 1e-24);

        let (eg0, ed0) = (st.mean_sq_grad[0], st.mean_sq_update[0]);
        let before = p[0];
        adadelta_update(&mut st, &mut p, &[0.0]).unwrap();
        assert_eq!(p[0], before);
        assert!((st.mean_sq_grad[0] - 0.95 * eg0).abs() < 1e-18);
        assert!((st.mean_sq_update[0] - 0.95 * ed0).abs() < 1e-24);
    }

    #[test]
    fn quadratic_convergence() {
        let (_, s) = minimize(&mut Sgd { lr: 0.1 });
        assert!(s < 10_000);
        let (_, s) = minimize(&mut AdamState::new(1, 1e-3));
        assert!(s < 10_000, "adam took {s}");
        let (_, s) = minimize(&mut AdaDeltaState::new(1));
        assert!(s < 10_000, "adadelta took {s}");
    }

    proptest! {
        #[test]
        fn updates_are_elementwise(params in prop::collection::vec(-5.0f64..5.0, 1..12),
                                   seed in any::<u64>(), steps in 1usize..5) {
            let n = params.len();
            let grads: Vec<Vec<f64>> = (0..steps)
                .map(|s| (0..n).map(|i| ((seed.wrapping_add((s * 31 + i) as u64) % 1000) as f64 / 250.0) - 2.0).collect())
                .collect();
            let perm: Vec<usize> = (0..n).rev().collect();
            let permute = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<f64>>();

            let mut a = params.clone();
            let mut b = permute(&params);
            let mut sa = AdamState::new(n, 1e-2);
            let mut sb = AdamState::new(n, 1e-2);
            let mut da = AdaDeltaState::new(n);
            let mut db = AdaDeltaState::new(n);
            for g in &grads {
                adam_update(&mut sa, &mut a, g).unwrap();
                adam_update(&mut sb, &mut b, &permute(g)).unwrap();
                adadelta_update(&mut da, &mut a, g).unwrap();
                adadelta_update(&mut db, &mut b, &permute(g)).unwrap();
            }
            prop_assert_eq!(permute(&b), a);
        }
    }
}
