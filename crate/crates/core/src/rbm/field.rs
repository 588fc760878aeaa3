use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};

use crate::linalg;

/// Scalar type of the RBM parameters: `f64` for positive wavefunctions,
/// `Complex64` for states with a sign structure.
pub trait Field:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
{
    /// `"real"` or `"complex"`, recorded in checkpoints.
    const NAME: &'static str;
    /// Number of `f64` components per scalar.
    const WIDTH: usize;

    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn to_complex(self) -> Complex64;
    fn re(self) -> f64;
    /// `log(1 + e^z)` on the principal branch.
    fn softplus(self) -> Self;
    fn sigmoid(self) -> Self;
    /// Convert `∂ℰ`-space gradient `g` into the update direction for the
    /// real components of the parameter (`g` for real parameters,
    /// `conj(g)` packing `(∂/∂Re, ∂/∂Im)` for complex ones).
    fn from_gradient(g: Complex64) -> Self;
    fn gaussian(rng: &mut impl rand::Rng, std: f64) -> Self;

    fn as_reals(v: &[Self]) -> &[f64];
    fn as_reals_mut(v: &mut [Self]) -> &mut [f64];
    fn from_reals(v: &[f64]) -> Vec<Self>;
}

impl Field for f64 {
    const NAME: &'static str = "real";
    const WIDTH: usize = 1;

    fn zero() -> Self {
        0.0
    }

    fn from_real(x: f64) -> Self {
        x
    }

    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }

    fn re(self) -> f64 {
        self
    }

    fn softplus(self) -> Self {
        linalg::softplus(self)
    }

    fn sigmoid(self) -> Self {
        linalg::sigmoid(self)
    }

    fn from_gradient(g: Complex64) -> Self {
        g.re
    }

    fn gaussian(rng: &mut impl rand::Rng, std: f64) -> Self {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    }

    fn as_reals(v: &[Self]) -> &[f64] {
        v
    }

    fn as_reals_mut(v: &mut [Self]) -> &mut [f64] {
        v
    }

    fn from_reals(v: &[f64]) -> Vec<Self> {
        v.to_vec()
    }
}

impl Field for Complex64 {
    const NAME: &'static str = "complex";
    const WIDTH: usize = 2;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn to_complex(self) -> Complex64 {
        self
    }

    fn re(self) -> f64 {
        self.re
    }

    fn softplus(self) -> Self {
        let one = Complex64::new(1.0, 0.0);
        if self.re > 0.0 {
            self + (one + (-self).exp()).ln()
        } else {
            (one + self.exp()).ln()
        }
    }

    fn sigmoid(self) -> Self {
        let one = Complex64::new(1.0, 0.0);
        if self.re >= 0.0 {
            one / (one + (-self).exp())
        } else {
            let e = self.exp();
            e / (one + e)
        }
    }

    fn from_gradient(g: Complex64) -> Self {
        g.conj()
    }

    fn gaussian(rng: &mut impl rand::Rng, std: f64) -> Self {
        let n = Normal::new(0.0, std).expect("finite std");
        Complex64::new(n.sample(rng), n.sample(rng))
    }

    fn as_reals(v: &[Self]) -> &[f64] {
        // SAFETY: Complex<f64> is #[repr(C)] with two f64 fields and no padding.
        unsafe { std::slice::from_raw_parts(v.as_ptr() as *const f64, v.len() * 2) }
    }

    fn as_reals_mut(v: &mut [Self]) -> &mut [f64] {
        // SAFETY: as above; the borrow is exclusive for its lifetime.
        unsafe { std::slice::from_raw_parts_mut(v.as_mut_ptr() as *mut f64, v.len() * 2) }
    }

    fn from_reals(v: &[f64]) -> Vec<Self> {
        v.chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_softplus_matches_definition() {
        for z in [
            Complex64::new(0.3, -1.2),
            Complex64::new(-2.0, 0.7),
            Complex64::new(5.0, 2.0),
        ] {
            let direct = (Complex64::new(1.0, 0.0) + z.exp()).ln();
            assert!((Field::softplus(z) - direct).norm() < 1e-12);
            let s = Field::sigmoid(z);
            assert!((s - z.exp() / (Complex64::new(1.0, 0.0) + z.exp())).norm() < 1e-12);
        }
        assert!(
            (Field::softplus(Complex64::new(800.0, 0.1)) - Complex64::new(800.0, 0.1)).norm()
                < 1e-9
        );
    }

    #[test]
    fn real_view_round_trip() {
        let mut v = vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 4.0)];
        assert_eq!(Complex64::as_reals(&v), &[1.0, 2.0, -3.0, 4.0]);
        Complex64::as_reals_mut(&mut v)[3] = 9.0;
        assert_eq!(v[1], Complex64::new(-3.0, 9.0));
        assert_eq!(Complex64::from_reals(&[1.0, 2.0, -3.0, 9.0]), v);
    }
}
