//! Fourier-multiplier operators on uniform periodic grids.
//!
//! The Dirichlet-to-Neumann map of the unit disk acts on `e^{ikθ}` as
//! multiplication by `|k|`. On an `n`-point grid (n even) the Nyquist mode
//! `k = n/2` is kept as a cosine with multiplier `n/2`, which makes the
//! discrete operator a symmetric circulant matrix.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Signed wavenumber of FFT bin `j` on an `n`-point grid.
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Forward/inverse FFT pair for one grid size.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Spectral {
        let mut planner = FftPlanner::new();
        Spectral {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Nodes `θ_j = 2πj/n`.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| TAU * j as f64 / self.n as f64).collect()
    }

    /// Normalized coefficients `ĉ_k = (1/n) Σ u_j e^{-ikθ_j}` in FFT order.
    pub fn coefficients(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let inv = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= inv);
        buf
    }

    /// Apply the real multiplier `m(|k|)` to a real grid function.
    pub fn apply_multiplier<M: Fn(f64) -> f64>(&self, values: &[f64], multiplier: M) -> Vec<f64> {
        let mut buf = self.coefficients(values);
        for (j, c) in buf.iter_mut().enumerate() {
            *c *= multiplier(wavenumber(j, self.n).unsigned_abs() as f64);
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    /// Dirichlet-to-Neumann map of the unit disk: `e^{ikθ} ↦ |k| e^{ikθ}`.
    pub fn dtn(&self, values: &[f64]) -> Vec<f64> {
        self.apply_multiplier(values, |k| k)
    }

    /// Dense symmetric circulant matrix of the `|k|` multiplier.
    pub fn dtn_matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        let col = self.dtn(&e0);
        DMatrix::from_fn(n, n, |i, j| col[(i + n - j) % n])
    }

    /// Trigonometric interpolant evaluated at an arbitrary angle.
    pub fn interpolate(coefficients: &[Complex64], theta: f64) -> f64 {
        let n = coefficients.len();
        let mut acc = coefficients[0].re;
        let step = Complex64::from_polar(1.0, theta);
        let mut phase = step;
        for k in 1..n.div_ceil(2) {
            acc += 2.0 * (coefficients[k] * phase).re;
            phase *= step;
        }
        if n % 2 == 0 {
            acc += coefficients[n / 2].re * (theta * (n / 2) as f64).cos();
        }
        acc
    }

    /// Derivative of the trigonometric interpolant.
    pub fn interpolate_derivative(coefficients: &[Complex64], theta: f64) -> f64 {
        let n = coefficients.len();
        let mut acc = 0.0;
        let step = Complex64::from_polar(1.0, theta);
        let mut phase = step;
        for k in 1..n.div_ceil(2) {
            acc += 2.0 * (coefficients[k] * phase * Complex64::new(0.0, k as f64)).re;
            phase *= step;
        }
        if n % 2 == 0 {
            let m = (n / 2) as f64;
            acc -= coefficients[n / 2].re * m * (theta * m).sin();
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_is_annihilated() {
        let s = Spectral::new(32);
        assert!(s.dtn(&[3.0; 32]).iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn single_mode() {
        let s = Spectral::new(64);
        let u: Vec<f64> = s.nodes().iter().map(|t| (3.0 * t).cos()).collect();
        let v = s.dtn(&u);
        for (a, b) in v.iter().zip(&u) {
            assert!((a - 3.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_matches_fft() {
        let s = Spectral::new(16);
        let m = s.dtn_matrix();
        let u: Vec<f64> = (0..16).map(|j| ((j * 7 % 5) as f64).sin()).collect();
        let a = s.dtn(&u);
        let b = &m * nalgebra::DVector::from_vec(u);
        for i in 0..16 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
        assert!((&m - m.transpose()).amax() < 1e-14);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let s = Spectral::new(16);
        let u: Vec<f64> = s.nodes().iter().map(|t| (2.0 * t).sin() + 0.3 * (8.0 * t).cos()).collect();
        let c = s.coefficients(&u);
        for (t, v) in s.nodes().iter().zip(&u) {
            assert!((Spectral::interpolate(&c, *t) - v).abs() < 1e-13);
        }
        let d = Spectral::interpolate_derivative(&c, 0.4);
        assert!((d - (2.0 * (0.8f64).cos() - 2.4 * (3.2f64).sin())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(u in prop::collection::vec(-1.0f64..1.0, 32), v in prop::collection::vec(-1.0f64..1.0, 32)) {
            let s = Spectral::new(32);
            let lu = s.dtn(&u);
            let lv = s.dtn(&v);
            let a: f64 = lu.iter().zip(&v).map(|(x, y)| x * y).sum();
            let b: f64 = u.iter().zip(&lv).map(|(x, y)| x * y).sum();
            prop_assert!((a - b).abs() < 1e-12);
            let q: f64 = lu.iter().zip(&u).map(|(x, y)| x * y).sum();
            prop_assert!(q >= -1e-12);
        }

        #[test]
        fn linear(u in prop::collection::vec(-1.0f64..1.0, 32), v in prop::collection::vec(-1.0f64..1.0, 32), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let s = Spectral::new(32);
            let w: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lw = s.dtn(&w);
            let lu = s.dtn(&u);
            let lv = s.dtn(&v);
            for i in 0..32 {
                prop_assert!((lw[i] - a * lu[i] - b * lv[i]).abs() < 1e-12);
            }
        }
    }
}
