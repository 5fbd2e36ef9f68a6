//! Layer solutions of `(-Δ)^{1/2} v = f(v)` on the line and their truncated
//! half-plane energy.
//!
//! The line is compactified by `x = L tan(θ/2)`, `θ ∈ (-π, π)`, so that the
//! half-Laplacian becomes `(dθ/dx) Λ` with `Λ` the `|k|` multiplier on the
//! circle. The unknown is written as `v = θ/π + Z(θ)`: the sawtooth carries
//! the jump at `θ = ±π` (the point at infinity) and `Z` is periodic with
//! `Z(±π) = 0`. Choosing `L = 2/(|f'(1)| + |f'(-1)|)` matches the far-field
//! decay of the sawtooth, which keeps `Z` smooth.
//!
//! The harmonic extension is available in closed form: with
//! `ζ = (z - iL)/(z + iL)`,
//! `U = Re[1 + (2i/π) log(z + iL) + F(ζ)]`, where `F` is the power series
//! whose boundary real part is `Z`.

use std::f64::consts::PI;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::{integrate, QuadOptions};
use crate::spectral::Spectral;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `U^a(x, 0) = (2/π) arctan(x/a)`, the layer of the sine nonlinearity.
pub fn layer_explicit_sine(a: f64, x: f64) -> f64 {
    2.0 / PI * (x / a).atan()
}

/// Closed-form constant for the sine nonlinearity: `(2/π)(1 - log a - a log 2)`.
pub fn cf_closed_form(a: f64) -> f64 {
    2.0 / PI * (1.0 - a.ln() - a * 2f64.ln())
}

/// Compactification length `L = 2/(|f'(1)| + |f'(-1)|)`.
pub fn compactification_scale(f: &Nonlinearity) -> f64 {
    2.0 / (f.reaction_deriv(1.0).abs() + f.reaction_deriv(-1.0).abs())
}

/// Compactified nodes `θ_j = -π + 2πj/n`.
pub fn compactified_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
}

/// `dθ/dx = (1 + cos θ)/L`.
pub fn compactified_weight(theta: f64, scale: f64) -> f64 {
    (1.0 + theta.cos()) / scale
}

/// `|k|` multiplier on the compactified variable; multiply by
/// [`compactified_weight`] to obtain the half-Laplacian in `x`.
pub fn half_laplacian_apply(values: &[f64]) -> Vec<f64> {
    Spectral::new(values.len()).dtn(values)
}

#[derive(Debug, Clone, Copy)]
pub struct LayerOptions {
    pub n: usize,
    pub x_max: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LayerOptions {
    fn default() -> Self {
        LayerOptions {
            n: 1024,
            x_max: 100.0,
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// Converged layer with its spectral representation.
#[derive(Debug, Clone, Serialize)]
pub struct LayerProfile {
    pub nonlinearity: Nonlinearity,
    /// Compactification length `L`.
    pub scale: f64,
    pub x_max: f64,
    /// Compactified nodes inside `[-X, X]`.
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `c` in `v ≈ ±1 ∓ c/|x|`, averaged over both tails at `|x| = X`.
    pub tail_coeff: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Lagrange multiplier of the centring constraint (zero for an exact solution).
    pub multiplier: f64,
    #[serde(skip)]
    coeffs: Vec<Complex64>,
    #[serde(skip)]
    series: Vec<Complex64>,
}

impl LayerProfile {
    fn from_correction(f: Nonlinearity, scale: f64, x_max: f64, z: &[f64], residual: f64, iterations: usize, multiplier: f64) -> LayerProfile {
        let n = z.len();
        let coeffs = Spectral::new(n).coefficients(z);
        let mut series = Vec::with_capacity(n / 2 + 1);
        series.push(Complex64::new(coeffs[0].re, 0.0));
        for c in coeffs.iter().take(n.div_ceil(2)).skip(1) {
            series.push(2.0 * c);
        }
        if n % 2 == 0 {
            series.push(Complex64::new(coeffs[n / 2].re, 0.0));
        }
        while series.len() > 1 && series.last().is_some_and(|c| c.norm() < 1e-18) {
            series.pop();
        }
        let mut p = LayerProfile {
            nonlinearity: f,
            scale,
            x_max,
            x: Vec::new(),
            v: Vec::new(),
            tail_coeff: 0.0,
            residual,
            iterations,
            multiplier,
            coeffs,
            series,
        };
        for theta in compactified_nodes(n).into_iter().skip(1) {
            let x = scale * (0.5 * theta).tan();
            if x.abs() <= x_max {
                p.x.push(x);
                p.v.push(p.value(x));
            }
        }
        p.tail_coeff = 0.5 * x_max * ((1.0 - p.value(x_max)) + (1.0 + p.value(-x_max)));
        p
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    /// Trace value `v(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let theta = 2.0 * (x / self.scale).atan();
        theta / PI + Spectral::interpolate(&self.coeffs, theta + PI)
    }

    fn series_eval(&self, zeta: Complex64) -> (Complex64, Complex64) {
        let mut f = Complex64::new(0.0, 0.0);
        let mut df = Complex64::new(0.0, 0.0);
        for c in self.series.iter().rev() {
            df = df * zeta + f;
            f = f * zeta + c;
        }
        (f, df)
    }

    /// Holomorphic `H` with `U = Re H` and its derivative, at `Im z ≥ 0`.
    pub fn extension(&self, z: Complex64) -> (Complex64, Complex64) {
        let il = I * self.scale;
        let w = z + il;
        let zeta = (z - il) / w;
        let (f, df) = self.series_eval(zeta);
        let h = 1.0 + 2.0 * I / PI * w.ln() + f;
        let dh = 2.0 * I / (PI * w) + df * 2.0 * il / (w * w);
        (h, dh)
    }

    /// CSV with header `x,v`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,v\n");
        for (x, v) in self.x.iter().zip(&self.v) {
            s.push_str(&format!("{x:.12e},{v:.15e}\n"));
        }
        s
    }
}

/// Solve for the centred monotone layer, `v(0) = 0`.
///
/// Newton on the collocation system with the centring condition bordered in
/// (the translation mode makes the plain Jacobian nearly singular).
pub fn solve_layer(f: &Nonlinearity, opts: LayerOptions) -> Result<LayerProfile> {
    let n = opts.n;
    if n < 8 || n % 2 != 0 {
        return Err(Error::param(format!("layer grid needs an even n >= 8 (got {n})")));
    }
    if opts.x_max < 50.0 {
        return Err(Error::param(format!("layer truncation X must be >= 50 (got {})", opts.x_max)));
    }
    let scale = compactification_scale(f);
    let theta = compactified_nodes(n);
    let spec = Spectral::new(n);
    let lam = spec.dtn_matrix();
    let weight: Vec<f64> = theta.iter().map(|&t| compactified_weight(t, scale)).collect();
    let forcing: Vec<f64> = theta.iter().map(|&t| t.sin() / (PI * scale)).collect();
    let centre = n / 2;

    let residual_of = |z: &[f64], mu: f64| -> Vec<f64> {
        let lz = spec.dtn(z);
        let mut r: Vec<f64> = (0..n)
            .map(|j| weight[j] * lz[j] + forcing[j] - f.reaction(theta[j] / PI + z[j]) + mu * weight[j])
            .collect();
        r[0] = z[0];
        r.push(z[centre]);
        r
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut z = vec![0.0; n];
    let mut mu = 0.0;
    let mut r = residual_of(&z, mu);
    let mut history = vec![norm(&r)];
    let mut iterations = 0;
    while norm(&r) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: norm(&r),
                history,
            });
        }
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 1..n {
            let fp = f.reaction_deriv(theta[i] / PI + z[i]);
            for j in 0..n {
                jac[(i, j)] = weight[i] * lam[(i, j)];
            }
            jac[(i, i)] -= fp;
            jac[(i, n)] = weight[i];
        }
        jac[(0, 0)] = 1.0;
        jac[(n, centre)] = 1.0;
        let rhs = -DVector::from_vec(r.clone());
        let step = jac.lu().solve(&rhs).ok_or(Error::Singular)?;
        let current = norm(&r);
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let trial: Vec<f64> = (0..n).map(|j| z[j] + damping * step[j]).collect();
            let trial_mu = mu + damping * step[n];
            let tr = residual_of(&trial, trial_mu);
            if norm(&tr) < current || norm(&tr) <= opts.tol {
                z = trial;
                mu = trial_mu;
                r = tr;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations,
                residual: current,
                history,
            });
        }
        history.push(norm(&r));
        debug!("layer newton {iterations}: residual {:.3e} (damping {damping})", norm(&r));
    }
    for j in 1..n - 1 {
        let (a, b) = (theta[j] / PI + z[j], theta[j + 1] / PI + z[j + 1]);
        if b <= a {
            return Err(Error::NotMonotone { index: j });
        }
    }
    Ok(LayerProfile::from_correction(*f, scale, opts.x_max, &z, norm(&r), iterations, mu))
}

fn energy_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-13,
        max_panels: 4000,
    }
}

/// `I(ε, ρ) = ½∫_{B_ρ⁺} |∇U_ε|² + (1/ε)∫_{-ρ}^{ρ} G(U_ε)` with `U_ε(z) = U(z/ε)`.
///
/// The Dirichlet part is the boundary flux `½∮ U ∂_ν U` of the closed-form
/// harmonic extension.
pub fn layer_energy_scaled(profile: &LayerProfile, eps: f64, rho: f64) -> Result<f64> {
    if !(eps > 0.0 && rho > 0.0) {
        return Err(Error::param("energy needs positive ε and ρ"));
    }
    if rho / eps > 0.8 * profile.x_max {
        return Err(Error::param(format!(
            "radius {} exceeds 0.8·X = {}",
            rho / eps,
            0.8 * profile.x_max
        )));
    }
    let g = profile.nonlinearity;
    let opts = energy_opts();
    let line = |x: f64| {
        let (h, dh) = profile.extension(Complex64::new(x / eps, 0.0));
        h.re * (dh / eps).im + 2.0 * g.potential(h.re) / eps
    };
    let arc = |phi: f64| {
        let z = Complex64::from_polar(rho, phi);
        let (h, dh) = profile.extension(z / eps);
        h.re * (dh / eps * I * z).im
    };
    // split at the origin where the profile varies on the scale εL
    let s1 = integrate(line, -rho, 0.0, opts)?.value;
    let s2 = integrate(line, 0.0, rho, opts)?.value;
    let a = integrate(arc, 0.0, PI, opts)?.value;
    Ok(0.5 * (s1 + s2 + a))
}

/// `I(1, R)`.
pub fn layer_energy_truncated(profile: &LayerProfile, radius: f64) -> Result<f64> {
    layer_energy_scaled(profile, 1.0, radius)
}

/// Fit of `I(1, R) - (2/π) log R` against the radius.
#[derive(Debug, Clone, Serialize)]
pub struct CfFit {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(rename = "R_list")]
    pub r_list: Vec<f64>,
    #[serde(rename = "I_values")]
    pub i_values: Vec<f64>,
    pub cf_estimate: f64,
    /// `d(I - (2/π) log R)/d log R` over the last two radii.
    pub slope: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Slope above which the remainder is reported as not yet flat.
pub const CF_SLOPE_WARN: f64 = 5e-3;

pub const DEFAULT_CF_RADII: [f64; 7] = [10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0];

/// `C_f` by least-squares extrapolation of `I(1,R) - (2/π) log R ≈ C + a/R + b/R²`.
pub fn compute_cf(f: &Nonlinearity, radii: &[f64], n: usize) -> Result<CfFit> {
    if radii.len() < 2 {
        return Err(Error::Insufficient("compute_cf needs at least two radii".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("radii must be strictly increasing"));
    }
    if radii[radii.len() - 1] < 10.0 * radii[0] {
        return Err(Error::Insufficient("radii must span at least one decade".into()));
    }
    let x_max = (1.25 * radii[radii.len() - 1]).max(50.0);
    let profile = solve_layer(
        f,
        LayerOptions {
            n,
            x_max,
            ..Default::default()
        },
    )?;
    let values: Vec<f64> = radii
        .par_iter()
        .map(|&r| layer_energy_truncated(&profile, r))
        .collect::<Result<_>>()?;
    let rem: Vec<f64> = radii.iter().zip(&values).map(|(r, v)| v - 2.0 / PI * r.ln()).collect();
    let cols = if radii.len() >= 4 { 3 } else { 2 };
    let a_mat = DMatrix::from_fn(radii.len(), cols, |i, j| radii[i].powi(-(j as i32)));
    let sol = a_mat
        .clone()
        .svd(true, true)
        .solve(&DVector::from_vec(rem.clone()), 1e-14)
        .map_err(|e| Error::Insufficient(e.to_string()))?;
    let k = radii.len();
    let slope = (rem[k - 1] - rem[k - 2]) / (radii[k - 1].ln() - radii[k - 2].ln());
    let warning = (slope.abs() > CF_SLOPE_WARN).then(|| {
        let msg = format!("remainder not flat: slope {slope:.3e} over the last radii");
        warn!("{msg}");
        msg
    });
    Ok(CfFit {
        a: match f {
            Nonlinearity::Sine { a } => Some(*a),
            Nonlinearity::Cubic => None,
        },
        r_list: radii.to_vec(),
        i_values: values,
        cf_estimate: sol[0],
        slope,
        warning,
    })
}

// ---------------------------------------------------------------------------
// Homoclinic probe

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    CollapsedToConstant,
    /// Iterate stopped moving while still oscillating.
    StationaryNonconstant,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub verdict: ProbeVerdict,
    pub steps: usize,
    pub time: f64,
    pub final_oscillation: f64,
    /// Constant the iterate settled near (mean of the nodes).
    pub final_level: f64,
    pub max_height_seen: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ProbeOptions {
    pub n: usize,
    pub dt: f64,
    pub max_steps: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            n: 256,
            dt: 0.2,
            max_steps: 50_000,
        }
    }
}

/// Relax `-1 + h cos²(πx/(2X))` (supported in `|x| < X`) under the gradient
/// flow `v_t = -(-Δ)^{1/2} v + f(v)` and report where it ends up.
///
/// Time stepping is convex-split: the stabilised part `κ v` with
/// `κ = sup|f'|` is implicit together with the half-Laplacian.
pub fn homoclinic_probe(f: &Nonlinearity, bump_height: f64, x_half: f64, tol: f64, opts: ProbeOptions) -> Result<ProbeResult> {
    if !(0.0..2.0).contains(&bump_height) {
        return Err(Error::param(format!("bump height must lie in [0, 2) (got {bump_height})")));
    }
    if !(x_half > 0.0) {
        return Err(Error::param("bump half-width must be positive"));
    }
    let n = opts.n;
    let scale = compactification_scale(f);
    let theta = compactified_nodes(n);
    let xs: Vec<f64> = theta.iter().map(|&t| scale * (0.5 * t).tan()).collect();
    let mut v: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            if j == 0 || x.abs() >= x_half {
                -1.0
            } else {
                -1.0 + bump_height * (0.5 * PI * x / x_half).cos().powi(2)
            }
        })
        .collect();
    let osc = |v: &[f64]| {
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        hi - lo
    };
    let max_height = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if osc(&v) < tol {
        return Ok(ProbeResult {
            verdict: ProbeVerdict::CollapsedToConstant,
            steps: 0,
            time: 0.0,
            final_oscillation: osc(&v),
            final_level: -1.0,
            max_height_seen: max_height,
        });
    }
    // Unknowns are nodes 1..n; node 0 (x = ∞) stays at -1. Rows are scaled by
    // 1/(dθ/dx) so the system matrix is symmetric positive definite.
    let kappa = f.max_reaction_slope();
    let dt = opts.dt;
    let lam = Spectral::new(n).dtn_matrix();
    let m = n - 1;
    let wdiag: Vec<f64> = (1..n).map(|j| 1.0 / compactified_weight(theta[j], scale)).collect();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = dt * lam[(i + 1, j + 1)];
        }
        a[(i, i)] += wdiag[i] * (1.0 + dt * kappa);
    }
    let chol = a.cholesky().ok_or(Error::Singular)?;
    let boundary: Vec<f64> = (0..m).map(|i| dt * lam[(i + 1, 0)] * -1.0).collect();
    let mut max_seen = max_height;
    let mut steps = 0;
    let mut verdict = ProbeVerdict::Inconclusive;
    while steps < opts.max_steps {
        steps += 1;
        let rhs = DVector::from_fn(m, |i, _| {
            let u = v[i + 1];
            wdiag[i] * (u + dt * (f.reaction(u) + kappa * u)) - boundary[i]
        });
        let next = chol.solve(&rhs);
        let mut change = 0.0f64;
        for i in 0..m {
            change = change.max((next[i] - v[i + 1]).abs());
            v[i + 1] = next[i];
        }
        max_seen = max_seen.max(v.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        if osc(&v) < tol {
            verdict = ProbeVerdict::CollapsedToConstant;
            break;
        }
        if change < 1e-13 * dt {
            verdict = ProbeVerdict::StationaryNonconstant;
            break;
        }
    }
    let level = v.iter().sum::<f64>() / n as f64;
    Ok(ProbeResult {
        verdict,
        steps,
        time: steps as f64 * dt,
        final_oscillation: osc(&v),
        final_level: level,
        max_height_seen: max_seen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_sine_values() {
        assert_eq!(layer_explicit_sine(1.0, 0.0), 0.0);
        assert!((layer_explicit_sine(1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((layer_explicit_sine(2.0, 2.0) - 0.5).abs() < 1e-15);
        assert!((layer_explicit_sine(1.0, -3.0) + layer_explicit_sine(1.0, 3.0)).abs() < 1e-15);
    }

    #[test]
    fn closed_form_values() {
        assert!((cf_closed_form(1.0) - 2.0 / PI * (1.0 - 2f64.ln())).abs() < 1e-15);
        let e = std::f64::consts::E;
        assert!((cf_closed_form(e) + 2.0 * e / PI * 2f64.ln()).abs() < 1e-14);
        assert!((cf_closed_form(0.5) - 2.0 / PI * (1.0 + 0.5 * 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn scales() {
        assert!((compactification_scale(&Nonlinearity::Sine { a: 2.0 }) - 2.0).abs() < 1e-14);
        assert!((compactification_scale(&Nonlinearity::Cubic) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn half_laplacian_basics() {
        let n = 64;
        let th = compactified_nodes(n);
        assert!(half_laplacian_apply(&vec![2.0; n]).iter().all(|v| v.abs() < 1e-13));
        let u: Vec<f64> = th.iter().map(|t| (5.0 * t).cos()).collect();
        for (a, b) in half_laplacian_apply(&u).iter().zip(&u) {
            assert!((a - 5.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_layer_is_exact() {
        let f = Nonlinearity::Sine { a: 1.0 };
        let p = solve_layer(&f, LayerOptions { n: 128, ..Default::default() }).unwrap();
        assert!(p.iterations <= 1);
        for x in [-40.0, -1.0, 0.3, 7.0] {
            assert!((p.value(x) - layer_explicit_sine(1.0, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn extension_matches_trace() {
        let p = solve_layer(&Nonlinearity::Cubic, LayerOptions { n: 256, ..Default::default() }).unwrap();
        for x in [-3.0, -0.2, 0.0, 0.7, 12.0] {
            let (h, _) = p.extension(Complex64::new(x, 0.0));
            assert!((h.re - p.value(x)).abs() < 1e-12, "{x}");
        }
        // derivative against a finite difference in the interior
        let z = Complex64::new(0.4, 0.9);
        let e = 1e-6;
        let (h1, dh) = p.extension(z);
        let (h2, _) = p.extension(z + e);
        assert!(((h2 - h1) / e - dh).norm() < 1e-5);
    }

    #[test]
    fn parameter_checks() {
        let f = Nonlinearity::Cubic;
        assert!(solve_layer(&f, LayerOptions { n: 63, ..Default::default() }).is_err());
        assert!(solve_layer(&f, LayerOptions { x_max: 10.0, ..Default::default() }).is_err());
        assert!(compute_cf(&f, &[10.0, 50.0], 64).is_err());
        assert!(homoclinic_probe(&f, 2.5, 3.0, 1e-6, ProbeOptions::default()).is_err());
    }

    #[test]
    fn flat_bump_collapses_immediately() {
        let r = homoclinic_probe(&Nonlinearity::Cubic, 0.0, 3.0, 1e-6, ProbeOptions::default()).unwrap();
        assert_eq!(r.verdict, ProbeVerdict::CollapsedToConstant);
        assert_eq!(r.steps, 0);
    }
}
