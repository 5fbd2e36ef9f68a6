//! Renormalized energy `W(p, q)` of two boundary jump points.
//!
//! Two independent routes are provided. The conformal route maps the domain
//! onto the upper half-plane, where
//! `W = (2/π) log(|φ(p) - φ(q)|² / (|φ'(p)| |φ'(q)|))`. The Green's-function
//! route uses the mixed normal derivative of the Dirichlet Green's function,
//! `W = -(2/π) log(π ∂²G/∂ν_p∂ν_q)`, and is the only route for rectangles.
//!
//! Landscapes are indexed by canonical parameters: angles on the circle
//! model, the real coordinate on the shifted line for `sc_polygon`, and the
//! pair (bottom `x`, top `x̃`) for rectangles.

use std::f64::consts::{PI, TAU};

use log::{debug, warn};
use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{disk_to_halfplane, disk_to_halfplane_deriv, BoundaryPoint, Domain, DomainSpec, ParamModel};

/// Default half-width of the excluded diagonal band, as a fraction of the parameter period.
pub const DIAGONAL_FRACTION: f64 = 0.05;
/// Finite-difference step for landscape derivatives, as a fraction of the period.
pub const FD_FRACTION: f64 = 1e-5;
/// Relative eigenvalue threshold for calling a Hessian definite.
pub const DEFINITENESS_REL: f64 = 1e-8;
/// Gradient norm accepted as stationary.
pub const GRADIENT_TOL: f64 = 1e-8;

const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX_TERMS: usize = 200_000;

// ---------------------------------------------------------------------------
// Conformal route

/// Orientation-preserving automorphism `z ↦ (az + b)/(cz + d)` of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlaneMobius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl HalfPlaneMobius {
    pub const IDENTITY: HalfPlaneMobius = HalfPlaneMobius {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<HalfPlaneMobius> {
        if !(a * d - b * c > 0.0) {
            return Err(Error::param("half-plane automorphism needs ad - bc > 0"));
        }
        Ok(HalfPlaneMobius { a, b, c, d })
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn deriv(&self, z: Complex64) -> Complex64 {
        let den = self.c * z + self.d;
        Complex64::new(self.a * self.d - self.b * self.c, 0.0) / (den * den)
    }
}

fn half_plane_energy(hp: Complex64, hq: Complex64, dp: f64, dq: f64) -> f64 {
    2.0 / PI * ((hp - hq).norm_sqr() / (dp * dq)).ln()
}

fn circle_gap(tp: f64, tq: f64) -> f64 {
    let d = (tp - tq).rem_euclid(TAU);
    d.min(TAU - d)
}

fn check_points(domain: &Domain, p: &BoundaryPoint, q: &BoundaryPoint) -> Result<()> {
    if p.corner || !p.map_deriv.is_finite() {
        return Err(Error::Corner { t: p.t });
    }
    if q.corner || !q.map_deriv.is_finite() {
        return Err(Error::Corner { t: q.t });
    }
    let gap = match domain.model() {
        ParamModel::Circle => circle_gap(p.t, q.t),
        _ => (p.z - q.z).norm(),
    };
    if gap < 1e-12 {
        return Err(Error::Diagonal { gap });
    }
    Ok(())
}

/// `W` by an explicit conformal map onto the upper half-plane.
pub fn renorm_w_conformal(domain: &Domain, p: &BoundaryPoint, q: &BoundaryPoint) -> Result<f64> {
    renorm_w_conformal_with(domain, p, q, HalfPlaneMobius::IDENTITY)
}

/// As [`renorm_w_conformal`], with an extra automorphism composed after the map.
///
/// Circle-model points are first rotated so that their midpoint sits opposite
/// the pole of the Cayley map.
pub fn renorm_w_conformal_with(domain: &Domain, p: &BoundaryPoint, q: &BoundaryPoint, mobius: HalfPlaneMobius) -> Result<f64> {
    if let ParamModel::RectangleSides { .. } = domain.model() {
        return Err(Error::Capability {
            op: "renorm_w_conformal",
            kind: "rectangle",
        });
    }
    check_points(domain, p, q)?;
    let (hp, hq, dp, dq) = match domain.model() {
        ParamModel::Circle => {
            let zp = Complex64::from_polar(1.0, p.t);
            let zq = Complex64::from_polar(1.0, q.t);
            let mid = zp + zq;
            let away = if mid.norm() > 1e-8 { mid.arg() + PI } else { p.t + 0.5 * PI };
            let rot = Complex64::from_polar(1.0, -away + PI);
            // rotated midpoint lies on the negative real axis, far from z = 1
            let (zp, zq) = (zp * rot, zq * rot);
            let (hp, hq) = (disk_to_halfplane(zp), disk_to_halfplane(zq));
            let dp = disk_to_halfplane_deriv(zp).norm() / p.map_deriv;
            let dq = disk_to_halfplane_deriv(zq).norm() / q.map_deriv;
            (hp, hq, dp, dq)
        }
        ParamModel::Line { .. } => {
            // φ = ψ^{-1} - ib sends p to its line parameter; |φ'| = 1/|ψ'|.
            (
                Complex64::new(p.t, 0.0),
                Complex64::new(q.t, 0.0),
                1.0 / p.map_deriv,
                1.0 / q.map_deriv,
            )
        }
        ParamModel::RectangleSides { .. } => unreachable!(),
    };
    let (mp, mq) = (mobius.apply(hp), mobius.apply(hq));
    if crate::geometry::is_infinite(mp) || crate::geometry::is_infinite(mq) || !mp.re.is_finite() || !mq.re.is_finite() {
        return Err(Error::param("automorphism sends a boundary point to infinity"));
    }
    let dp = dp * mobius.deriv(hp).norm();
    let dq = dq * mobius.deriv(hq).norm();
    Ok(half_plane_energy(mp, mq, dp, dq))
}

/// Circle-model energy `(4/π) log|e^{iθp} - e^{iθq}| + (2/π) log(w_p w_q)`.
pub fn circle_model_energy(theta_p: f64, theta_q: f64, w_p: f64, w_q: f64) -> f64 {
    let chord = 2.0 * (0.5 * (theta_p - theta_q)).sin().abs();
    4.0 / PI * chord.ln() + 2.0 / PI * (w_p * w_q).ln()
}

/// Shifted-line energy `(2/π) log(|P - Q|² |ψ'(P+ib)| |ψ'(Q+ib)|)`.
pub fn line_model_energy(x_p: f64, x_q: f64, w_p: f64, w_q: f64) -> f64 {
    2.0 / PI * ((x_p - x_q).powi(2) * w_p * w_q).ln()
}

// ---------------------------------------------------------------------------
// Green's-function route

/// Regular part of the Neumann Green's function of the unit disk used in the
/// boundary formula; its combination `R(p,p) + R(q,q) - 2R(p,q)` vanishes on the circle.
pub fn disk_neumann_regular(x: Complex64, y: Complex64) -> f64 {
    (x.norm_sqr() + y.norm_sqr()) / (4.0 * PI)
}

/// `(4/π) log|p - q| + 2(R(p,p) + R(q,q) - 2R(p,q))` on the unit disk.
pub fn disk_neumann_energy(p: Complex64, q: Complex64) -> f64 {
    let r = disk_neumann_regular;
    4.0 / PI * (p - q).norm().ln() + 2.0 * (r(p, p) + r(q, q) - 2.0 * r(p, q))
}

/// `∂²G/∂ν_p∂ν_q` for the Dirichlet Green's function of the unit disk.
pub fn disk_mixed_normal_derivative(p: Complex64, q: Complex64) -> f64 {
    1.0 / (PI * (p - q).norm_sqr())
}

/// `W = -(2/π) log(π ∂²G/∂ν_p∂ν_q)`.
pub fn renorm_w_green(domain: &Domain, p: &BoundaryPoint, q: &BoundaryPoint) -> Result<f64> {
    match domain.spec() {
        DomainSpec::UnitDisk {} => {
            check_points(domain, p, q)?;
            Ok(-2.0 / PI * (PI * disk_mixed_normal_derivative(p.z, q.z)).ln())
        }
        DomainSpec::Rectangle { l, h } => {
            let (x, xt) = rectangle_sides(*l, *h, p.z, q.z)?;
            Ok(rectangle_energy(*l, *h, x, xt)?)
        }
        other => Err(Error::Capability {
            op: "renorm_w_green",
            kind: other.kind_name(),
        }),
    }
}

/// Orders a rectangle pair as (bottom coordinate, top coordinate).
fn rectangle_sides(l: f64, h: f64, a: Complex64, b: Complex64) -> Result<(f64, f64)> {
    let on_bottom = |z: Complex64| z.im.abs() < 1e-12 && z.re > 0.0 && z.re < l;
    let on_top = |z: Complex64| (z.im - h).abs() < 1e-12 && z.re > 0.0 && z.re < l;
    if on_bottom(a) && on_top(b) {
        Ok((a.re, b.re))
    } else if on_top(a) && on_bottom(b) {
        Ok((b.re, a.re))
    } else {
        Err(Error::Capability {
            op: "renorm_w_green (rectangle pairs other than bottom/top)",
            kind: "rectangle",
        })
    }
}

/// `W` for `p = (x, 0)`, `q = (x̃, H)` on the rectangle `[0,L]×[0,H]`.
pub fn rectangle_energy(l: f64, h: f64, x: f64, xt: f64) -> Result<f64> {
    let phi = rectangle_phi(l, h, x, xt, None)?;
    if !(phi > 0.0) {
        return Err(Error::Geometry(format!("mixed normal derivative not positive at ({x}, {xt})")));
    }
    Ok(-2.0 / PI * (PI * phi).ln())
}

/// `1/sinh(y)` without overflow.
fn inv_sinh(y: f64) -> f64 {
    let e = (-y).exp();
    2.0 * e / (1.0 - e * e)
}

/// Smallest `n₀` with `Σ_{n>n₀} n^power e^{-n y} (2/(1-e^{-2y})) · scale ≤ tol`.
fn series_terms(y: f64, power: i32, scale: f64, tol: f64) -> Result<usize> {
    let q = (-y).exp();
    let c = 2.0 / (1.0 - q * q);
    let mut n0 = 1usize;
    loop {
        // geometric majorant of the tail, valid once the term ratio is below 1
        let m = (n0 + 1) as f64;
        let ratio = q * ((m + 1.0) / m).powi(power);
        if ratio < 1.0 {
            let tail = scale * c * m.powi(power) * q.powf(m) / (1.0 - ratio);
            if tail <= tol {
                return Ok(n0);
            }
        }
        n0 += 1;
        if n0 > SERIES_MAX_TERMS {
            return Err(Error::Series {
                terms: n0,
                tail: f64::NAN,
            });
        }
    }
}

/// Number of terms for [`rectangle_phi`] with the tail below 1e-14.
pub fn rectangle_phi_terms(l: f64, h: f64) -> Result<usize> {
    series_terms(PI * h / l, 1, 2.0 * PI / (l * l), SERIES_TOL)
}

/// `φ(x, x̃) = (2π/L²) Σ n sin(nπx/L) sin(nπx̃/L) / sinh(nπH/L)`.
///
/// `n_terms = None` picks the truncation from the tail bound.
pub fn rectangle_phi(l: f64, h: f64, x: f64, xt: f64, n_terms: Option<usize>) -> Result<f64> {
    if !(l > 0.0 && h > 0.0) {
        return Err(Error::param("rectangle needs L, H > 0"));
    }
    let terms = match n_terms {
        Some(n) => n,
        None => rectangle_phi_terms(l, h)?,
    };
    let k = PI / l;
    let mut acc = 0.0;
    for n in 1..=terms {
        let nf = n as f64;
        acc += nf * (nf * k * x).sin() * (nf * k * xt).sin() * inv_sinh(nf * PI * h / l);
    }
    Ok(2.0 * PI / (l * l) * acc)
}

/// Second derivatives of `φ` at the midpoint pair `(L/2, L/2)`.
#[derive(Debug, Clone, Serialize)]
pub struct RectangleHessian {
    pub phi_xx: f64,
    pub phi_x_xt: f64,
    /// `φ_x(L/2, L/2)`, zero term by term.
    pub phi_x: f64,
    pub negative_definite: bool,
    pub terms: usize,
}

impl RectangleHessian {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.phi_xx, self.phi_x_xt], [self.phi_x_xt, self.phi_xx]]
    }
}

/// Hessian of `φ` at `(L/2, L/2)` and whether it is negative definite
/// (which makes the midpoints an isolated minimum of `W`).
pub fn rectangle_hessian_at_midpoint(l: f64, h: f64) -> Result<RectangleHessian> {
    if !(l > 0.0 && h > 0.0) {
        return Err(Error::param("rectangle needs L, H > 0"));
    }
    let scale = 2.0 * PI.powi(3) / l.powi(4);
    let terms = series_terms(PI * h / l, 3, scale, SERIES_TOL)?;
    let mut xx = 0.0;
    let mut xxt = 0.0;
    let mut x = 0.0;
    for n in 1..=terms {
        let nf = n as f64;
        let s = (nf * 0.5 * PI).sin();
        let c = (nf * 0.5 * PI).cos();
        let w = inv_sinh(nf * PI * h / l);
        // sin(nπ/2) and cos(nπ/2) are exactly 0/±1 in exact arithmetic
        let (s, c) = if n % 2 == 1 { (s.signum(), 0.0) } else { (0.0, c.signum()) };
        xx -= nf.powi(3) * s * s * w;
        xxt += nf.powi(3) * c * c * w;
        x += nf * nf * c * s * w;
    }
    let phi_xx = scale * xx;
    let phi_x_xt = scale * xxt;
    Ok(RectangleHessian {
        phi_xx,
        phi_x_xt,
        phi_x: 2.0 * PI * PI / l.powi(3) * x,
        negative_definite: phi_xx < 0.0 && phi_x_xt.abs() < -phi_xx,
        terms,
    })
}

/// Positive root of `t = 3 tanh t` by safeguarded Newton on `[2.5, 3]`.
pub fn three_tanh_root() -> f64 {
    let g = |t: f64| t - 3.0 * t.tanh();
    let dg = |t: f64| 1.0 - 3.0 / t.cosh().powi(2);
    let (mut lo, mut hi) = (2.5, 3.0);
    let mut t = 2.75;
    for _ in 0..100 {
        let v = g(t);
        if v.abs() <= 1e-15 {
            break;
        }
        if v < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let step = t - v / dg(t);
        t = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Landscapes

/// `W` as a function of the canonical parameter pair.
#[derive(Debug, Clone)]
pub struct PairEnergy {
    domain: Domain,
}

impl PairEnergy {
    pub fn new(domain: Domain) -> PairEnergy {
        PairEnergy { domain }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Parameter period (or window length) used for all relative scales.
    pub fn period(&self) -> f64 {
        self.domain.model().span()
    }

    pub fn weight(&self, t: f64) -> Result<f64> {
        let w = self.domain.map_deriv(t)?;
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::Corner { t });
        }
        Ok(w)
    }

    pub fn eval(&self, tp: f64, tq: f64) -> Result<f64> {
        match self.domain.model() {
            ParamModel::Circle => {
                let gap = circle_gap(tp, tq);
                if gap < 1e-12 {
                    return Err(Error::Diagonal { gap });
                }
                Ok(circle_model_energy(tp, tq, self.weight(tp)?, self.weight(tq)?))
            }
            ParamModel::Line { .. } => {
                if (tp - tq).abs() < 1e-12 {
                    return Err(Error::Diagonal { gap: (tp - tq).abs() });
                }
                Ok(line_model_energy(tp, tq, self.weight(tp)?, self.weight(tq)?))
            }
            ParamModel::RectangleSides { length } => {
                if !(tp > 0.0 && tp < length && tq > 0.0 && tq < length) {
                    return Err(Error::param(format!("rectangle side coordinates ({tp}, {tq}) outside (0, {length})")));
                }
                let DomainSpec::Rectangle { l, h } = self.domain.spec() else { unreachable!() };
                rectangle_energy(*l, *h, tp, tq)
            }
        }
    }

    /// Boundary points of a canonical pair.
    pub fn points(&self, tp: f64, tq: f64) -> Result<(BoundaryPoint, BoundaryPoint)> {
        match self.domain.spec() {
            DomainSpec::Rectangle { l, h } => {
                let p = self.domain.boundary_point(tp)?;
                let q = self.domain.boundary_point(2.0 * l + h - tq)?;
                Ok((p, q))
            }
            _ => Ok((self.domain.boundary_point(tp)?, self.domain.boundary_point(tq)?)),
        }
    }

    fn distance(&self, tp: f64, tq: f64) -> f64 {
        match self.domain.model() {
            ParamModel::Circle => circle_gap(tp, tq),
            ParamModel::Line { .. } => (tp - tq).abs(),
            ParamModel::RectangleSides { .. } => f64::INFINITY,
        }
    }
}

/// Grid axis of the canonical model.
fn grid_axis(model: ParamModel, n: usize) -> Vec<f64> {
    match model {
        ParamModel::Circle => (0..n).map(|i| TAU * i as f64 / n as f64).collect(),
        ParamModel::Line { window: (a, b) } => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        ParamModel::RectangleSides { length } => (0..n).map(|i| length * (i as f64 + 0.5) / n as f64).collect(),
    }
}

/// `W` sampled on a grid of canonical parameter pairs.
#[derive(Debug, Clone, Serialize)]
pub struct EnergyLandscape {
    pub domain: DomainSpec,
    pub axis: Vec<f64>,
    /// Row-major `axis.len()²` values; `NaN` inside the excluded band.
    pub values: Vec<f64>,
    /// Half-width `δ_diag` of the removed diagonal neighbourhood (0 for rectangles).
    pub excluded_band: f64,
}

impl EnergyLandscape {
    pub fn n(&self) -> usize {
        self.axis.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.values[i * self.n() + j];
        v.is_finite().then_some(v)
    }

    /// Retained `(t_p, t_q, W)` triples in row-major order.
    pub fn retained(&self) -> Vec<(f64, f64, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if let Some(v) = self.get(i, j) {
                    out.push((self.axis[i], self.axis[j], v));
                }
            }
        }
        out
    }

    /// CSV with header `t_p,t_q,W`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_p,t_q,W\n");
        for (a, b, w) in self.retained() {
            s.push_str(&format!("{a:.12e},{b:.12e},{w:.12e}\n"));
        }
        s
    }
}

/// Evaluate the landscape on a `grid_n × grid_n` grid.
pub fn energy_landscape(domain: &Domain, grid_n: usize, delta_diag: Option<f64>) -> Result<EnergyLandscape> {
    if grid_n < 2 {
        return Err(Error::param("landscape needs at least 2 grid points per axis"));
    }
    let pe = PairEnergy::new(domain.clone());
    let model = domain.model();
    let axis = grid_axis(model, grid_n);
    let band = match model {
        ParamModel::RectangleSides { .. } => 0.0,
        _ => delta_diag.unwrap_or(DIAGONAL_FRACTION * model.span()),
    };
    let weights: Vec<f64> = match model {
        ParamModel::RectangleSides { .. } => vec![1.0; grid_n],
        _ => axis.iter().map(|&t| pe.weight(t)).collect::<Result<_>>()?,
    };
    let rect = match domain.spec() {
        DomainSpec::Rectangle { l, h } => Some((*l, *h)),
        _ => None,
    };
    let values: Vec<f64> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / grid_n, k % grid_n);
            let (tp, tq) = (axis[i], axis[j]);
            if pe.distance(tp, tq) < band {
                return Ok(f64::NAN);
            }
            match model {
                ParamModel::Circle => Ok(circle_model_energy(tp, tq, weights[i], weights[j])),
                ParamModel::Line { .. } => Ok(line_model_energy(tp, tq, weights[i], weights[j])),
                ParamModel::RectangleSides { .. } => {
                    let (l, h) = rect.expect("rectangle");
                    rectangle_energy(l, h, tp, tq)
                }
            }
        })
        .collect::<Result<_>>()?;
    Ok(EnergyLandscape {
        domain: domain.spec().clone(),
        axis,
        values,
        excluded_band: band,
    })
}

// ---------------------------------------------------------------------------
// Critical points

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    IsolatedMin,
    Saddle,
    Max,
    Degenerate,
}

/// Classify a symmetric 2×2 Hessian; eigenvalues within `max(tol, 1e-8‖H‖)` of zero are degenerate.
pub fn classify(hessian: &Matrix2<f64>, tol: f64) -> (Classification, [f64; 2]) {
    let eig = SymmetricEigen::new(*hessian).eigenvalues;
    let (lo, hi) = if eig[0] <= eig[1] { (eig[0], eig[1]) } else { (eig[1], eig[0]) };
    let thr = tol.max(DEFINITENESS_REL * hessian.norm());
    let class = if lo > thr {
        Classification::IsolatedMin
    } else if hi < -thr {
        Classification::Max
    } else if lo < -thr && hi > thr {
        Classification::Saddle
    } else {
        Classification::Degenerate
    };
    (class, [lo, hi])
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalPoint {
    pub t_p: f64,
    pub t_q: f64,
    pub p: BoundaryPoint,
    pub q: BoundaryPoint,
    #[serde(rename = "W")]
    pub w_value: f64,
    #[serde(rename = "hess")]
    pub hessian: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
    pub gradient_norm: f64,
    #[serde(rename = "class")]
    pub classification: Classification,
}

fn gradient_hessian(pe: &PairEnergy, tp: f64, tq: f64, h: f64) -> Result<(f64, Vector2<f64>, Matrix2<f64>)> {
    let f = |a: f64, b: f64| pe.eval(a, b);
    let f0 = f(tp, tq)?;
    let fpx = f(tp + h, tq)?;
    let fmx = f(tp - h, tq)?;
    let fpy = f(tp, tq + h)?;
    let fmy = f(tp, tq - h)?;
    let fpp = f(tp + h, tq + h)?;
    let fpm = f(tp + h, tq - h)?;
    let fmp = f(tp - h, tq + h)?;
    let fmm = f(tp - h, tq - h)?;
    let g = Vector2::new((fpx - fmx) / (2.0 * h), (fpy - fmy) / (2.0 * h));
    let hxx = (fpx - 2.0 * f0 + fmx) / (h * h);
    let hyy = (fpy - 2.0 * f0 + fmy) / (h * h);
    let hxy = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    Ok((f0, g, Matrix2::new(hxx, hxy, hxy, hyy)))
}

/// Damped Newton refinement of a grid candidate to a stationary point.
fn refine(pe: &PairEnergy, tp: f64, tq: f64, max_step: f64) -> Result<(f64, f64)> {
    let h = FD_FRACTION * pe.period();
    let (mut x, mut y) = (tp, tq);
    let mut history = Vec::new();
    for it in 0..60 {
        let (f0, g, hess) = gradient_hessian(pe, x, y, h)?;
        history.push(g.norm());
        if g.norm() <= GRADIENT_TOL {
            return Ok((x, y));
        }
        let mut step = match hess.try_inverse() {
            Some(inv) if hess.determinant() > 0.0 && hess[(0, 0)] > 0.0 => -(inv * g),
            _ => -g,
        };
        if step.norm() > max_step {
            step *= max_step / step.norm();
        }
        let mut accepted = false;
        for _ in 0..30 {
            let (nx, ny) = (x + step[0], y + step[1]);
            if let Ok(f1) = pe.eval(nx, ny) {
                if f1 <= f0 + 1e-14 * f0.abs().max(1.0) {
                    x = nx;
                    y = ny;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: g.norm(),
                history,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: 60,
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Wrap and order a parameter pair into its canonical representative.
fn canonical_pair(model: ParamModel, tp: f64, tq: f64) -> (f64, f64) {
    match model {
        ParamModel::Circle => {
            let (a, b) = (tp.rem_euclid(TAU), tq.rem_euclid(TAU));
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        }
        ParamModel::Line { .. } => {
            if tp <= tq {
                (tp, tq)
            } else {
                (tq, tp)
            }
        }
        ParamModel::RectangleSides { .. } => (tp, tq),
    }
}

/// Build a classified critical point at `(tp, tq)`.
pub fn critical_point(pe: &PairEnergy, tp: f64, tq: f64, tol: f64) -> Result<CriticalPoint> {
    let h = FD_FRACTION * pe.period();
    let (w, g, hess) = gradient_hessian(pe, tp, tq, h)?;
    let (class, eig) = classify(&hess, tol);
    let (p, q) = pe.points(tp, tq)?;
    Ok(CriticalPoint {
        t_p: tp,
        t_q: tq,
        p,
        q,
        w_value: w,
        hessian: [[hess[(0, 0)], hess[(0, 1)]], [hess[(1, 0)], hess[(1, 1)]]],
        eigenvalues: eig,
        gradient_norm: g.norm(),
        classification: class,
    })
}

/// Isolated local minimizers of `W` over the canonical parameter pairs.
///
/// Grid local minima whose eight neighbours all lie outside the diagonal band
/// are refined by damped Newton with central differences. Pairs are returned
/// with `t_p < t_q` (except on rectangles, where `t_p` is the bottom side).
pub fn find_local_minima(domain: &Domain, grid_n: usize, delta_diag: Option<f64>, tol: f64) -> Result<Vec<CriticalPoint>> {
    if grid_n < 64 {
        return Err(Error::param(format!("find_local_minima needs grid_n >= 64 (got {grid_n})")));
    }
    let land = energy_landscape(domain, grid_n, delta_diag)?;
    let pe = PairEnergy::new(domain.clone());
    let model = domain.model();
    let periodic = matches!(model, ParamModel::Circle);
    let n = grid_n;
    let spacing = (land.axis[1] - land.axis[0]).abs();
    let mut candidates = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let Some(v) = land.get(i, j) else { continue };
            let mut is_min = true;
            'nb: for di in [-1i64, 0, 1] {
                for dj in [-1i64, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    let (a, b) = if periodic {
                        (a.rem_euclid(n as i64), b.rem_euclid(n as i64))
                    } else if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        is_min = false;
                        break 'nb;
                    } else {
                        (a, b)
                    };
                    match land.get(a as usize, b as usize) {
                        Some(u) if u >= v => {}
                        _ => {
                            is_min = false;
                            break 'nb;
                        }
                    }
                }
            }
            if is_min {
                candidates.push((land.axis[i], land.axis[j]));
            }
        }
    }
    debug!("{} grid candidates", candidates.len());
    let refined: Vec<Option<CriticalPoint>> = candidates
        .par_iter()
        .map(|&(tp, tq)| match refine(&pe, tp, tq, spacing) {
            Ok((x, y)) => {
                let (x, y) = canonical_pair(model, x, y);
                match critical_point(&pe, x, y, tol) {
                    Ok(cp) => Some(cp),
                    Err(e) => {
                        warn!("candidate ({tp:.6}, {tq:.6}) dropped: {e}");
                        None
                    }
                }
            }
            Err(e) => {
                warn!("candidate ({tp:.6}, {tq:.6}) dropped: {e}");
                None
            }
        })
        .collect();
    let merge = 1e-6 * model.span();
    let mut out: Vec<CriticalPoint> = Vec::new();
    for cp in refined.into_iter().flatten() {
        if cp.classification != Classification::IsolatedMin {
            debug!("refined point ({:.6}, {:.6}) classified {:?}", cp.t_p, cp.t_q, cp.classification);
            continue;
        }
        if out.iter().any(|o| (o.t_p - cp.t_p).abs() < merge && (o.t_q - cp.t_q).abs() < merge) {
            continue;
        }
        out.push(cp);
    }
    out.sort_by(|a, b| a.t_p.total_cmp(&b.t_p).then(a.t_q.total_cmp(&b.t_q)));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Smoothed-polygon certificate

/// Which boundary exponent the certificate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateExponent {
    /// `(N²+1)^{1/N - 2}`: the bound that the estimate actually proves.
    Rigorous,
    /// `(N²+1)^{1/N - 1}`: the form used when the certificate is applied.
    Displayed,
}

impl CertificateExponent {
    pub fn value(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            CertificateExponent::Rigorous => 1.0 / nf - 2.0,
            CertificateExponent::Displayed => 1.0 / nf - 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolygonCertificate {
    pub n: usize,
    pub b: f64,
    pub cell: (usize, usize),
    /// Bound on the cell centre value, `16N²`.
    pub center_bound: f64,
    pub boundary_bound_rigorous: f64,
    pub boundary_bound_displayed: f64,
    /// Verdict of the rigorous branch.
    pub certified: bool,
    pub certified_displayed: bool,
}

fn boundary_bound(n: usize, b: f64, exponent: CertificateExponent) -> f64 {
    let nf = n as f64;
    b.powf(-2.0 / nf) * (nf * nf + 1.0).powf(exponent.value(n))
}

/// Certificate for a local minimum of `W` in the cell `(A, A+1) × (B, B+1)`
/// of the equiangular smoothed polygon with prevertices `1..=N`.
pub fn polygon_minima_certificate(n: usize, b: f64, a_idx: usize, b_idx: usize) -> Result<PolygonCertificate> {
    if n < 3 {
        return Err(Error::param("polygon certificate needs N >= 3"));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::param(format!("polygon certificate needs b in (0, 1) (got {b})")));
    }
    if !(a_idx >= 1 && a_idx + 1 < b_idx && b_idx < n) {
        return Err(Error::param(format!("cell indices need 1 <= A, A+1 < B, B+1 <= N (got A={a_idx}, B={b_idx}, N={n})")));
    }
    let nf = n as f64;
    let center = 16.0 * nf * nf;
    let rig = boundary_bound(n, b, CertificateExponent::Rigorous);
    let disp = boundary_bound(n, b, CertificateExponent::Displayed);
    Ok(PolygonCertificate {
        n,
        b,
        cell: (a_idx, b_idx),
        center_bound: center,
        boundary_bound_rigorous: rig,
        boundary_bound_displayed: disp,
        certified: center < rig,
        certified_displayed: center < disp,
    })
}

/// All admissible cells `(A, B)` for `N`.
pub fn polygon_cells(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 1..n {
        for b in (a + 2)..n {
            out.push((a, b));
        }
    }
    out
}

/// Largest `b` passing the certificate, located by bisection in `log b`.
pub fn polygon_certificate_threshold(n: usize, exponent: CertificateExponent) -> f64 {
    let nf = n as f64;
    let passes = |b: f64| 16.0 * nf * nf < boundary_bound(n, b, exponent);
    let (mut lo, mut hi) = (-745.0f64, 0.0f64);
    if !passes(lo.exp()) {
        return 0.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if passes(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.exp()
}

/// Which certified cell contains the line-parameter pair, if any.
pub fn containing_cell(n: usize, xp: f64, xq: f64) -> Option<(usize, usize)> {
    let (a, b) = (xp.floor(), xq.floor());
    if a < 1.0 || b < 1.0 {
        return None;
    }
    let (a, b) = (a as usize, b as usize);
    polygon_cells(n).into_iter().find(|&c| c == (a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn disk() -> Domain {
        Domain::new(DomainSpec::UnitDisk {}).unwrap()
    }

    #[test]
    fn antipodal_disk() {
        let d = disk();
        let p = d.boundary_point(0.0).unwrap();
        let q = d.boundary_point(PI).unwrap();
        let w = renorm_w_conformal(&d, &p, &q).unwrap();
        // direct evaluation of (4/π) log 2
        assert_relative_eq!(w, 4.0 / PI * 2f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(w, 0.882542, epsilon = 1e-6);
    }

    #[test]
    fn unit_chord_is_zero() {
        let d = disk();
        let p = d.boundary_point(0.0).unwrap();
        let q = d.boundary_point(PI / 3.0).unwrap();
        assert!(renorm_w_conformal(&d, &p, &q).unwrap().abs() < 1e-12);
        assert!(renorm_w_green(&d, &p, &q).unwrap().abs() < 1e-12);
    }

    #[test]
    fn diagonal_is_rejected() {
        let d = disk();
        let p = d.boundary_point(1.0).unwrap();
        assert!(matches!(renorm_w_conformal(&d, &p, &p), Err(Error::Diagonal { .. })));
    }

    #[test]
    fn green_capability() {
        let d = Domain::new(DomainSpec::RegularPolygonDisk { n: 4, r: 0.9 }).unwrap();
        let p = d.boundary_point(0.0).unwrap();
        let q = d.boundary_point(1.0).unwrap();
        assert!(matches!(renorm_w_green(&d, &p, &q), Err(Error::Capability { .. })));
        let r = Domain::new(DomainSpec::Rectangle { l: 1.0, h: 1.0 }).unwrap();
        let p = r.boundary_point(0.5).unwrap();
        assert!(matches!(renorm_w_conformal(&r, &p, &p), Err(Error::Capability { .. })));
    }

    #[test]
    fn rectangle_green_matches_series() {
        let r = Domain::new(DomainSpec::Rectangle { l: 1.0, h: 1.0 }).unwrap();
        let pe = PairEnergy::new(r.clone());
        let (p, q) = pe.points(0.5, 0.5).unwrap();
        assert!((q.z - Complex64::new(0.5, 1.0)).norm() < 1e-14);
        let w = renorm_w_green(&r, &p, &q).unwrap();
        let w_swapped = renorm_w_green(&r, &q, &p).unwrap();
        // 10⁴-term partial sum as an independent evaluation
        let mut s = 0.0;
        for n in 1..=10_000 {
            let nf = n as f64;
            let y = nf * PI;
            if y > 700.0 {
                break;
            }
            s += nf * (nf * PI * 0.5).sin().powi(2) / y.sinh();
        }
        let phi = 2.0 * PI * s;
        assert_relative_eq!(w, -2.0 / PI * (PI * phi).ln(), epsilon = 1e-13);
        assert_eq!(w, w_swapped);
        assert_relative_eq!(w, -0.3448087450321, epsilon = 1e-11);
    }

    #[test]
    fn rectangle_phi_properties() {
        assert_eq!(rectangle_phi(1.0, 1.0, 0.0, 0.4, None).unwrap(), 0.0);
        let a = rectangle_phi(1.0, 1.0, 0.5, 0.5, Some(50)).unwrap();
        let b = rectangle_phi(1.0, 1.0, 0.5, 0.5, Some(100)).unwrap();
        assert!((a - b).abs() <= 1e-14);
        assert!(a > 0.0);
        assert!(rectangle_phi_terms(1.0, 1.0).unwrap() < 20);
    }

    #[test]
    fn midpoint_hessian() {
        for (l, h) in [(1.0, 1.0), (1.0, 2.0), (0.8, 1.0)] {
            let hs = rectangle_hessian_at_midpoint(l, h).unwrap();
            assert!(hs.negative_definite, "{l} {h}: {hs:?}");
            assert_eq!(hs.phi_x, 0.0);
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let (l, h) = (1.0, 1.3);
        let hs = rectangle_hessian_at_midpoint(l, h).unwrap();
        let f = |x: f64, y: f64| rectangle_phi(l, h, x, y, None).unwrap();
        let e = 1e-4;
        let fxx = (f(0.5 + e, 0.5) - 2.0 * f(0.5, 0.5) + f(0.5 - e, 0.5)) / (e * e);
        let fxy = (f(0.5 + e, 0.5 + e) - f(0.5 + e, 0.5 - e) - f(0.5 - e, 0.5 + e) + f(0.5 - e, 0.5 - e)) / (4.0 * e * e);
        assert_relative_eq!(hs.phi_xx, fxx, max_relative = 1e-5);
        assert_relative_eq!(hs.phi_x_xt, fxy, max_relative = 1e-5);
    }

    #[test]
    fn odd_terms_dominate_for_tall_rectangle() {
        let (l, h): (f64, f64) = (1.0, 2.0);
        for k in 1..=10 {
            let odd = (2 * k - 1) as f64;
            let even = (2 * k) as f64;
            assert!(odd.powi(3) / (PI * h * odd / l).sinh() > even.powi(3) / (PI * h * even / l).sinh());
        }
    }

    #[test]
    fn t0_root() {
        let t = three_tanh_root();
        assert!((t - 3.0 * t.tanh()).abs() <= 1e-12);
        assert!((t - 2.9847).abs() < 1e-4);
        assert!(2.5 - 3.0 * 2.5f64.tanh() < 0.0);
        assert!(3.0 - 3.0 * 3.0f64.tanh() > 0.0);
    }

    #[test]
    fn certificate_threshold_matches_closed_form() {
        for n in [4usize, 6] {
            let nf = n as f64;
            for ex in [CertificateExponent::Rigorous, CertificateExponent::Displayed] {
                let closed = ((nf * nf + 1.0).powf(ex.value(n)) / (16.0 * nf * nf)).powf(nf / 2.0);
                let b = polygon_certificate_threshold(n, ex);
                assert_relative_eq!(b, closed, max_relative = 1e-10);
            }
        }
        let b4 = polygon_certificate_threshold(4, CertificateExponent::Rigorous);
        assert!((b4 / 7.5e-10 - 1.0).abs() < 0.01, "{b4}");
    }

    #[test]
    fn certificate_cells() {
        assert_eq!(polygon_cells(6).len(), 6);
        assert_eq!(polygon_cells(4), vec![(1, 3)]);
        assert!(polygon_minima_certificate(6, 0.5, 2, 3).is_err());
        assert!(polygon_minima_certificate(6, 0.5, 1, 6).is_err());
        let c = polygon_minima_certificate(6, 0.5, 1, 3).unwrap();
        assert!(!c.certified);
    }

    #[test]
    fn classify_definite() {
        let (c, _) = classify(&Matrix2::new(2.0, 0.5, 0.5, 1.0), 0.0);
        assert_eq!(c, Classification::IsolatedMin);
        let (c, _) = classify(&Matrix2::new(2.0, 0.0, 0.0, -1.0), 0.0);
        assert_eq!(c, Classification::Saddle);
        let (c, _) = classify(&Matrix2::new(-2.0, 0.0, 0.0, -1.0), 0.0);
        assert_eq!(c, Classification::Max);
        let (c, _) = classify(&Matrix2::new(1.0, 1.0, 1.0, 1.0), 0.0);
        assert_eq!(c, Classification::Degenerate);
    }

    #[test]
    fn landscape_csv_header() {
        let land = energy_landscape(&disk(), 8, None).unwrap();
        assert!(land.to_csv().starts_with("t_p,t_q,W\n"));
        assert_eq!(land.retained().len(), 8 * 8 - 8);
    }
}
