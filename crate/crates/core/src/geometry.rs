//! Planar domains described by conformal maps from the unit disk or the upper
//! half-plane.
//!
//! Every supported domain except the rectangle has a *canonical model*: the
//! unit circle (parameter `θ`) or the line `Im z = b` of a shifted half-plane
//! (parameter `x`). A [`BoundaryPoint`] carries the canonical parameter, the
//! physical position and the metric factor `|ψ'|` of the map at that point.
//!
//! Branches: `(w - a_j)^{α_j}` and `(1 - w^N)^{2/N}` use the principal
//! branch. For the half-plane integrand every `w - a_j` stays in the closed
//! upper half-plane along the integration path, and for the disk integrand
//! `Re(1 - w^N) > 0` inside the unit disk, so neither path meets a cut.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Domain description; serialized with a `"kind"` discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    UnitDisk {},
    Rectangle {
        #[serde(rename = "L")]
        l: f64,
        #[serde(rename = "H")]
        h: f64,
    },
    ScPolygon {
        prevertices: Vec<f64>,
        angles: Vec<f64>,
        b: f64,
    },
    RegularPolygonDisk {
        #[serde(rename = "N")]
        n: usize,
        r: f64,
    },
}

/// How boundary points of a domain are addressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamModel {
    /// `θ ∈ [0, 2π)` on the unit circle.
    Circle,
    /// Real coordinate on the shifted line; `window` is the searched range.
    Line { window: (f64, f64) },
    /// Bottom side `x ∈ (0, L)` paired with top side `x̃ ∈ (0, L)`.
    RectangleSides { length: f64 },
}

impl ParamModel {
    pub fn span(&self) -> f64 {
        match *self {
            ParamModel::Circle => TAU,
            ParamModel::Line { window } => window.1 - window.0,
            ParamModel::RectangleSides { length } => length,
        }
    }
}

impl DomainSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DomainSpec::UnitDisk {} => "unit_disk",
            DomainSpec::Rectangle { .. } => "rectangle",
            DomainSpec::ScPolygon { .. } => "sc_polygon",
            DomainSpec::RegularPolygonDisk { .. } => "regular_polygon_disk",
        }
    }

    /// Smoothed-polygon configuration: prevertices `1..=N`, equal angles `2/N`.
    pub fn equiangular_sc(n: usize, b: f64) -> DomainSpec {
        DomainSpec::ScPolygon {
            prevertices: (1..=n).map(|k| k as f64).collect(),
            angles: vec![2.0 / n as f64; n],
            b,
        }
    }

    /// Checks the invariants; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        match self {
            DomainSpec::UnitDisk {} => {}
            DomainSpec::Rectangle { l, h } => {
                if !(*l > 0.0 && *h > 0.0 && l.is_finite() && h.is_finite()) {
                    return Err(Error::param(format!("rectangle needs L, H > 0 (got {l}, {h})")));
                }
                if l > h {
                    warnings.push(format!("rectangle with L = {l} > H = {h}: midpoint minimum is only guaranteed for L <= H"));
                }
            }
            DomainSpec::ScPolygon { prevertices, angles, b } => {
                if prevertices.is_empty() || prevertices.len() != angles.len() {
                    return Err(Error::param("sc_polygon needs as many angles as prevertices"));
                }
                if prevertices.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::param("sc_polygon prevertices must be strictly increasing"));
                }
                if angles.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
                    return Err(Error::param("sc_polygon angles must lie in (0, 1)"));
                }
                let total: f64 = angles.iter().sum();
                if (total - 2.0).abs() > 1e-12 {
                    return Err(Error::param(format!("sc_polygon angles must sum to 2 (got {total})")));
                }
                if !(*b > 0.0) {
                    return Err(Error::param("sc_polygon offset b must be positive"));
                }
            }
            DomainSpec::RegularPolygonDisk { n, r } => {
                if *n < 3 {
                    return Err(Error::param("regular_polygon_disk needs N >= 3"));
                }
                if !(*r > 0.0 && *r <= 1.0) {
                    return Err(Error::param("regular_polygon_disk radius r must lie in (0, 1]"));
                }
                if *r == 1.0 {
                    warnings.push("r = 1 is the exact polygon: corner parameters are singular".into());
                }
            }
        }
        Ok(warnings)
    }
}

/// A boundary point in canonical and physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub t: f64,
    pub z: Complex64,
    /// `|ψ'|` at the point; `f64::INFINITY` at a flagged corner.
    pub map_deriv: f64,
    pub corner: bool,
}

// ---------------------------------------------------------------------------
// Unit disk to half-plane

/// `φ(z) = i(1+z)/(1-z)`. The pole `z = 1` returns an infinite sentinel.
pub fn disk_to_halfplane(z: Complex64) -> Complex64 {
    let den = Complex64::new(1.0, 0.0) - z;
    if den.norm() == 0.0 {
        return Complex64::new(f64::INFINITY, f64::INFINITY);
    }
    I * (Complex64::new(1.0, 0.0) + z) / den
}

/// `φ'(z) = 2i/(1-z)²`.
pub fn disk_to_halfplane_deriv(z: Complex64) -> Complex64 {
    let den = Complex64::new(1.0, 0.0) - z;
    if den.norm() == 0.0 {
        return Complex64::new(f64::INFINITY, f64::INFINITY);
    }
    2.0 * I / (den * den)
}

pub fn is_infinite(z: Complex64) -> bool {
    !z.re.is_finite() || !z.im.is_finite()
}

// ---------------------------------------------------------------------------
// Schwarz–Christoffel map of the shifted half-plane

/// `ψ'(w) = Π (w - a_k)^{-α_k}` on the principal branch.
pub fn sc_integrand(prevertices: &[f64], angles: &[f64], w: Complex64) -> Complex64 {
    let mut log_sum = Complex64::new(0.0, 0.0);
    for (&a, &alpha) in prevertices.iter().zip(angles) {
        log_sum += alpha * (w - a).ln();
    }
    (-log_sum).exp()
}

/// `|ψ'(x + ib)| = Π |(x - a_k) + ib|^{-α_k}`.
pub fn sc_derivative_magnitude(prevertices: &[f64], angles: &[f64], b: f64, x: f64) -> f64 {
    let mut log_sum = 0.0;
    for (&a, &alpha) in prevertices.iter().zip(angles) {
        log_sum += alpha * (x - a).hypot(b).ln();
    }
    (-log_sum).exp()
}

fn segment_integral<G>(integrand: &G, from: Complex64, to: Complex64, tol: f64) -> Result<Complex64>
where
    G: Fn(Complex64) -> Complex64,
{
    if from == to {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let d = to - from;
    let q = integrate(
        |s: f64| integrand(from + d * s) * d,
        0.0,
        1.0,
        QuadOptions {
            abs_tol: tol,
            rel_tol: 1e-14,
            max_panels: 4000,
        },
    )?;
    Ok(q.value)
}

/// Integral of `ψ'` along the polyline through `points`.
pub fn sc_integrate_path(prevertices: &[f64], angles: &[f64], points: &[Complex64]) -> Result<Complex64> {
    let integrand = |w: Complex64| sc_integrand(prevertices, angles, w);
    let mut total = Complex64::new(0.0, 0.0);
    for pair in points.windows(2) {
        total += segment_integral(&integrand, pair[0], pair[1], 1e-12)?;
    }
    Ok(total)
}

/// Default path between two points: up to a safe height, across, down.
fn sc_default_path(b: f64, z0: Complex64, z1: Complex64) -> Vec<Complex64> {
    let height = b.max(0.5).max(z0.im).max(z1.im);
    vec![
        z0,
        Complex64::new(z0.re, height),
        Complex64::new(z1.re, height),
        z1,
    ]
}

/// `ψ(z1) - ψ(z0)` along the default path.
pub fn sc_map_between(prevertices: &[f64], angles: &[f64], b: f64, z0: Complex64, z1: Complex64) -> Result<Complex64> {
    sc_integrate_path(prevertices, angles, &sc_default_path(b, z0, z1))
}

/// `ψ(z) = ∫_0^z dw / Π(w - a_j)^{α_j}`.
pub fn sc_map(prevertices: &[f64], angles: &[f64], b: f64, z: Complex64) -> Result<Complex64> {
    sc_map_between(prevertices, angles, b, Complex64::new(0.0, 0.0), z)
}

// ---------------------------------------------------------------------------
// Regular polygon map of the unit disk

/// `ψ'(z) = (1 - z^N)^{-2/N}`.
pub fn regular_polygon_deriv(n: usize, z: Complex64) -> Complex64 {
    let base = Complex64::new(1.0, 0.0) - z.powu(n as u32);
    (-(2.0 / n as f64) * base.ln()).exp()
}

fn near_root_of_unity(n: usize, z: Complex64) -> bool {
    (Complex64::new(1.0, 0.0) - z.powu(n as u32)).norm() < 1e-13
}

/// `ψ(z) = ∫_0^z dw / (1 - w^N)^{2/N}` along the radius.
pub fn regular_polygon_map(n: usize, z: Complex64) -> Result<Complex64> {
    if n < 3 {
        return Err(Error::param("regular polygon map needs N >= 3"));
    }
    let modulus = z.norm();
    if modulus > 1.0 + 1e-14 {
        return Err(Error::param(format!("|z| = {modulus} lies outside the closed unit disk")));
    }
    if near_root_of_unity(n, z) {
        return Err(Error::Corner { t: z.arg().rem_euclid(TAU) });
    }
    if modulus < 0.9 {
        return segment_integral(&|w| regular_polygon_deriv(n, w), Complex64::new(0.0, 0.0), z, 1e-13);
    }
    // Near the circle the integrand can be close to singular; grade toward τ = 1
    // with τ = 1 - s^N so that (1 - τ^N)^{-2/N} dτ stays bounded.
    let nf = n as f64;
    let zn = z.powu(n as u32);
    let q = integrate(
        |s: f64| {
            let sn = s.powi(n as i32);
            let tau = 1.0 - sn;
            let jac = nf * s.powi(n as i32 - 1);
            let base = Complex64::new(1.0, 0.0) - zn * tau.powi(n as i32);
            z * jac * (-(2.0 / nf) * base.ln()).exp()
        },
        0.0,
        1.0,
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-14,
            max_panels: 4000,
        },
    )?;
    Ok(q.value)
}

/// `ψ(1) = ∫_0^1 (1 - t^N)^{-2/N} dt`, the vertex radius of the exact polygon.
pub fn regular_polygon_vertex_radius(n: usize) -> f64 {
    let nf = n as f64;
    // t = 1 - s^N removes the endpoint singularity; 1 - (1 - s^N)^N computed without cancellation.
    let q = integrate(
        |s: f64| {
            if s == 0.0 {
                return if n == 3 { nf.powf(1.0 - 2.0 / nf) } else { 0.0 };
            }
            let sn = s.powi(n as i32);
            let one_minus = -(nf * (-sn).ln_1p()).exp_m1();
            nf * s.powi(n as i32 - 1) * one_minus.powf(-2.0 / nf)
        },
        0.0,
        1.0,
        QuadOptions::default(),
    )
    .expect("smooth integrand");
    q.value
}

/// Side length of the exact polygon `ψ(unit disk)`.
pub fn regular_polygon_side(n: usize) -> f64 {
    2.0 * (PI / n as f64).sin() * regular_polygon_vertex_radius(n)
}

// ---------------------------------------------------------------------------
// Domains with cached constants

/// A validated domain with the constants its maps need.
#[derive(Debug, Clone)]
pub struct Domain {
    spec: DomainSpec,
    /// For `regular_polygon_disk`: 1/side so that the limiting polygon has unit side.
    scale: f64,
    /// For `sc_polygon`: Cayley centre and half-width of the circle model.
    cayley: (f64, f64),
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Domain> {
        spec.validate()?;
        let scale = match &spec {
            DomainSpec::RegularPolygonDisk { n, .. } => 1.0 / regular_polygon_side(*n),
            _ => 1.0,
        };
        let cayley = match &spec {
            DomainSpec::ScPolygon { prevertices, .. } => {
                let lo = prevertices[0];
                let hi = prevertices[prevertices.len() - 1];
                (0.5 * (lo + hi), 0.5 * (hi - lo) + 1.0)
            }
            _ => (0.0, 1.0),
        };
        Ok(Domain { spec, scale, cayley })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn kind_name(&self) -> &'static str {
        self.spec.kind_name()
    }

    /// Multiplier applied to the raw polygon map (1 for other kinds).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn model(&self) -> ParamModel {
        match &self.spec {
            DomainSpec::UnitDisk {} | DomainSpec::RegularPolygonDisk { .. } => ParamModel::Circle,
            DomainSpec::ScPolygon { prevertices, .. } => ParamModel::Line {
                window: (prevertices[0] - 1.0, prevertices[prevertices.len() - 1] + 1.0),
            },
            DomainSpec::Rectangle { l, .. } => ParamModel::RectangleSides { length: *l },
        }
    }

    /// Metric factor `|ψ'|` at canonical parameter `t`.
    pub fn map_deriv(&self, t: f64) -> Result<f64> {
        match &self.spec {
            DomainSpec::UnitDisk {} => Ok(1.0),
            DomainSpec::RegularPolygonDisk { n, r } => {
                let z = Complex64::from_polar(*r, t);
                if *r == 1.0 && near_root_of_unity(*n, z) {
                    return Ok(f64::INFINITY);
                }
                Ok(self.scale * r * regular_polygon_deriv(*n, z).norm())
            }
            DomainSpec::ScPolygon { prevertices, angles, b } => Ok(sc_derivative_magnitude(prevertices, angles, *b, t)),
            DomainSpec::Rectangle { .. } => Ok(1.0),
        }
    }

    /// Boundary point at canonical parameter `t`.
    ///
    /// Rectangles use the perimeter arc length from `(0, 0)`, counterclockwise.
    pub fn boundary_point(&self, t: f64) -> Result<BoundaryPoint> {
        match &self.spec {
            DomainSpec::UnitDisk {} => Ok(BoundaryPoint {
                t,
                z: Complex64::from_polar(1.0, t),
                map_deriv: 1.0,
                corner: false,
            }),
            DomainSpec::RegularPolygonDisk { n, r } => {
                let zeta = Complex64::from_polar(*r, t);
                if *r == 1.0 && near_root_of_unity(*n, zeta) {
                    let vertex = self.scale * regular_polygon_vertex_radius(*n);
                    let k = (t * *n as f64 / TAU).round();
                    return Ok(BoundaryPoint {
                        t,
                        z: Complex64::from_polar(vertex, k * TAU / *n as f64),
                        map_deriv: f64::INFINITY,
                        corner: true,
                    });
                }
                Ok(BoundaryPoint {
                    t,
                    z: self.scale * regular_polygon_map(*n, zeta)?,
                    map_deriv: self.map_deriv(t)?,
                    corner: false,
                })
            }
            DomainSpec::ScPolygon { prevertices, angles, b } => Ok(BoundaryPoint {
                t,
                z: sc_map(prevertices, angles, *b, Complex64::new(t, *b))?,
                map_deriv: sc_derivative_magnitude(prevertices, angles, *b, t),
                corner: false,
            }),
            DomainSpec::Rectangle { l, h } => {
                let per = 2.0 * (l + h);
                let s = t.rem_euclid(per);
                let z = if s <= *l {
                    Complex64::new(s, 0.0)
                } else if s <= l + h {
                    Complex64::new(*l, s - l)
                } else if s <= 2.0 * l + h {
                    Complex64::new(l - (s - l - h), *h)
                } else {
                    Complex64::new(0.0, h - (s - 2.0 * l - h))
                };
                let corner = [0.0, *l, l + h, 2.0 * l + h]
                    .iter()
                    .any(|&c| (s - c).abs() < 1e-14 || (per - s).abs() < 1e-14);
                Ok(BoundaryPoint {
                    t,
                    z,
                    map_deriv: if corner { f64::INFINITY } else { 1.0 },
                    corner,
                })
            }
        }
    }

    /// Map from the unit disk onto the domain and its derivative.
    pub fn disk_map(&self, zeta: Complex64) -> Result<(Complex64, Complex64)> {
        match &self.spec {
            DomainSpec::UnitDisk {} => Ok((zeta, Complex64::new(1.0, 0.0))),
            DomainSpec::RegularPolygonDisk { n, r } => {
                let w = zeta * *r;
                Ok((
                    self.scale * regular_polygon_map(*n, w)?,
                    self.scale * *r * regular_polygon_deriv(*n, w),
                ))
            }
            DomainSpec::ScPolygon { prevertices, angles, b } => {
                let (c0, s) = self.cayley;
                let one = Complex64::new(1.0, 0.0);
                if (one - zeta).norm() < 1e-14 {
                    return Err(Error::Geometry("disk model point maps to infinity".into()));
                }
                let m = c0 + s * I * (one + zeta) / (one - zeta) + I * *b;
                let dm = 2.0 * I * s / ((one - zeta) * (one - zeta));
                Ok((sc_map(prevertices, angles, *b, m)?, sc_integrand(prevertices, angles, m) * dm))
            }
            DomainSpec::Rectangle { .. } => Err(Error::Capability {
                op: "disk_map",
                kind: "rectangle",
            }),
        }
    }

    /// Metric factor of the circle model at angle `θ` (the boundary solver's weight).
    pub fn circle_weight(&self, theta: f64) -> Result<f64> {
        match &self.spec {
            DomainSpec::UnitDisk {} => Ok(1.0),
            DomainSpec::RegularPolygonDisk { r, .. } => {
                if *r >= 1.0 {
                    return Err(Error::Capability {
                        op: "circle_weight (exact polygon corners)",
                        kind: "regular_polygon_disk",
                    });
                }
                self.map_deriv(theta)
            }
            DomainSpec::ScPolygon { prevertices, angles, b } => {
                // ζ(θ) = c0 - s·cot(θ/2) + ib; the factor sin²(θ/2) cancels against
                // |ψ'(ζ)| ~ |ζ|^{-2}, which keeps θ = 0 (ζ = ∞) finite.
                let (c0, s) = self.cayley;
                let u = (0.5 * theta).sin();
                let c = (0.5 * theta).cos();
                let mut log_sum = 0.0;
                for (&a, &alpha) in prevertices.iter().zip(angles) {
                    let re = (c0 - a) * u - s * c;
                    let im = b * u;
                    log_sum += alpha * re.hypot(im).ln();
                }
                Ok(0.5 * s * (-log_sum).exp())
            }
            DomainSpec::Rectangle { .. } => Err(Error::Capability {
                op: "circle_weight",
                kind: "rectangle",
            }),
        }
    }
}

/// Boundary point of `spec` at canonical parameter `t`.
pub fn boundary_point(spec: &DomainSpec, t: f64) -> Result<BoundaryPoint> {
    Domain::new(spec.clone())?.boundary_point(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn disk_to_halfplane_examples() {
        assert!((disk_to_halfplane(c(0.0, 0.0)) - I).norm() < 1e-15);
        assert!(disk_to_halfplane(c(-1.0, 0.0)).norm() < 1e-15);
        assert!((disk_to_halfplane(I) - c(-1.0, 0.0)).norm() < 1e-15);
        assert!(is_infinite(disk_to_halfplane(c(1.0, 0.0))));
    }

    #[test]
    fn sc_empty_integral() {
        let v = sc_map(&[1.0, 2.0], &[1.0, 1.0], 0.3, c(0.0, 0.0)).unwrap();
        assert_eq!(v, c(0.0, 0.0));
    }

    #[test]
    fn sc_antiderivative_oracle() {
        // ψ' = z^{-2} ⇒ ψ(i) - ψ(2i) = -1/i + 1/(2i) = i/2
        let d = sc_map_between(&[0.0], &[2.0], 1.0, c(0.0, 2.0), c(0.0, 1.0)).unwrap();
        assert!((d - c(0.0, 0.5)).norm() < 1e-12, "{d}");
    }

    #[test]
    fn sc_path_independence() {
        let pv = [1.0, 2.0, 3.0, 4.0];
        let al = [0.5; 4];
        let target = c(1.0, 2.0);
        let a = sc_integrate_path(&pv, &al, &[c(0.0, 0.0), c(0.0, 2.0), target]).unwrap();
        let b = sc_integrate_path(&pv, &al, &[c(0.0, 0.0), c(0.0, 0.7), c(3.5, 0.7), c(3.5, 3.0), target]).unwrap();
        assert!((a - b).norm() < 1e-11, "{a} vs {b}");
    }

    #[test]
    fn sc_derivative_examples() {
        assert!((sc_derivative_magnitude(&[0.0], &[1.0], 1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((sc_derivative_magnitude(&[0.0], &[1.0], 2.0, 0.0) - 0.5).abs() < 1e-15);
        let oracle: f64 = (1..=4).map(|k| c(1.0 - k as f64, 0.1).norm().powf(-0.5)).product();
        let v = sc_derivative_magnitude(&[1.0, 2.0, 3.0, 4.0], &[0.5; 4], 0.1, 1.0);
        assert!((v - oracle).abs() < 1e-13 * oracle);
    }

    #[test]
    fn polygon_map_origin_and_symmetry() {
        assert_eq!(regular_polygon_map(4, c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        let a = regular_polygon_map(4, c(0.5, 0.0)).unwrap();
        let b = regular_polygon_map(4, c(0.0, 0.5)).unwrap();
        assert!((a.norm() - b.norm()).abs() < 1e-14);
    }

    #[test]
    fn polygon_map_two_rule_oracle() {
        // Fixed 2×-refined Gauss–Legendre rules on the radial integral.
        let rule = |m: usize| {
            let (x, w) = crate::quadrature::gauss_legendre(m);
            x.iter()
                .zip(&w)
                .map(|(&xi, &wi)| {
                    let t = 0.25 * (xi + 1.0);
                    0.25 * wi * (1.0 - t.powi(4)).powf(-0.5)
                })
                .sum::<f64>()
        };
        let coarse = rule(40);
        let fine = rule(80);
        assert!((coarse - fine).abs() < 1e-14);
        let v = regular_polygon_map(4, c(0.5, 0.0)).unwrap();
        assert!((v.re - fine).abs() < 1e-10 && v.im.abs() < 1e-15);
    }

    #[test]
    fn polygon_corner_is_an_error() {
        assert!(matches!(regular_polygon_map(4, c(0.0, 1.0)), Err(Error::Corner { .. })));
        let d = Domain::new(DomainSpec::RegularPolygonDisk { n: 4, r: 1.0 }).unwrap();
        let p = d.boundary_point(0.0).unwrap();
        assert!(p.corner && p.map_deriv.is_infinite());
    }

    #[test]
    fn vertex_radius_square() {
        // ψ(1) for N = 4 is the lemniscate constant ϖ/2.
        assert!((regular_polygon_vertex_radius(4) - 1.311_028_777_146_059_9).abs() < 1e-13);
        // |ψ(1)| equals the map evaluated directly.
        let v = regular_polygon_map(6, c(0.999_999, 0.0)).unwrap();
        assert!((v.re - regular_polygon_vertex_radius(6)).abs() < 1e-3);
    }

    #[test]
    fn unit_disk_points() {
        let d = Domain::new(DomainSpec::UnitDisk {}).unwrap();
        let p = d.boundary_point(0.0).unwrap();
        assert!((p.z - c(1.0, 0.0)).norm() < 1e-15 && p.map_deriv == 1.0);
        let q = d.boundary_point(PI).unwrap();
        assert!((q.z - c(-1.0, 0.0)).norm() < 1e-15 && q.map_deriv == 1.0);
    }

    #[test]
    fn polygon_disk_point_matches_finite_difference() {
        let d = Domain::new(DomainSpec::RegularPolygonDisk { n: 4, r: 0.9 }).unwrap();
        let p = d.boundary_point(0.0).unwrap();
        let raw = regular_polygon_map(4, c(0.9, 0.0)).unwrap();
        assert!((p.z - d.scale() * raw).norm() < 1e-14);
        let h = 1e-5;
        let fd = (d.boundary_point(h).unwrap().z - d.boundary_point(-h).unwrap().z).norm() / (2.0 * h);
        assert!((fd - p.map_deriv).abs() < 1e-8 * p.map_deriv, "{fd} vs {}", p.map_deriv);
    }

    #[test]
    fn sc_circle_weight_matches_disk_map() {
        let d = Domain::new(DomainSpec::equiangular_sc(4, 0.2)).unwrap();
        for &th in &[0.3, 1.7, 3.0, 5.9] {
            let (_, dg) = d.disk_map(Complex64::from_polar(1.0, th)).unwrap();
            let w = d.circle_weight(th).unwrap();
            assert!((dg.norm() - w).abs() < 1e-12 * w);
        }
        assert!(d.circle_weight(0.0).unwrap().is_finite());
    }

    #[test]
    fn spec_json_round_trip() {
        let s = r#"{"kind":"rectangle","L":1.0,"H":2.0}"#;
        let d: DomainSpec = serde_json::from_str(s).unwrap();
        assert_eq!(d, DomainSpec::Rectangle { l: 1.0, h: 2.0 });
        let d: DomainSpec = serde_json::from_str(r#"{"kind":"regular_polygon_disk","N":4,"r":0.9}"#).unwrap();
        assert_eq!(d, DomainSpec::RegularPolygonDisk { n: 4, r: 0.9 });
        assert!(serde_json::from_str::<DomainSpec>(r#"{"kind":"unit_disk","x":1}"#).is_err());
        let back = serde_json::to_string(&DomainSpec::UnitDisk {}).unwrap();
        assert_eq!(back, r#"{"kind":"unit_disk"}"#);
    }

    #[test]
    fn validation() {
        assert!(DomainSpec::RegularPolygonDisk { n: 2, r: 0.5 }.validate().is_err());
        assert!(DomainSpec::ScPolygon {
            prevertices: vec![0.0, 1.0],
            angles: vec![0.5, 0.5],
            b: 0.1
        }
        .validate()
        .is_err());
        assert_eq!(DomainSpec::Rectangle { l: 2.0, h: 1.0 }.validate().unwrap().len(), 1);
    }
}
