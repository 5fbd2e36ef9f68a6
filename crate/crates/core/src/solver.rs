//! Boundary reaction problem `Δu = 0` in Ω, `∂_ν u = f(u)/ε` on ∂Ω.
//!
//! Pulled back to the unit disk by the conformal map `g`, the problem becomes
//! `Λu = (w/ε) f(u)` on the circle, where `Λ` is the Dirichlet-to-Neumann
//! map (`|k|` multiplier) and `w = |g'|` the boundary metric factor. Traces
//! are sampled at `θ_j = 2πj/n` and discretised by trigonometric collocation.

use std::f64::consts::{PI, TAU};

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainSpec};
use crate::layer::LayerProfile;
use crate::nonlinearity::Nonlinearity;
use crate::spectral::Spectral;

/// Iterates are clamped to `[-CLAMP, CLAMP]`.
pub const CLAMP: f64 = 1.2;
/// Slack allowed by the maximum-principle check.
pub const BOUND_SLACK: f64 = 1e-9;

/// Trace samples on the circle model with their metric factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryField {
    pub n_modes: usize,
    pub values: Vec<f64>,
    pub weight: Vec<f64>,
}

impl BoundaryField {
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_modes).map(|j| TAU * j as f64 / self.n_modes as f64).collect()
    }

    pub fn within_bounds(&self) -> bool {
        self.values.iter().all(|v| v.abs() <= 1.0 + BOUND_SLACK)
    }
}

/// `Λu` for the trace of `field`.
pub fn dtn_apply(field: &BoundaryField) -> Vec<f64> {
    Spectral::new(field.n_modes).dtn(&field.values)
}

/// `Λu - (w/ε) f(u)`.
pub fn residual(field: &BoundaryField, f: &Nonlinearity, eps: f64) -> Vec<f64> {
    let lu = dtn_apply(field);
    lu.iter()
        .zip(&field.values)
        .zip(&field.weight)
        .map(|((l, &u), &w)| l - w / eps * f.reaction(u))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    /// `½∫|∇u|²` of the harmonic extension.
    pub dirichlet: f64,
    /// `(1/ε)∫_{∂Ω} G(u) ds`.
    pub potential: f64,
    pub total: f64,
}

/// Converged solution with its diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub eps: f64,
    pub trace: BoundaryField,
    pub residual_norm: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub energy: EnergyParts,
    /// Smallest eigenvalues of the linearisation, ascending.
    pub spectrum_head: Vec<f64>,
    pub spec_tol: f64,
    pub stable: bool,
    /// Circle-model angles where the trace changes sign.
    pub vortices: Vec<f64>,
    /// Angular intervals where `|u| ≤ t_*`.
    pub transition_set: Vec<(f64, f64)>,
    pub within_bounds: bool,
}

impl SolutionRecord {
    pub fn lambda_min(&self) -> f64 {
        self.spectrum_head.first().copied().unwrap_or(f64::NAN)
    }

    /// Whether the trace is (numerically) constant.
    pub fn is_constant(&self) -> bool {
        let v = &self.trace.values;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        hi - lo < 1e-6
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Number of eigenvalues kept in `spectrum_head`.
    pub spectrum_k: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 60,
            spectrum_k: 6,
        }
    }
}

/// `1e-8/ε`, the tolerance of the stable/unstable verdict.
pub fn spec_tol(eps: f64) -> f64 {
    1e-8 / eps
}

/// Discretised problem on a fixed grid.
#[derive(Debug, Clone)]
pub struct BoundaryProblem {
    pub domain: Option<DomainSpec>,
    pub nonlinearity: Nonlinearity,
    pub weight: Vec<f64>,
    spectral: Spectral,
    lam: DMatrix<f64>,
}

impl BoundaryProblem {
    /// Problem on the circle model of `domain` with `n` nodes.
    pub fn new(domain: &Domain, f: Nonlinearity, n: usize) -> Result<BoundaryProblem> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::param(format!("n_modes must be even and >= 8 (got {n})")));
        }
        let weight = (0..n)
            .map(|j| domain.circle_weight(TAU * j as f64 / n as f64))
            .collect::<Result<Vec<f64>>>()?;
        let mut p = BoundaryProblem::with_weight(weight, f)?;
        p.domain = Some(domain.spec().clone());
        Ok(p)
    }

    /// Problem with explicitly given metric factors.
    pub fn with_weight(weight: Vec<f64>, f: Nonlinearity) -> Result<BoundaryProblem> {
        let n = weight.len();
        if n < 8 || n % 2 != 0 {
            return Err(Error::param(format!("n_modes must be even and >= 8 (got {n})")));
        }
        if weight.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Capability {
                op: "boundary solve (weight not finite and positive)",
                kind: "corner-singular domain",
            });
        }
        let spectral = Spectral::new(n);
        let lam = spectral.dtn_matrix();
        Ok(BoundaryProblem {
            domain: None,
            nonlinearity: f,
            weight,
            spectral,
            lam,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.weight.len()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.spectral.nodes()
    }

    pub fn field(&self, values: Vec<f64>) -> BoundaryField {
        BoundaryField {
            n_modes: self.n_modes(),
            values,
            weight: self.weight.clone(),
        }
    }

    pub fn constant(&self, c: f64) -> BoundaryField {
        self.field(vec![c; self.n_modes()])
    }

    pub fn residual(&self, u: &[f64], eps: f64) -> Vec<f64> {
        let lu = self.spectral.dtn(u);
        let f = self.nonlinearity;
        (0..u.len()).map(|j| lu[j] - self.weight[j] / eps * f.reaction(u[j])).collect()
    }

    /// Dense Jacobian `Λ - (w/ε) diag f'(u)` (symmetric).
    pub fn jacobian(&self, u: &[f64], eps: f64) -> DMatrix<f64> {
        let mut j = self.lam.clone();
        for i in 0..u.len() {
            j[(i, i)] -= self.weight[i] / eps * self.nonlinearity.reaction_deriv(u[i]);
        }
        j
    }

    pub fn energy(&self, u: &[f64], eps: f64) -> EnergyParts {
        crate::diagnostics::total_energy(&self.field(u.to_vec()), &self.nonlinearity, eps)
    }

    /// Ascending eigenvalues of the linearisation, first `k` of them.
    pub fn stability_spectrum(&self, u: &[f64], eps: f64, k: usize) -> Result<Vec<f64>> {
        let j = self.jacobian(u, eps);
        let mut ev: Vec<f64> = j.symmetric_eigenvalues().iter().copied().collect();
        if ev.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen(format!("non-finite eigenvalue (‖J‖ = {:.3e})", j.norm())));
        }
        ev.sort_by(f64::total_cmp);
        ev.truncate(k);
        Ok(ev)
    }

    /// Newton iteration with residual-decrease damping.
    pub fn newton_solve(&self, initial: &BoundaryField, eps: f64, opts: SolverOptions) -> Result<SolutionRecord> {
        if !(eps > 0.0) {
            return Err(Error::param("ε must be positive"));
        }
        if initial.n_modes != self.n_modes() {
            return Err(Error::param("initial trace has the wrong grid size"));
        }
        let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut u = initial.values.clone();
        let mut r = self.residual(&u, eps);
        let mut history = vec![norm(&r)];
        let mut it = 0;
        while norm(&r) > opts.tol {
            if it >= opts.max_iter {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: norm(&r),
                    history,
                });
            }
            it += 1;
            let step = self
                .jacobian(&u, eps)
                .lu()
                .solve(&DVector::from_vec(r.clone()))
                .ok_or(Error::Singular)?;
            if step.iter().any(|s| !s.is_finite()) {
                return Err(Error::Singular);
            }
            let current = norm(&r);
            let mut damping = 1.0;
            let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
            for _ in 0..12 {
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| (a - damping * s).clamp(-CLAMP, CLAMP)).collect();
                let tr = self.residual(&trial, eps);
                if norm(&tr) < current {
                    best = Some((trial, tr));
                    break;
                }
                damping *= 0.5;
            }
            let Some((nu, nr)) = best else {
                return Err(Error::NonConvergence {
                    iterations: it,
                    residual: current,
                    history,
                });
            };
            u = nu;
            r = nr;
            history.push(norm(&r));
            debug!("newton eps={eps}: it {it} residual {:.3e} damping {damping}", norm(&r));
        }
        self.record(u, eps, norm(&r), it, history, opts.spectrum_k)
    }

    fn record(&self, u: Vec<f64>, eps: f64, res: f64, iterations: usize, history: Vec<f64>, k: usize) -> Result<SolutionRecord> {
        let energy = self.energy(&u, eps);
        let spectrum_head = self.stability_spectrum(&u, eps, k)?;
        let tol = spec_tol(eps);
        let trace = self.field(u);
        let vortices = sign_changes(&trace.values);
        let transition_set = transition_intervals(&trace.values, self.nonlinearity.t_star());
        Ok(SolutionRecord {
            eps,
            within_bounds: trace.within_bounds(),
            trace,
            residual_norm: res,
            iterations,
            residual_history: history,
            energy,
            stable: spectrum_head[0] >= -tol,
            spectrum_head,
            spec_tol: tol,
            vortices,
            transition_set,
        })
    }

    /// Glue rescaled layers at `θ_p` (trace falls from +1 to -1) and `θ_q`
    /// (rises back) into the two-jump trace; `window` is the half-width in θ
    /// over which the layer is blended into `±1`.
    pub fn initial_guess(&self, theta_p: f64, theta_q: f64, eps: f64, profile: &LayerProfile, window: f64) -> Result<BoundaryField> {
        let d = (theta_q - theta_p).rem_euclid(TAU);
        let gap = d.min(TAU - d);
        if gap < 1e-12 {
            return Err(Error::Diagonal { gap });
        }
        if !(window > 0.0) || 2.0 * window >= gap {
            return Err(Error::Geometry(format!("layer windows of half-width {window} overlap for points {gap} apart")));
        }
        let n = self.n_modes();
        let wp = interp_periodic(&self.weight, theta_p);
        let wq = interp_periodic(&self.weight, theta_q);
        let signed = |theta: f64, c: f64| (theta - c + PI).rem_euclid(TAU) - PI;
        let taper = |s: f64| {
            let a = s.abs() / window;
            if a <= 0.5 {
                1.0
            } else if a >= 1.0 {
                0.0
            } else {
                (PI * (a - 0.5)).cos().powi(2)
            }
        };
        let values = (0..n)
            .map(|j| {
                let theta = TAU * j as f64 / n as f64;
                let from_p = (theta - theta_p).rem_euclid(TAU);
                let chi = if from_p > 0.0 && from_p < d { -1.0 } else { 1.0 };
                let sp = signed(theta, theta_p);
                let sq = signed(theta, theta_q);
                if sp.abs() < window {
                    let layer = -profile.value(wp * sp / eps);
                    chi + taper(sp) * (layer - chi)
                } else if sq.abs() < window {
                    let layer = profile.value(wq * sq / eps);
                    chi + taper(sq) * (layer - chi)
                } else {
                    chi
                }
            })
            .collect();
        Ok(self.field(values))
    }

    /// Follow a solution branch along a geometric ε schedule.
    ///
    /// A failed step is redone from its start in 2, 4, ... 64 equal substeps
    /// in `log ε`; intermediate records are kept.
    pub fn continuation(&self, seed: &SolutionRecord, eps_end: f64, n_steps: usize, opts: SolverOptions) -> Result<Branch> {
        if !(eps_end > 0.0) || n_steps == 0 {
            return Err(Error::param("continuation needs ε_end > 0 and at least one step"));
        }
        let eps_start = seed.eps;
        let ratio = (eps_end / eps_start).ln() / n_steps as f64;
        let mut records = vec![seed.clone()];
        for k in 1..=n_steps {
            let target = eps_start * (ratio * k as f64).exp();
            let start = records.last().expect("seed").clone();
            let span = (target / start.eps).ln();
            let mut pieces = 1u32;
            let mut current = start.clone();
            let mut done = Vec::new();
            while (current.eps / target - 1.0).abs() > 1e-12 {
                let remaining = (target / current.eps).ln();
                let step = span / pieces as f64;
                let next_eps = if step.abs() >= remaining.abs() * (1.0 - 1e-9) {
                    target
                } else {
                    current.eps * step.exp()
                };
                match self.newton_solve(&current.trace, next_eps, opts) {
                    Ok(rec) => {
                        debug!("continuation eps={next_eps:.5} lambda_min={:.3e}", rec.lambda_min());
                        current = rec;
                        if next_eps != target {
                            done.push(current.clone());
                        }
                    }
                    Err(e) => {
                        if pieces >= 64 {
                            return Err(e);
                        }
                        pieces *= 2;
                        info!("continuation step to eps={next_eps:.5} failed ({e}); retrying with {pieces} substeps");
                        current = start.clone();
                        done.clear();
                    }
                }
            }
            records.extend(done);
            records.push(current);
        }
        let flips = records
            .windows(2)
            .filter(|w| w[0].stable != w[1].stable)
            .map(|w| (w[0].eps, w[1].eps))
            .collect();
        Ok(Branch { records, flips })
    }
}

/// Records along a continuation path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub records: Vec<SolutionRecord>,
    /// Consecutive ε pairs between which the stability verdict changes.
    pub flips: Vec<(f64, f64)>,
}

impl Branch {
    /// CSV with header `eps,energy_total,lambda_min,vortex1,vortex2,stable`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,energy_total,lambda_min,vortex1,vortex2,stable\n");
        for r in &self.records {
            let v = |i: usize| r.vortices.get(i).map(|x| format!("{x:.10e}")).unwrap_or_default();
            s.push_str(&format!(
                "{:.10e},{:.12e},{:.10e},{},{},{}\n",
                r.eps,
                r.energy.total,
                r.lambda_min(),
                v(0),
                v(1),
                r.stable
            ));
        }
        s
    }
}

fn interp_periodic(values: &[f64], theta: f64) -> f64 {
    let n = values.len();
    let s = theta.rem_euclid(TAU) / TAU * n as f64;
    let i = s.floor() as usize % n;
    let t = s - s.floor();
    values[i] * (1.0 - t) + values[(i + 1) % n] * t
}

/// Angles where the periodic trace changes sign, by linear interpolation.
pub fn sign_changes(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let h = TAU / n as f64;
    let mut out = Vec::new();
    for j in 0..n {
        let (a, b) = (values[j], values[(j + 1) % n]);
        if a == 0.0 {
            out.push(j as f64 * h);
        } else if a * b < 0.0 {
            out.push((j as f64 + a / (a - b)) * h);
        }
    }
    out
}

/// Maximal runs of nodes with `|u| ≤ t`, as `(θ_start, θ_end)`.
pub fn transition_intervals(values: &[f64], t: f64) -> Vec<(f64, f64)> {
    let n = values.len();
    let h = TAU / n as f64;
    let inside: Vec<bool> = values.iter().map(|v| v.abs() <= t).collect();
    if inside.iter().all(|&b| b) {
        return vec![(0.0, TAU)];
    }
    let Some(start) = (0..n).find(|&j| !inside[j]) else { return Vec::new() };
    let mut out = Vec::new();
    let mut run: Option<usize> = None;
    for k in 1..=n {
        let j = (start + k) % n;
        match (inside[j], run) {
            (true, None) => run = Some(j),
            (false, Some(s)) => {
                let e = (j + n - 1) % n;
                out.push((s as f64 * h, e as f64 * h));
                run = None;
            }
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(n: usize) -> BoundaryProblem {
        BoundaryProblem::new(&Domain::new(DomainSpec::UnitDisk {}).unwrap(), Nonlinearity::Cubic, n).unwrap()
    }

    #[test]
    fn constants_solve() {
        let p = disk(32);
        for c in [-1.0, 0.0, 1.0] {
            assert!(p.residual(&vec![c; 32], 0.3).iter().all(|r| r.abs() < 1e-14));
        }
        let f = residual(&p.constant(1.0), &Nonlinearity::Cubic, 0.1);
        assert!(f.iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn dirichlet_energy_of_first_mode() {
        let p = disk(64);
        let u: Vec<f64> = p.nodes().iter().map(|t| t.cos()).collect();
        assert!((p.energy(&u, 1.0).dirichlet - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_mode_spectra() {
        let p = disk(32);
        let zero = p.stability_spectrum(&vec![0.0; 32], 1.0, 1).unwrap();
        assert!((zero[0] + 1.0).abs() < 1e-12);
        let one = p.stability_spectrum(&vec![1.0; 32], 0.25, 1).unwrap();
        assert!((one[0] - 8.0).abs() < 1e-10);
    }

    #[test]
    fn basin_of_one() {
        let p = disk(64);
        for eps in [0.05, 0.3, 1.0] {
            let r = p.newton_solve(&p.constant(0.9), eps, SolverOptions::default()).unwrap();
            assert!(r.trace.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
            assert!(r.stable);
        }
    }

    #[test]
    fn sign_change_and_transition_detection() {
        let n = 16;
        let v: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64 - 0.1).cos()).collect();
        let z = sign_changes(&v);
        assert_eq!(z.len(), 2);
        assert!((z[0] - (0.5 * PI + 0.1)).abs() < 0.05);
        let t = transition_intervals(&v, 0.5);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn rejects_corner_weights() {
        let d = Domain::new(DomainSpec::RegularPolygonDisk { n: 4, r: 1.0 }).unwrap();
        assert!(matches!(BoundaryProblem::new(&d, Nonlinearity::Cubic, 32), Err(Error::Capability { .. })));
    }
}
