use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Balanced bistable reaction `f = -G'` with double-well potential `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    /// `G = (1-u²)²/4`, `f = u - u³`.
    Cubic,
    /// Peierls–Nabarro type: `G = (2/(aπ²)) cos²(πu/2)`, `f = sin(πu)/(πa)`.
    Sine { a: f64 },
}

/// Built-in nonlinearity by name (`"cubic"` or `"sine"`).
pub fn builtin_nonlinearity(name: &str, a: Option<f64>) -> Result<Nonlinearity> {
    match name {
        "cubic" => Ok(Nonlinearity::Cubic),
        "sine" => {
            let a = a.unwrap_or(1.0);
            Nonlinearity::sine(a)
        }
        other => Err(Error::param(format!("unknown nonlinearity `{other}`"))),
    }
}

impl Nonlinearity {
    pub fn sine(a: f64) -> Result<Nonlinearity> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::param(format!("sine nonlinearity needs a > 0 (got {a})")));
        }
        Ok(Nonlinearity::Sine { a })
    }

    pub fn label(&self) -> String {
        match self {
            Nonlinearity::Cubic => "cubic".into(),
            Nonlinearity::Sine { a } => format!("sine(a={a})"),
        }
    }

    #[inline]
    pub fn potential(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Cubic => {
                let s = 1.0 - u * u;
                0.25 * s * s
            }
            Nonlinearity::Sine { a } => {
                let c = (0.5 * PI * u).cos();
                2.0 / (a * PI * PI) * c * c
            }
        }
    }

    #[inline]
    pub fn reaction(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Cubic => u - u * u * u,
            Nonlinearity::Sine { a } => (PI * u).sin() / (PI * a),
        }
    }

    #[inline]
    pub fn reaction_deriv(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Cubic => 1.0 - 3.0 * u * u,
            Nonlinearity::Sine { a } => (PI * u).cos() / a,
        }
    }

    /// Threshold `t_*` beyond which `G` is convex.
    pub fn t_star(&self) -> f64 {
        match self {
            Nonlinearity::Cubic => 1.0 / 3f64.sqrt(),
            Nonlinearity::Sine { .. } => 0.5,
        }
    }

    /// `(G''(-1), G''(1))`.
    pub fn curvature(&self) -> (f64, f64) {
        (-self.reaction_deriv(-1.0), -self.reaction_deriv(1.0))
    }

    /// `sup |f'|` on `[-1, 1]`.
    pub fn max_reaction_slope(&self) -> f64 {
        match *self {
            Nonlinearity::Cubic => 2.0,
            Nonlinearity::Sine { a } => 1.0 / a,
        }
    }

    /// Grid self-test of the structural assumptions on `G`.
    pub fn check_invariants(&self) -> InvariantReport {
        let m = 2001;
        let grid: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
        let min_g = grid.iter().map(|&u| self.potential(u)).fold(f64::INFINITY, f64::min);
        let (c_minus, c_plus) = self.curvature();
        let t = self.t_star();
        let convex = grid
            .iter()
            .filter(|u| u.abs() >= t)
            .all(|&u| -self.reaction_deriv(u) >= -1e-12);
        // sup f²/G over points where G is not tiny; near ±1 both vanish quadratically.
        let ratio = grid
            .iter()
            .filter(|&&u| self.potential(u) > 1e-14)
            .map(|&u| self.reaction(u).powi(2) / self.potential(u))
            .fold(0.0, f64::max);
        InvariantReport {
            nonnegative: min_g >= -1e-15,
            wells_vanish: self.potential(-1.0).abs() < 1e-15 && self.potential(1.0).abs() < 1e-15,
            curvature_positive: c_minus > 0.0 && c_plus > 0.0,
            convex_beyond_t_star: convex,
            reaction_square_bound: ratio,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub nonnegative: bool,
    pub wells_vanish: bool,
    pub curvature_positive: bool,
    pub convex_beyond_t_star: bool,
    /// Smallest `C` with `f² ≤ C·G` on the test grid.
    pub reaction_square_bound: f64,
}

impl InvariantReport {
    pub fn ok(&self) -> bool {
        self.nonnegative && self.wells_vanish && self.curvature_positive && self.convex_beyond_t_star && self.reaction_square_bound.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_values() {
        let f = Nonlinearity::Cubic;
        assert_eq!(f.reaction(1.0), 0.0);
        assert_eq!(f.reaction(-1.0), 0.0);
        assert_eq!(f.reaction_deriv(-1.0), -2.0);
        assert_eq!(f.curvature(), (2.0, 2.0));
    }

    #[test]
    fn cubic_t_star_is_inflection() {
        // G'' = 3t² - 1 vanishes at 1/√3
        let f = Nonlinearity::Cubic;
        let t = f.t_star();
        assert!((3.0 * t * t - 1.0).abs() < 1e-15);
        assert!(-f.reaction_deriv(t - 1e-3) < 0.0 && -f.reaction_deriv(t + 1e-3) > 0.0);
    }

    #[test]
    fn sine_values() {
        let f = Nonlinearity::sine(1.0).unwrap();
        assert!((f.potential(0.0) - 2.0 / (PI * PI)).abs() < 1e-16);
        assert!(Nonlinearity::sine(0.0).is_err());
        assert!(builtin_nonlinearity("sine", Some(-1.0)).is_err());
        assert!(builtin_nonlinearity("quintic", None).is_err());
    }

    #[test]
    fn reaction_is_minus_potential_derivative() {
        for f in [Nonlinearity::Cubic, Nonlinearity::Sine { a: 0.7 }] {
            for &u in &[-0.9, -0.3, 0.1, 0.6] {
                let h = 1e-6;
                let fd = -(f.potential(u + h) - f.potential(u - h)) / (2.0 * h);
                assert!((fd - f.reaction(u)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn invariants_hold() {
        assert!(Nonlinearity::Cubic.check_invariants().ok());
        assert!(Nonlinearity::Sine { a: 2.0 }.check_invariants().ok());
    }
}
