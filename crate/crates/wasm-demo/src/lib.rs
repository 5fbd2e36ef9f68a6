//! Browser bindings: three operations returning JSON strings.
//!
//! The `*_json` functions hold the logic and run natively too; the exported
//! wrappers only translate errors for JavaScript.

use std::f64::consts::PI;

use serde::Serialize;
use vortex_core::energy::{energy_landscape, find_local_minima};
use vortex_core::layer::{solve_layer, LayerOptions};
use vortex_core::solver::{BoundaryProblem, SolverOptions};
use vortex_core::{Domain, DomainSpec, Nonlinearity};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Landscape {
    axis: Vec<f64>,
    /// Row-major, `null` inside the excluded diagonal band.
    values: Vec<Option<f64>>,
    minima: Vec<[f64; 3]>,
}

/// Energy landscape and local minima of a smoothed regular polygon.
pub fn polygon_landscape_json(sides: usize, r: f64, grid_n: usize) -> Result<String, String> {
    let d = Domain::new(DomainSpec::RegularPolygonDisk { n: sides, r }).map_err(|e| e.to_string())?;
    let land = energy_landscape(&d, grid_n, None).map_err(|e| e.to_string())?;
    let n = land.n();
    let values = (0..n * n).map(|k| land.get(k / n, k % n).filter(|v| v.is_finite())).collect();
    let minima = find_local_minima(&d, grid_n.max(64), None, 1e-8)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|m| [m.t_p, m.t_q, m.w_value])
        .collect();
    serde_json::to_string(&Landscape {
        axis: land.axis.clone(),
        values,
        minima,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Profile {
    x: Vec<f64>,
    v: Vec<f64>,
}

/// Layer profile sampled on `[-x_max, x_max]`; `a <= 0` selects the cubic nonlinearity.
pub fn layer_profile_json(a: f64, x_max: f64, samples: usize) -> Result<String, String> {
    let f = if a > 0.0 { Nonlinearity::sine(a).map_err(|e| e.to_string())? } else { Nonlinearity::Cubic };
    let p = solve_layer(&f, LayerOptions { n: 512, ..Default::default() }).map_err(|e| e.to_string())?;
    let m = samples.max(2);
    let x: Vec<f64> = (0..m).map(|i| -x_max + 2.0 * x_max * i as f64 / (m - 1) as f64).collect();
    let v = x.iter().map(|&t| p.value(t)).collect();
    serde_json::to_string(&Profile { x, v }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Solve {
    theta: Vec<f64>,
    u: Vec<f64>,
    vortices: Vec<f64>,
    energy: f64,
    lambda_min: f64,
    stable: bool,
}

/// Two-vortex boundary solve (cubic) on a smoothed regular polygon, seeded at
/// the mid-edge `θ = π/N` and the diametrically opposite point.
pub fn boundary_solve_json(sides: usize, r: f64, eps: f64, n_modes: usize) -> Result<String, String> {
    let d = Domain::new(DomainSpec::RegularPolygonDisk { n: sides, r }).map_err(|e| e.to_string())?;
    let p = BoundaryProblem::new(&d, Nonlinearity::Cubic, n_modes).map_err(|e| e.to_string())?;
    let prof = solve_layer(&Nonlinearity::Cubic, LayerOptions { n: 512, ..Default::default() }).map_err(|e| e.to_string())?;
    let tp = PI / sides as f64;
    let init = p.initial_guess(tp, tp + PI, eps, &prof, 0.5).map_err(|e| e.to_string())?;
    let rec = p.newton_solve(&init, eps, SolverOptions::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&Solve {
        theta: rec.trace.nodes(),
        lambda_min: rec.lambda_min(),
        u: rec.trace.values.clone(),
        vortices: rec.vortices.clone(),
        energy: rec.energy.total,
        stable: rec.stable,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = polygonLandscape)]
pub fn polygon_landscape(sides: usize, r: f64, grid_n: usize) -> Result<String, JsError> {
    polygon_landscape_json(sides, r, grid_n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = layerProfile)]
pub fn layer_profile(a: f64, x_max: f64, samples: usize) -> Result<String, JsError> {
    layer_profile_json(a, x_max, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = boundarySolve)]
pub fn boundary_solve(sides: usize, r: f64, eps: f64, n_modes: usize) -> Result<String, JsError> {
    boundary_solve_json(sides, r, eps, n_modes).map_err(|e| JsError::new(&e))
}
