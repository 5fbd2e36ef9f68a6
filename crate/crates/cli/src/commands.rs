use std::path::Path;

use serde::Serialize;
use vortex_core::energy::{energy_landscape, find_local_minima, CriticalPoint};
use vortex_core::layer::{compute_cf, solve_layer, LayerOptions, LayerProfile};
use vortex_core::solver::{BoundaryField, BoundaryProblem, SolverOptions};
use vortex_core::{Domain, Error, Nonlinearity};

use crate::config::{RunConfig, Seed};
use crate::output::Writer;

/// How a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Verification(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Solver(e) => write!(f, "solver failure: {e:#}"),
            Failure::Verification(s) => write!(f, "verification failed: {s}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. }
            | Error::NotMonotone { .. }
            | Error::Singular
            | Error::Eigen(_)
            | Error::Quadrature { .. }
            | Error::Series { .. } => Failure::Solver(e.into()),
            _ => Failure::Config(e.into()),
        }
    }
}

pub type Outcome = Result<(), Failure>;

fn io(e: anyhow::Error) -> Failure {
    Failure::Config(e)
}

fn domain(cfg: &RunConfig) -> Result<Domain, Failure> {
    let spec = cfg.domain().map_err(Failure::Config)?;
    Ok(Domain::new(spec.clone())?)
}

/// Write the residual history of a failed solve before reporting it.
fn solver_error(e: Error, out: &mut Writer) -> Failure {
    if let Error::NonConvergence { history, iterations, residual } = &e {
        #[derive(Serialize)]
        struct History<'a> {
            iterations: usize,
            residual: f64,
            residual_history: &'a [f64],
        }
        let h = History {
            iterations: *iterations,
            residual: *residual,
            residual_history: history,
        };
        if let Err(w) = out.json("residual_history.json", &h) {
            log::error!("could not write residual history: {w:#}");
        }
    }
    e.into()
}

pub fn landscape(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let d = domain(cfg)?;
    let b = &cfg.landscape;
    let land = energy_landscape(&d, b.grid_n, b.delta_diag)?;
    out.csv("landscape.csv", &land.to_csv()).map_err(io)?;
    let minima: Vec<CriticalPoint> = find_local_minima(&d, b.grid_n.max(64), b.delta_diag, b.tol)?;
    log::info!("{} local minima", minima.len());
    out.json("minima.json", &minima).map_err(io)
}

fn seed_field(p: &BoundaryProblem, seed: &Seed, eps: f64, profile: impl Fn() -> Result<LayerProfile, Error>) -> Result<BoundaryField, Failure> {
    Ok(match *seed {
        Seed::Layers { theta_p, theta_q, window } => p.initial_guess(theta_p, theta_q, eps, &profile()?, window)?,
        Seed::Constant { value } => p.constant(value),
    })
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    domain: &'a vortex_core::DomainSpec,
    nonlinearity: Nonlinearity,
    record: &'a vortex_core::solver::SolutionRecord,
}

pub fn solve(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let d = domain(cfg)?;
    let f = cfg.nonlinearity();
    let b = &cfg.solve;
    let p = BoundaryProblem::new(&d, f, b.n_modes)?;
    let init = seed_field(&p, &b.seed, b.eps, || solve_layer(&f, LayerOptions::default()))?;
    let opts = SolverOptions {
        tol: b.tol,
        max_iter: b.max_iter,
        ..Default::default()
    };
    let rec = p.newton_solve(&init, b.eps, opts).map_err(|e| solver_error(e, out))?;
    log::info!(
        "converged in {} iterations; energy {:.6}; lambda_min {:.4e}; stable {}",
        rec.iterations,
        rec.energy.total,
        rec.lambda_min(),
        rec.stable
    );
    let mut csv = String::from("theta,u\n");
    for (t, u) in rec.trace.nodes().iter().zip(&rec.trace.values) {
        csv.push_str(&format!("{t:.12e},{u:.12e}\n"));
    }
    out.csv("trace.csv", &csv).map_err(io)?;
    out.json(
        "solution.json",
        &SolveSummary {
            domain: d.spec(),
            nonlinearity: f,
            record: &rec,
        },
    )
    .map_err(io)
}

pub fn branch(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let d = domain(cfg)?;
    let f = cfg.nonlinearity();
    let b = &cfg.branch;
    let p = BoundaryProblem::new(&d, f, b.n_modes)?;
    let init = seed_field(&p, &b.seed, b.eps_start, || solve_layer(&f, LayerOptions::default()))?;
    let opts = SolverOptions {
        tol: b.tol,
        max_iter: b.max_iter,
        ..Default::default()
    };
    let seed = p.newton_solve(&init, b.eps_start, opts).map_err(|e| solver_error(e, out))?;
    let branch = p.continuation(&seed, b.eps_end, b.steps, opts).map_err(|e| solver_error(e, out))?;
    for r in &branch.records {
        log::info!(
            "eps {:.5}: energy {:.6} lambda_min {:.4e} stable {} vortices {:?}",
            r.eps,
            r.energy.total,
            r.lambda_min(),
            r.stable,
            r.vortices
        );
        if !r.is_constant() && !r.stable {
            log::info!("eps {:.5}: nonconstant record is unstable", r.eps);
        }
    }
    out.csv("branch.csv", &branch.to_csv()).map_err(io)?;
    out.json("branch.json", &branch).map_err(io)
}

pub fn layer(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let f = cfg.nonlinearity();
    let b = &cfg.layer;
    let prof = solve_layer(
        &f,
        LayerOptions {
            n: b.n,
            x_max: b.x_max,
            ..Default::default()
        },
    )?;
    if !(b.sample_step > 0.0) {
        return Err(Failure::Config(anyhow::anyhow!("layer.sample_step must be positive")));
    }
    let m = (2.0 * b.x_max / b.sample_step).floor() as usize;
    let mut csv = String::from("x,v\n");
    for i in 0..=m {
        let x = -b.x_max + i as f64 * b.sample_step;
        csv.push_str(&format!("{x:.10e},{:.12e}\n", prof.value(x)));
    }
    out.csv("layer.csv", &csv).map_err(io)?;
    out.json("layer.json", &prof).map_err(io)
}

pub fn cf(cfg: &RunConfig, out: &mut Writer) -> Outcome {
    let f = cfg.nonlinearity();
    let fit = compute_cf(&f, &cfg.cf.radii, cfg.cf.n)?;
    if let Some(w) = &fit.warning {
        log::warn!("{w}");
    }
    println!("C_f({}) = {:.6}", f.label(), fit.cf_estimate);
    out.json("cf.json", &fit).map_err(io)
}

pub fn output_dir<'a>(flag: Option<&'a Path>, cfg: &'a RunConfig) -> &'a Path {
    flag.or(cfg.output_dir.as_deref()).unwrap_or(Path::new("."))
}
