//! Invariant checks over a configuration: trajectory diagnostics, explicit
//! operator spectra, exact warm starts and the sketch singular-value bounds.

use crate::config::{DiagnosticsMode, ExperimentConfig, ResolvedScale, SchemeName};
use crate::output::float;
use crate::runner::{self, hyperparams, initialize, ExperimentResult, Instance, RunError, RunRecord};
use lowrank_core::dynamics::{contraction_for, oracle};
use lowrank_core::init::{check_prop1_bounds, FactorizationProblem};
use lowrank_core::linalg::{self, DenseMatrix};
use lowrank_core::lnn::LinearNetworkProblem;
use lowrank_core::optim::{self, HyperParams, IterateState, Method, Objective, Termination};
use std::io::{self, Write};

/// Leakage tolerance relative to the residual norm.
pub const LEAKAGE_TOL: f64 = 1e-9;
/// Decomposition tolerance relative to `‖r₀‖` on small instances.
pub const DECOMPOSITION_TOL_SMALL: f64 = 1e-10;
/// Decomposition tolerance relative to `‖r₀‖` on larger instances.
pub const DECOMPOSITION_TOL: f64 = 1e-8;
pub const SMALL_DIM: usize = 64;
pub const CONTRACTION_TOL: f64 = 1e-8;
pub const GD_SPECTRUM_TOL: f64 = 1e-12;
/// Slack on the NAG spectral radius when the curvature range is a point.
pub const NAG_RADIUS_TOL_POINT: f64 = 1e-10;
/// Slack on the NAG spectral radius otherwise. At the theory momentum the
/// block at `λ = μ` has a double root, which a rounded discriminant moves
/// by about the square root of machine precision.
pub const NAG_RADIUS_TOL: f64 = 1e-6;
pub const WARM_START_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub scope: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &'static str, scope: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            scope: scope.into(),
            measured,
            threshold,
            passed: measured <= threshold,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let err = io::Error::other;
        w.write_record(["check", "scope", "measured", "threshold", "passed"]).map_err(err)?;
        for c in &self.checks {
            w.write_record([
                c.name.to_string(),
                c.scope.clone(),
                float(c.measured),
                float(c.threshold),
                c.passed.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()
    }
}

/// Checks on one finished run.
pub fn trajectory_checks(run: &RunRecord, instance: &Instance) -> Vec<Check> {
    let mut out = Vec::new();
    let scope = run.run_id.as_str();
    let finite = run.termination != Termination::Diverged
        && run.losses.last().is_some_and(|l| l.is_finite());
    out.push(Check::at_most("finite", scope, if finite { 0.0 } else { 1.0 }, 0.0));
    let diag = &run.diagnostics;
    out.push(Check::at_most("diagnostic-errors", scope, diag.errors.len() as f64, 0.0));
    if diag.leakage_steps > 0 {
        out.push(Check::at_most("leakage", scope, diag.max_leakage_floored, LEAKAGE_TOL));
    }
    if diag.decomposition_steps > 0 {
        let (m, n) = instance.dynamics_shape();
        let tol = if m * n <= SMALL_DIM { DECOMPOSITION_TOL_SMALL } else { DECOMPOSITION_TOL };
        out.push(Check::at_most("decomposition", scope, diag.max_decomposition, tol));
        out.push(Check::at_most("xi-leakage", scope, diag.max_xi_leakage_floored, LEAKAGE_TOL));
    }
    if diag.contraction_steps > 0 {
        out.push(Check::at_most(
            "gd-contraction",
            scope,
            diag.max_contraction_excess.max(0.0),
            CONTRACTION_TOL,
        ));
    }
    if let Some(b) = &run.residual_bound {
        if b.applicable {
            out.push(Check::at_most(b.bound.kind.name(), scope, b.violations as f64, 0.0));
        }
    }
    if let Instance::Lnn(p) = instance {
        // rows of R lie in range(Dᵀ), so ‖R Dᵀ‖ ≥ σ_min(D) ‖R‖
        let r = p.residual(&run.final_x, &run.final_y);
        let g = p.project(&r);
        let rn = r.norm();
        let ratio = if rn > 0.0 { rn * p.sigma_min_data / g.norm() } else { 0.0 };
        out.push(Check::at_most("lnn-residual-control", scope, ratio, 1.0 + 1e-10));
    }
    out
}

fn curvature_is_point(hp: &HyperParams) -> bool {
    (hp.l - hp.mu).abs() <= 1e-12 * hp.l
}

/// Explicit-operator spectra at the initialization of `seed`.
pub fn operator_checks(
    cfg: &ExperimentConfig,
    instance: &Instance,
    cell: &crate::config::Cell,
    seed: u64,
) -> Result<Vec<Check>, RunError> {
    let (m, n) = instance.dynamics_shape();
    if m * n > oracle::MAX_EXPLICIT_DIM {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let err = |e: lowrank_core::linalg::LinalgError| RunError::Setup(format!("operator check: {e}"));
    for &name in &cfg.methods {
        let method = name.method(cfg.hyperparams.altgd_order.to_core());
        if matches!(method, Method::AltGd(_)) {
            continue;
        }
        let init = initialize(instance, &cell.init, name, seed)?;
        if init.y0.iter().any(|v| *v != 0.0) {
            continue;
        }
        let hp = hyperparams(&cfg.hyperparams, name, &init, instance.objective())?;
        let ctx = instance.dynamics_context(&init)?;
        let factor = contraction_for(method, &hp).factor;
        let scope = format!("{}/{}/{}", cell.label, name, seed);
        match method {
            Method::Gd => {
                let spectrum = oracle::restricted_gd_spectrum(&ctx, hp.eta).map_err(err)?;
                let top = spectrum.first().copied().unwrap_or(0.0);
                out.push(Check::at_most("gd-spectrum", scope, (top - factor).abs(), GD_SPECTRUM_TOL));
            }
            Method::Nag => {
                let eigs = oracle::restricted_nag_eigenvalues(&ctx, hp.eta, hp.beta).map_err(err)?;
                let radius = oracle::spectral_radius(&eigs);
                let tol = if curvature_is_point(&hp) { NAG_RADIUS_TOL_POINT } else { NAG_RADIUS_TOL };
                out.push(Check::at_most("nag-radius", scope, (radius - factor).max(0.0), tol));
            }
            Method::AltGd(_) => {}
        }
    }
    Ok(out)
}

fn padded(m: &DenseMatrix, d: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.nrows(), d);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Largest `|entry|` of residuals and factor moves over a few steps started
/// at an exact solution.
fn warm_start_drift<O: Objective>(
    objective: &O,
    method: Method,
    hp: &HyperParams,
    x: DenseMatrix,
    y: DenseMatrix,
) -> Result<f64, RunError> {
    let (x0, y0) = (x.clone(), y.clone());
    let mut state = IterateState::new(objective, x, y)
        .map_err(|e| RunError::Setup(format!("warm start: {e}")))?;
    let mut worst = state.r.amax();
    for _ in 0..WARM_START_STEPS {
        state = optim::step(state, method, hp, objective);
        worst = worst
            .max(state.r.amax())
            .max(state.g.amax())
            .max((&state.x - &x0).amax())
            .max((&state.y - &y0).amax());
    }
    Ok(worst)
}

/// Exact solutions are fixed points: a target rebuilt as the product of a
/// pair of factors gives bitwise-zero residuals and gradients.
pub fn warm_start_checks(
    cfg: &ExperimentConfig,
    instance: &Instance,
    cell: &crate::config::Cell,
) -> Result<Vec<Check>, RunError> {
    let d = cell.init.d;
    let lin = |e: lowrank_core::linalg::LinalgError| RunError::Setup(format!("warm start: {e}"));
    let mut out = Vec::new();
    for &name in &cfg.methods {
        let method = name.method(cfg.hyperparams.altgd_order.to_core());
        let seed = cfg.seeds.list()[0];
        let init = initialize(instance, &cell.init, name, seed)?;
        let hp = hyperparams(&cfg.hyperparams, name, &init, instance.objective())?;
        let scope = format!("{}/{}", cell.label, name);
        let drift = match instance {
            Instance::Mf(p) => {
                let svd = linalg::svd(&p.a).map_err(lin)?;
                let mut us = svd.left_frame(p.rank);
                for j in 0..p.rank {
                    us.column_mut(j).scale_mut(svd.summary.sigma(j + 1));
                }
                let x = padded(&us, d);
                let y = padded(&svd.right_frame(p.rank), d);
                let exact = FactorizationProblem::new(&x * y.transpose(), p.rank)
                    .map_err(|e| RunError::Setup(format!("warm start: {e}")))?;
                warm_start_drift(&exact, method, &hp, x, y)?
            }
            Instance::Lnn(p) => {
                let x = init.x0.clone();
                let mut rng = linalg::RandomSource::new(seed ^ 0x5eed);
                let y = linalg::gaussian_matrix(p.inputs(), d, 1.0 / d as f64, &mut rng).map_err(lin)?;
                let labels = &x * (y.transpose() * &p.data);
                let exact = LinearNetworkProblem::from_parts(p.data.clone(), labels, &x * y.transpose())
                    .map_err(|e| RunError::Setup(format!("warm start: {e}")))?;
                warm_start_drift(&exact, method, &hp, x, y)?
            }
        };
        out.push(Check::at_most("warm-start", scope, drift, 0.0));
    }
    Ok(out)
}

/// Monte Carlo singular-value bounds of the sketch over the seed list.
pub fn prop1_checks(cfg: &ExperimentConfig, instance: &Instance, cell: &crate::config::Cell) -> Result<Vec<Check>, RunError> {
    let Instance::Mf(p) = instance else {
        return Ok(Vec::new());
    };
    if cell.init.scheme != SchemeName::MfSketch {
        return Ok(Vec::new());
    }
    let c = match cell.init.resolved_scale() {
        ResolvedScale::Fixed(c) => c,
        ResolvedScale::Auto => 1.0,
    };
    let seeds = cfg.seeds.list();
    let (mut lower, mut upper, mut cond, mut any) = (0usize, 0usize, 0usize, 0usize);
    for &seed in &seeds {
        let check = check_prop1_bounds(p, cell.init.d, cell.init.tau, c, seed)
            .map_err(|e| RunError::Setup(format!("singular-value bounds: {e}")))?;
        lower += usize::from(!check.lower_ok);
        upper += usize::from(!check.upper_ok);
        cond += usize::from(!check.cond_ok);
        any += usize::from(!check.all_ok());
    }
    let k = seeds.len() as f64;
    let limit = cfg.verify.prop1_max_violation;
    let scope = cell.label.clone();
    Ok(vec![
        Check::at_most("prop1-lower", scope.clone(), lower as f64 / k, limit),
        Check::at_most("prop1-upper", scope.clone(), upper as f64 / k, limit),
        Check::at_most("prop1-cond", scope.clone(), cond as f64 / k, limit),
        Check::at_most("prop1-any", scope, any as f64 / k, limit),
    ])
}

/// Runs every applicable check. Trajectory checks need diagnostics, so
/// `off` is raised to `sampled`.
pub fn verify(cfg: &ExperimentConfig) -> Result<(VerifyReport, Option<ExperimentResult>), RunError> {
    let mut cfg = cfg.clone();
    if cfg.diagnostics.mode == DiagnosticsMode::Off {
        cfg.diagnostics.mode = DiagnosticsMode::Sampled;
    }
    let mut report = VerifyReport::default();
    let cells = cfg.cells();
    let seed = cfg.seeds.list()[0];
    for cell in &cells {
        let instance = Instance::build(&cell.problem)?;
        report.checks.extend(operator_checks(&cfg, &instance, cell, seed)?);
        report.checks.extend(warm_start_checks(&cfg, &instance, cell)?);
        if cfg.verify.prop1 {
            report.checks.extend(prop1_checks(&cfg, &instance, cell)?);
        }
    }
    let result = if cfg.verify.trajectories {
        let result = runner::run_experiment(&cfg)?;
        for cell in &result.cells {
            for run in &cell.runs {
                report.checks.extend(trajectory_checks(run, &cell.instance));
            }
        }
        Some(result)
    } else {
        None
    };
    Ok((report, result))
}
