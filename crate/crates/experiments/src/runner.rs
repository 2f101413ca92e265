//! Expands a configuration into individual runs and executes them.

use crate::analysis::{self, SLOPE_CUT};
use crate::config::{
    Cell, DiagnosticsMode, ExperimentConfig, HyperMode, HyperSection, InitSection, MethodName,
    ProblemConfig, ResolvedScale,
};
use lowrank_core::dynamics::{self, DynamicsContext, TheoryBound};
use lowrank_core::init::{
    self, c_threshold_gd, c_threshold_nag, init_lnn, init_mf, init_mf_general, FactorizationProblem,
    InitConfig, InitOutcome, InitScheme, MfSpec, Scale, ThresholdRule,
};
use lowrank_core::linalg::DenseMatrix;
use lowrank_core::lnn::{self, LinearNetworkProblem, LnnSpec};
use lowrank_core::optim::{
    self, derive_hyperparams, HyperParams, IterateState, Method, Monitor, Objective, StopRule,
    Termination,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Setup(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn setup<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> RunError + '_ {
    move |e| RunError::Setup(format!("{context}: {e}"))
}

/// A constructed problem instance.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Instance {
    Mf(FactorizationProblem),
    Lnn(LinearNetworkProblem),
}

impl Instance {
    pub fn build(problem: &ProblemConfig) -> Result<Self, RunError> {
        match problem {
            ProblemConfig::Mf { m, n, rank, sigma1, sigma_r, profile, seed } => {
                let spec = MfSpec {
                    m: *m,
                    n: *n,
                    r: *rank,
                    sigma1: *sigma1,
                    sigma_r: *sigma_r,
                    profile: profile.to_profile(),
                };
                init::make_mf_problem(&spec, *seed)
                    .map(Instance::Mf)
                    .map_err(setup("building the factorization target"))
            }
            ProblemConfig::Lnn {
                outputs,
                inputs,
                samples,
                data_rank,
                sigma1,
                sigma_r,
                profile,
                right_factor,
                seed,
            } => {
                let spec = LnnSpec {
                    m: *outputs,
                    n: *inputs,
                    samples: *samples,
                    data_rank: *data_rank,
                    sigma1: *sigma1,
                    sigma_r: *sigma_r,
                    profile: profile.to_profile(),
                    right_factor: right_factor.to_core(),
                };
                lnn::make_lnn_problem(&spec, *seed)
                    .map(Instance::Lnn)
                    .map_err(setup("building the network data"))
            }
        }
    }

    pub fn objective(&self) -> &dyn Objective {
        match self {
            Instance::Mf(p) => p,
            Instance::Lnn(p) => p,
        }
    }

    /// Residual shape seen by the dynamics (`m × n`).
    pub fn dynamics_shape(&self) -> (usize, usize) {
        match self {
            Instance::Mf(p) => p.a.shape(),
            Instance::Lnn(p) => (p.outputs(), p.inputs()),
        }
    }

    pub fn dynamics_context(&self, init: &InitOutcome) -> Result<DynamicsContext, RunError> {
        match self {
            Instance::Mf(p) => Ok(DynamicsContext::for_factorization(p, init)),
            Instance::Lnn(p) => {
                DynamicsContext::for_network(p, init).map_err(setup("building the subspace frame"))
            }
        }
    }
}

fn threshold_rule(init: &InitSection, is_mf: bool, method: MethodName) -> ThresholdRule {
    match (is_mf, method) {
        (false, _) => ThresholdRule::LnnPremise { safety: init.safety },
        (true, MethodName::Nag) => ThresholdRule::Nag { tau: init.tau },
        (true, _) => ThresholdRule::Gd { tau: init.tau },
    }
}

/// Draws the initialization for one run. Automatic scales resolve to the
/// threshold belonging to `method`.
pub fn initialize(
    instance: &Instance,
    init: &InitSection,
    method: MethodName,
    seed: u64,
) -> Result<InitOutcome, RunError> {
    let scale = match init.resolved_scale() {
        ResolvedScale::Fixed(c) => Scale::Fixed(c),
        ResolvedScale::Auto => {
            Scale::Auto(threshold_rule(init, matches!(instance, Instance::Mf(_)), method))
        }
    };
    let cfg = InitConfig {
        scheme: init.scheme.to_core(),
        d: init.d,
        scale,
        c2: init.c2,
        seed,
    };
    let out = match (instance, cfg.scheme) {
        (Instance::Mf(p), InitScheme::MfSketch) => init_mf(p, &cfg),
        (Instance::Mf(p), _) => init_mf_general(p, &cfg),
        (Instance::Lnn(p), _) => init_lnn(p, &cfg),
    };
    out.map_err(setup(&format!("initializing with seed {seed}")))
}

/// Step size and momentum for one method.
pub fn hyperparams(
    section: &HyperSection,
    name: MethodName,
    init: &InitOutcome,
    objective: &dyn Objective,
) -> Result<HyperParams, RunError> {
    let method = name.method(section.altgd_order.to_core());
    let theory = derive_hyperparams(init, method, objective)
        .map_err(setup("deriving step sizes"))?;
    let (l, mu) = (theory.l, theory.mu);
    let hp = match (section.mode, name) {
        (HyperMode::Theory, MethodName::GdInvL) => HyperParams::manual(1.0 / l, 0.0, l, mu),
        (HyperMode::Theory, _) => Ok(theory),
        (HyperMode::Manual, _) => {
            let eta = section.eta.unwrap_or(theory.eta);
            let beta = if method == Method::Nag { section.beta.unwrap_or(0.0) } else { 0.0 };
            HyperParams::manual(eta, beta, l, mu)
        }
    };
    hp.map_err(setup("validating step sizes"))
}

/// One CSV trace row. Transition diagnostics (decomposition residual and
/// measured contraction of `t−1 → t`) sit on row `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: String,
    pub method: MethodName,
    pub seed: u64,
    pub iter: usize,
    pub loss: f64,
    pub resid_fro: f64,
    pub resid_rel: f64,
    /// Predicted loss `f₀·θ^{2t}`.
    pub theory_bound: Option<f64>,
    pub dist_x: f64,
    pub dist_y: f64,
    /// Mass of the (projected) residual outside the contraction subspace,
    /// relative to its norm.
    pub leakage: Option<f64>,
    pub contraction_measured: Option<f64>,
    /// Relative to the norm of the initial (projected) residual.
    pub decomposition_residual: Option<f64>,
}

pub const LEAKAGE_DENOMINATOR_FLOOR: f64 = 0.1;

/// Worst diagnostic values seen along a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticStats {
    pub leakage_steps: usize,
    pub max_leakage: f64,
    /// Leakage over `max(‖g_t‖, LEAKAGE_DENOMINATOR_FLOOR·‖g_0‖)`, so that
    /// rounding error is not divided by a residual near machine precision.
    pub max_leakage_floored: f64,
    pub decomposition_steps: usize,
    pub max_decomposition: f64,
    pub max_xi_leakage: f64,
    pub max_xi_leakage_floored: f64,
    /// Steps where the linear part's contraction was compared against the
    /// closed-form factor.
    pub contraction_steps: usize,
    /// `max(measured − factor)` over those steps, scaled by
    /// `‖r_t‖ / max(‖r_t‖, LEAKAGE_DENOMINATOR_FLOOR·‖g_0‖)`.
    pub max_contraction_excess: f64,
    pub errors: Vec<String>,
}

/// Theorem-level residual bound for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub bound: TheoryBound,
    /// Scale the bound requires (`c̲`, or the minimal premise scale).
    pub threshold: Option<f64>,
    pub applicable: bool,
    /// Iterations where `‖R_t‖_F` exceeded the bound.
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub run_id: String,
    pub cell: usize,
    pub method: MethodName,
    pub seed: u64,
    pub d: usize,
    pub c: f64,
    pub cond_x0: f64,
    pub hp: HyperParams,
    pub termination: Termination,
    pub iterations: usize,
    pub iters_to_eps: Option<usize>,
    pub target_norm: f64,
    pub losses: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub rows: Vec<TraceRow>,
    pub loss_curve: TheoryBound,
    pub loss_curve_violations: usize,
    pub residual_bound: Option<BoundCheck>,
    pub diagnostics: DiagnosticStats,
    pub final_x: DenseMatrix,
    pub final_y: DenseMatrix,
}

impl RunRecord {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().unwrap()
    }

    pub fn final_relative_residual(&self) -> f64 {
        self.residual_norms.last().unwrap() / self.target_norm
    }

    /// Fitted asymptotic decrease of `ln f` per iteration.
    pub fn measured_slope(&self) -> Option<f64> {
        analysis::fit_log_slope(&self.losses, SLOPE_CUT)
    }

    pub fn predicted_slope(&self) -> f64 {
        -self.loss_curve.log_slope()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

struct TraceMonitor<'a> {
    run_id: &'a str,
    name: MethodName,
    seed: u64,
    method: Method,
    hp: HyperParams,
    ctx: Option<DynamicsContext>,
    every_step: bool,
    cadence: usize,
    stride: usize,
    x0: &'a DenseMatrix,
    y0: &'a DenseMatrix,
    target_norm: f64,
    g0_norm: f64,
    curve: TheoryBound,
    contraction_factor: Option<f64>,
    rows: Vec<TraceRow>,
    held: Option<TraceRow>,
    stats: DiagnosticStats,
}

impl TraceMonitor<'_> {
    fn finish(mut self) -> (Vec<TraceRow>, DiagnosticStats) {
        if let Some(row) = self.held.take() {
            self.rows.push(row);
        }
        (self.rows, self.stats)
    }
}

impl Monitor for TraceMonitor<'_> {
    fn wants_previous(&self, t: usize) -> bool {
        self.ctx.is_some()
            && !matches!(self.method, Method::AltGd(_))
            && (self.every_step || t.is_multiple_of(self.cadence))
    }

    fn record(&mut self, state: &IterateState, before: Option<&IterateState>) {
        let resid = state.residual_norm();
        let mut row = TraceRow {
            run_id: self.run_id.to_string(),
            method: self.name,
            seed: self.seed,
            iter: state.t,
            loss: state.loss(),
            resid_fro: resid,
            resid_rel: resid / self.target_norm,
            theory_bound: Some(self.curve.at(state.t)),
            dist_x: (&state.x - self.x0).norm(),
            dist_y: (&state.y - self.y0).norm(),
            leakage: None,
            contraction_measured: None,
            decomposition_residual: None,
        };
        if let Some(ctx) = &self.ctx {
            let floor = LEAKAGE_DENOMINATOR_FLOOR * self.g0_norm;
            let abs_leak = ctx.frame.leakage(&state.g);
            let leak = ratio(abs_leak, state.g.norm());
            row.leakage = Some(leak);
            let s = &mut self.stats;
            s.leakage_steps += 1;
            s.max_leakage = s.max_leakage.max(leak);
            s.max_leakage_floored = s.max_leakage_floored.max(ratio(abs_leak, state.g.norm().max(floor)));
            if let Some(prev) = before {
                match dynamics::decomposition_check(self.method, ctx, prev, state, &self.hp) {
                    Some(Ok(check)) => {
                        let dec = ratio(check.decomposition_residual, self.g0_norm);
                        row.decomposition_residual = Some(dec);
                        row.contraction_measured = Some(check.contraction_measured);
                        let s = &mut self.stats;
                        s.decomposition_steps += 1;
                        s.max_decomposition = s.max_decomposition.max(dec);
                        s.max_xi_leakage =
                            s.max_xi_leakage.max(ratio(check.xi_leakage, check.residual_norm));
                        s.max_xi_leakage_floored = s
                            .max_xi_leakage_floored
                            .max(ratio(check.xi_leakage, check.residual_norm.max(floor)));
                        if let Some(factor) = self.contraction_factor {
                            let excess = (check.contraction_measured - factor) * check.residual_norm
                                / check.residual_norm.max(floor);
                            s.max_contraction_excess = if s.contraction_steps == 0 {
                                excess
                            } else {
                                s.max_contraction_excess.max(excess)
                            };
                            s.contraction_steps += 1;
                        }
                    }
                    Some(Err(e)) => self.stats.errors.push(format!("t={}: {e}", state.t)),
                    None => {}
                }
            }
        }
        if state.t.is_multiple_of(self.stride) {
            self.rows.push(row);
            self.held = None;
        } else {
            self.held = Some(row);
        }
    }
}

/// Everything needed to execute one run besides the instance.
#[derive(Debug, Clone)]
pub struct RunPlan<'a> {
    pub run_id: String,
    pub cell: usize,
    pub init: &'a InitSection,
    pub method: MethodName,
    pub seed: u64,
}

fn residual_bound(
    instance: &Instance,
    init_cfg: &InitSection,
    name: MethodName,
    hp: &HyperParams,
    init: &InitOutcome,
    residuals: &[f64],
) -> Result<Option<BoundCheck>, RunError> {
    let theory_step = !matches!(hp.source, optim::HyperSource::Manual);
    let (bound, threshold, applicable) = match (instance, name) {
        (_, MethodName::GdInvL | MethodName::Altgd) => return Ok(None),
        _ if !theory_step => return Ok(None),
        (Instance::Mf(p), MethodName::Gd) => {
            let threshold = c_threshold_gd(p, init.x0.ncols(), init_cfg.tau, init.cond_x0).ok();
            let applicable = threshold.is_some_and(|t| init.c >= t * (1.0 - 1e-12));
            (TheoryBound::gd_thm1(p, init), threshold, applicable)
        }
        (Instance::Mf(p), MethodName::Nag) => {
            let threshold = c_threshold_nag(p, init.x0.ncols(), init_cfg.tau).ok();
            let applicable = threshold.is_some_and(|t| init.c >= t * (1.0 - 1e-12));
            (TheoryBound::nag_thm2(p, init), threshold, applicable)
        }
        (Instance::Lnn(p), MethodName::Nag) => {
            let report =
                lnn::check_thm3_premise(init, p).map_err(setup("checking the network premise"))?;
            let threshold = Some(init.c * report.min_scale);
            (TheoryBound::lnn_thm3(p, init), threshold, report.holds())
        }
        (Instance::Lnn(_), _) => return Ok(None),
    };
    let violations = residuals
        .iter()
        .enumerate()
        .filter(|(t, r)| **r > bound.at(*t) * (1.0 + 1e-12))
        .count();
    Ok(Some(BoundCheck {
        bound,
        threshold,
        applicable,
        violations,
    }))
}

/// Executes one run.
pub fn execute(
    cfg: &ExperimentConfig,
    instance: &Instance,
    plan: &RunPlan,
) -> Result<RunRecord, RunError> {
    let objective = instance.objective();
    let init = initialize(instance, plan.init, plan.method, plan.seed)?;
    let hp = hyperparams(&cfg.hyperparams, plan.method, &init, objective)?;
    let method = plan.method.method(cfg.hyperparams.altgd_order.to_core());
    let state = IterateState::from_init(objective, &init).map_err(setup("starting the run"))?;
    let f0 = state.loss();
    let g0_norm = state.g.norm();
    let curve = TheoryBound::loss_curve(method, f0, hp.l, hp.mu);
    let ctx = match cfg.diagnostics.mode {
        DiagnosticsMode::Off => None,
        _ => Some(instance.dynamics_context(&init)?),
    };
    let y0_zero = init.y0.iter().all(|v| *v == 0.0);
    let contraction_factor = (method == Method::Gd && y0_zero)
        .then(|| dynamics::contraction_for(method, &hp))
        .filter(|c| c.guaranteed)
        .map(|c| c.factor);
    let mut monitor = TraceMonitor {
        run_id: &plan.run_id,
        name: plan.method,
        seed: plan.seed,
        method,
        hp,
        ctx,
        every_step: cfg.diagnostics.mode == DiagnosticsMode::Full,
        cadence: cfg.diagnostics_cadence(),
        stride: cfg.output.trace_stride,
        x0: &init.x0,
        y0: &init.y0,
        target_norm: objective.target_norm(),
        g0_norm,
        curve,
        contraction_factor,
        rows: Vec::new(),
        held: None,
        stats: DiagnosticStats::default(),
    };
    let stop = StopRule {
        eps: cfg.stop.eps,
        max_iters: cfg.stop.max_iters,
        divergence_factor: cfg.stop.divergence_factor,
    };
    let outcome = optim::run(objective, method, &hp, state, &stop, &mut monitor);
    let (rows, diagnostics) = monitor.finish();
    let loss_curve_violations = outcome
        .losses
        .iter()
        .enumerate()
        .filter(|(t, l)| **l > curve.at(*t) * (1.0 + 1e-12))
        .count();
    let residual_bound =
        residual_bound(instance, plan.init, plan.method, &hp, &init, &outcome.residual_norms)?;
    Ok(RunRecord {
        run_id: plan.run_id.clone(),
        cell: plan.cell,
        method: plan.method,
        seed: plan.seed,
        d: init.x0.ncols(),
        c: init.c,
        cond_x0: init.cond_x0,
        hp,
        termination: outcome.termination,
        iterations: outcome.iterations,
        iters_to_eps: (outcome.termination == Termination::Converged).then_some(outcome.iterations),
        target_norm: objective.target_norm(),
        losses: outcome.losses,
        residual_norms: outcome.residual_norms,
        rows,
        loss_curve: curve,
        loss_curve_violations,
        residual_bound,
        diagnostics,
        final_x: outcome.state.x,
        final_y: outcome.state.y,
    })
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub instance: Instance,
    pub runs: Vec<RunRecord>,
}

impl CellResult {
    /// Runs of one method, ordered by seed.
    pub fn runs_for(&self, method: MethodName) -> Vec<&RunRecord> {
        let mut runs: Vec<&RunRecord> = self.runs.iter().filter(|r| r.method == method).collect();
        runs.sort_by_key(|r| r.seed);
        runs
    }

    /// Seed-averaged loss trace of one method.
    pub fn mean_loss(&self, method: MethodName, averaging: crate::config::Averaging) -> Vec<f64> {
        let runs = self.runs_for(method);
        let traces: Vec<&[f64]> = runs.iter().map(|r| r.losses.as_slice()).collect();
        analysis::mean_trace(&traces, averaging)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

impl ExperimentResult {
    pub fn runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.cells.iter().flat_map(|c| c.runs.iter())
    }

    pub fn diverged(&self) -> usize {
        self.runs().filter(|r| r.termination == Termination::Diverged).count()
    }
}

/// Parallelism cap from `LOWRANK_THREADS` (unset or invalid: rayon default).
pub fn thread_count() -> Option<usize> {
    std::env::var("LOWRANK_THREADS").ok()?.trim().parse().ok().filter(|n| *n > 0)
}

pub fn run_id(cell: &Cell, method: MethodName, seed: u64) -> String {
    format!("{}/{}/{}", cell.label, method, seed)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, RunError> {
    cfg.validate().map_err(setup("invalid configuration"))?;
    let cells = cfg.cells();
    let instances = cells
        .iter()
        .map(|c| Instance::build(&c.problem))
        .collect::<Result<Vec<_>, _>>()?;
    let mut plans = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        for &method in &cfg.methods {
            for seed in cfg.seeds.list() {
                plans.push(RunPlan {
                    run_id: run_id(cell, method, seed),
                    cell: i,
                    init: &cell.init,
                    method,
                    seed,
                });
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Pool(e.to_string()))?;
    let records: Vec<RunRecord> = pool.install(|| {
        plans
            .par_iter()
            .map(|plan| execute(cfg, &instances[plan.cell], plan))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut grouped: Vec<Vec<RunRecord>> = vec![Vec::new(); cells.len()];
    for record in records {
        grouped[record.cell].push(record);
    }
    Ok(ExperimentResult {
        config: cfg.clone(),
        cells: cells
            .into_iter()
            .zip(instances)
            .zip(grouped)
            .map(|((cell, instance), runs)| CellResult { cell, instance, runs })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(methods: &str) -> ExperimentConfig {
        ExperimentConfig::parse(&format!(
            r#"
name = "t"
methods = {methods}
seeds = [1, 0]

[problem]
kind = "mf"
m = 6
n = 5
rank = 2
sigma1 = 1.0
sigma_r = 0.5

[init]
scheme = "mf-sketch"
d = 3
c_sqrt_d = 2.0

[stop]
eps = 1e-9
max_iters = 5000

[diagnostics]
mode = "full"
"#
        ))
        .unwrap()
    }

    #[test]
    fn rows_are_consistent() {
        let res = run_experiment(&tiny(r#"["gd", "nag", "altgd"]"#)).unwrap();
        assert_eq!(res.cells[0].runs.len(), 6);
        for run in res.runs() {
            assert_eq!(run.termination, Termination::Converged, "{}", run.run_id);
            let mut last = None;
            for row in &run.rows {
                assert!(last.is_none_or(|t| row.iter > t));
                last = Some(row.iter);
                assert!((row.loss - 0.5 * row.resid_fro * row.resid_fro).abs() <= 1e-12 * row.loss.max(1e-300));
            }
            assert_eq!(run.rows.last().unwrap().iter, run.iterations);
            assert!(run.diagnostics.max_leakage_floored < 1e-9, "{:?}", run.diagnostics);
            assert!(run.diagnostics.max_xi_leakage_floored < 1e-9, "{:?}", run.diagnostics);
            if run.method != MethodName::Altgd {
                assert!(run.diagnostics.max_decomposition < 1e-10, "{:?}", run.diagnostics);
                assert_eq!(run.diagnostics.decomposition_steps, run.iterations);
            }
        }
    }

    #[test]
    fn runs_ordered_and_grouped() {
        let res = run_experiment(&tiny(r#"["nag", "gd"]"#)).unwrap();
        let ids: Vec<&str> = res.runs().map(|r| r.run_id.as_str()).collect();
        assert_eq!(ids, ["base/nag/1", "base/nag/0", "base/gd/1", "base/gd/0"]);
        let sorted: Vec<u64> = res.cells[0].runs_for(MethodName::Gd).iter().map(|r| r.seed).collect();
        assert_eq!(sorted, [0, 1]);
    }

    #[test]
    fn stride_keeps_final_row() {
        let mut cfg = tiny(r#"["gd"]"#);
        cfg.output.trace_stride = 7;
        let res = run_experiment(&cfg).unwrap();
        let run = &res.cells[0].runs[0];
        assert!(run.rows.iter().rev().skip(1).all(|r| r.iter % 7 == 0));
        assert_eq!(run.rows.last().unwrap().iter, run.iterations);
    }

    #[test]
    fn inverse_l_step_is_manual() {
        let res = run_experiment(&tiny(r#"["gd-inv-l"]"#)).unwrap();
        let run = &res.cells[0].runs[0];
        assert!((run.hp.eta - 1.0 / run.hp.l).abs() < 1e-15);
        assert!(run.residual_bound.is_none());
    }

    #[test]
    fn auto_scale_uses_method_threshold() {
        let mut cfg = tiny(r#"["gd", "nag"]"#);
        cfg.init.c_sqrt_d = None;
        cfg.init.c = Some(crate::config::ScaleSpec::Auto(crate::config::AutoKeyword::Auto));
        // at tau = 0.1 the GD threshold is too small for the bound to cover r_0 on some draws
        cfg.init.tau = 0.01;
        cfg.diagnostics.mode = DiagnosticsMode::Off;
        let res = run_experiment(&cfg).unwrap();
        for run in res.runs() {
            let b = run.residual_bound.as_ref().unwrap();
            assert!(b.applicable, "{}", run.run_id);
            assert!((run.c - b.threshold.unwrap()).abs() <= 1e-12 * run.c);
            assert_eq!(b.violations, 0, "{}", run.run_id);
            assert!(run.rows.iter().all(|r| r.leakage.is_none()));
        }
    }
}
