//! Gradient descent, alternating gradient descent and Nesterov's
//! accelerated gradient on `½‖X Yᵀ W − T‖²_F`.
//!
//! Every step recomputes the residual from the new factors instead of
//! updating it incrementally.

use crate::init::{FactorizationProblem, InitOutcome};
use crate::linalg::{DenseMatrix, LinalgError};
use crate::lnn::LinearNetworkProblem;
use std::borrow::Cow;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("iterate shapes do not match the objective: {0}")]
    Shape(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = OptimError> = std::result::Result<T, E>;

/// Quadratic factorization objective. The gradient with respect to `X` is
/// `G·Y` and with respect to `Y` is `Gᵀ·X`, where `G` is the projected
/// residual.
pub trait Objective {
    /// Target the product is fitted to (`A`, or the labels `L`).
    fn target(&self) -> &DenseMatrix;
    fn target_norm(&self) -> f64;
    /// `(rows of X, rows of Y)`.
    fn factor_rows(&self) -> (usize, usize);
    /// Raw residual `X Yᵀ W − T`.
    fn residual(&self, x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix;
    /// Projected residual `G = R Wᵀ`; `R` itself when there is no weight.
    fn project<'a>(&self, r: &'a DenseMatrix) -> Cow<'a, DenseMatrix>;
    /// Symmetric weight `W Wᵀ` multiplying curvature on the right.
    fn curvature_weight(&self) -> Option<&DenseMatrix>;
    /// `(λ_max, λ_min)` of the weight on its range; `(1, 1)` without one.
    fn weight_spectrum(&self) -> (f64, f64);
    fn loss(&self, r: &DenseMatrix) -> f64 {
        0.5 * r.norm_squared()
    }
}

impl Objective for FactorizationProblem {
    fn target(&self) -> &DenseMatrix {
        &self.a
    }
    fn target_norm(&self) -> f64 {
        self.frobenius
    }
    fn factor_rows(&self) -> (usize, usize) {
        self.a.shape()
    }
    fn residual(&self, x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
        x * y.transpose() - &self.a
    }
    fn project<'a>(&self, r: &'a DenseMatrix) -> Cow<'a, DenseMatrix> {
        Cow::Borrowed(r)
    }
    fn curvature_weight(&self) -> Option<&DenseMatrix> {
        None
    }
    fn weight_spectrum(&self) -> (f64, f64) {
        (1.0, 1.0)
    }
}

impl Objective for LinearNetworkProblem {
    fn target(&self) -> &DenseMatrix {
        &self.labels
    }
    fn target_norm(&self) -> f64 {
        self.labels_norm
    }
    fn factor_rows(&self) -> (usize, usize) {
        (self.outputs(), self.inputs())
    }
    fn residual(&self, x: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
        x * (y.transpose() * &self.data) - &self.labels
    }
    fn project<'a>(&self, r: &'a DenseMatrix) -> Cow<'a, DenseMatrix> {
        Cow::Owned(r * self.data.transpose())
    }
    fn curvature_weight(&self) -> Option<&DenseMatrix> {
        Some(&self.ddt)
    }
    fn weight_spectrum(&self) -> (f64, f64) {
        (self.lambda_max, self.lambda_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum AltOrder {
    #[default]
    XFirst,
    YFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Gd,
    AltGd(AltOrder),
    Nag,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gd => "gd",
            Method::AltGd(AltOrder::XFirst) => "altgd",
            Method::AltGd(AltOrder::YFirst) => "altgd-y",
            Method::Nag => "nag",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperSource {
    /// `η = 2/(L+μ)`, `β = 0`.
    TheoryGd,
    /// `η = 1/L`, `β = (√L−√μ)/(√L+√μ)`.
    TheoryNag,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub eta: f64,
    pub beta: f64,
    /// Smoothness constant the step size was derived from.
    pub l: f64,
    /// Strong-convexity constant the step size was derived from.
    pub mu: f64,
    pub source: HyperSource,
}

impl HyperParams {
    pub fn theory_gd(l: f64, mu: f64) -> Result<Self> {
        check_curvature(l, mu)?;
        Ok(Self {
            eta: 2.0 / (l + mu),
            beta: 0.0,
            l,
            mu,
            source: HyperSource::TheoryGd,
        })
    }

    pub fn theory_nag(l: f64, mu: f64) -> Result<Self> {
        check_curvature(l, mu)?;
        let (sl, sm) = (l.sqrt(), mu.sqrt());
        Ok(Self {
            eta: 1.0 / l,
            beta: (sl - sm) / (sl + sm),
            l,
            mu,
            source: HyperSource::TheoryNag,
        })
    }

    /// Explicit `η`, `β`, keeping `(L, μ)` for reporting.
    pub fn manual(eta: f64, beta: f64, l: f64, mu: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(OptimError::Hyper(format!("eta must be positive, got {eta}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(OptimError::Hyper(format!("beta must lie in [0, 1), got {beta}")));
        }
        Ok(Self {
            eta,
            beta,
            l,
            mu,
            source: HyperSource::Manual,
        })
    }

    pub fn kappa_eff(&self) -> f64 {
        self.l / self.mu
    }
}

fn check_curvature(l: f64, mu: f64) -> Result<()> {
    if !(mu > 0.0) || !(l >= mu) || !l.is_finite() {
        return Err(OptimError::Hyper(format!(
            "need L >= mu > 0, got L={l:e}, mu={mu:e}"
        )));
    }
    Ok(())
}

/// Theory step sizes from an initialization. For weighted objectives the
/// constants become `L̃ = L·λ_max`, `μ̃ = μ·λ_min`.
pub fn derive_hyperparams<O: Objective + ?Sized>(
    init: &InitOutcome,
    method: Method,
    objective: &O,
) -> Result<HyperParams> {
    let (lmax, lmin) = objective.weight_spectrum();
    let (l, mu) = (init.l * lmax, init.mu * lmin);
    match method {
        Method::Gd | Method::AltGd(_) => HyperParams::theory_gd(l, mu),
        Method::Nag => HyperParams::theory_nag(l, mu),
    }
}

/// Factors, residual and projected residual at step `t`, together with the
/// previous step's values (equal to the current ones at `t = 0`).
#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    /// Raw residual.
    pub r: DenseMatrix,
    /// Projected residual driving the gradient.
    pub g: DenseMatrix,
    pub x_prev: DenseMatrix,
    pub y_prev: DenseMatrix,
    pub r_prev: DenseMatrix,
    pub g_prev: DenseMatrix,
    pub t: usize,
    /// Gradient-step points `X_t − η G_t Y_t`, `Y_t − η G_tᵀ X_t` computed by
    /// the last NAG step, keyed by the `η` used.
    lookahead: Option<(DenseMatrix, DenseMatrix, f64)>,
}

impl IterateState {
    pub fn new<O: Objective + ?Sized>(
        objective: &O,
        x0: DenseMatrix,
        y0: DenseMatrix,
    ) -> Result<Self> {
        let (m, n) = objective.factor_rows();
        if x0.nrows() != m || y0.nrows() != n || x0.ncols() != y0.ncols() {
            return Err(OptimError::Shape(format!(
                "X {:?}, Y {:?} against factor rows ({m}, {n})",
                x0.shape(),
                y0.shape()
            )));
        }
        let r = objective.residual(&x0, &y0);
        let g = objective.project(&r).into_owned();
        Ok(Self {
            x_prev: x0.clone(),
            y_prev: y0.clone(),
            r_prev: r.clone(),
            g_prev: g.clone(),
            x: x0,
            y: y0,
            r,
            g,
            t: 0,
            lookahead: None,
        })
    }

    pub fn from_init<O: Objective + ?Sized>(objective: &O, init: &InitOutcome) -> Result<Self> {
        Self::new(objective, init.x0.clone(), init.y0.clone())
    }

    pub fn loss(&self) -> f64 {
        0.5 * self.r.norm_squared()
    }

    pub fn residual_norm(&self) -> f64 {
        self.r.norm()
    }

    fn advance<O: Objective + ?Sized>(
        self,
        objective: &O,
        x: DenseMatrix,
        y: DenseMatrix,
        lookahead: Option<(DenseMatrix, DenseMatrix, f64)>,
    ) -> Self {
        let r = objective.residual(&x, &y);
        let g = objective.project(&r).into_owned();
        Self {
            x,
            y,
            r,
            g,
            x_prev: self.x,
            y_prev: self.y,
            r_prev: self.r,
            g_prev: self.g,
            t: self.t + 1,
            lookahead,
        }
    }
}

/// `(X − η·(G Y), Y − η·(Gᵀ X))`.
fn gradient_point(
    x: &DenseMatrix,
    y: &DenseMatrix,
    g: &DenseMatrix,
    eta: f64,
) -> (DenseMatrix, DenseMatrix) {
    let zx = x - (g * y) * eta;
    let zy = y - (g.transpose() * x) * eta;
    (zx, zy)
}

pub fn gd_step<O: Objective + ?Sized>(
    state: IterateState,
    hp: &HyperParams,
    objective: &O,
) -> IterateState {
    let (x, y) = gradient_point(&state.x, &state.y, &state.g, hp.eta);
    state.advance(objective, x, y, None)
}

pub fn altgd_step<O: Objective + ?Sized>(
    state: IterateState,
    hp: &HyperParams,
    objective: &O,
    order: AltOrder,
) -> IterateState {
    let eta = hp.eta;
    let (x, y) = match order {
        AltOrder::XFirst => {
            let x = &state.x - (&state.g * &state.y) * eta;
            let r_half = objective.residual(&x, &state.y);
            let g_half = objective.project(&r_half);
            let y = &state.y - (g_half.transpose() * &x) * eta;
            (x, y)
        }
        AltOrder::YFirst => {
            let y = &state.y - (state.g.transpose() * &state.x) * eta;
            let r_half = objective.residual(&state.x, &y);
            let g_half = objective.project(&r_half);
            let x = &state.x - (&*g_half * &y) * eta;
            (x, y)
        }
    };
    state.advance(objective, x, y, None)
}

/// `X_{t+1} = (1+β)(X_t − ηG_tY_t) − β(X_{t−1} − ηG_{t−1}Y_{t−1})`, and
/// likewise for `Y`, with `X_{−1} = X_0`.
pub fn nag_step<O: Objective + ?Sized>(
    mut state: IterateState,
    hp: &HyperParams,
    objective: &O,
) -> IterateState {
    let (eta, beta) = (hp.eta, hp.beta);
    let (zx, zy) = gradient_point(&state.x, &state.y, &state.g, eta);
    let (px, py) = match state.lookahead.take() {
        Some((px, py, e)) if e == eta && state.t > 0 => (px, py),
        _ => {
            if state.t == 0 {
                (zx.clone(), zy.clone())
            } else {
                gradient_point(&state.x_prev, &state.y_prev, &state.g_prev, eta)
            }
        }
    };
    // extrapolating from z keeps fixed points exact; (1+β)z − βp does not
    let (x, y) = if beta == 0.0 {
        (zx.clone(), zy.clone())
    } else {
        (&zx + (&zx - px) * beta, &zy + (&zy - py) * beta)
    };
    state.advance(objective, x, y, Some((zx, zy, eta)))
}

pub fn step<O: Objective + ?Sized>(
    state: IterateState,
    method: Method,
    hp: &HyperParams,
    objective: &O,
) -> IterateState {
    match method {
        Method::Gd => gd_step(state, hp, objective),
        Method::AltGd(order) => altgd_step(state, hp, objective, order),
        Method::Nag => nag_step(state, hp, objective),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Stop once `‖R_t‖_F / ‖T‖_F ≤ eps`; zero runs to `max_iters`.
    pub eps: f64,
    pub max_iters: usize,
    /// Declare divergence once the loss exceeds this multiple of the
    /// initial loss.
    pub divergence_factor: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            eps: 1e-10,
            max_iters: 100_000,
            divergence_factor: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Termination {
    Converged,
    MaxIters,
    Diverged,
}

/// Observer of a trajectory. `record` sees every iterate; `before` is a copy
/// of the preceding state whenever `wants_previous` asked for it.
pub trait Monitor {
    fn record(&mut self, state: &IterateState, before: Option<&IterateState>);
    /// Whether the transition into iterate `t` needs a copy of iterate `t−1`.
    fn wants_previous(&self, _t: usize) -> bool {
        false
    }
}

impl Monitor for () {
    fn record(&mut self, _: &IterateState, _: Option<&IterateState>) {}
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: IterateState,
    pub termination: Termination,
    /// Steps taken.
    pub iterations: usize,
    /// `f(X_t, Y_t)` for `t = 0..=iterations`.
    pub losses: Vec<f64>,
    /// `‖R_t‖_F` for `t = 0..=iterations`.
    pub residual_norms: Vec<f64>,
}

impl RunOutcome {
    pub fn final_relative_residual(&self, target_norm: f64) -> f64 {
        self.residual_norms.last().copied().unwrap_or(f64::NAN) / target_norm
    }
}

pub fn run<O: Objective + ?Sized, M: Monitor + ?Sized>(
    objective: &O,
    method: Method,
    hp: &HyperParams,
    mut state: IterateState,
    stop: &StopRule,
    monitor: &mut M,
) -> RunOutcome {
    let target_norm = objective.target_norm();
    let mut losses = vec![state.loss()];
    let mut residual_norms = vec![state.residual_norm()];
    let divergence_level = losses[0] * stop.divergence_factor;
    monitor.record(&state, None);
    let termination = loop {
        let rn = *residual_norms.last().unwrap();
        let loss = *losses.last().unwrap();
        if !rn.is_finite() || (state.t > 0 && loss > divergence_level) {
            break Termination::Diverged;
        }
        if stop.eps > 0.0 && rn <= stop.eps * target_norm {
            break Termination::Converged;
        }
        if state.t >= stop.max_iters {
            break Termination::MaxIters;
        }
        let before = monitor.wants_previous(state.t + 1).then(|| state.clone());
        state = step(state, method, hp, objective);
        losses.push(state.loss());
        residual_norms.push(state.residual_norm());
        monitor.record(&state, before.as_ref());
    };
    RunOutcome {
        iterations: state.t,
        state,
        termination,
        losses,
        residual_norms,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{init_mf, make_mf_problem, InitConfig, InitScheme, MfSpec, SpectrumProfile};
    use approx::assert_relative_eq;

    fn small() -> (FactorizationProblem, InitOutcome) {
        let p = make_mf_problem(
            &MfSpec {
                m: 12,
                n: 9,
                r: 3,
                sigma1: 1.0,
                sigma_r: 0.5,
                profile: SpectrumProfile::Geometric,
            },
            7,
        )
        .unwrap();
        let init = init_mf(&p, &InitConfig::new(InitScheme::MfSketch, 5, 20.0, 1)).unwrap();
        (p, init)
    }

    #[test]
    fn hyperparameters_closed_form() {
        let gd = HyperParams::theory_gd(4.0, 1.0).unwrap();
        assert_eq!(gd.eta, 0.4);
        let nag = HyperParams::theory_nag(4.0, 1.0).unwrap();
        assert_eq!(nag.eta, 0.25);
        assert_relative_eq!(nag.beta, 1.0 / 3.0, epsilon = 1e-15);
        let tied = HyperParams::theory_nag(2.0, 2.0).unwrap();
        assert_eq!(tied.beta, 0.0);
        assert!(HyperParams::theory_gd(1.0, 0.0).is_err());
        assert!(HyperParams::manual(0.1, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (p, init) = small();
        let mut rng = crate::linalg::RandomSource::new(3);
        let y = crate::linalg::gaussian_matrix(9, 5, 1.0, &mut rng).unwrap();
        let x = init.x0.clone() * 0.05;
        let r = p.residual(&x, &y);
        let gx = &r * &y;
        let h = 1e-6;
        for (i, j) in [(0, 0), (3, 2), (11, 4)] {
            let mut xp = x.clone();
            xp[(i, j)] += h;
            let mut xm = x.clone();
            xm[(i, j)] -= h;
            let fd = (p.loss(&p.residual(&xp, &y)) - p.loss(&p.residual(&xm, &y))) / (2.0 * h);
            assert_relative_eq!(fd, gx[(i, j)], max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn first_gd_step_from_zero_y() {
        let (p, init) = small();
        let hp = HyperParams::theory_gd(init.l, init.mu).unwrap();
        let s0 = IterateState::from_init(&p, &init).unwrap();
        let s1 = gd_step(s0, &hp, &p);
        assert_eq!(s1.x, init.x0);
        let expect = (p.a.transpose() * &init.x0) * hp.eta;
        assert!((&s1.y - expect).norm() <= 1e-12 * s1.y.norm());
    }

    #[test]
    fn zero_momentum_nag_is_gd_bitwise() {
        let (p, init) = small();
        let hp = HyperParams::manual(1.0 / init.l, 0.0, init.l, init.mu).unwrap();
        let mut a = IterateState::from_init(&p, &init).unwrap();
        let mut b = a.clone();
        for _ in 0..100 {
            a = gd_step(a, &hp, &p);
            b = nag_step(b, &hp, &p);
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }
    }

    #[test]
    fn altgd_first_step_equals_gd_when_y0_is_zero() {
        let (p, init) = small();
        let hp = HyperParams::theory_gd(init.l, init.mu).unwrap();
        let s0 = IterateState::from_init(&p, &init).unwrap();
        let a = gd_step(s0.clone(), &hp, &p);
        let b = altgd_step(s0, &hp, &p, AltOrder::XFirst);
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn nag_matches_two_sequence_form() {
        let (p, init) = small();
        let hp = derive_hyperparams(&init, Method::Nag, &p).unwrap();
        let mut s = IterateState::from_init(&p, &init).unwrap();
        let (mut x, mut y) = (init.x0.clone(), init.y0.clone());
        let (mut xp, mut yp) = (x.clone(), y.clone());
        for _ in 0..50 {
            let grad = |x: &DenseMatrix, y: &DenseMatrix| {
                let r = x * y.transpose() - &p.a;
                (x - &r * y * hp.eta, y - r.transpose() * x * hp.eta)
            };
            let (zx, zy) = grad(&x, &y);
            let (zxp, zyp) = grad(&xp, &yp);
            let nx = zx * (1.0 + hp.beta) - zxp * hp.beta;
            let ny = zy * (1.0 + hp.beta) - zyp * hp.beta;
            xp = std::mem::replace(&mut x, nx);
            yp = std::mem::replace(&mut y, ny);
            s = nag_step(s, &hp, &p);
            assert!((&s.x - &x).norm() <= 1e-10 * x.norm());
            assert!((&s.y - &y).norm() <= 1e-10 * y.norm().max(1.0));
        }
    }

    #[test]
    fn nag_without_cached_lookahead_agrees() {
        let (p, init) = small();
        let hp = derive_hyperparams(&init, Method::Nag, &p).unwrap();
        let mut a = IterateState::from_init(&p, &init).unwrap();
        for _ in 0..5 {
            a = nag_step(a, &hp, &p);
        }
        let mut b = a.clone();
        b.lookahead = None;
        let a = nag_step(a, &hp, &p);
        let b = nag_step(b, &hp, &p);
        assert!((&a.x - &b.x).norm() <= 1e-13 * a.x.norm());
    }

    #[test]
    fn run_converges_and_records_history() {
        let (p, init) = small();
        for method in [Method::Gd, Method::AltGd(AltOrder::XFirst), Method::AltGd(AltOrder::YFirst), Method::Nag] {
            let hp = derive_hyperparams(&init, method, &p).unwrap();
            let s0 = IterateState::from_init(&p, &init).unwrap();
            let stop = StopRule { eps: 1e-9, max_iters: 20_000, ..StopRule::default() };
            let out = run(&p, method, &hp, s0, &stop, &mut ());
            assert_eq!(out.termination, Termination::Converged, "{method:?}");
            assert_eq!(out.losses.len(), out.iterations + 1);
            assert!(out.final_relative_residual(p.frobenius) <= 1e-9);
        }
    }

    #[test]
    fn run_stops_immediately_at_exact_solution() {
        let (p, _) = small();
        let dec = crate::linalg::svd(&p.a).unwrap();
        let x = dec.left_frame(3) * DenseMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            &dec.summary.singular_values[..3],
        ));
        let y = dec.right_frame(3);
        let s0 = IterateState::new(&p, x, y).unwrap();
        let hp = HyperParams::theory_gd(1.0, 0.25).unwrap();
        let out = run(&p, Method::Gd, &hp, s0.clone(), &StopRule::default(), &mut ());
        assert_eq!(out.iterations, 0);
        assert_eq!(out.termination, Termination::Converged);

        let stop = StopRule { eps: 0.0, max_iters: 7, ..StopRule::default() };
        let out = run(&p, Method::Gd, &hp, s0, &stop, &mut ());
        assert_eq!(out.iterations, 7);
        assert_eq!(out.termination, Termination::MaxIters);
    }

    #[test]
    fn huge_step_diverges() {
        let (p, init) = small();
        let hp = HyperParams::manual(50.0 / init.l, 0.0, init.l, init.mu).unwrap();
        let s0 = IterateState::from_init(&p, &init).unwrap();
        let out = run(&p, Method::Gd, &hp, s0, &StopRule::default(), &mut ());
        assert_eq!(out.termination, Termination::Diverged);
        assert!(out.iterations < 1000);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (p, init) = small();
        let bad = IterateState::new(&p, init.x0.clone(), DenseMatrix::zeros(8, 5));
        assert!(matches!(bad, Err(OptimError::Shape(_))));
    }
}
