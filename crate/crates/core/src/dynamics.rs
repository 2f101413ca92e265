//! Residual dynamics around the initial linearization.
//!
//! With `H_t z = vec((Z·Y_tY_tᵀ + X_tX_tᵀ·Z)·W)` the projected residual
//! obeys `r_{t+1} = (I − ηH₀) r_t + ξ_t` under GD, and a two-step
//! recursion under NAG. The checks here evaluate both sides in matrix form
//! so that the perturbation terms can be monitored along real runs.

use crate::init::{FactorizationProblem, InitOutcome};
use crate::linalg::{self, apply_h_weighted, DenseMatrix, LinalgError};
use crate::lnn::LinearNetworkProblem;
use crate::optim::{HyperParams, IterateState, Method};

type Result<T, E = LinalgError> = std::result::Result<T, E>;

/// Orthonormal frames spanning the contraction subspace
/// `𝓗 = range(V) ⊗ colspan(U)`.
#[derive(Debug, Clone)]
pub struct SubspaceFrame {
    pub left: DenseMatrix,
    /// `None` means the full column space on the right.
    pub right: Option<DenseMatrix>,
}

impl SubspaceFrame {
    /// `(colspan A)ⁿ`.
    pub fn for_factorization(problem: &FactorizationProblem) -> Self {
        Self {
            left: problem.left_frame.clone(),
            right: None,
        }
    }

    /// `range(D) ⊗ colspan(X₀)`. The left factor is taken from `X₀` rather
    /// than `L` because an orthonormalized over-wide initialization spans
    /// more than `colspan(L)`, and it is that larger space which the
    /// iteration preserves.
    pub fn for_network(problem: &LinearNetworkProblem, init: &InitOutcome) -> Result<Self> {
        Ok(Self {
            left: linalg::column_space(&init.x0)?,
            right: Some(problem.data_frame.clone()),
        })
    }

    /// `‖R − P_U R P_V‖_F`.
    pub fn leakage(&self, r: &DenseMatrix) -> f64 {
        linalg::outside_projection_norm(r, &self.left, self.right.as_ref())
    }

    /// Orthonormal basis of `𝓗` inside `ℝ^{mn}` (`mn × dim 𝓗`).
    pub fn basis(&self, n: usize) -> DenseMatrix {
        let right = match &self.right {
            Some(v) => v.clone(),
            None => DenseMatrix::identity(n, n),
        };
        right.kronecker(&self.left)
    }
}

/// `‖(I − U_A U_Aᵀ) R‖_F`.
pub fn subspace_leakage(r: &DenseMatrix, problem: &FactorizationProblem) -> f64 {
    linalg::outside_projection_norm(r, &problem.left_frame, None)
}

/// Initial factors and weight defining `H₀`, plus the subspace frame.
#[derive(Debug, Clone)]
pub struct DynamicsContext {
    pub x0: DenseMatrix,
    pub y0: DenseMatrix,
    pub weight: Option<DenseMatrix>,
    pub frame: SubspaceFrame,
}

impl DynamicsContext {
    pub fn for_factorization(problem: &FactorizationProblem, init: &InitOutcome) -> Self {
        Self {
            x0: init.x0.clone(),
            y0: init.y0.clone(),
            weight: None,
            frame: SubspaceFrame::for_factorization(problem),
        }
    }

    pub fn for_network(problem: &LinearNetworkProblem, init: &InitOutcome) -> Result<Self> {
        Ok(Self {
            x0: init.x0.clone(),
            y0: init.y0.clone(),
            weight: Some(problem.ddt.clone()),
            frame: SubspaceFrame::for_network(problem, init)?,
        })
    }

    pub fn apply_h0(&self, z: &DenseMatrix) -> Result<DenseMatrix> {
        apply_h_weighted(&self.x0, &self.y0, z, self.weight.as_ref())
    }

    pub fn apply_h(&self, x: &DenseMatrix, y: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
        apply_h_weighted(x, y, z, self.weight.as_ref())
    }

    fn weighted(&self, z: DenseMatrix) -> DenseMatrix {
        match &self.weight {
            Some(w) => z * w,
            None => z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DynamicsCheck {
    /// `‖r_{t+1} − linear part − ξ_t‖`.
    pub decomposition_residual: f64,
    pub xi_norm: f64,
    /// NAG only: `‖ζ_t‖` and `‖ι_t‖`; zero for GD.
    pub zeta_norm: f64,
    pub iota_norm: f64,
    /// Mass of `r_t` outside `𝓗`.
    pub leakage: f64,
    /// Mass of `ξ_t` outside `𝓗`.
    pub xi_leakage: f64,
    /// `‖linear part‖ / ‖state‖`; for NAG the state is `(r_t, r_{t−1})`.
    pub contraction_measured: f64,
    pub residual_norm: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// One GD transition `before → after`:
/// `ξ_t = η(H₀ − H_t) r_t + vec(P_t Q_tᵀ W)` with `P_t = X_{t+1} − X_t`.
pub fn gd_decomposition_check(
    ctx: &DynamicsContext,
    before: &IterateState,
    after: &IterateState,
    hp: &HyperParams,
) -> Result<DynamicsCheck> {
    let eta = hp.eta;
    let r = &before.g;
    let h0r = ctx.apply_h0(r)?;
    let htr = ctx.apply_h(&before.x, &before.y, r)?;
    let linear = r - &h0r * eta;
    let p = &after.x - &before.x;
    let q = &after.y - &before.y;
    let xi = (h0r - htr) * eta + ctx.weighted(p * q.transpose());
    let discrepancy = &after.g - &linear - &xi;
    let rn = r.norm();
    Ok(DynamicsCheck {
        decomposition_residual: discrepancy.norm(),
        xi_norm: xi.norm(),
        zeta_norm: 0.0,
        iota_norm: 0.0,
        leakage: ctx.frame.leakage(r),
        xi_leakage: ctx.frame.leakage(&xi),
        contraction_measured: ratio(linear.norm(), rn),
        residual_norm: rn,
    })
}

/// One NAG transition. `before` carries iterates `t` and `t−1`, `after`
/// carries `t+1`. The linear part is
/// `(1+β)(I − ηH₀) r_t − β(I − ηH₀) r_{t−1}`, and `ξ_t = ζ_t + ι_t` with
/// `ζ_t = PQᵀ + β P'Q'ᵀ + βη(G'Y'Q'ᵀ + P'X'ᵀG')` (all times `W`, primes at
/// `t−1`) and `ι_t = (1+β)η(H₀ − H_t) r_t − βη(H₀ − H_{t−1}) r_{t−1}`.
pub fn nag_decomposition_check(
    ctx: &DynamicsContext,
    before: &IterateState,
    after: &IterateState,
    hp: &HyperParams,
) -> Result<DynamicsCheck> {
    let (eta, beta) = (hp.eta, hp.beta);
    let (r, rp) = (&before.g, &before.g_prev);
    let h0r = ctx.apply_h0(r)?;
    let h0rp = ctx.apply_h0(rp)?;
    let htr = ctx.apply_h(&before.x, &before.y, r)?;
    let htrp = ctx.apply_h(&before.x_prev, &before.y_prev, rp)?;
    let linear = (r - &h0r * eta) * (1.0 + beta) - (rp - &h0rp * eta) * beta;

    let p = &after.x - &before.x;
    let q = &after.y - &before.y;
    let pp = &before.x - &before.x_prev;
    let qp = &before.y - &before.y_prev;
    let cross = (rp * &before.y_prev) * qp.transpose() + &pp * (before.x_prev.transpose() * rp);
    let zeta = ctx.weighted(
        p * q.transpose() + (&pp * qp.transpose()) * beta + cross * (beta * eta),
    );
    let iota = (h0r - htr) * ((1.0 + beta) * eta) - (h0rp - htrp) * (beta * eta);
    let discrepancy = &after.g - &linear - &zeta - &iota;
    let xi = zeta.clone() + &iota;
    let rn = r.norm();
    let state_norm = (r.norm_squared() + rp.norm_squared()).sqrt();
    Ok(DynamicsCheck {
        decomposition_residual: discrepancy.norm(),
        xi_norm: xi.norm(),
        zeta_norm: zeta.norm(),
        iota_norm: iota.norm(),
        leakage: ctx.frame.leakage(r),
        xi_leakage: ctx.frame.leakage(&xi),
        contraction_measured: ratio(linear.norm(), state_norm),
        residual_norm: rn,
    })
}

pub fn decomposition_check(
    method: Method,
    ctx: &DynamicsContext,
    before: &IterateState,
    after: &IterateState,
    hp: &HyperParams,
) -> Option<Result<DynamicsCheck>> {
    match method {
        Method::Gd => Some(gd_decomposition_check(ctx, before, after, hp)),
        Method::Nag => Some(nag_decomposition_check(ctx, before, after, hp)),
        Method::AltGd(_) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub factor: f64,
    /// False when the step size leaves the linear part non-contractive.
    pub guaranteed: bool,
}

/// Spectral radius of `[[(1+β)a, −βa], [1, 0]]` with `a = 1 − ηλ`.
fn companion_radius(a: f64, beta: f64) -> f64 {
    let b = (1.0 + beta) * a;
    let c = beta * a;
    let mut disc = b * b - 4.0 * c;
    if disc.abs() <= 8.0 * f64::EPSILON * (b * b + 4.0 * c.abs()) {
        disc = 0.0;
    }
    if disc < 0.0 {
        c.sqrt()
    } else {
        let s = disc.sqrt();
        0.5 * (b.abs() + s)
    }
}

/// Worst-case rate of the linear part over curvatures `λ ∈ [μ, L]`.
///
/// GD gives `max{|1−ηL|, |1−ημ|}`; NAG gives the largest spectral radius of
/// the per-eigenvalue companion block, which equals `1 − √(μ/L)` at
/// `η = 1/L`, `β = (√L−√μ)/(√L+√μ)`.
pub fn contraction_factor(method: Method, l: f64, mu: f64, eta: f64, beta: f64) -> Contraction {
    let factor = match method {
        Method::Gd | Method::AltGd(_) => (1.0 - eta * l).abs().max((1.0 - eta * mu).abs()),
        Method::Nag => companion_radius(1.0 - eta * mu, beta).max(companion_radius(1.0 - eta * l, beta)),
    };
    let step_ok = eta > 0.0 && eta < 2.0 / l;
    Contraction {
        factor,
        guaranteed: step_ok && factor < 1.0,
    }
}

pub fn contraction_for(method: Method, hp: &HyperParams) -> Contraction {
    contraction_factor(method, hp.l, hp.mu, hp.eta, hp.beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// `‖R_t‖_F ≤ 3c²σ₁²(A)/64 · (1 − μ/L)^t`.
    GdThm1,
    /// `‖R_t‖_F ≤ c²σ₁²(A)/(64 cond(X₀)) · (1 − √μ/(2√L))^t`.
    NagThm2,
    /// `‖R_t‖_F ≤ σ_k²(X₀)σ_min(D)/576 · (1 − √μ̃/(2√L̃))^t`.
    LnnThm3,
    /// `f(X₀, Y₀)·(1 − μ/L)^{2t}`.
    LossCurveGd,
    /// `f(X₀, Y₀)·(1 − √μ/(2√L))^{2t}`.
    LossCurveNag,
}

impl BoundKind {
    pub fn name(self) -> &'static str {
        match self {
            BoundKind::GdThm1 => "gd-thm1",
            BoundKind::NagThm2 => "nag-thm2",
            BoundKind::LnnThm3 => "lnn-thm3",
            BoundKind::LossCurveGd => "loss-curve-gd",
            BoundKind::LossCurveNag => "loss-curve-nag",
        }
    }

    pub fn is_loss_curve(self) -> bool {
        matches!(self, BoundKind::LossCurveGd | BoundKind::LossCurveNag)
    }
}

/// `prefactor · θ^t` (residual bounds) or `prefactor · θ^{2t}` (loss curves).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryBound {
    pub kind: BoundKind,
    pub prefactor: f64,
    pub theta: f64,
}

fn gd_theta(l: f64, mu: f64) -> f64 {
    1.0 - mu / l
}

fn nag_theta(l: f64, mu: f64) -> f64 {
    1.0 - mu.sqrt() / (2.0 * l.sqrt())
}

impl TheoryBound {
    pub fn gd_thm1(problem: &FactorizationProblem, init: &InitOutcome) -> Self {
        Self {
            kind: BoundKind::GdThm1,
            prefactor: 3.0 * init.c * init.c * problem.sigma_1().powi(2) / 64.0,
            theta: gd_theta(init.l, init.mu),
        }
    }

    pub fn nag_thm2(problem: &FactorizationProblem, init: &InitOutcome) -> Self {
        Self {
            kind: BoundKind::NagThm2,
            prefactor: init.c * init.c * problem.sigma_1().powi(2) / (64.0 * init.cond_x0),
            theta: nag_theta(init.l, init.mu),
        }
    }

    pub fn lnn_thm3(problem: &LinearNetworkProblem, init: &InitOutcome) -> Self {
        let (l, mu) = crate::lnn::curvature(init, problem);
        Self {
            kind: BoundKind::LnnThm3,
            prefactor: init.mu * problem.sigma_min_data / 576.0,
            theta: nag_theta(l, mu),
        }
    }

    /// Predicted loss curve from `f₀ = f(X₀, Y₀)` and curvature `(L, μ)`.
    pub fn loss_curve(method: Method, f0: f64, l: f64, mu: f64) -> Self {
        match method {
            Method::Nag => Self {
                kind: BoundKind::LossCurveNag,
                prefactor: f0,
                theta: nag_theta(l, mu),
            },
            Method::Gd | Method::AltGd(_) => Self {
                kind: BoundKind::LossCurveGd,
                prefactor: f0,
                theta: gd_theta(l, mu),
            },
        }
    }

    pub fn at(&self, t: usize) -> f64 {
        let exponent = if self.kind.is_loss_curve() { 2 * t } else { t };
        self.prefactor * self.theta.powf(exponent as f64)
    }

    /// Per-iteration decrease of the natural log of the bounded quantity.
    pub fn log_slope(&self) -> f64 {
        let per = if self.kind.is_loss_curve() { 2.0 } else { 1.0 };
        per * self.theta.ln()
    }
}

/// Values for `t = 0..=t_max`.
pub fn theory_bound_curve(bound: &TheoryBound, t_max: usize) -> Vec<f64> {
    (0..=t_max).map(|t| bound.at(t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexityKind {
    Gd,
    Nag,
}

/// Measured quantities feeding the iteration-count predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityInputs {
    pub kappa: f64,
    pub cond_x0: f64,
    pub tau: f64,
    pub d: usize,
    pub r: usize,
}

/// Order-of-magnitude iteration counts with unit leading constants:
/// GD `d²κ²/(τ²(d−r+1)²)·log(C/ε)` and NAG `dκ/(τ(d−r+1))·log(C/ε)`.
/// These are scalings, not guarantees.
pub fn iteration_complexity(kind: ComplexityKind, inputs: &ComplexityInputs, eps: f64) -> f64 {
    let ComplexityInputs { kappa, cond_x0, tau, d, r } = *inputs;
    let df = d as f64;
    let gap = (d - r + 1) as f64;
    let (factor, c) = match kind {
        ComplexityKind::Gd => {
            let c2 = cond_x0 * cond_x0;
            let c = 27.0 * tau * tau * gap * gap / (16.0 * df * df) * c2 * c2 / (c2 - 1.0)
                * kappa
                * kappa;
            (df * df * kappa * kappa / (tau * tau * gap * gap), c)
        }
        ComplexityKind::Nag => {
            let root_gap = df.sqrt() - ((r - 1) as f64).sqrt();
            let c = 841.0 * df * (2.0 * df.sqrt() + (r as f64).sqrt())
                / (64.0 * tau.powi(3) * root_gap.powi(3))
                * kappa.powi(3)
                / cond_x0;
            (df * kappa / (tau * gap), c)
        }
    };
    factor * (c / eps).ln().max(0.0)
}

/// Dense operators for small instances. Building them costs `O((mn)²)`
/// memory, so callers are limited to `mn ≤ MAX_EXPLICIT_DIM`.
pub mod oracle {
    use super::*;
    use nalgebra::Complex;

    pub const MAX_EXPLICIT_DIM: usize = 400;

    fn gate(m: usize, n: usize) -> Result<()> {
        if m * n > MAX_EXPLICIT_DIM {
            return Err(LinalgError::Invalid(format!(
                "explicit operators are limited to mn <= {MAX_EXPLICIT_DIM}, got {}",
                m * n
            )));
        }
        Ok(())
    }

    /// `(W·YYᵀ) ⊗ I_m + W ⊗ XXᵀ`, `W = I` when absent.
    pub fn explicit_h(
        x: &DenseMatrix,
        y: &DenseMatrix,
        weight: Option<&DenseMatrix>,
    ) -> Result<DenseMatrix> {
        let (m, n) = (x.nrows(), y.nrows());
        gate(m, n)?;
        let w = weight.cloned().unwrap_or_else(|| DenseMatrix::identity(n, n));
        let yyt = y * y.transpose();
        let xxt = x * x.transpose();
        Ok((&w * yyt).kronecker(&DenseMatrix::identity(m, m)) + w.kronecker(&xxt))
    }

    /// `[[(1+β)(I − ηH), −β(I − ηH)], [I, 0]]`.
    pub fn explicit_t_nag(h: &DenseMatrix, eta: f64, beta: f64) -> DenseMatrix {
        let k = h.nrows();
        let a = DenseMatrix::identity(k, k) - h * eta;
        let mut t = DenseMatrix::zeros(2 * k, 2 * k);
        t.view_mut((0, 0), (k, k)).copy_from(&(&a * (1.0 + beta)));
        t.view_mut((0, k), (k, k)).copy_from(&(&a * (-beta)));
        t.view_mut((k, 0), (k, k)).fill_with_identity();
        t
    }

    /// `Bᵀ H₀ B` for the orthonormal basis `B` of `𝓗`.
    pub fn restricted_h0(ctx: &DynamicsContext) -> Result<DenseMatrix> {
        let n = ctx.y0.nrows();
        let h0 = explicit_h(&ctx.x0, &ctx.y0, ctx.weight.as_ref())?;
        let b = ctx.frame.basis(n);
        Ok(b.transpose() * h0 * b)
    }

    /// Singular values of `I − η Bᵀ H₀ B`, descending.
    pub fn restricted_gd_spectrum(ctx: &DynamicsContext, eta: f64) -> Result<Vec<f64>> {
        let m = restricted_h0(ctx)?;
        let k = m.nrows();
        let t = DenseMatrix::identity(k, k) - m * eta;
        Ok(linalg::spectrum(&t)?.singular_values)
    }

    /// Eigenvalues of `T_NAG` built from `Bᵀ H₀ B`.
    ///
    /// `T_NAG` is a polynomial in `I − ηBᵀH₀B`, so conjugating by `Q ⊕ Q`
    /// (`Q` from a symmetric eigensolve) splits it into 2×2 companion blocks
    /// whose roots are taken in closed form. A general eigensolve of the
    /// full block matrix loses about half the digits on the Jordan pairs
    /// that theory hyperparameters produce.
    pub fn restricted_nag_eigenvalues(
        ctx: &DynamicsContext,
        eta: f64,
        beta: f64,
    ) -> Result<Vec<Complex<f64>>> {
        let m = restricted_h0(ctx)?;
        let sym = (&m + m.transpose()) * 0.5;
        let mut eigs = Vec::with_capacity(2 * m.nrows());
        for &h in sym.symmetric_eigenvalues().iter() {
            let (z1, z2) = companion_roots(1.0 - eta * h, beta);
            eigs.push(z1);
            eigs.push(z2);
        }
        Ok(eigs)
    }

    /// Roots of `z² − (1+β)a·z + βa`.
    pub fn companion_roots(a: f64, beta: f64) -> (Complex<f64>, Complex<f64>) {
        let p = (1.0 + beta) * a;
        let q = beta * a;
        let disc = p * p - 4.0 * q;
        if disc >= 0.0 {
            // larger root first, smaller from the product to avoid cancellation
            let big = 0.5 * (p + p.signum() * disc.sqrt());
            let small = if big != 0.0 { q / big } else { 0.0 };
            (Complex::new(big, 0.0), Complex::new(small, 0.0))
        } else {
            let im = 0.5 * (-disc).sqrt();
            (Complex::new(0.5 * p, im), Complex::new(0.5 * p, -im))
        }
    }

    pub fn spectral_radius(eigs: &[Complex<f64>]) -> f64 {
        eigs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Positive eigenvalues of the full `H₀`, via a symmetric eigensolve.
    pub fn h0_eigenvalues(ctx: &DynamicsContext) -> Result<Vec<f64>> {
        let h0 = explicit_h(&ctx.x0, &ctx.y0, ctx.weight.as_ref())?;
        let sym = (&h0 + h0.transpose()) * 0.5;
        let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        Ok(eig)
    }
}
