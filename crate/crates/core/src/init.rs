//! Problem construction and unbalanced initialization schemes.
//!
//! The matrix-factorization sketch is `X₀ = c·A·Φ`, `Y₀ = 0` with
//! `Φ ∈ ℝ^{n×d}` Gaussian of variance `1/d`. Because `cond(X₀)` does not
//! depend on `c`, threshold scales can be resolved after a single draw.

use crate::linalg::{
    self, gaussian_matrix, orthonormal_frame, orthonormalize, DenseMatrix, LinalgError,
    RandomSource, SpectralSummary,
};
use crate::lnn::{self, LinearNetworkProblem};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InitError {
    #[error("invalid dimensions: {0}")]
    Dimensions(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("scheme {scheme:?} does not apply here: {reason}")]
    Scheme { scheme: InitScheme, reason: String },
    #[error("threshold formula is singular: {0}")]
    Singular(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = InitError> = std::result::Result<T, E>;

/// How interior singular values between `σ₁` and `σ_r` are placed.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SpectrumProfile {
    #[default]
    Geometric,
    Linear,
    /// Explicit values, length `r`, descending.
    Custom(Vec<f64>),
}

impl SpectrumProfile {
    pub fn values(&self, r: usize, sigma1: f64, sigma_r: f64) -> Result<Vec<f64>> {
        if r == 1 {
            return Ok(vec![sigma1]);
        }
        let denom = (r - 1) as f64;
        let values = match self {
            SpectrumProfile::Geometric => (0..r)
                .map(|i| sigma1 * (sigma_r / sigma1).powf(i as f64 / denom))
                .collect(),
            SpectrumProfile::Linear => (0..r)
                .map(|i| sigma1 + (sigma_r - sigma1) * i as f64 / denom)
                .collect(),
            SpectrumProfile::Custom(v) => {
                if v.len() != r {
                    return Err(InitError::Parameter(format!(
                        "custom spectrum has {} values, rank is {r}",
                        v.len()
                    )));
                }
                if v.windows(2).any(|w| w[0] < w[1]) || v.iter().any(|s| !(*s > 0.0)) {
                    return Err(InitError::Parameter(
                        "custom spectrum must be positive and descending".into(),
                    ));
                }
                v.clone()
            }
        };
        Ok(values)
    }
}

/// Rank-`r` target `A` with its cached SVD.
#[derive(Debug, Clone)]
pub struct FactorizationProblem {
    pub a: DenseMatrix,
    pub rank: usize,
    pub spectrum: SpectralSummary,
    pub kappa: f64,
    /// Left singular vectors spanning `colspan(A)` (`m × r`).
    pub left_frame: DenseMatrix,
    pub frobenius: f64,
}

impl FactorizationProblem {
    /// Wraps `a`, checking that its numerical rank is exactly `rank`.
    pub fn new(a: DenseMatrix, rank: usize) -> Result<Self> {
        let dec = linalg::svd(&a)?;
        if dec.summary.rank != rank {
            return Err(InitError::Dimensions(format!(
                "target has numerical rank {}, expected {rank}",
                dec.summary.rank
            )));
        }
        let kappa = dec.summary.cond_at(rank);
        let left_frame = dec.left_frame(rank);
        let frobenius = a.norm();
        Ok(Self {
            a,
            rank,
            spectrum: dec.summary,
            kappa,
            left_frame,
            frobenius,
        })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn sigma_1(&self) -> f64 {
        self.spectrum.sigma(1)
    }

    pub fn sigma_r(&self) -> f64 {
        self.spectrum.sigma(self.rank)
    }
}

/// Constructor parameters for a synthetic `A = U Σ Vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MfSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub sigma1: f64,
    pub sigma_r: f64,
    pub profile: SpectrumProfile,
}

/// Random orthonormal `rows × k` frame from the QR of a Gaussian matrix.
pub fn random_frame(rows: usize, k: usize, rng: &mut RandomSource) -> Result<DenseMatrix> {
    let g = gaussian_matrix(rows, k, 1.0, rng)?;
    Ok(orthonormalize(&g)?)
}

/// `A = U Σ Vᵀ` with Haar-like frames. For `r = 1`, only `sigma1` is used.
pub fn make_mf_problem(spec: &MfSpec, seed: u64) -> Result<FactorizationProblem> {
    let MfSpec { m, n, r, sigma1, sigma_r, .. } = *spec;
    if r == 0 || r > m.min(n) {
        return Err(InitError::Dimensions(format!(
            "rank {r} must lie in 1..={} for a {m}x{n} target",
            m.min(n)
        )));
    }
    if !(sigma_r > 0.0) || sigma1 < sigma_r || !sigma1.is_finite() {
        return Err(InitError::Parameter(format!(
            "need sigma1 >= sigma_r > 0, got sigma1={sigma1}, sigma_r={sigma_r}"
        )));
    }
    let sigmas = spec.profile.values(r, sigma1, sigma_r)?;
    let mut rng = RandomSource::new(seed);
    let u = random_frame(m, r, &mut rng)?;
    let v = random_frame(n, r, &mut rng)?;
    let mut us = u;
    for (j, s) in sigmas.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    FactorizationProblem::new(us * v.transpose(), r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitScheme {
    /// `X₀ = c·A·Φ`, `Y₀ = 0`.
    MfSketch,
    /// `X₀ = c·A·Φ₁`, `Y₀ = c₂·Φ₂` with `Φ₂` of variance `1/n`.
    MfGeneral,
    /// `X₀ = c·L·Φ`.
    Lnn1,
    /// `X₀ = c·Orth(L·Φ)`.
    Lnn2,
    /// `X₀ = c·Φ` with `d ≥ m`.
    Lnn3,
}

impl InitScheme {
    pub fn is_mf(self) -> bool {
        matches!(self, InitScheme::MfSketch | InitScheme::MfGeneral)
    }

    pub fn name(self) -> &'static str {
        match self {
            InitScheme::MfSketch => "mf-sketch",
            InitScheme::MfGeneral => "mf-general",
            InitScheme::Lnn1 => "lnn-1",
            InitScheme::Lnn2 => "lnn-2",
            InitScheme::Lnn3 => "lnn-3",
        }
    }
}

/// Which theory-derived threshold an automatic scale resolves to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// `c̲` of the GD theorem.
    Gd { tau: f64 },
    /// `c̲` of the NAG theorem.
    Nag { tau: f64 },
    /// Minimal scale meeting the linear-network NAG premise, times a
    /// safety factor.
    LnnPremise { safety: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    Fixed(f64),
    Auto(ThresholdRule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig {
    pub scheme: InitScheme,
    pub d: usize,
    pub scale: Scale,
    /// Scale of `Y₀` for [`InitScheme::MfGeneral`]; ignored otherwise.
    pub c2: f64,
    pub seed: u64,
}

impl InitConfig {
    pub fn new(scheme: InitScheme, d: usize, c: f64, seed: u64) -> Self {
        Self {
            scheme,
            d,
            scale: Scale::Fixed(c),
            c2: 0.0,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InitOutcome {
    pub scheme: InitScheme,
    pub x0: DenseMatrix,
    pub y0: DenseMatrix,
    pub x0_spectrum: SpectralSummary,
    /// Index `k` such that `mu = σ_k²(X₀)` (`r`, or `m` for LNN-3).
    pub curvature_index: usize,
    /// `σ₁²(X₀)`.
    pub l: f64,
    /// `σ_k²(X₀)`.
    pub mu: f64,
    pub cond_x0: f64,
    /// Resolved scale `c`.
    pub c: f64,
}

impl InitOutcome {
    fn build(
        scheme: InitScheme,
        x0: DenseMatrix,
        y0: DenseMatrix,
        curvature_index: usize,
        c: f64,
    ) -> Result<Self> {
        let x0_spectrum = linalg::spectrum(&x0)?;
        let l = x0_spectrum.sigma(1).powi(2);
        let mu = x0_spectrum.sigma(curvature_index).powi(2);
        let cond_x0 = if mu > 0.0 { (l / mu).sqrt() } else { f64::INFINITY };
        Ok(Self {
            scheme,
            x0,
            y0,
            x0_spectrum,
            curvature_index,
            l,
            mu,
            cond_x0,
            c,
        })
    }

    /// Same draw at scale `factor · c`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::build(
            self.scheme,
            &self.x0 * factor,
            self.y0.clone(),
            self.curvature_index,
            self.c * factor,
        )
    }
}

fn check_scheme(cfg: &InitConfig, allowed: &[InitScheme]) -> Result<()> {
    if !allowed.contains(&cfg.scheme) {
        return Err(InitError::Scheme {
            scheme: cfg.scheme,
            reason: format!("expected one of {allowed:?}"),
        });
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(InitError::Parameter(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// `c·A·Φ` for a raw matrix; no rank bookkeeping.
pub fn sketch(a: &DenseMatrix, d: usize, c: f64, rng: &mut RandomSource) -> Result<DenseMatrix> {
    let phi = gaussian_matrix(a.ncols(), d, 1.0 / d as f64, rng)?;
    Ok((a * phi) * c)
}

fn resolve_mf_scale(
    problem: &FactorizationProblem,
    cfg: &InitConfig,
    unit: &InitOutcome,
) -> Result<f64> {
    match cfg.scale {
        Scale::Fixed(c) => {
            check_positive("c", c)?;
            Ok(c)
        }
        Scale::Auto(ThresholdRule::Gd { tau }) => {
            c_threshold_gd(problem, cfg.d, tau, unit.cond_x0)
        }
        Scale::Auto(ThresholdRule::Nag { tau }) => c_threshold_nag(problem, cfg.d, tau),
        Scale::Auto(rule @ ThresholdRule::LnnPremise { .. }) => Err(InitError::Parameter(
            format!("{rule:?} only applies to linear-network schemes"),
        )),
    }
}

/// Sketch initialization `X₀ = c·A·Φ`, `Y₀ = 0`.
pub fn init_mf(problem: &FactorizationProblem, cfg: &InitConfig) -> Result<InitOutcome> {
    check_scheme(cfg, &[InitScheme::MfSketch])?;
    mf_with_y0(problem, cfg, |_| Ok(None))
}

/// `X₀ = c·A·Φ₁`, `Y₀ = c₂·Φ₂`, `[Φ₂]ᵢⱼ ~ N(0, 1/n)`.
pub fn init_mf_general(problem: &FactorizationProblem, cfg: &InitConfig) -> Result<InitOutcome> {
    check_scheme(cfg, &[InitScheme::MfGeneral, InitScheme::MfSketch])?;
    if !(cfg.c2 >= 0.0 && cfg.c2.is_finite()) {
        return Err(InitError::Parameter(format!("c2 must be >= 0, got {}", cfg.c2)));
    }
    let n = problem.cols();
    let c2 = cfg.c2;
    let mut out = mf_with_y0(problem, cfg, |rng| {
        if c2 == 0.0 {
            return Ok(None);
        }
        Ok(Some(gaussian_matrix(n, cfg.d, 1.0 / n as f64, rng)? * c2))
    })?;
    out.scheme = cfg.scheme;
    Ok(out)
}

fn mf_with_y0(
    problem: &FactorizationProblem,
    cfg: &InitConfig,
    draw_y0: impl FnOnce(&mut RandomSource) -> Result<Option<DenseMatrix>>,
) -> Result<InitOutcome> {
    let (n, d, r) = (problem.cols(), cfg.d, problem.rank);
    if d < r {
        return Err(InitError::Dimensions(format!("width d={d} is below rank r={r}")));
    }
    let mut rng = RandomSource::new(cfg.seed);
    let unit_x0 = sketch(&problem.a, d, 1.0, &mut rng)?;
    let y0 = draw_y0(&mut rng)?.unwrap_or_else(|| DenseMatrix::zeros(n, d));
    let unit = InitOutcome::build(cfg.scheme, unit_x0, y0, r, 1.0)?;
    let c = resolve_mf_scale(problem, cfg, &unit)?;
    if c == 1.0 {
        return Ok(unit);
    }
    unit.rescaled(c)
}

fn sqrt_gap(d: usize, r: usize) -> f64 {
    (d as f64).sqrt() - ((r - 1) as f64).sqrt()
}

/// GD scale threshold
/// `c̲ = √d·σ_r(A) / (12τ(√d − √(r−1))) · √(cond⁴(X₀)‖A‖_F / (cond²(X₀) − 1))`.
///
/// `cond_x0` is scale-invariant, so it may come from a unit-scale draw.
pub fn c_threshold_gd(
    problem: &FactorizationProblem,
    d: usize,
    tau: f64,
    cond_x0: f64,
) -> Result<f64> {
    check_positive("tau", tau)?;
    if d < problem.rank {
        return Err(InitError::Dimensions(format!("d={d} < r={}", problem.rank)));
    }
    if !(cond_x0 > 1.0) {
        return Err(InitError::Singular(format!(
            "cond(X0) = {cond_x0}; the GD threshold divides by cond²(X0) − 1"
        )));
    }
    let df = d as f64;
    let lead = df.sqrt() * problem.sigma_r() / (12.0 * tau * sqrt_gap(d, problem.rank));
    let c2 = cond_x0 * cond_x0;
    Ok(lead * (c2 * c2 * problem.frobenius / (c2 - 1.0)).sqrt())
}

/// NAG scale threshold
/// `c̲ = 29·√( d(2√d+√r)‖A‖_F·κ / (τ³(√d−√(r−1))³ σ_r²(A)) )`.
pub fn c_threshold_nag(problem: &FactorizationProblem, d: usize, tau: f64) -> Result<f64> {
    check_positive("tau", tau)?;
    let r = problem.rank;
    if d < r {
        return Err(InitError::Dimensions(format!("d={d} < r={r}")));
    }
    let df = d as f64;
    let num = df * (2.0 * df.sqrt() + (r as f64).sqrt()) * problem.frobenius * problem.kappa;
    let den = tau.powi(3) * sqrt_gap(d, r).powi(3) * problem.sigma_r().powi(2);
    Ok(29.0 * (num / den).sqrt())
}

/// Measured singular values of one draw against the random-matrix bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop1Check {
    pub sigma_1_x0: f64,
    pub sigma_r_x0: f64,
    pub cond_x0: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub cond_bound: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub cond_ok: bool,
}

impl Prop1Check {
    pub fn all_ok(&self) -> bool {
        self.lower_ok && self.upper_ok && self.cond_ok
    }
}

/// Factor `(2√d+√r)/√d` of the upper singular-value bound.
pub fn prop1_upper_factor(d: usize, r: usize) -> f64 {
    let df = d as f64;
    (2.0 * df.sqrt() + (r as f64).sqrt()) / df.sqrt()
}

/// Factor `τ(√d−√(r−1))/√d` of the lower singular-value bound.
pub fn prop1_lower_factor(d: usize, r: usize, tau: f64) -> f64 {
    tau * sqrt_gap(d, r) / (d as f64).sqrt()
}

/// Draws `X₀ = c·A·Φ` with `seed` and tests
/// `τ(√d−√(r−1))/√d·c·σ_r(A) ≤ σ_r(X₀) ≤ σ₁(X₀) ≤ (2√d+√r)/√d·c·σ₁(A)` and
/// `cond(X₀) ≤ (2√d+√r)/(τ(√d−√(r−1)))·κ`.
pub fn check_prop1_bounds(
    problem: &FactorizationProblem,
    d: usize,
    tau: f64,
    c: f64,
    seed: u64,
) -> Result<Prop1Check> {
    check_positive("tau", tau)?;
    let cfg = InitConfig::new(InitScheme::MfSketch, d, c, seed);
    let init = init_mf(problem, &cfg)?;
    let r = problem.rank;
    let sigma_1_x0 = init.x0_spectrum.sigma(1);
    let sigma_r_x0 = init.x0_spectrum.sigma(r);
    let lower_bound = prop1_lower_factor(d, r, tau) * c * problem.sigma_r();
    let upper_bound = prop1_upper_factor(d, r) * c * problem.sigma_1();
    let cond_bound =
        (2.0 * (d as f64).sqrt() + (r as f64).sqrt()) / (tau * sqrt_gap(d, r)) * problem.kappa;
    Ok(Prop1Check {
        sigma_1_x0,
        sigma_r_x0,
        cond_x0: init.cond_x0,
        lower_bound,
        upper_bound,
        cond_bound,
        lower_ok: lower_bound <= sigma_r_x0,
        upper_ok: sigma_1_x0 <= upper_bound,
        cond_ok: init.cond_x0 <= cond_bound,
    })
}

/// Linear-network initializations; `Y₀ = 0` for all three.
pub fn init_lnn(problem: &LinearNetworkProblem, cfg: &InitConfig) -> Result<InitOutcome> {
    check_scheme(cfg, &[InitScheme::Lnn1, InitScheme::Lnn2, InitScheme::Lnn3])?;
    let (m, n, samples) = (problem.outputs(), problem.inputs(), problem.samples());
    let (d, r) = (cfg.d, problem.rank);
    let mut rng = RandomSource::new(cfg.seed);
    let (unit_x0, index) = match cfg.scheme {
        InitScheme::Lnn1 => {
            if d < r {
                return Err(InitError::Dimensions(format!("width d={d} is below rank r={r}")));
            }
            let phi = gaussian_matrix(samples, d, 1.0 / d as f64, &mut rng)?;
            (&problem.labels * phi, r)
        }
        InitScheme::Lnn2 => {
            if d < r || d > m {
                return Err(InitError::Dimensions(format!(
                    "width d={d} must satisfy r={r} <= d <= m={m}"
                )));
            }
            let phi = gaussian_matrix(samples, d, 1.0 / d as f64, &mut rng)?;
            let sketch = &problem.labels * phi;
            // L·Φ has rank r < d when over-parameterized; its Householder Q
            // still spans colspan(L·Φ) with d orthonormal columns.
            let q = if d == r {
                orthonormalize(&sketch)?
            } else {
                orthonormal_frame(&sketch)
            };
            (q, r)
        }
        InitScheme::Lnn3 => {
            if d < m {
                return Err(InitError::Dimensions(format!("width d={d} is below outputs m={m}")));
            }
            (gaussian_matrix(m, d, 1.0 / d as f64, &mut rng)?, m)
        }
        _ => unreachable!(),
    };
    let y0 = DenseMatrix::zeros(n, d);
    let mut unit = InitOutcome::build(cfg.scheme, unit_x0, y0, index, 1.0)?;
    if cfg.scheme == InitScheme::Lnn2 {
        // orthonormal columns: every singular value is exactly one
        unit.cond_x0 = 1.0;
    }
    let c = match cfg.scale {
        Scale::Fixed(c) => {
            check_positive("c", c)?;
            c
        }
        Scale::Auto(ThresholdRule::LnnPremise { safety }) => {
            check_positive("safety", safety)?;
            lnn::check_thm3_premise(&unit, problem)?.min_scale * safety
        }
        Scale::Auto(rule) => {
            return Err(InitError::Parameter(format!(
                "{rule:?} only applies to matrix-factorization schemes"
            )))
        }
    };
    let mut out = unit.rescaled(c)?;
    if cfg.scheme == InitScheme::Lnn2 {
        out.cond_x0 = 1.0;
    }
    Ok(out)
}
