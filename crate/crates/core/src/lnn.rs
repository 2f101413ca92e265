//! Two-layer linear networks `f(X, Y) = ½‖X Yᵀ D − L‖²_F` with labels
//! `L = A_gen · D` that a linear model interpolates.

use crate::dynamics::TheoryBound;
use crate::init::{InitError, InitOutcome, InitScheme, Result, SpectrumProfile};
use crate::linalg::{self, gaussian_matrix, DenseMatrix, RandomSource};

/// How the right factor `V` of `D = U Σ Vᵀ` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RightFactor {
    /// Gaussian entries of variance `1/N`; `σᵢ(D)` only approximates `Σ`.
    #[default]
    Gaussian,
    /// Orthonormal columns; `σᵢ(D) = Σᵢᵢ` exactly.
    Orthonormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnnSpec {
    /// Output dimension `m`.
    pub m: usize,
    /// Input dimension `n`.
    pub n: usize,
    /// Sample count `N`.
    pub samples: usize,
    /// Rank of `D`.
    pub data_rank: usize,
    pub sigma1: f64,
    pub sigma_r: f64,
    pub profile: SpectrumProfile,
    pub right_factor: RightFactor,
}

#[derive(Debug, Clone)]
pub struct LinearNetworkProblem {
    /// Data `D ∈ ℝ^{n×N}`.
    pub data: DenseMatrix,
    /// Labels `L ∈ ℝ^{m×N}`.
    pub labels: DenseMatrix,
    /// Generator `A_gen ∈ ℝ^{m×n}` with `L = A_gen D`.
    pub generator: DenseMatrix,
    /// `D Dᵀ`.
    pub ddt: DenseMatrix,
    /// `L Dᵀ`.
    pub ldt: DenseMatrix,
    pub ldt_norm: f64,
    pub labels_norm: f64,
    /// `rank(L)`.
    pub rank: usize,
    pub data_rank: usize,
    pub lambda_max: f64,
    /// Smallest nonzero eigenvalue of `D Dᵀ`.
    pub lambda_min: f64,
    /// Smallest nonzero singular value of `D`.
    pub sigma_min_data: f64,
    pub cond_generator: f64,
    pub cond_labels: f64,
    /// Left singular vectors of `D` (`n × rank(D)`).
    pub data_frame: DenseMatrix,
    /// Left singular vectors of `L` (`m × rank(L)`).
    pub label_frame: DenseMatrix,
}

impl LinearNetworkProblem {
    /// Assembles a problem, requiring `labels = generator · data`.
    pub fn from_parts(
        data: DenseMatrix,
        labels: DenseMatrix,
        generator: DenseMatrix,
    ) -> Result<Self> {
        let (n, samples) = data.shape();
        if labels.ncols() != samples || generator.shape() != (labels.nrows(), n) {
            return Err(InitError::Dimensions(format!(
                "data {n}x{samples}, labels {:?}, generator {:?} are incompatible",
                labels.shape(),
                generator.shape()
            )));
        }
        let labels_norm = labels.norm();
        let gap = (&generator * &data - &labels).norm();
        if gap > 1e-12 * labels_norm.max(1.0) {
            return Err(InitError::Parameter(format!(
                "labels are not interpolated by the generator (gap {gap:.3e})"
            )));
        }
        let data_svd = linalg::svd(&data)?;
        let label_svd = linalg::svd(&labels)?;
        let data_rank = data_svd.summary.rank;
        let rank = label_svd.summary.rank;
        if data_rank == 0 || rank == 0 {
            return Err(InitError::Parameter("data and labels must be nonzero".into()));
        }
        let sigma_max = data_svd.summary.sigma_max();
        let sigma_min_data = data_svd.summary.sigma_min_nonzero();
        let ddt = &data * data.transpose();
        let ldt = &labels * data.transpose();
        let ldt_norm = ldt.norm();
        let cond_generator = linalg::spectrum(&generator)?.cond;
        Ok(Self {
            ddt,
            ldt,
            ldt_norm,
            labels_norm,
            rank,
            data_rank,
            lambda_max: sigma_max * sigma_max,
            lambda_min: sigma_min_data * sigma_min_data,
            sigma_min_data,
            cond_generator,
            cond_labels: label_svd.summary.cond,
            data_frame: data_svd.left_frame(data_rank),
            label_frame: label_svd.left_frame(rank),
            data,
            labels,
            generator,
        })
    }

    pub fn outputs(&self) -> usize {
        self.labels.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    /// `cond(D Dᵀ)` restricted to its range.
    pub fn cond_ddt(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }
}

/// `D = U Σ Vᵀ`, `A_gen` standard Gaussian, `L = A_gen D`.
pub fn make_lnn_problem(spec: &LnnSpec, seed: u64) -> Result<LinearNetworkProblem> {
    let LnnSpec { m, n, samples, data_rank, sigma1, sigma_r, .. } = *spec;
    if m == 0 || data_rank == 0 || data_rank > n.min(samples) {
        return Err(InitError::Dimensions(format!(
            "need m >= 1 and 1 <= rank(D)={data_rank} <= min(n={n}, N={samples})"
        )));
    }
    if !(sigma_r > 0.0) || sigma1 < sigma_r || !sigma1.is_finite() {
        return Err(InitError::Parameter(format!(
            "need sigma1 >= sigma_r > 0, got sigma1={sigma1}, sigma_r={sigma_r}"
        )));
    }
    let sigmas = spec.profile.values(data_rank, sigma1, sigma_r)?;
    let mut rng = RandomSource::new(seed);
    let mut u = crate::init::random_frame(n, data_rank, &mut rng)?;
    let v = match spec.right_factor {
        RightFactor::Gaussian => {
            gaussian_matrix(samples, data_rank, 1.0 / samples as f64, &mut rng)?
        }
        RightFactor::Orthonormal => crate::init::random_frame(samples, data_rank, &mut rng)?,
    };
    for (j, s) in sigmas.iter().enumerate() {
        u.column_mut(j).scale_mut(*s);
    }
    let data = u * v.transpose();
    let generator = gaussian_matrix(m, n, 1.0, &mut rng)?;
    let labels = &generator * &data;
    LinearNetworkProblem::from_parts(data, labels, generator)
}

/// Outcome of the sufficient condition `μ̃ p ≥ 4√2 ‖L Dᵀ‖_F (1 + p)` with
/// `p = √μ̃ / (144 √L̃)`, plus `colspan(L) ⊆ colspan(X₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PremiseReport {
    pub l_tilde: f64,
    pub mu_tilde: f64,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub inequality_holds: bool,
    /// `‖(I − P_{X₀}) L‖_F / ‖L‖_F`.
    pub containment_leakage: f64,
    pub containment_holds: bool,
    /// Factor by which `X₀` must be scaled for the inequality to hold with
    /// equality. Values below one mean the premise already holds.
    pub min_scale: f64,
}

impl PremiseReport {
    pub fn holds(&self) -> bool {
        self.inequality_holds && self.containment_holds
    }
}

/// Curvature constants `L̃ = σ₁²(X₀) λ_max(DDᵀ)`, `μ̃ = σ_k²(X₀) λ_min(DDᵀ)`.
pub fn curvature(init: &InitOutcome, problem: &LinearNetworkProblem) -> (f64, f64) {
    (init.l * problem.lambda_max, init.mu * problem.lambda_min)
}

pub fn check_thm3_premise(
    init: &InitOutcome,
    problem: &LinearNetworkProblem,
) -> Result<PremiseReport> {
    let (l_tilde, mu_tilde) = curvature(init, problem);
    let p = mu_tilde.sqrt() / (144.0 * l_tilde.sqrt());
    let lhs = mu_tilde * p;
    let rhs = 4.0 * 2f64.sqrt() * problem.ldt_norm * (1.0 + p);
    let min_scale = if lhs > 0.0 { (rhs / lhs).sqrt() } else { f64::INFINITY };
    let frame = linalg::column_space(&init.x0)?;
    let containment_leakage = if problem.labels_norm > 0.0 {
        linalg::outside_projection_norm(&problem.labels, &frame, None) / problem.labels_norm
    } else {
        0.0
    };
    Ok(PremiseReport {
        l_tilde,
        mu_tilde,
        p,
        lhs,
        rhs,
        inequality_holds: lhs >= rhs,
        containment_leakage,
        containment_holds: containment_leakage <= 1e-8,
        min_scale,
    })
}

/// Predicted linear rate and iteration-count factor for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct CorollaryRate {
    pub bound: TheoryBound,
    /// `K` such that `T ≈ K · log(1/ε)`.
    pub complexity_factor: f64,
}

impl CorollaryRate {
    pub fn iterations(&self, eps: f64) -> f64 {
        self.complexity_factor * (1.0 / eps).ln()
    }
}

/// Rate `1 − √μ̃/(2√L̃)` with prefactor `σ_k²(X₀) σ_min(D) / 576`, and the
/// scheme's complexity factor:
/// LNN-1 `d·cond(L)/(τ(d−r+1))·√cond(DDᵀ)`, LNN-2 `√cond(DDᵀ)`,
/// LNN-3 `d/(τ(d−m+1))·√cond(DDᵀ)`.
pub fn corollary_rate(
    init: &InitOutcome,
    problem: &LinearNetworkProblem,
    tau: f64,
) -> Result<CorollaryRate> {
    if !(tau > 0.0) {
        return Err(InitError::Parameter(format!("tau must be positive, got {tau}")));
    }
    let d = init.x0.ncols() as f64;
    let root = problem.cond_ddt().sqrt();
    let complexity_factor = match init.scheme {
        InitScheme::Lnn1 => {
            let r = problem.rank as f64;
            d * problem.cond_labels / (tau * (d - r + 1.0)) * root
        }
        InitScheme::Lnn2 => root,
        InitScheme::Lnn3 => {
            let m = problem.outputs() as f64;
            d / (tau * (d - m + 1.0)) * root
        }
        other => {
            return Err(InitError::Scheme {
                scheme: other,
                reason: "not a linear-network scheme".into(),
            })
        }
    };
    Ok(CorollaryRate {
        bound: TheoryBound::lnn_thm3(problem, init),
        complexity_factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{init_lnn, InitConfig, Scale, ThresholdRule};
    use approx::assert_relative_eq;

    fn spec(right: RightFactor) -> LnnSpec {
        LnnSpec {
            m: 10,
            n: 20,
            samples: 30,
            data_rank: 10,
            sigma1: 1.0,
            sigma_r: 0.5,
            profile: SpectrumProfile::Geometric,
            right_factor: right,
        }
    }

    #[test]
    fn orthonormal_right_factor_gives_exact_condition() {
        let p = make_lnn_problem(&spec(RightFactor::Orthonormal), 0).unwrap();
        assert_eq!(p.data_rank, 10);
        assert_relative_eq!(p.lambda_max, 1.0, max_relative = 1e-12);
        assert_relative_eq!(p.lambda_min, 0.25, max_relative = 1e-12);
        assert_eq!(p.rank, 10);
    }

    #[test]
    fn gaussian_right_factor_is_roughly_calibrated() {
        let p = make_lnn_problem(&spec(RightFactor::Gaussian), 0).unwrap();
        let cond_d = p.cond_ddt().sqrt();
        assert!(cond_d > 1.0 && cond_d < 20.0, "cond(D) = {cond_d}");
        assert!((&p.generator * &p.data - &p.labels).norm() <= 1e-12 * p.labels_norm);
    }

    #[test]
    fn from_parts_rejects_non_interpolating_labels() {
        let p = make_lnn_problem(&spec(RightFactor::Orthonormal), 1).unwrap();
        let bad = &p.labels + DenseMatrix::from_element(10, 30, 1e-3);
        assert!(LinearNetworkProblem::from_parts(p.data.clone(), bad, p.generator.clone()).is_err());
    }

    #[test]
    fn premise_min_scale_matches_bisection() {
        let p = make_lnn_problem(&spec(RightFactor::Orthonormal), 2).unwrap();
        let init = init_lnn(&p, &InitConfig::new(InitScheme::Lnn2, 10, 1.0, 0)).unwrap();
        let report = check_thm3_premise(&init, &p).unwrap();
        assert!(!report.inequality_holds);
        let holds = |s: f64| check_thm3_premise(&init.rescaled(s).unwrap(), &p).unwrap().inequality_holds;
        let (mut lo, mut hi) = (1.0, 1.0);
        while !holds(hi) {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if holds(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_relative_eq!(report.min_scale, hi, max_relative = 1e-9);
        assert!(report.containment_holds);
    }

    #[test]
    fn auto_scale_meets_premise() {
        let p = make_lnn_problem(&spec(RightFactor::Orthonormal), 3).unwrap();
        for scheme in [InitScheme::Lnn1, InitScheme::Lnn2, InitScheme::Lnn3] {
            let cfg = InitConfig {
                scale: Scale::Auto(ThresholdRule::LnnPremise { safety: 2.0 }),
                ..InitConfig::new(scheme, 10, 1.0, 5)
            };
            let init = init_lnn(&p, &cfg).unwrap();
            let report = check_thm3_premise(&init, &p).unwrap();
            assert!(report.holds(), "{scheme:?}: {report:?}");
            assert_relative_eq!(report.min_scale, 0.5, max_relative = 1e-9);
        }
    }

    #[test]
    fn lnn2_is_orthonormal_times_c() {
        let wide = LnnSpec { m: 15, ..spec(RightFactor::Orthonormal) };
        let p = make_lnn_problem(&wide, 4).unwrap();
        assert_eq!(p.rank, 10);
        for d in [10, 12, 15] {
            let init = init_lnn(&p, &InitConfig::new(InitScheme::Lnn2, d, 3.0, 1)).unwrap();
            let leak = linalg::outside_projection_norm(&p.labels, &linalg::column_space(&init.x0).unwrap(), None);
            assert!(leak <= 1e-10 * p.labels_norm);
            let gram = init.x0.transpose() * &init.x0 / 9.0;
            assert!((gram - DenseMatrix::identity(d, d)).norm() <= 1e-12);
            assert_eq!(init.cond_x0, 1.0);
        }
    }

    #[test]
    fn lnn3_dimension_check() {
        let p = make_lnn_problem(&spec(RightFactor::Orthonormal), 4).unwrap();
        let err = init_lnn(&p, &InitConfig::new(InitScheme::Lnn3, 9, 1.0, 0));
        assert!(matches!(err, Err(InitError::Dimensions(_))));
        let ok = init_lnn(&p, &InitConfig::new(InitScheme::Lnn3, 10, 1.0, 0)).unwrap();
        assert_eq!(ok.curvature_index, 10);
    }

    #[test]
    fn corollary_factors() {
        let p = make_lnn_problem(&spec(RightFactor::Orthonormal), 6).unwrap();
        let tau = 0.1;
        let i1 = init_lnn(&p, &InitConfig::new(InitScheme::Lnn1, 10, 1.0, 0)).unwrap();
        let i2 = init_lnn(&p, &InitConfig::new(InitScheme::Lnn2, 10, 1.0, 0)).unwrap();
        let i3 = init_lnn(&p, &InitConfig::new(InitScheme::Lnn3, 10, 1.0, 0)).unwrap();
        let k1 = corollary_rate(&i1, &p, tau).unwrap().complexity_factor;
        let k2 = corollary_rate(&i2, &p, tau).unwrap().complexity_factor;
        let k3 = corollary_rate(&i3, &p, tau).unwrap().complexity_factor;
        assert_relative_eq!(k2, 2.0, max_relative = 1e-12);
        assert_relative_eq!(k3 / k2, 10.0 / tau, max_relative = 1e-12);
        assert_relative_eq!(k1 / k2, 10.0 * p.cond_labels / tau, max_relative = 1e-12);
        let rate2 = corollary_rate(&i2, &p, tau).unwrap();
        assert_relative_eq!(rate2.bound.theta, 0.75, max_relative = 1e-12);
    }
}
