//! Dense linear-algebra substrate.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, which stores entries column-major;
//! `vec` follows the same column-first convention, so `vec(M)` is just the
//! storage order of `M`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type DenseMatrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries ({rows}x{cols})")]
    NonFinite { rows: usize, cols: usize },
    #[error("empty matrix ({rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("matrix is rank deficient: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = LinalgError> = std::result::Result<T, E>;

/// Singular values in descending order with the numerical rank and
/// `σ₁ / σ_rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSummary {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub cond: f64,
}

impl SpectralSummary {
    pub fn from_singular_values(mut singular_values: Vec<f64>, rows: usize, cols: usize) -> Self {
        singular_values.sort_by(|a, b| b.total_cmp(a));
        let tol = rank_tolerance(rows, cols, singular_values.first().copied().unwrap_or(0.0));
        let rank = singular_values.iter().take_while(|&&s| s > tol).count();
        let cond = if rank == 0 {
            f64::INFINITY
        } else {
            singular_values[0] / singular_values[rank - 1]
        };
        Self {
            singular_values,
            rank,
            cond,
        }
    }

    /// `i`-th largest singular value, 1-based like `σᵢ`.
    pub fn sigma(&self, i: usize) -> f64 {
        assert!(i >= 1, "singular values are 1-indexed");
        self.singular_values.get(i - 1).copied().unwrap_or(0.0)
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma(1)
    }

    /// Smallest singular value above the rank tolerance.
    pub fn sigma_min_nonzero(&self) -> f64 {
        if self.rank == 0 {
            0.0
        } else {
            self.sigma(self.rank)
        }
    }

    /// Condition number of the leading `k` singular values, `σ₁/σ_k`.
    pub fn cond_at(&self, k: usize) -> f64 {
        let sk = self.sigma(k);
        if sk == 0.0 {
            f64::INFINITY
        } else {
            self.sigma(1) / sk
        }
    }
}

/// Numerical rank threshold `max(rows, cols) · ε · σ₁`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma1: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma1
}

/// Thin SVD `M = U Σ Vᵀ` with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub summary: SpectralSummary,
}

impl Svd {
    /// First `k` left singular vectors.
    pub fn left_frame(&self, k: usize) -> DenseMatrix {
        self.u.columns(0, k).into_owned()
    }

    pub fn right_frame(&self, k: usize) -> DenseMatrix {
        self.v.columns(0, k).into_owned()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let s = DVector::from_column_slice(&self.summary.singular_values);
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= s[j];
        }
        us * self.v.transpose()
    }
}

pub fn ensure_valid(m: &DenseMatrix) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LinalgError::Empty {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    ensure_valid(m)?;
    let dec = nalgebra::SVD::new(m.clone(), true, true);
    let u = dec.u.expect("u requested");
    let v = dec.v_t.expect("v requested").transpose();
    let summary = SpectralSummary::from_singular_values(
        dec.singular_values.iter().copied().collect(),
        m.nrows(),
        m.ncols(),
    );
    Ok(Svd { u, v, summary })
}

/// Singular values only.
pub fn spectrum(m: &DenseMatrix) -> Result<SpectralSummary> {
    ensure_valid(m)?;
    let sv = m.singular_values();
    Ok(SpectralSummary::from_singular_values(
        sv.iter().copied().collect(),
        m.nrows(),
        m.ncols(),
    ))
}

/// Seeded pseudo-random stream. Equal seeds give bit-identical draws.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// Matrix of i.i.d. `N(0, variance)` entries, filled in column-major order.
pub fn gaussian_matrix(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut RandomSource,
) -> Result<DenseMatrix> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(LinalgError::Invalid(format!(
            "variance must be positive and finite, got {variance}"
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(LinalgError::Empty { rows, cols });
    }
    let sd = variance.sqrt();
    Ok(DenseMatrix::from_fn(rows, cols, |_, _| {
        sd * rng.standard_normal()
    }))
}

/// Orthonormal basis `Q` of `colspan(M)` for full-column-rank `M`.
pub fn orthonormalize(m: &DenseMatrix) -> Result<DenseMatrix> {
    ensure_valid(m)?;
    if m.ncols() > m.nrows() {
        return Err(LinalgError::RankDeficient {
            rank: m.nrows(),
            cols: m.ncols(),
        });
    }
    let s = spectrum(m)?;
    if s.rank < m.ncols() {
        return Err(LinalgError::RankDeficient {
            rank: s.rank,
            cols: m.ncols(),
        });
    }
    Ok(orthonormal_frame(m))
}

/// Householder `Q` factor of `M` (`rows × min(rows, cols)`). Its columns are
/// orthonormal and span a superset of `colspan(M)` even when `M` is rank
/// deficient.
pub fn orthonormal_frame(m: &DenseMatrix) -> DenseMatrix {
    m.clone().qr().q()
}

/// Orthonormal basis of the numerical column space.
pub fn column_space(m: &DenseMatrix) -> Result<DenseMatrix> {
    let dec = svd(m)?;
    Ok(dec.left_frame(dec.summary.rank))
}

fn check_h_shapes(x: &DenseMatrix, y: &DenseMatrix, r: &DenseMatrix) -> Result<()> {
    if x.nrows() != r.nrows() || y.nrows() != r.ncols() || x.ncols() != y.ncols() {
        return Err(LinalgError::Shape {
            op: "apply_h",
            detail: format!(
                "X {}x{}, Y {}x{}, R {}x{}",
                x.nrows(),
                x.ncols(),
                y.nrows(),
                y.ncols(),
                r.nrows(),
                r.ncols()
            ),
        });
    }
    Ok(())
}

/// `H = (YYᵀ) ⊗ I_m + I_n ⊗ (XXᵀ)` applied to `vec(R)`, returned in matrix
/// form `R·YYᵀ + XXᵀ·R`. Never forms the `mn × mn` operator.
pub fn apply_h(x: &DenseMatrix, y: &DenseMatrix, r: &DenseMatrix) -> Result<DenseMatrix> {
    check_h_shapes(x, y, r)?;
    Ok((r * y) * y.transpose() + x * (x.transpose() * r))
}

/// Linear-network variant `(R·YYᵀ + XXᵀ·R)·W`, i.e.
/// `(W·YYᵀ) ⊗ I_m + W ⊗ (XXᵀ)` for symmetric `W = DDᵀ`.
pub fn apply_h_weighted(
    x: &DenseMatrix,
    y: &DenseMatrix,
    r: &DenseMatrix,
    weight: Option<&DenseMatrix>,
) -> Result<DenseMatrix> {
    let base = apply_h(x, y, r)?;
    match weight {
        None => Ok(base),
        Some(w) => {
            if w.nrows() != r.ncols() || w.ncols() != r.ncols() {
                return Err(LinalgError::Shape {
                    op: "apply_h_weighted",
                    detail: format!("W {}x{}, R has {} columns", w.nrows(), w.ncols(), r.ncols()),
                });
            }
            Ok(base * w)
        }
    }
}

pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.norm()
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Column-first vectorization.
pub fn vec(m: &DenseMatrix) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DenseMatrix> {
    if v.len() != rows * cols {
        return Err(LinalgError::Shape {
            op: "unvec",
            detail: format!("length {} != {rows}x{cols}", v.len()),
        });
    }
    Ok(DenseMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// `‖M − U Uᵀ M V Vᵀ‖_F`: mass of `M` outside `colspan(U)` on the left and
/// `colspan(V)` on the right. `right = None` means no right-side restriction.
pub fn outside_projection_norm(
    m: &DenseMatrix,
    left: &DenseMatrix,
    right: Option<&DenseMatrix>,
) -> f64 {
    let mut inside = left * (left.transpose() * m);
    if let Some(v) = right {
        inside = (inside * v) * v.transpose();
    }
    (m - inside).norm()
}
