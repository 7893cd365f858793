//! Matrix tuples as completely positive operators.
//!
//! A tuple 𝒜 = (A₁, …, A_m) of n×n complex matrices acts on Hermitian
//! matrices two ways: `T(X) = Σ A_k X A_k†` and its adjoint
//! `T*(X) = Σ A_k† X A_k`. Both preserve positive semidefiniteness, and
//! `tr(T(X)·Y) = tr(X·T*(Y))`. A pair of invertible matrices (g, h) scales
//! the tuple componentwise to `g†A_k h`; the scaled tuple is doubly
//! stochastic when both `T(I) = I` and `T*(I) = I`, and the residual report
//! measures how far a scaling is from that.
//!
//! On the positive definite cone the capacity objective
//! `f(X) = log det T(X) − log det X` is geodesically convex; its infimum is
//! 0 exactly on scalable tuples, and its differential converts to scaling
//! residuals through [`scaling_from_point`]: taking `h = X^{1/2}` and
//! `g = T(X)^{−1/2}` normalizes the left marginal exactly, while the right
//! residual equals the dual norm of the differential, which is how descent
//! on `f` drives the residual sum toward its infimum.

use crate::linalg::{
    rank, schatten_norm, singular_values, CMat, HermitianMatrix, LinalgError, LpNorm,
};
use crate::manifold::{CotangentVector, ManifoldError, PDPoint};
use thiserror::Error;

/// Condition-number ceiling for inverting `T(X)` inside [`grad_f`]:
/// past this the gradient has lost too many digits to trust.
pub const GRAD_COND_LIMIT: f64 = 1e14;

/// A scaling matrix is accepted as invertible iff `σ_min > 1e−12·σ_max`.
pub const SCALING_SINGULARITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CpError {
    #[error("tuple must contain at least one matrix")]
    EmptyTuple,
    #[error("matrix {index} is {rows}x{cols}, expected square of dimension {expected}")]
    ShapeMismatch { index: usize, rows: usize, cols: usize, expected: usize },
    #[error("dimension mismatch: tuple has n={expected}, argument has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error(
        "scaling matrix is numerically singular: σ_min/σ_max = {ratio:e} (limit {SCALING_SINGULARITY_TOL:e})"
    )]
    SingularScaling { ratio: f64 },
    #[error(
        "tuple is support-deficient (left rank {left_rank}, right rank {right_rank}, need {n}); reduce it first"
    )]
    NotFullSupport { left_rank: usize, right_rank: usize, n: usize },
    #[error("T(X) too ill-conditioned to invert: cond = {cond:e} exceeds {GRAD_COND_LIMIT:e}")]
    IllConditioned { cond: f64 },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// An immutable tuple 𝒜 = (A₁, …, A_m) of n×n complex matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    n: usize,
    matrices: Vec<CMat>,
}

impl MatrixTuple {
    pub fn new(matrices: Vec<CMat>) -> Result<Self, CpError> {
        let first = matrices.first().ok_or(CpError::EmptyTuple)?;
        let n = first.nrows();
        for (index, a) in matrices.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(CpError::ShapeMismatch {
                    index,
                    rows: a.nrows(),
                    cols: a.ncols(),
                    expected: n,
                });
            }
            if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(CpError::NonFinite);
            }
        }
        Ok(Self { n, matrices })
    }

    /// The single-matrix identity tuple (I).
    pub fn identity(n: usize) -> Self {
        Self { n, matrices: vec![CMat::identity(n, n)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of matrices in the tuple.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    /// The adjoint tuple (A₁†, …, A_m†).
    pub fn adjoint(&self) -> Self {
        Self { n: self.n, matrices: self.matrices.iter().map(|a| a.adjoint()).collect() }
    }

    /// `T(X) = Σ A_k X A_k†`.
    pub fn apply_t(&self, x: &HermitianMatrix) -> Result<HermitianMatrix, CpError> {
        self.check_dim(x.dim())?;
        let mut acc = CMat::zeros(self.n, self.n);
        for a in &self.matrices {
            acc += a * x.matrix() * a.adjoint();
        }
        Ok(HermitianMatrix::symmetrize_unchecked(acc))
    }

    /// `T*(X) = Σ A_k† X A_k`.
    pub fn apply_tstar(&self, x: &HermitianMatrix) -> Result<HermitianMatrix, CpError> {
        self.check_dim(x.dim())?;
        let mut acc = CMat::zeros(self.n, self.n);
        for a in &self.matrices {
            acc += a.adjoint() * x.matrix() * a;
        }
        Ok(HermitianMatrix::symmetrize_unchecked(acc))
    }

    /// The n×(n·m) horizontal stack (A₁ A₂ ⋯ A_m).
    pub(crate) fn horizontal_stack(&self) -> CMat {
        let m = self.matrices.len();
        let mut stack = CMat::zeros(self.n, self.n * m);
        for (k, a) in self.matrices.iter().enumerate() {
            stack.view_mut((0, k * self.n), (self.n, self.n)).copy_from(a);
        }
        stack
    }

    /// The (n·m)×n vertical stack.
    pub(crate) fn vertical_stack(&self) -> CMat {
        let m = self.matrices.len();
        let mut stack = CMat::zeros(self.n * m, self.n);
        for (k, a) in self.matrices.iter().enumerate() {
            stack.view_mut((k * self.n, 0), (self.n, self.n)).copy_from(a);
        }
        stack
    }

    fn check_dim(&self, got: usize) -> Result<(), CpError> {
        if got != self.n {
            return Err(CpError::DimensionMismatch { expected: self.n, got });
        }
        Ok(())
    }
}

/// An invertible pair (g, h) acting on tuples by `A_k ↦ g†A_k h`.
#[derive(Clone, Debug)]
pub struct ScalingPair {
    g: CMat,
    h: CMat,
}

impl ScalingPair {
    pub fn new(g: CMat, h: CMat) -> Result<Self, CpError> {
        let n = g.nrows();
        for (index, m) in [&g, &h].into_iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(CpError::ShapeMismatch {
                    index,
                    rows: m.nrows(),
                    cols: m.ncols(),
                    expected: n,
                });
            }
            if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(CpError::NonFinite);
            }
            let sigma = singular_values(m);
            let (max, min) = (sigma[0], *sigma.last().unwrap());
            let ratio = min / max.max(f64::MIN_POSITIVE);
            if !(ratio > SCALING_SINGULARITY_TOL) {
                return Err(CpError::SingularScaling { ratio });
            }
        }
        Ok(Self { g, h })
    }

    pub fn identity(n: usize) -> Self {
        Self { g: CMat::identity(n, n), h: CMat::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &CMat {
        &self.g
    }

    pub fn h(&self) -> &CMat {
        &self.h
    }

    /// Compose with another pair: acting by `self` then `other` equals
    /// acting once by `(g·g', h·h')`.
    pub fn compose(&self, other: &ScalingPair) -> Result<ScalingPair, CpError> {
        ScalingPair::new(&self.g * &other.g, &self.h * &other.h)
    }
}

/// How far a scaled tuple is from doubly stochastic, in the chosen norm:
/// `left = ‖T(I) − I‖_v`, `right = ‖T*(I) − I‖_v`.
#[derive(Clone, Copy, Debug)]
pub struct ResidualReport {
    pub left: f64,
    pub right: f64,
    pub norm: LpNorm,
    pub sum: f64,
}

/// Componentwise scaling `g†A_k h`.
pub fn scale_tuple(tuple: &MatrixTuple, s: &ScalingPair) -> Result<MatrixTuple, CpError> {
    if s.dim() != tuple.dim() {
        return Err(CpError::DimensionMismatch { expected: tuple.dim(), got: s.dim() });
    }
    let gt = s.g.adjoint();
    let matrices = tuple.matrices.iter().map(|a| &gt * a * &s.h).collect();
    Ok(MatrixTuple { n: tuple.n, matrices })
}

/// Residual report of the scaled tuple `g†𝒜h` in norm `v`.
pub fn residual(tuple: &MatrixTuple, s: &ScalingPair, v: LpNorm) -> Result<ResidualReport, CpError> {
    let scaled = scale_tuple(tuple, s)?;
    residual_of_scaled(&scaled, v)
}

/// Residual report of a tuple taken as already scaled.
pub fn residual_of_scaled(scaled: &MatrixTuple, v: LpNorm) -> Result<ResidualReport, CpError> {
    let id = HermitianMatrix::identity(scaled.dim());
    let left_dev = &scaled.apply_t(&id)? - &id;
    let right_dev = &scaled.apply_tstar(&id)? - &id;
    let left = schatten_norm(&left_dev, v);
    let right = schatten_norm(&right_dev, v);
    Ok(ResidualReport { left, right, norm: v, sum: left + right })
}

/// Ranks of the horizontal stack of 𝒜 and of its adjoint tuple.
///
/// Full support on the left (`left_rank = n`) is exactly what keeps `T(X)`
/// invertible for positive definite X, hence the capacity finite.
pub fn check_full_support(tuple: &MatrixTuple) -> (usize, usize) {
    let left_rank = rank(&tuple.horizontal_stack());
    // The adjoint tuple's horizontal stack is the conjugate transpose of the
    // vertical stack, so the rank agrees with the vertical stack's.
    let right_rank = rank(&tuple.vertical_stack());
    (left_rank, right_rank)
}

/// `f(X) = log det T(X) − log det X`, evaluated through eigenvalue logs so
/// no determinant ever overflows.
pub fn capacity_f(tuple: &MatrixTuple, x: &PDPoint) -> Result<f64, CpError> {
    let (tx, _) = eig_of_tx(tuple, x)?;
    let log_det_tx: f64 = tx.iter().map(|l| l.ln()).sum();
    Ok(log_det_tx - x.det_log())
}

/// The differential `df(X) = Σ A_k†·T(X)^{−1}·A_k − X^{−1}` as a cotangent
/// vector at X.
pub fn grad_f(tuple: &MatrixTuple, x: &PDPoint) -> Result<CotangentVector, CpError> {
    let (lams, b) = eig_of_tx(tuple, x)?;
    let cond = lams[0] / lams.last().unwrap();
    if cond > GRAD_COND_LIMIT {
        return Err(CpError::IllConditioned { cond });
    }
    let b_inv = b.map_eigenvalues(|l| 1.0 / l);
    let mut acc = CMat::zeros(tuple.n, tuple.n);
    for a in &tuple.matrices {
        acc += a.adjoint() * b_inv.matrix() * a;
    }
    let form = HermitianMatrix::symmetrize_unchecked(acc - x.inverse().matrix());
    Ok(CotangentVector { base: x.clone(), form })
}

/// The canonical scaling at X: `h = X^{1/2}`, `g = T(X)^{−1/2}`.
///
/// The left marginal is normalized exactly by construction; the right
/// residual (reported in ℓ₁) equals the ℓ_∞-dual norm of the differential
/// at X, so flows read their slope off this report.
pub fn scaling_from_point(
    tuple: &MatrixTuple,
    x: &PDPoint,
) -> Result<(ScalingPair, ResidualReport), CpError> {
    let (_, b) = eig_of_tx(tuple, x)?;
    let g = b.map_eigenvalues(|l| 1.0 / l.sqrt());
    let pair = ScalingPair::new(g.into_matrix(), x.sqrt().matrix().clone())?;
    let report = residual(tuple, &pair, LpNorm::One)?;
    Ok((pair, report))
}

/// Spectral data of `T(X)`, with support failures classified: a singular
/// `T(X)` on a support-deficient tuple is a structural error, on a
/// full-support tuple a boundary diagnostic.
fn eig_of_tx(
    tuple: &MatrixTuple,
    x: &PDPoint,
) -> Result<(Vec<f64>, crate::linalg::SpectralDecomposition), CpError> {
    tuple.check_dim(x.dim())?;
    let tx = tuple.apply_t(x.matrix())?;
    let eig = tx.eig();
    let lams = eig.eigenvalues().to_vec();
    let (min_eig, max_eig) = (eig.min_eigenvalue(), eig.max_eigenvalue());
    if min_eig <= 0.0 || max_eig <= 0.0 {
        let (left_rank, right_rank) = check_full_support(tuple);
        if left_rank < tuple.dim() {
            return Err(CpError::NotFullSupport { left_rank, right_rank, n: tuple.dim() });
        }
        return Err(CpError::Manifold(ManifoldError::BoundaryProximity { min_eig, max_eig }));
    }
    Ok((lams, eig))
}
