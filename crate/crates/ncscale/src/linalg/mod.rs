//! Dense complex linear algebra for Hermitian spectral calculus.
//!
//! Everything downstream manipulates n×n complex matrices at desk scale
//! (n ≤ ~16), so the kernels favor determinism and relative accuracy over
//! asymptotic speed: eigendecompositions and SVDs are cyclic Jacobi sweeps
//! with relative off-diagonal thresholds (see [`jacobi`](self)), and every
//! decomposition applies a fixed ordering and phase convention so identical
//! inputs produce bitwise-identical outputs.

mod jacobi;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

/// Complex scalar used throughout the crate.
pub type Cpx = Complex<f64>;
/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Cpx>;
/// Dense complex vector.
pub type CVec = DVector<Cpx>;

/// Relative hermiticity tolerance: constructors reject matrices whose
/// anti-Hermitian part exceeds this fraction of the matrix norm.
pub const HERMITICITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("anti-Hermitian part is {ratio:.3e} of the matrix norm (limit {HERMITICITY_TOL:.0e})")]
    NotHermitian { ratio: f64 },
    #[error("matrix is not positive definite: min eigenvalue {min_eig:.6e}, max {max_eig:.6e}")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },
    #[error("norm exponent must be in [1, inf], got {given}")]
    InvalidExponent { given: f64 },
}

/// Hermitian part `(M + M†)/2`.
pub(crate) fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Cpx::new(0.5, 0.0)
}

pub(crate) fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// An n×n Hermitian matrix. Construction symmetrizes `(M + M†)/2`, which
/// makes the stored matrix exactly Hermitian entrywise, and rejects inputs
/// whose anti-Hermitian part exceeds [`HERMITICITY_TOL`] relative to the
/// matrix norm: downstream spectral formulas silently assume hermiticity,
/// so a nearly-skew input is a caller bug, not something to average away.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    mat: CMat,
}

impl HermitianMatrix {
    pub fn new(mat: CMat) -> Result<Self, LinalgError> {
        if mat.nrows() != mat.ncols() {
            return Err(LinalgError::NotSquare { rows: mat.nrows(), cols: mat.ncols() });
        }
        if !all_finite(&mat) {
            return Err(LinalgError::NonFinite);
        }
        let scale = mat.norm();
        if scale > 0.0 {
            let anti = (&mat - mat.adjoint()).norm() * 0.5;
            let ratio = anti / scale;
            if ratio > HERMITICITY_TOL {
                return Err(LinalgError::NotHermitian { ratio });
            }
        }
        Ok(Self { mat: hermitian_part(&mat) })
    }

    /// Symmetrize a matrix that is Hermitian by construction (spectral
    /// recompositions, sums of `B X B†` terms) without the rejection check.
    pub(crate) fn symmetrize_unchecked(mat: CMat) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat: hermitian_part(&mat) }
    }

    pub fn identity(n: usize) -> Self {
        Self { mat: CMat::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { mat: CMat::zeros(n, n) }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self { mat: CMat::from_fn(n, n, |i, j| if i == j { Cpx::new(diag[i], 0.0) } else { Cpx::new(0.0, 0.0) }) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { mat: &self.mat * Cpx::new(a, 0.0) }
    }

    /// Congruence `g · H · g†`, symmetrized.
    pub fn congruence(&self, g: &CMat) -> Self {
        Self::symmetrize_unchecked(g * &self.mat * g.adjoint())
    }

    /// Full eigendecomposition; see [`SpectralDecomposition`] for the
    /// ordering and phase conventions.
    pub fn eig(&self) -> SpectralDecomposition {
        let (eigenvalues, vectors) = jacobi::herm_eig(&self.mat);
        SpectralDecomposition { eigenvalues, vectors }
    }
}

impl std::ops::Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { mat: &self.mat + &rhs.mat }
    }
}

impl std::ops::Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix { mat: &self.mat - &rhs.mat }
    }
}

/// Eigendecomposition `H = u·diag(λ)·u†` of a Hermitian matrix.
///
/// Conventions, fixed so equal inputs give bitwise-equal output:
/// eigenvalues are real and **nonincreasing**; `u` is unitary with
/// eigenvectors as columns; each column's global phase is rotated so its
/// first component of magnitude > 1e−12 is real and nonnegative.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    vectors: CMat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues, nonincreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary matrix of eigenvector columns, ordered to match
    /// [`eigenvalues`](Self::eigenvalues).
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    /// Consume the decomposition, keeping only the eigenvector unitary.
    pub fn into_vectors(self) -> CMat {
        self.vectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `max |λ_i|`: the spectral norm of the decomposed matrix.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, &l| m.max(l.abs()))
    }

    /// Assemble from parts already satisfying the conventions (nonincreasing
    /// eigenvalues, matching unitary columns). Used where eigenvalues are
    /// transformed by a monotone map that preserves the order.
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, vectors: CMat) -> Self {
        debug_assert!(eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        Self { eigenvalues, vectors }
    }

    /// Apply a scalar function to the spectrum: `u·diag(f(λ))·u†`.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let d = CMat::from_fn(n, n, |i, j| {
            if i == j { Cpx::new(f(self.eigenvalues[i]), 0.0) } else { Cpx::new(0.0, 0.0) }
        });
        HermitianMatrix::symmetrize_unchecked(&self.vectors * d * self.vectors.adjoint())
    }

    /// Recompose `u·diag(λ)·u†`.
    pub fn reconstruct(&self) -> HermitianMatrix {
        self.map_eigenvalues(|l| l)
    }
}

/// The permutation- and sign-invariant ℓ_p norm family on eigenvalue
/// vectors, `p ∈ [1, ∞]`. Applied to the spectrum of a Hermitian matrix it
/// yields the Schatten norm family: p = 1 the trace norm, p = 2 the
/// Frobenius norm, p = ∞ the spectral norm. The endpoints are dedicated
/// variants computed exactly (sum of absolute values, maximum), not as
/// large-p limits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LpNorm {
    One,
    Two,
    Inf,
    /// Exponent strictly between 1 and ∞ (1 and 2 normalize to the dedicated
    /// variants on construction).
    P(f64),
}

impl LpNorm {
    /// Build from an exponent; `p = 1`, `2`, `∞` map to the dedicated
    /// variants. Rejects `p < 1` and NaN.
    pub fn new(p: f64) -> Result<Self, LinalgError> {
        if p.is_nan() || p < 1.0 {
            return Err(LinalgError::InvalidExponent { given: p });
        }
        Ok(if p == 1.0 {
            LpNorm::One
        } else if p == 2.0 {
            LpNorm::Two
        } else if p.is_infinite() {
            LpNorm::Inf
        } else {
            LpNorm::P(p)
        })
    }

    pub fn exponent(&self) -> f64 {
        match self {
            LpNorm::One => 1.0,
            LpNorm::Two => 2.0,
            LpNorm::Inf => f64::INFINITY,
            LpNorm::P(p) => *p,
        }
    }

    /// The dual norm: exponent `q` with `1/p + 1/q = 1`.
    pub fn dual(&self) -> LpNorm {
        match self {
            LpNorm::One => LpNorm::Inf,
            LpNorm::Two => LpNorm::Two,
            LpNorm::Inf => LpNorm::One,
            LpNorm::P(p) => LpNorm::P(p / (p - 1.0)),
        }
    }

    /// `v(x)` on a real vector.
    pub fn apply(&self, xs: &[f64]) -> f64 {
        match self {
            LpNorm::One => xs.iter().map(|x| x.abs()).sum(),
            LpNorm::Two => xs.iter().map(|x| x * x).sum::<f64>().sqrt(),
            LpNorm::Inf => xs.iter().fold(0.0, |m, x| m.max(x.abs())),
            LpNorm::P(p) => {
                let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                let sum: f64 = xs.iter().map(|x| (x.abs() / scale).powf(*p)).sum();
                scale * sum.powf(1.0 / p)
            }
        }
    }
}

impl std::fmt::Display for LpNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpNorm::Inf => write!(f, "inf"),
            other => write!(f, "{}", other.exponent()),
        }
    }
}

impl std::str::FromStr for LpNorm {
    type Err = LinalgError;
    fn from_str(s: &str) -> Result<Self, LinalgError> {
        let p = match s.trim() {
            "inf" | "Inf" | "INF" | "∞" => f64::INFINITY,
            other => other.parse::<f64>().map_err(|_| LinalgError::InvalidExponent { given: f64::NAN })?,
        };
        LpNorm::new(p)
    }
}

/// `‖H‖_v = v(λ(H))`: the unitarily invariant norm induced by `v`.
pub fn schatten_norm(h: &HermitianMatrix, v: LpNorm) -> f64 {
    v.apply(h.eig().eigenvalues())
}

/// The dual of `‖·‖_v`, which for Hermitian arguments is the norm induced by
/// the dual vector norm: `‖H‖_v* = v*(λ(H))`.
pub fn schatten_dual_norm(h: &HermitianMatrix, v: LpNorm) -> f64 {
    schatten_norm(h, v.dual())
}

/// Diagonal of a Hermitian matrix as a real vector. (The diagonal of a
/// Hermitian matrix is exactly real after construction-time symmetrization.)
pub fn diag_project(h: &HermitianMatrix) -> Vec<f64> {
    (0..h.dim()).map(|i| h.matrix()[(i, i)].re).collect()
}

/// `exp(H)` via spectral calculus. Total, but entries overflow f64 above
/// eigenvalues ≈ 709; callers bound the spectrum (see the flow engines'
/// overflow guards).
pub fn mat_exp(h: &HermitianMatrix) -> HermitianMatrix {
    h.eig().map_eigenvalues(f64::exp)
}

/// `log(X)` for positive definite `X`. Rejects a spectrum touching zero,
/// reporting the offending eigenvalue range.
pub fn mat_log(h: &HermitianMatrix) -> Result<HermitianMatrix, LinalgError> {
    let sd = h.eig();
    let (min_eig, max_eig) = (sd.min_eigenvalue(), sd.max_eigenvalue());
    if min_eig <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { min_eig, max_eig });
    }
    Ok(sd.map_eigenvalues(f64::ln))
}

/// `X^{1/2}` for positive semidefinite `X`. Eigenvalues in
/// `[−1e−10·max(1, λ_max), 0]` are treated as rounding residue and clamped
/// to zero; anything more negative is rejected.
pub fn mat_sqrt(h: &HermitianMatrix) -> Result<HermitianMatrix, LinalgError> {
    let sd = h.eig();
    let (min_eig, max_eig) = (sd.min_eigenvalue(), sd.max_eigenvalue());
    let tol = 1e-10 * max_eig.abs().max(1.0);
    if min_eig < -tol {
        return Err(LinalgError::NotPositiveDefinite { min_eig, max_eig });
    }
    Ok(sd.map_eigenvalues(|l| l.max(0.0).sqrt()))
}

/// `X^{−1/2}` for positive definite `X`.
pub fn mat_inv_sqrt(h: &HermitianMatrix) -> Result<HermitianMatrix, LinalgError> {
    let sd = h.eig();
    let (min_eig, max_eig) = (sd.min_eigenvalue(), sd.max_eigenvalue());
    if min_eig <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { min_eig, max_eig });
    }
    Ok(sd.map_eigenvalues(|l| 1.0 / l.sqrt()))
}

/// Singular values of a general complex matrix, nonincreasing.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    jacobi::svd(a).sigma
}

/// Full SVD data `a = u·diag(σ)·v†`; see [`jacobi`](self) for conventions.
pub(crate) fn svd(a: &CMat) -> jacobi::Svd {
    jacobi::svd(a)
}


/// Threshold below which a singular value does not count toward rank:
/// `16·ε·max(rows, cols)·σ_max`. Large enough to absorb the backward error
/// of the SVD on exact-zero-structured inputs, small enough that
/// deliberately constructed ranks at desk scale are unambiguous.
pub fn rank_threshold(nrows: usize, ncols: usize, sigma_max: f64) -> f64 {
    16.0 * f64::EPSILON * nrows.max(ncols) as f64 * sigma_max
}

/// Numerical rank by singular value thresholding.
pub fn rank(a: &CMat) -> usize {
    let sigma = singular_values(a);
    let max = sigma.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    let tau = rank_threshold(a.nrows(), a.ncols(), max);
    sigma.iter().filter(|&&s| s > tau).count()
}

#[cfg(test)]
mod tests;
