//! Deterministic seeded samplers shared by the verification suites and
//! the unit tests.

use crate::cp::MatrixTuple;
use crate::linalg::{hermitian_part, schatten_norm, CMat, Cpx, HermitianMatrix, LpNorm};
use crate::manifold::PDPoint;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub(crate) fn gaussian_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        Cpx::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub(crate) fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    HermitianMatrix::new(hermitian_part(&gaussian_cmat(rng, n, n))).unwrap()
}

pub(crate) fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    random_hermitian(rng, n).eig().into_vectors()
}

/// A positive definite point `exp(H)` with `‖H‖_∞` rescaled to `spread`.
pub(crate) fn random_pd(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> PDPoint {
    let h = random_hermitian(rng, n);
    let radius = schatten_norm(&h, LpNorm::Inf).max(1e-12);
    PDPoint::from_exp(&h.scaled(spread / radius)).unwrap()
}

/// A tuple of m independent complex Gaussian n×n matrices (full support
/// with probability one).
pub(crate) fn random_tuple(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MatrixTuple {
    MatrixTuple::new((0..m).map(|_| gaussian_cmat(rng, n, n)).collect()).unwrap()
}

/// A positive semidefinite matrix `G·G†` of rank `min(n, r)`.
pub(crate) fn random_psd(rng: &mut ChaCha8Rng, n: usize, r: usize) -> HermitianMatrix {
    let g = gaussian_cmat(rng, n, r);
    HermitianMatrix::symmetrize_unchecked(&g * g.adjoint())
}

/// Gaussian tuple with the block rows 0..n−l × cols 0..k zeroed in every
/// matrix, so span(e_0..e_{k−1}) maps into an l-dimensional coordinate
/// space: generic corank k − l (when k > l), full support on both sides for
/// l ≥ 1, k ≤ n − 1, m ≥ 2.
pub(crate) fn zero_block_tuple(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    l: usize,
    m: usize,
) -> MatrixTuple {
    let mats = (0..m)
        .map(|_| {
            let mut a = gaussian_cmat(rng, n, n);
            for i in 0..n - l {
                for j in 0..k {
                    a[(i, j)] = Cpx::new(0.0, 0.0);
                }
            }
            a
        })
        .collect();
    MatrixTuple::new(mats).unwrap()
}
