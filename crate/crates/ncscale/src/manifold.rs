//! Geometry of the positive definite cone.
//!
//! The n×n positive definite Hermitian matrices form an open cone carrying a
//! family of invariant Finsler metrics: a permutation-invariant norm `v` on
//! eigenvalue vectors induces the distance
//! `d_v(X, Y) = ‖log(X^{−1/2} Y X^{−1/2})‖_v`, invariant under the congruence
//! action `X ↦ gXg†` of the general linear group. All these distances share
//! the same geodesics, the curves `t ↦ X^{1/2}·exp(t·X^{−1/2}HX^{−1/2})·X^{1/2}`,
//! so one closed form serves every `v`.
//!
//! [`PDPoint`] caches the spectral data every operation needs (eigensystem,
//! square root, inverse square root). Tangent vectors are Hermitian matrices
//! measured by [`tangent_norm`]; differentials of functions live on the dual
//! side and are measured by [`cotangent_dual_norm`], which is also the metric
//! [`slope`] of a convex function whose differential it is.

use crate::linalg::{
    schatten_dual_norm, schatten_norm, HermitianMatrix, LinalgError, LpNorm,
    SpectralDecomposition,
};
use thiserror::Error;

/// Largest |eigenvalue| fed to `exp` before overflow cuts in (e^709 is the
/// f64 ceiling; stay under it with margin).
const EXP_OVERFLOW_LIMIT: f64 = 700.0;

/// Relative positive-definiteness floor: accepted iff `λ_min > 1e−13·λ_max`.
pub const PD_RATIO_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum ManifoldError {
    /// The matrix sits at (or numerically beyond) the boundary of the
    /// positive definite cone. Flows drift toward this boundary by design,
    /// so callers treat this as a stopping diagnostic, not a bug.
    #[error(
        "matrix at the positive-definite boundary: min eigenvalue {min_eig:e} vs max {max_eig:e}"
    )]
    BoundaryProximity { min_eig: f64, max_eig: f64 },
    #[error("eigenvalue magnitude {max_abs:e} would overflow the matrix exponential")]
    ExponentOverflow { max_abs: f64 },
    #[error("empty matrix has no positive definite structure")]
    Empty,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A positive definite Hermitian matrix with its spectral data cached.
///
/// Construction is the only gate: [`PDPoint::new`] enforces
/// `λ_min > 1e−13·λ_max`, while [`PDPoint::from_exp`] builds `exp(H)`
/// spectrally and therefore stays positive for any Hermitian `H` whose
/// eigenvalues avoid `exp` overflow, even when the condition number of the
/// result exceeds the constructor tolerance. Flow drivers rely on that
/// asymmetry: iterates heading to the boundary are representable, while raw
/// matrices that have lost definiteness to rounding are rejected with a
/// boundary diagnostic.
#[derive(Clone, Debug)]
pub struct PDPoint {
    matrix: HermitianMatrix,
    eig: SpectralDecomposition,
    sqrt: HermitianMatrix,
    inv_sqrt: HermitianMatrix,
}

impl PDPoint {
    pub fn new(matrix: HermitianMatrix) -> Result<Self, ManifoldError> {
        if matrix.dim() == 0 {
            return Err(ManifoldError::Empty);
        }
        let eig = matrix.eig();
        let (min_eig, max_eig) = (eig.min_eigenvalue(), eig.max_eigenvalue());
        if !(min_eig > PD_RATIO_TOL * max_eig) || max_eig <= 0.0 {
            return Err(ManifoldError::BoundaryProximity { min_eig, max_eig });
        }
        Ok(Self::from_decomposition(matrix, eig))
    }

    /// `exp(H)`, built spectrally so positivity is structural.
    ///
    /// Only overflow is guarded; the result may be far more ill-conditioned
    /// than [`PDPoint::new`] would accept, which is exactly what makes rays
    /// `t ↦ exp(tH)` usable deep into the cone's boundary region.
    pub fn from_exp(direction: &HermitianMatrix) -> Result<Self, ManifoldError> {
        if direction.dim() == 0 {
            return Err(ManifoldError::Empty);
        }
        let hd = direction.eig();
        let max_abs = hd.spectral_radius();
        if max_abs > EXP_OVERFLOW_LIMIT {
            return Err(ManifoldError::ExponentOverflow { max_abs });
        }
        // e^λ preserves the descending eigenvalue order.
        let eigenvalues: Vec<f64> = hd.eigenvalues().iter().map(|l| l.exp()).collect();
        let eig = SpectralDecomposition::from_parts(eigenvalues, hd.into_vectors());
        let matrix = eig.reconstruct();
        Ok(Self::from_decomposition(matrix, eig))
    }

    fn from_decomposition(matrix: HermitianMatrix, eig: SpectralDecomposition) -> Self {
        let sqrt = eig.map_eigenvalues(|l| l.max(0.0).sqrt());
        let inv_sqrt = eig.map_eigenvalues(|l| 1.0 / l.max(f64::MIN_POSITIVE).sqrt());
        Self { matrix, eig, sqrt, inv_sqrt }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(HermitianMatrix::identity(n)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn eig(&self) -> &SpectralDecomposition {
        &self.eig
    }

    /// `X^{1/2}`.
    pub fn sqrt(&self) -> &HermitianMatrix {
        &self.sqrt
    }

    /// `X^{−1/2}`.
    pub fn inv_sqrt(&self) -> &HermitianMatrix {
        &self.inv_sqrt
    }

    /// `X^{−1}`.
    pub fn inverse(&self) -> HermitianMatrix {
        self.eig.map_eigenvalues(|l| 1.0 / l.max(f64::MIN_POSITIVE))
    }

    /// `log X`.
    pub fn log(&self) -> HermitianMatrix {
        self.eig.map_eigenvalues(|l| l.max(f64::MIN_POSITIVE).ln())
    }

    /// `log det X` as a sum of eigenvalue logs, stable where the determinant
    /// itself would over- or underflow.
    pub fn det_log(&self) -> f64 {
        self.eig.eigenvalues().iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).sum()
    }

    /// `λ_max / λ_min`.
    pub fn cond(&self) -> f64 {
        self.eig.max_eigenvalue() / self.eig.min_eigenvalue().max(f64::MIN_POSITIVE)
    }
}

/// A direction of motion attached to a base point.
#[derive(Clone, Debug)]
pub struct TangentVector {
    pub base: PDPoint,
    pub direction: HermitianMatrix,
}

impl TangentVector {
    pub fn norm(&self, v: LpNorm) -> f64 {
        tangent_norm(&self.base, &self.direction, v)
    }
}

/// A linear functional on tangent vectors at a base point, e.g. the
/// differential of a function, paired via `H ↦ tr(F·H)`.
#[derive(Clone, Debug)]
pub struct CotangentVector {
    pub base: PDPoint,
    pub form: HermitianMatrix,
}

impl CotangentVector {
    pub fn dual_norm(&self, v: LpNorm) -> f64 {
        cotangent_dual_norm(&self.base, &self.form, v)
    }
}

/// The geodesic `γ(t) = X^{1/2}·exp(t·X^{−1/2}HX^{−1/2})·X^{1/2}`.
///
/// `γ(0) = X` exactly (returned as a clone, likewise for `H = 0`), and the
/// derivative at `t = 0` is `+H`. The same curve is distance-realizing for
/// every invariant Finsler metric, so no per-norm geodesic solver exists.
pub fn geodesic(x: &PDPoint, h: &HermitianMatrix, t: f64) -> Result<PDPoint, ManifoldError> {
    if h.dim() != x.dim() {
        return Err(ManifoldError::Linalg(LinalgError::DimensionMismatch {
            expected: x.dim(),
            got: h.dim(),
        }));
    }
    if t == 0.0 || h.frobenius_norm() == 0.0 {
        return Ok(x.clone());
    }
    let whw = h.congruence(x.inv_sqrt().matrix());
    let hd = whw.eig();
    let max_abs = t.abs() * hd.spectral_radius();
    if max_abs > EXP_OVERFLOW_LIMIT {
        return Err(ManifoldError::ExponentOverflow { max_abs });
    }
    let middle = hd.map_eigenvalues(|l| (t * l).exp());
    let moved = middle.congruence(x.sqrt().matrix());
    PDPoint::new(moved)
}

/// The invariant Finsler distance `d_v(X, Y) = ‖log(X^{−1/2}YX^{−1/2})‖_v`.
pub fn finsler_dist(x: &PDPoint, y: &PDPoint, v: LpNorm) -> Result<f64, ManifoldError> {
    if y.dim() != x.dim() {
        return Err(ManifoldError::Linalg(LinalgError::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        }));
    }
    if x.matrix().matrix() == y.matrix().matrix() {
        return Ok(0.0);
    }
    let m = y.matrix().congruence(x.inv_sqrt().matrix());
    let md = m.eig();
    let (min_eig, max_eig) = (md.min_eigenvalue(), md.max_eigenvalue());
    if min_eig <= 0.0 {
        // Congruence of positive definite by invertible stays positive
        // definite; a nonpositive eigenvalue means rounding consumed it.
        return Err(ManifoldError::BoundaryProximity { min_eig, max_eig });
    }
    let logs: Vec<f64> = md.eigenvalues().iter().map(|l| l.ln()).collect();
    Ok(v.apply(&logs))
}

/// The initial velocity of the geodesic from `X` to `Y`:
/// `H = X^{1/2}·log(X^{−1/2}YX^{−1/2})·X^{1/2}`, so that
/// `geodesic(X, H, 0) = X` and `geodesic(X, H, 1) = Y`.
pub fn log_map(x: &PDPoint, y: &PDPoint) -> Result<HermitianMatrix, ManifoldError> {
    if y.dim() != x.dim() {
        return Err(ManifoldError::Linalg(LinalgError::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        }));
    }
    let m = y.matrix().congruence(x.inv_sqrt().matrix());
    let md = m.eig();
    let (min_eig, max_eig) = (md.min_eigenvalue(), md.max_eigenvalue());
    if min_eig <= 0.0 {
        return Err(ManifoldError::BoundaryProximity { min_eig, max_eig });
    }
    let logm = md.map_eigenvalues(|l| l.ln());
    Ok(logm.congruence(x.sqrt().matrix()))
}

/// The tangent norm `‖H‖_{v,X} = ‖X^{−1/2} H X^{−1/2}‖_v`.
pub fn tangent_norm(x: &PDPoint, h: &HermitianMatrix, v: LpNorm) -> f64 {
    schatten_norm(&h.congruence(x.inv_sqrt().matrix()), v)
}

/// The dual norm on cotangent vectors: `‖F‖*_{v,X} = ‖X^{1/2} F X^{1/2}‖_{v*}`.
pub fn cotangent_dual_norm(x: &PDPoint, f: &HermitianMatrix, v: LpNorm) -> f64 {
    schatten_dual_norm(&f.congruence(x.sqrt().matrix()), v)
}

/// The metric slope of a convex function whose differential at the base
/// point is the given cotangent vector: equal to its dual norm.
pub fn slope(df_at_x: &CotangentVector, v: LpNorm) -> f64 {
    df_at_x.dual_norm(v)
}

/// `tr(F·H)`, the pairing between a cotangent form and a tangent direction.
pub fn pairing(f: &HermitianMatrix, h: &HermitianMatrix) -> f64 {
    (f.matrix() * h.matrix()).diagonal().iter().map(|z| z.re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{mat_exp, CMat, Cpx};
    use crate::testutil::{gaussian_cmat, random_hermitian, random_pd};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_pd(entries: &[f64]) -> PDPoint {
        PDPoint::new(HermitianMatrix::from_real_diag(entries)).unwrap()
    }

    #[test]
    fn pd_constructor_enforces_relative_floor() {
        assert!(matches!(
            PDPoint::new(HermitianMatrix::from_real_diag(&[1.0, 1e-14])),
            Err(ManifoldError::BoundaryProximity { .. })
        ));
        assert!(PDPoint::new(HermitianMatrix::from_real_diag(&[1.0, 1e-12])).is_ok());
        assert!(matches!(
            PDPoint::new(HermitianMatrix::from_real_diag(&[1.0, -0.5])),
            Err(ManifoldError::BoundaryProximity { .. })
        ));
        assert!(matches!(
            PDPoint::new(HermitianMatrix::from_real_diag(&[-1.0, -2.0])),
            Err(ManifoldError::BoundaryProximity { .. })
        ));
    }

    #[test]
    fn from_exp_reaches_past_the_constructor_floor() {
        let h = HermitianMatrix::from_real_diag(&[20.0, -20.0]);
        let x = PDPoint::from_exp(&h).unwrap();
        // The same matrix presented raw is rejected: its eigenvalue ratio
        // e^{−40} sits far below the constructor tolerance.
        assert!(PDPoint::new(x.matrix().clone()).is_err());
        let back = x.log();
        assert!((back.matrix() - h.matrix()).norm() < 1e-9 * (1.0 + h.frobenius_norm()));
        assert!(matches!(
            PDPoint::from_exp(&HermitianMatrix::from_real_diag(&[800.0])),
            Err(ManifoldError::ExponentOverflow { .. })
        ));
    }

    #[test]
    fn cached_roots_multiply_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let x = random_pd(&mut rng, 4, 3.0);
            let s = x.sqrt().matrix();
            assert!((s * s - x.matrix().matrix()).norm() < 1e-10 * x.matrix().frobenius_norm());
            let w = x.inv_sqrt().matrix();
            let id = CMat::identity(4, 4);
            assert!((w * x.matrix().matrix() * w - &id).norm() < 1e-9 * x.cond());
            assert!((x.inverse().matrix() * x.matrix().matrix() - &id).norm() < 1e-9 * x.cond());
        }
    }

    #[test]
    fn det_log_sums_diagonal_logs() {
        let x = diag_pd(&[2.0f64.exp(), 1.0, (-3.0f64).exp()]);
        assert!((x.det_log() - (-1.0)).abs() < 1e-12);
        assert_eq!(PDPoint::identity(5).det_log(), 0.0);
    }

    #[test]
    fn geodesic_from_identity_is_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = random_hermitian(&mut rng, 4);
        let id = PDPoint::identity(4);
        for t in [0.25, 1.0, -2.0] {
            let g = geodesic(&id, &h, t).unwrap();
            let direct = mat_exp(&h.scaled(t));
            assert!(
                (g.matrix().matrix() - direct.matrix()).norm()
                    < 1e-11 * direct.frobenius_norm().max(1.0)
            );
        }
    }

    #[test]
    fn geodesic_fixed_cases_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x = random_pd(&mut rng, 3, 2.0);
        let h = random_hermitian(&mut rng, 3);
        let at_zero = geodesic(&x, &h, 0.0).unwrap();
        assert_eq!(at_zero.matrix().matrix(), x.matrix().matrix());
        let zero_dir = geodesic(&x, &HermitianMatrix::zeros(3), 7.5).unwrap();
        assert_eq!(zero_dir.matrix().matrix(), x.matrix().matrix());
    }

    #[test]
    fn geodesic_derivative_matches_direction() {
        // Central-difference oracle: (γ(ε) − γ(−ε)) / 2ε ≈ H.
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let eps = 1e-6;
        for trial in 0..25 {
            let n = 2 + trial % 4;
            let x = random_pd(&mut rng, n, 2.0);
            let h = random_hermitian(&mut rng, n);
            let fwd = geodesic(&x, &h, eps).unwrap();
            let bwd = geodesic(&x, &h, -eps).unwrap();
            let fd = (fwd.matrix().matrix() - bwd.matrix().matrix()) / Cpx::new(2.0 * eps, 0.0);
            let err = (fd - h.matrix()).norm();
            assert!(err < 1e-4 * h.frobenius_norm().max(1.0), "err {err:e} at n={n}");
        }
    }

    #[test]
    fn geodesic_composition_commutes_in_the_diagonal_case() {
        let xs = [3.0, 0.5, 1.25];
        let hs = [1.0, -2.0, 0.3];
        let x = diag_pd(&xs);
        let h = HermitianMatrix::from_real_diag(&hs);
        let (s, t) = (0.7, -1.9);
        let one_shot = geodesic(&x, &h, s + t).unwrap();
        let mid = geodesic(&x, &h, s).unwrap();
        // The parallel tangent at γ(s) is the velocity γ̇(s); in the
        // commuting diagonal case its entries are hᵢ·γ(s)ᵢ/xᵢ.
        let parallel: Vec<f64> = (0..3)
            .map(|i| hs[i] * mid.matrix().matrix()[(i, i)].re / xs[i])
            .collect();
        let two_shot = geodesic(&mid, &HermitianMatrix::from_real_diag(&parallel), t).unwrap();
        assert!(
            (one_shot.matrix().matrix() - two_shot.matrix().matrix()).norm()
                < 1e-13 * one_shot.matrix().frobenius_norm()
        );
    }

    #[test]
    fn finsler_dist_diagonal_known_values() {
        let x = PDPoint::identity(2);
        let y = diag_pd(&[2.0f64.exp(), (-3.0f64).exp()]);
        assert!((finsler_dist(&x, &y, LpNorm::One).unwrap() - 5.0).abs() < 1e-12);
        assert!((finsler_dist(&x, &y, LpNorm::Inf).unwrap() - 3.0).abs() < 1e-12);
        assert!(
            (finsler_dist(&x, &y, LpNorm::Two).unwrap() - 13.0f64.sqrt()).abs() < 1e-12
        );
        assert_eq!(finsler_dist(&y, &y, LpNorm::One).unwrap(), 0.0);
    }

    #[test]
    fn finsler_dist_symmetry_and_gl_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..40 {
            let n = 2 + (rng.random::<u32>() % 4) as usize;
            let x = random_pd(&mut rng, n, 2.5);
            let y = random_pd(&mut rng, n, 2.5);
            let g = gaussian_cmat(&mut rng, n, n);
            let gx = PDPoint::new(x.matrix().congruence(&g)).unwrap();
            let gy = PDPoint::new(y.matrix().congruence(&g)).unwrap();
            for v in [LpNorm::One, LpNorm::Two, LpNorm::new(3.0).unwrap(), LpNorm::Inf] {
                let d = finsler_dist(&x, &y, v).unwrap();
                let drev = finsler_dist(&y, &x, v).unwrap();
                assert!((d - drev).abs() < 1e-9 * d.max(1.0));
                let dg = finsler_dist(&gx, &gy, v).unwrap();
                assert!((d - dg).abs() < 1e-8 * d.max(1.0));
            }
        }
    }

    #[test]
    fn tangent_norm_known_values_and_invariance() {
        let id = PDPoint::identity(2);
        let h = HermitianMatrix::from_real_diag(&[1.0, -2.0]);
        assert!((tangent_norm(&id, &h, LpNorm::One) - 3.0).abs() < 1e-12);
        let x4 = diag_pd(&[4.0, 4.0]);
        assert!(
            (tangent_norm(&x4, &HermitianMatrix::identity(2), LpNorm::Inf) - 0.25).abs() < 1e-12
        );

        let mut rng = ChaCha8Rng::seed_from_u64(46);
        for _ in 0..30 {
            let x = random_pd(&mut rng, 4, 2.0);
            let hh = random_hermitian(&mut rng, 4);
            let g = gaussian_cmat(&mut rng, 4, 4);
            let gx = PDPoint::new(x.matrix().congruence(&g)).unwrap();
            let gh = hh.congruence(&g);
            for v in [LpNorm::One, LpNorm::Two, LpNorm::Inf] {
                let a = tangent_norm(&x, &hh, v);
                let b = tangent_norm(&gx, &gh, v);
                assert!((a - b).abs() < 1e-8 * a.max(1.0));
            }
        }
    }

    #[test]
    fn cotangent_dual_norm_known_values_and_invariance() {
        let id = PDPoint::identity(2);
        let f = HermitianMatrix::from_real_diag(&[3.0, -4.0]);
        assert!((cotangent_dual_norm(&id, &f, LpNorm::Inf) - 7.0).abs() < 1e-12);
        assert_eq!(cotangent_dual_norm(&id, &HermitianMatrix::zeros(2), LpNorm::Two), 0.0);

        // Cotangent vectors transform contravariantly: F ↦ g^{−†} F g^{−1}.
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..30 {
            let x = random_pd(&mut rng, 3, 2.0);
            let f = random_hermitian(&mut rng, 3);
            let g = gaussian_cmat(&mut rng, 3, 3);
            let ginv = g.clone().try_inverse().expect("generic gaussian is invertible");
            let gx = PDPoint::new(x.matrix().congruence(&g)).unwrap();
            let gf = f.congruence(&ginv.adjoint());
            for v in [LpNorm::One, LpNorm::Two, LpNorm::Inf] {
                let a = cotangent_dual_norm(&x, &f, v);
                let b = cotangent_dual_norm(&gx, &gf, v);
                assert!((a - b).abs() < 1e-8 * a.max(1.0));
            }
        }
    }

    #[test]
    fn pairing_obeys_hoelder_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        for _ in 0..200 {
            let n = 2 + (rng.random::<u32>() % 4) as usize;
            let x = random_pd(&mut rng, n, 2.0);
            let f = random_hermitian(&mut rng, n);
            let h = random_hermitian(&mut rng, n);
            let tr = pairing(&f, &h);
            for v in [LpNorm::One, LpNorm::Two, LpNorm::new(3.0).unwrap(), LpNorm::Inf] {
                let bound = cotangent_dual_norm(&x, &f, v) * tangent_norm(&x, &h, v);
                assert!(tr <= bound + 1e-9, "pairing {tr} above bound {bound}");
            }
        }
    }

    #[test]
    fn unit_speed_geodesics_realize_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let norms = [LpNorm::One, LpNorm::Two, LpNorm::new(3.0).unwrap(), LpNorm::Inf];
        for _ in 0..20 {
            let n = 2 + (rng.random::<u32>() % 4) as usize;
            let x = random_pd(&mut rng, n, 2.0);
            let h0 = random_hermitian(&mut rng, n);
            let speed = tangent_norm(&x, &h0, LpNorm::Two);
            let h = h0.scaled(1.0 / speed);
            for t in [0.4, -1.3] {
                let d = finsler_dist(&x, &geodesic(&x, &h, t).unwrap(), LpNorm::Two).unwrap();
                assert!((d - t.abs()).abs() < 1e-8);
            }
            // Distance realization between two interior parameters, for
            // every norm in the family at once.
            let (s, t) = (-0.8, 1.1);
            let gs = geodesic(&x, &h, s).unwrap();
            let gt = geodesic(&x, &h, t).unwrap();
            for v in norms {
                let d = finsler_dist(&gs, &gt, v).unwrap();
                let expect = (t - s).abs() * tangent_norm(&x, &h, v);
                assert!((d - expect).abs() < 1e-8 * expect.max(1.0));
            }
        }
    }

    #[test]
    fn log_map_inverts_the_geodesic() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..20 {
            let n = 2 + (rng.random::<u32>() % 4) as usize;
            let x = random_pd(&mut rng, n, 2.0);
            let y = random_pd(&mut rng, n, 2.0);
            let h = log_map(&x, &y).unwrap();
            let hit = geodesic(&x, &h, 1.0).unwrap();
            assert!(
                (hit.matrix().matrix() - y.matrix().matrix()).norm()
                    < 1e-10 * y.matrix().frobenius_norm()
            );
            // The log-map recovers the distance for every norm at once.
            for v in [LpNorm::One, LpNorm::Two, LpNorm::Inf] {
                let d = finsler_dist(&x, &y, v).unwrap();
                assert!((tangent_norm(&x, &h, v) - d).abs() < 1e-9 * d.max(1.0));
            }
        }
    }

    #[test]
    fn slope_is_the_dual_norm_of_the_differential() {
        let base = PDPoint::identity(2);
        let zero = CotangentVector { base: base.clone(), form: HermitianMatrix::zeros(2) };
        assert_eq!(slope(&zero, LpNorm::Inf), 0.0);
        let df = CotangentVector { base, form: HermitianMatrix::from_real_diag(&[1.0, -1.0]) };
        assert!((slope(&df, LpNorm::Inf) - 2.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn triangle_inequality_holds(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (rng.random::<u32>() % 3) as usize;
            let x = random_pd(&mut rng, n, 2.0);
            let y = random_pd(&mut rng, n, 2.0);
            let z = random_pd(&mut rng, n, 2.0);
            for v in [LpNorm::One, LpNorm::Two, LpNorm::new(3.0).unwrap(), LpNorm::Inf] {
                let xz = finsler_dist(&x, &z, v).unwrap();
                let xy = finsler_dist(&x, &y, v).unwrap();
                let yz = finsler_dist(&y, &z, v).unwrap();
                prop_assert!(xz <= xy + yz + 1e-9);
            }
        }

        #[test]
        fn distance_vanishes_only_at_equal_points(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_pd(&mut rng, 3, 2.0);
            let y = random_pd(&mut rng, 3, 2.0);
            let d = finsler_dist(&x, &y, LpNorm::Two).unwrap();
            let sep = (x.matrix().matrix() - y.matrix().matrix()).norm();
            if sep > 1e-6 {
                prop_assert!(d > 1e-9);
            }
            prop_assert!(finsler_dist(&x, &x, LpNorm::Two).unwrap() < 1e-12);
        }
    }
}
