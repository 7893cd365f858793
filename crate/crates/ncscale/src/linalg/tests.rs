use super::*;
use crate::testutil::{gaussian_cmat, random_hermitian, random_unitary};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cmat_from_rows(rows: &[&[(f64, f64)]]) -> CMat {
    let n = rows.len();
    let m = rows[0].len();
    CMat::from_fn(n, m, |i, j| Cpx::new(rows[i][j].0, rows[i][j].1))
}

#[test]
fn eig_known_2x2_real_symmetric() {
    let h = HermitianMatrix::new(cmat_from_rows(&[
        &[(2.0, 0.0), (1.0, 0.0)],
        &[(1.0, 0.0), (2.0, 0.0)],
    ]))
    .unwrap();
    let sd = h.eig();
    assert!((sd.eigenvalues()[0] - 3.0).abs() < 1e-14);
    assert!((sd.eigenvalues()[1] - 1.0).abs() < 1e-14);
    let s = 1.0 / 2.0f64.sqrt();
    // First eigenvector (for λ=3) is (1,1)/√2 with the leading-entry phase
    // convention making both components real positive.
    assert!((sd.vectors()[(0, 0)] - Cpx::new(s, 0.0)).norm() < 1e-14);
    assert!((sd.vectors()[(1, 0)] - Cpx::new(s, 0.0)).norm() < 1e-14);
}

#[test]
fn eig_pauli_y_complex() {
    // [[0, −i], [i, 0]] has eigenvalues ±1.
    let h = HermitianMatrix::new(cmat_from_rows(&[
        &[(0.0, 0.0), (0.0, -1.0)],
        &[(0.0, 1.0), (0.0, 0.0)],
    ]))
    .unwrap();
    let sd = h.eig();
    assert!((sd.eigenvalues()[0] - 1.0).abs() < 1e-14);
    assert!((sd.eigenvalues()[1] + 1.0).abs() < 1e-14);
    let recon = sd.reconstruct();
    assert!((recon.matrix() - h.matrix()).norm() < 1e-14);
}

#[test]
fn eig_reconstruction_unitarity_order_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = 1 + trial % 8;
        let h = random_hermitian(&mut rng, n);
        let sd = h.eig();
        let u = sd.vectors();
        let id = CMat::identity(n, n);
        assert!((u.adjoint() * u - &id).norm() < 1e-10, "unitarity failed at n={n}");
        let recon = sd.reconstruct();
        let scale = h.matrix().norm().max(1e-300);
        assert!(
            (recon.matrix() - h.matrix()).norm() < 1e-10 * scale,
            "reconstruction failed at n={n}"
        );
        for w in sd.eigenvalues().windows(2) {
            assert!(w[0] >= w[1], "eigenvalues not nonincreasing");
        }
    }
}

#[test]
fn eig_deterministic_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = random_hermitian(&mut rng, 6);
    let a = h.eig();
    let b = h.eig();
    assert_eq!(a.eigenvalues(), b.eigenvalues());
    assert_eq!(a.vectors(), b.vectors());
}

#[test]
fn eig_phase_convention_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let h = random_hermitian(&mut rng, 5);
        let u = h.eig().into_vectors();
        for j in 0..5 {
            let lead = (0..5).find(|&i| u[(i, j)].norm() > 1e-12).unwrap();
            assert!(u[(lead, j)].re >= 0.0);
            assert!(u[(lead, j)].im.abs() <= 1e-12);
        }
    }
}

#[test]
fn eig_identity_and_zero() {
    let sd = HermitianMatrix::identity(4).eig();
    assert_eq!(sd.eigenvalues(), &[1.0, 1.0, 1.0, 1.0]);
    assert_eq!(sd.vectors(), &CMat::identity(4, 4));
    let sd = HermitianMatrix::zeros(3).eig();
    assert_eq!(sd.eigenvalues(), &[0.0, 0.0, 0.0]);
}

#[test]
fn eig_graded_matrix_keeps_small_eigenvalue_relative_accuracy() {
    // A QR-type solver returns the small eigenvalue only up to ±eps·‖H‖
    // ≈ 1e−16, i.e. with no correct digits; the relative-threshold Jacobi
    // sweep must keep it to near machine relative accuracy.
    let h = HermitianMatrix::new(cmat_from_rows(&[
        &[(1e-20, 0.0), (1e-25, 0.0)],
        &[(1e-25, 0.0), (1.0, 0.0)],
    ]))
    .unwrap();
    let sd = h.eig();
    let lam_min = sd.min_eigenvalue();
    assert!((lam_min / 1e-20 - 1.0).abs() < 1e-9, "lam_min = {lam_min:e}");
}

#[test]
fn eig_graded_three_scale() {
    // Diagonal scales spanning e^{±20}, off-diagonal coupling far below the
    // geometric means: eigenvalues must track the diagonal to high relative
    // accuracy.
    let a = (40.0f64).exp();
    let b = 1.0;
    let c = (-40.0f64).exp();
    let h = HermitianMatrix::new(cmat_from_rows(&[
        &[(a, 0.0), (1e-3 * (a * b).sqrt(), 0.0), (0.0, 0.0)],
        &[(1e-3 * (a * b).sqrt(), 0.0), (b, 0.0), (1e-3 * (b * c).sqrt(), 0.0)],
        &[(0.0, 0.0), (1e-3 * (b * c).sqrt(), 0.0), (c, 0.0)],
    ]))
    .unwrap();
    let sd = h.eig();
    assert!((sd.eigenvalues()[0] / a - 1.0).abs() < 1e-5);
    assert!((sd.eigenvalues()[1] / b - 1.0).abs() < 1e-5);
    assert!((sd.eigenvalues()[2] / c - 1.0).abs() < 1e-5);
}

#[test]
fn hermitian_constructor_rejects_skew_and_nonfinite() {
    let skew = cmat_from_rows(&[&[(0.0, 0.0), (1.0, 0.0)], &[(-1.0, 0.0), (0.0, 0.0)]]);
    assert!(matches!(HermitianMatrix::new(skew), Err(LinalgError::NotHermitian { .. })));
    let nan = cmat_from_rows(&[&[(f64::NAN, 0.0)]]);
    assert!(matches!(HermitianMatrix::new(nan), Err(LinalgError::NonFinite)));
    let rect = CMat::zeros(2, 3);
    assert!(matches!(HermitianMatrix::new(rect), Err(LinalgError::NotSquare { .. })));
}

#[test]
fn hermitian_constructor_symmetrizes_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = gaussian_cmat(&mut rng, 4, 4);
    let near = hermitian_part(&g) + gaussian_cmat(&mut rng, 4, 4) * Cpx::new(1e-12, 0.0);
    let h = HermitianMatrix::new(near).unwrap();
    let m = h.matrix();
    for i in 0..4 {
        assert_eq!(m[(i, i)].im, 0.0);
        for j in 0..4 {
            assert_eq!(m[(i, j)], m[(j, i)].conj());
        }
    }
}

// --- Lp norms and Schatten norms ---

#[test]
fn lp_norm_known_values() {
    let xs = [3.0, -4.0];
    assert_eq!(LpNorm::One.apply(&xs), 7.0);
    assert_eq!(LpNorm::Two.apply(&xs), 5.0);
    assert_eq!(LpNorm::Inf.apply(&xs), 4.0);
    let p3 = LpNorm::new(3.0).unwrap();
    assert!((p3.apply(&[1.0, 2.0]) - 9.0f64.powf(1.0 / 3.0)).abs() < 1e-15);
    assert_eq!(p3.apply(&[0.0, 0.0]), 0.0);
}

#[test]
fn lp_norm_construction_and_duals() {
    assert_eq!(LpNorm::new(1.0).unwrap(), LpNorm::One);
    assert_eq!(LpNorm::new(2.0).unwrap(), LpNorm::Two);
    assert_eq!(LpNorm::new(f64::INFINITY).unwrap(), LpNorm::Inf);
    assert!(matches!(LpNorm::new(0.5), Err(LinalgError::InvalidExponent { .. })));
    assert!(matches!(LpNorm::new(f64::NAN), Err(LinalgError::InvalidExponent { .. })));
    assert_eq!(LpNorm::One.dual(), LpNorm::Inf);
    assert_eq!(LpNorm::Inf.dual(), LpNorm::One);
    assert_eq!(LpNorm::Two.dual(), LpNorm::Two);
    let p3 = LpNorm::new(3.0).unwrap();
    assert!((p3.dual().exponent() - 1.5).abs() < 1e-15);
    assert_eq!("inf".parse::<LpNorm>().unwrap(), LpNorm::Inf);
    assert_eq!("1".parse::<LpNorm>().unwrap(), LpNorm::One);
    assert_eq!(format!("{}", LpNorm::new(3.0).unwrap()), "3");
}

#[test]
fn schatten_two_matches_entrywise_frobenius() {
    // Independent oracle: ‖H‖₂ = sqrt(Σ|h_ij|²) entrywise, no spectrum involved.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let h = random_hermitian(&mut rng, 6);
        let entrywise: f64 = h.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let spectral = schatten_norm(&h, LpNorm::Two);
        assert!((entrywise - spectral).abs() <= 1e-10 * entrywise.max(1.0));
    }
}

#[test]
fn schatten_one_matches_singular_values() {
    // Cross-check: for Hermitian H, Σ|λ_i| = Σσ_i(H) with H treated as a
    // general matrix through the independent SVD kernel.
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let h = random_hermitian(&mut rng, 5);
        let tn = schatten_norm(&h, LpNorm::One);
        let sv: f64 = singular_values(h.matrix()).iter().sum();
        assert!((tn - sv).abs() <= 1e-9 * tn.max(1.0));
    }
}

#[test]
fn schatten_unitary_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..30 {
        let h = random_hermitian(&mut rng, 5);
        let w = random_unitary(&mut rng, 5);
        let wh = h.congruence(&w);
        for v in [LpNorm::One, LpNorm::Two, LpNorm::new(3.0).unwrap(), LpNorm::Inf] {
            let a = schatten_norm(&h, v);
            let b = schatten_norm(&wh, v);
            assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }
}

#[test]
fn diag_projection_contracts_every_lp_norm() {
    // Schur–Horn consequence: the diagonal is majorized by the spectrum, so
    // v(diag(H)) ≤ v(λ(H)) for every permutation- and sign-invariant norm.
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..100 {
        let h = random_hermitian(&mut rng, 6);
        let d = diag_project(&h);
        for v in [LpNorm::One, LpNorm::Two, LpNorm::new(3.0).unwrap(), LpNorm::Inf] {
            assert!(v.apply(&d) <= schatten_norm(&h, v) + 1e-9);
        }
    }
}

/// The dual-optimal eigenvalue vector: μ with v*(μ) = 1 and λ·μ = v(λ).
fn dual_optimal_vector(lam: &[f64], v: LpNorm) -> Vec<f64> {
    match v {
        LpNorm::One => lam.iter().map(|l| if *l >= 0.0 { 1.0 } else { -1.0 }).collect(),
        LpNorm::Two => {
            let n = LpNorm::Two.apply(lam).max(1e-300);
            lam.iter().map(|l| l / n).collect()
        }
        LpNorm::Inf => {
            let (imax, _) = lam
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .unwrap();
            let mut mu = vec![0.0; lam.len()];
            mu[imax] = lam[imax].signum();
            mu
        }
        LpNorm::P(p) => {
            let n = v.apply(lam).max(1e-300);
            lam.iter().map(|l| l.signum() * (l.abs() / n).powf(p - 1.0)).collect()
        }
    }
}

#[test]
fn duality_pairing_inequality_and_attainment() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..50 {
        let n = 2 + (rng.random::<u32>() % 4) as usize;
        let h = random_hermitian(&mut rng, n);
        let y = random_hermitian(&mut rng, n);
        for v in [LpNorm::One, LpNorm::Two, LpNorm::new(3.0).unwrap(), LpNorm::Inf] {
            let pairing: f64 = (h.matrix() * y.matrix()).diagonal().iter().map(|z| z.re).sum();
            let bound = schatten_norm(&h, v) * schatten_dual_norm(&y, v);
            assert!(pairing <= bound + 1e-9);

            // Attainment: build Y from H's own eigenbasis and the
            // dual-optimal eigenvalue vector.
            let sd = h.eig();
            let mu = dual_optimal_vector(sd.eigenvalues(), v);
            let yopt = HermitianMatrix::from_real_diag(&mu).congruence(sd.vectors());
            let attained: f64 =
                (h.matrix() * yopt.matrix()).diagonal().iter().map(|z| z.re).sum();
            let target = schatten_norm(&h, v);
            assert!((attained - target).abs() <= 1e-9 * target.max(1.0));
            assert!(schatten_dual_norm(&yopt, v) <= 1.0 + 1e-9);
        }
    }
}

#[test]
fn dual_norm_sampling_oracle_lower_bounds_within_two_percent() {
    // Lower-bound the variational definition sup{tr(HY) : ‖Y‖_v ≤ 1} by
    // feasible points: random directions plus projected ascent (the ascent
    // only uses the primal norm to renormalize, not the dual formula).
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let h = random_hermitian(&mut rng, 3);
    let v = LpNorm::Two;
    let target = schatten_dual_norm(&h, v);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let y = random_hermitian(&mut rng, 3);
        let nrm = schatten_norm(&y, v);
        if nrm < 1e-12 {
            continue;
        }
        let val: f64 =
            (h.matrix() * y.matrix()).diagonal().iter().map(|z| z.re).sum::<f64>() / nrm;
        best = best.max(val);
    }
    // Projected gradient ascent polish: d/dY tr(HY) = H.
    let nrm = schatten_norm(&h, v);
    if nrm > 1e-12 {
        let val: f64 =
            (h.matrix() * h.matrix()).diagonal().iter().map(|z| z.re).sum::<f64>() / nrm;
        best = best.max(val);
    }
    assert!(best <= target + 1e-9);
    assert!(best >= 0.98 * target, "best {best} vs target {target}");
}

// --- Spectral calculus ---

#[test]
fn exp_log_roundtrip_within_f64_recoverable_spread() {
    // Recovering log(exp(H)) from the dense product loses the small
    // eigenvalues once cond(exp H) = e^{λmax−λmin} approaches 1/ε, so the
    // roundtrip guarantee applies on spectra with spread ≤ ~18 (where
    // ε·e^{spread} ≤ 1e−8); ‖H‖_∞ itself may sit anywhere up to 50.
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    for trial in 0..40 {
        let n = 2 + trial % 4;
        let h0 = random_hermitian(&mut rng, n);
        let radius = schatten_norm(&h0, LpNorm::Inf);
        let center = 50.0 - 9.0; // keep λ ≤ 50 after recentering
        let h = HermitianMatrix::new(
            (h0.scaled(9.0 / radius.max(1e-12)).matrix()
                + CMat::identity(n, n) * Cpx::new(center, 0.0))
            .clone(),
        )
        .unwrap();
        let spread = {
            let e = h.eig();
            e.max_eigenvalue() - e.min_eigenvalue()
        };
        assert!(spread <= 18.0 + 1e-9);
        let back = mat_log(&mat_exp(&h)).unwrap();
        let err = (back.matrix() - h.matrix()).norm();
        let bound = 1e-9 * (1.0 + h.frobenius_norm());
        assert!(err <= bound, "roundtrip err {err:e} vs bound {bound:e}");
    }
}

#[test]
fn exp_log_roundtrip_diagonal_full_range() {
    // Diagonal matrices stay diagonal through the spectral calculus, so the
    // roundtrip is exact-to-rounding across the whole ±50 range.
    let h = HermitianMatrix::from_real_diag(&[50.0, 12.5, 0.0, -31.0, -50.0]);
    let back = mat_log(&mat_exp(&h)).unwrap();
    assert!((back.matrix() - h.matrix()).norm() < 1e-12 * (1.0 + h.frobenius_norm()));
}

#[test]
fn sqrt_squares_back_and_inv_sqrt_whitens() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    for _ in 0..30 {
        let n = 2 + (rng.random::<u32>() % 5) as usize;
        let g = gaussian_cmat(&mut rng, n, n);
        let x = HermitianMatrix::symmetrize_unchecked(
            &g * g.adjoint() + CMat::identity(n, n) * Cpx::new(0.1, 0.0),
        );
        let r = mat_sqrt(&x).unwrap();
        let err = (r.matrix() * r.matrix() - x.matrix()).norm();
        assert!(err <= 1e-10 * x.frobenius_norm().max(1.0));
        let w = mat_inv_sqrt(&x).unwrap();
        let id = w.matrix() * x.matrix() * w.matrix();
        assert!((id - CMat::identity(n, n)).norm() <= 1e-10 * (n as f64));
    }
}

#[test]
fn log_rejects_indefinite_with_diagnostic() {
    let h = HermitianMatrix::from_real_diag(&[1.0, -2.0]);
    match mat_log(&h) {
        Err(LinalgError::NotPositiveDefinite { min_eig, max_eig }) => {
            assert_eq!(min_eig, -2.0);
            assert_eq!(max_eig, 1.0);
        }
        other => panic!("expected NotPositiveDefinite, got {other:?}"),
    }
    assert!(mat_sqrt(&h).is_err());
    assert!(mat_inv_sqrt(&h).is_err());
    // mat_sqrt clamps rounding-level negatives.
    let near = HermitianMatrix::from_real_diag(&[1.0, -1e-14]);
    assert!(mat_sqrt(&near).is_ok());
}

// --- SVD and rank ---

#[test]
fn svd_reconstructs_and_is_orthonormal() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..60 {
        let rows = 1 + trial % 6;
        let cols = 1 + (trial / 6) % 6;
        let a = gaussian_cmat(&mut rng, rows, cols);
        let f = svd(&a);
        let k = rows.min(cols);
        assert_eq!(f.u.ncols(), k);
        assert_eq!(f.v.ncols(), k);
        let d = CMat::from_fn(k, k, |i, j| {
            if i == j { Cpx::new(f.sigma[i], 0.0) } else { Cpx::new(0.0, 0.0) }
        });
        let recon = &f.u * d * f.v.adjoint();
        assert!((recon - &a).norm() <= 1e-11 * a.norm().max(1.0));
        assert!((f.u.adjoint() * &f.u - CMat::identity(k, k)).norm() < 1e-10);
        assert!((f.v.adjoint() * &f.v - CMat::identity(k, k)).norm() < 1e-10);
        for w in f.sigma.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }
}

#[test]
fn rank_of_planted_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for trial in 0..40 {
        let n = 2 + trial % 5;
        let m = 2 + (trial / 5) % 5;
        let r = 1 + trial % n.min(m);
        let b = gaussian_cmat(&mut rng, n, r);
        let c = gaussian_cmat(&mut rng, r, m);
        assert_eq!(rank(&(b * c)), r, "n={n} m={m} r={r}");
    }
}

#[test]
fn rank_exact_zero_structures() {
    assert_eq!(rank(&CMat::zeros(3, 5)), 0);
    let e11 = CMat::from_fn(2, 2, |i, j| {
        if i == 0 && j == 0 { Cpx::new(1.0, 0.0) } else { Cpx::new(0.0, 0.0) }
    });
    assert_eq!(rank(&e11), 1);
    assert_eq!(singular_values(&e11), vec![1.0, 0.0]);
    assert_eq!(rank(&CMat::identity(4, 4)), 4);
}

#[test]
fn rank_rotated_deficiency_stays_below_threshold() {
    // Rank-deficient after a dense rotation: the zero singular values are
    // produced by cancellation yet must stay an order below τ_rank.
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..20 {
        let u = random_unitary(&mut rng, 5);
        let w = random_unitary(&mut rng, 5);
        let d = HermitianMatrix::from_real_diag(&[3.0, 1.0, 0.5, 0.0, 0.0]);
        let a = &u * d.matrix() * w.adjoint();
        assert_eq!(rank(&a), 3);
    }
}
