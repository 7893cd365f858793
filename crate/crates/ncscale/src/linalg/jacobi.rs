//! Jacobi kernels: two-sided rotations for Hermitian eigendecomposition and
//! one-sided rotations for the SVD.
//!
//! Both kernels stop on a *relative* off-diagonal criterion
//! (`|a_pq| ≤ tol·sqrt(|a_pp|·|a_qq|)`), which keeps small eigenvalues and
//! singular values of graded positive matrices accurate relative to their own
//! magnitude rather than to the matrix norm. Scaling flows drive iterates
//! toward the boundary of the positive cone, so this is load-bearing: the
//! marginal `T(X)` at a late iterate has eigenvalues spread over many orders
//! of magnitude, and its inverse square root must still come out right.

use nalgebra::DMatrix;
use num_complex::Complex;

pub(crate) type Cpx = Complex<f64>;
pub(crate) type CMat = DMatrix<Cpx>;

const REL_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 64;

/// One Jacobi rotation, parameterized so that conjugating the 2×2 Hermitian
/// block [[a, b], [b̄, d]] by it zeroes the off-diagonal entry.
struct Rotation {
    c: f64,
    s: f64,
    /// b/|b|; the rotation absorbs the phase of the off-diagonal entry.
    phase: Cpx,
}

impl Rotation {
    /// `a`, `d` diagonal entries, `b` the (p,q) off-diagonal entry, |b| > 0.
    fn for_block(a: f64, d: f64, b: Cpx) -> Rotation {
        let r = b.norm();
        let phase = b / r;
        let zeta = (d - a) / (2.0 * r);
        // Smaller root of t² − 2ζt − 1 = 0, for a rotation angle ≤ 45°.
        let t = if zeta >= 0.0 {
            -1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
        } else {
            1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
        };
        let c = 1.0 / (1.0 + t * t).sqrt();
        Rotation { c, s: t * c, phase }
    }

    /// Right-multiply columns p, q of `m` by the rotation.
    fn apply_to_columns(&self, m: &mut CMat, p: usize, q: usize) {
        let cc = Cpx::new(self.c, 0.0);
        let sp = self.phase.conj() * self.s;
        let sq = self.phase * self.s;
        for i in 0..m.nrows() {
            let mip = m[(i, p)];
            let miq = m[(i, q)];
            m[(i, p)] = mip * cc + miq * sp;
            m[(i, q)] = miq * cc - mip * sq;
        }
    }

    /// Left-multiply rows p, q of `m` by the adjoint rotation.
    fn apply_to_rows(&self, m: &mut CMat, p: usize, q: usize) {
        let cc = Cpx::new(self.c, 0.0);
        let sp = self.phase * self.s;
        let sq = self.phase.conj() * self.s;
        for j in 0..m.ncols() {
            let mpj = m[(p, j)];
            let mqj = m[(q, j)];
            m[(p, j)] = mpj * cc + mqj * sp;
            m[(q, j)] = mqj * cc - mpj * sq;
        }
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic two-sided Jacobi.
///
/// Returns `(eigenvalues, vectors)` with eigenvalues in nonincreasing order,
/// `vectors` unitary with eigenvectors as columns, and each column's phase
/// fixed so its first component of magnitude > 1e−12 is real and nonnegative.
/// Fully deterministic for a fixed input.
pub(crate) fn herm_eig(mat: &CMat) -> (Vec<f64>, CMat) {
    let n = mat.nrows();
    debug_assert_eq!(n, mat.ncols());
    let mut a = mat.clone();
    let mut v = CMat::identity(n, n);

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[(p, q)];
                let r = b.norm();
                if r < f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let thresh = REL_TOL * (app.abs() * aqq.abs()).sqrt();
                if r <= thresh {
                    continue;
                }
                rotated = true;
                let rot = Rotation::for_block(app, aqq, b);
                rot.apply_to_columns(&mut a, p, q);
                rot.apply_to_rows(&mut a, p, q);
                rot.apply_to_columns(&mut v, p, q);
                // The rotation zeroes (p,q) analytically; pin it to avoid
                // rounding residue feeding later threshold checks.
                a[(p, q)] = Cpx::new(0.0, 0.0);
                a[(q, p)] = Cpx::new(0.0, 0.0);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let order = descending_order(&eigs);
    eigs = order.iter().map(|&i| eigs[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vectors.set_column(new, &v.column(old));
    }
    phase_normalize_columns(&mut vectors);
    (eigs, vectors)
}

/// Singular value decomposition `a = u·diag(σ)·v†` by one-sided Jacobi,
/// with σ nonincreasing. `u` is `m×k`, `v` is `n×k`, `k = min(m, n)`; the
/// square factor (whichever side has dimension `k`) is a full unitary, and
/// columns of the thin factor belonging to σ = 0 are completed to an
/// orthonormal set.
pub(crate) struct Svd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

pub(crate) fn svd(a: &CMat) -> Svd {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        // σ(A) = σ(A†); swap the factors back.
        let t = svd(&a.adjoint());
        return Svd { u: t.v, sigma: t.sigma, v: t.u };
    }

    let mut w = a.clone();
    let mut v = CMat::identity(n, n);

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let gpp = w.column(p).norm_squared();
                let gqq = w.column(q).norm_squared();
                let gpq = w.column(p).dotc(&w.column(q));
                let r = gpq.norm();
                if r < f64::MIN_POSITIVE {
                    continue;
                }
                if r <= REL_TOL * (gpp * gqq).sqrt() {
                    continue;
                }
                rotated = true;
                let rot = Rotation::for_block(gpp, gqq, gpq);
                rot.apply_to_columns(&mut w, p, q);
                rot.apply_to_columns(&mut v, p, q);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let order = descending_order(&sigma);
    sigma = order.iter().map(|&j| sigma[j]).collect();
    let mut u = CMat::zeros(m, n);
    let mut vs = CMat::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        vs.set_column(new, &v.column(old));
        if sigma[new] > f64::MIN_POSITIVE {
            let col = w.column(old) / Cpx::new(sigma[new], 0.0);
            u.set_column(new, &col);
        }
    }
    complete_orthonormal(&mut u, &sigma);
    phase_normalize_svd(&mut u, &mut vs, &sigma);
    Svd { u, sigma, v: vs }
}

/// Indices that sort `vals` in nonincreasing order; stable, so ties keep
/// their original relative order and the result is deterministic.
fn descending_order(vals: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).expect("finite eigenvalues"));
    idx
}

/// Rotate each column's phase so its first component of magnitude > 1e−12
/// is real and nonnegative.
fn phase_normalize_columns(m: &mut CMat) {
    for j in 0..m.ncols() {
        if let Some(ph) = leading_phase(m, j) {
            for i in 0..m.nrows() {
                m[(i, j)] *= ph;
            }
        }
    }
}

/// Phase-normalize `u`'s columns and apply the same phase to `v`'s, keeping
/// the product `u·diag(σ)·v†` unchanged. Columns with σ = 0 are normalized
/// independently (they do not contribute to the product).
fn phase_normalize_svd(u: &mut CMat, v: &mut CMat, sigma: &[f64]) {
    for j in 0..u.ncols() {
        if let Some(ph) = leading_phase(u, j) {
            for i in 0..u.nrows() {
                u[(i, j)] *= ph;
            }
            if sigma[j] > f64::MIN_POSITIVE && j < v.ncols() {
                for i in 0..v.nrows() {
                    v[(i, j)] *= ph;
                }
            }
        }
    }
    for j in 0..v.ncols() {
        if j < sigma.len() && sigma[j] > f64::MIN_POSITIVE {
            continue;
        }
        if let Some(ph) = leading_phase(v, j) {
            for i in 0..v.nrows() {
                v[(i, j)] *= ph;
            }
        }
    }
}

fn leading_phase(m: &CMat, j: usize) -> Option<Cpx> {
    for i in 0..m.nrows() {
        let z = m[(i, j)];
        if z.norm() > 1e-12 {
            return Some(z.conj() / z.norm());
        }
    }
    None
}

/// Fill columns of `u` whose singular value vanished with unit vectors
/// orthonormal to all other columns, by twice-reorthogonalized selection of
/// coordinate vectors. Deterministic.
fn complete_orthonormal(u: &mut CMat, sigma: &[f64]) {
    let m = u.nrows();
    for j in 0..u.ncols() {
        if sigma[j] > f64::MIN_POSITIVE {
            continue;
        }
        let mut filled = None;
        for cand in 0..m {
            let mut col = CMat::zeros(m, 1);
            col[(cand, 0)] = Cpx::new(1.0, 0.0);
            for _pass in 0..2 {
                for k in 0..u.ncols() {
                    // Unfilled zero-σ columns are still all-zero and project to
                    // nothing; every filled column has unit norm.
                    if k == j || u.column(k).norm() < 0.5 {
                        continue;
                    }
                    let overlap = u.column(k).dotc(&col.column(0));
                    let proj = u.column(k) * overlap;
                    col.set_column(0, &(col.column(0) - proj));
                }
            }
            let nrm = col.column(0).norm();
            if nrm > 0.5 {
                col /= Cpx::new(nrm, 0.0);
                filled = Some(col);
                break;
            }
        }
        let col = filled.expect("orthonormal completion must succeed for m x k, k <= m");
        u.set_column(j, &col.column(0));
    }
}
