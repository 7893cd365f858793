//! Noncommutative rank bounds and certificates.
//!
//! The noncommutative rank of a tuple 𝒜 equals `n − max_U (dim U − dim 𝒜U)`
//! over subspaces U, where 𝒜U = Σ A_k U. Each concrete subspace therefore
//! yields an upper bound on the rank, while random blow-ups give lower
//! bounds: `rank(Σ A_k ⊗ R_k)` with d×d Gaussian R_k never exceeds
//! d·ncrank, and attains it for generic draws once d is large enough. A
//! certificate pairs one witness of each kind; it is certified when the
//! bounds meet.
//!
//! The bridge to the scaling flow is the recession function: along the ray
//! `exp(tH)` capacity grows linearly with rate `f^∞(H)`, a weighted sum of
//! the deficiencies `dim 𝒜U_i − i` over the eigenvalue flag of H. Its
//! minimum over the unit spectral-norm ball is `−2·corank`, attained at the
//! signature direction of a maximizing subspace, which is how a flow that
//! runs off to infinity betrays the subspace it found.

use crate::cp::{check_full_support, capacity_f, CpError, MatrixTuple, ScalingPair};
use crate::engine::{run_minimizing_movement, EngineError, FlowConfig, IterateState};
use crate::linalg::{
    rank, rank_threshold, schatten_norm, svd, CMat, Cpx, HermitianMatrix, LinalgError, LpNorm,
};
use crate::manifold::PDPoint;
use crate::sampling::gaussian_cmat;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Orthonormality tolerance for subspace bases: `‖B†B − I‖_F` must stay
/// below this.
pub const SUBSPACE_ORTHO_TOL: f64 = 1e-10;
/// Entries outside the structural zero blocks of a reduced tuple must stay
/// below this times the tuple scale.
pub const REDUCTION_ZERO_TOL: f64 = 1e-10;
/// Relative eigenvalue-gap floor in the recession formula; gaps below it
/// carry negligible weight and are skipped, which also makes the value
/// independent of basis choice inside tied eigenspaces.
const FORMULA_GAP_REL: f64 = 1e-8;
/// Ray evaluation clusters eigenvalues whose scaled gap `t·(λ_i − λ_j)`
/// stays below this; leakage between separated clusters is then at most
/// `e^{−RAY_CLUSTER_GAP}` in relative terms.
const RAY_CLUSTER_GAP: f64 = 23.0;
/// Total scaled spread allowed inside one cluster; the smallest absorbed
/// weight `e^{−spread/2}` must stay well above spectral rounding noise.
const RAY_CLUSTER_SPREAD: f64 = 27.0;
/// A projected cluster Gram eigenvalue counts as a captured direction when
/// it exceeds this times the cluster's largest.
const RAY_CAPTURE_REL: f64 = 1e-13;
/// Absolute floor (relative to the squared column scale) separating genuine
/// captured directions from the rounding residue of the deflation.
const RAY_NOISE_REL: f64 = 1e-26;
/// Exhaustive coordinate-subspace enumeration is attempted up to this
/// ambient dimension (2^n subsets).
const EXHAUSTIVE_DIM_LIMIT: usize = 12;
/// Cap on outer flow iterations when the certifier falls back to direction
/// search.
const FLOW_FALLBACK_ITERS: usize = 300;
/// Alternating refinement sweeps applied to an approximate deficiency
/// witness before its exact deficiency is evaluated; convergence is linear
/// and can be slow, so the budget is generous and stalls are cut early.
const REFINE_PASSES: usize = 600;
/// Give up refining when the annihilation residual has not improved by at
/// least a factor [`REFINE_STALL_DROP`] over this many consecutive sweeps.
const REFINE_STALL_PASSES: usize = 25;
const REFINE_STALL_DROP: f64 = 0.995;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("basis is {rows}x{cols}, want ambient dimension {ambient} rows and at most that many columns")]
    BasisShape { rows: usize, cols: usize, ambient: usize },
    #[error("subspace basis is not orthonormal: ‖B†B − I‖ = {deviation:e}")]
    NotOrthonormal { deviation: f64 },
    #[error("tuple already has full support; nothing to reduce")]
    AlreadyFullSupport,
    #[error("tuple is identically zero")]
    ZeroTuple,
    #[error("reduction left {mass:e} of off-block mass (limit {REDUCTION_ZERO_TOL:e} of scale)")]
    ReductionLeak { mass: f64 },
    #[error("ray parameter must be positive and finite, got {t}")]
    BadRayParameter { t: f64 },
    #[error("ray evaluation captured {captured} of {n} directions; T(exp(tH)) is numerically singular")]
    RayDeficient { captured: usize, n: usize },
    #[error(transparent)]
    Cp(#[from] CpError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A subspace of ℂⁿ held as an orthonormal basis matrix (n×k columns,
/// k = 0 allowed).
#[derive(Clone, Debug)]
pub struct Subspace {
    ambient: usize,
    basis: CMat,
}

impl Subspace {
    /// Wrap an already orthonormal basis; rejects shape and orthonormality
    /// violations.
    pub fn new(ambient: usize, basis: CMat) -> Result<Self, RankError> {
        if basis.nrows() != ambient || basis.ncols() > ambient {
            return Err(RankError::BasisShape {
                rows: basis.nrows(),
                cols: basis.ncols(),
                ambient,
            });
        }
        let k = basis.ncols();
        let deviation = (basis.adjoint() * &basis - CMat::identity(k, k)).norm();
        if deviation > SUBSPACE_ORTHO_TOL {
            return Err(RankError::NotOrthonormal { deviation });
        }
        Ok(Self { ambient, basis })
    }

    /// Orthonormalize the range of an arbitrary spanning matrix; rank is
    /// decided by singular value thresholding, so a rank-deficient or empty
    /// span is fine.
    pub fn from_span(ambient: usize, span: &CMat) -> Self {
        assert_eq!(span.nrows(), ambient, "spanning matrix must have {ambient} rows");
        if span.ncols() == 0 {
            return Self::zero(ambient);
        }
        let dec = svd(span);
        let tau = rank_threshold(span.nrows(), span.ncols(), dec.sigma[0]);
        let k = dec.sigma.iter().take_while(|&&s| s > tau).count().min(ambient);
        Self { ambient, basis: dec.u.columns(0, k).clone_owned() }
    }

    /// The zero subspace.
    pub fn zero(ambient: usize) -> Self {
        Self { ambient, basis: CMat::zeros(ambient, 0) }
    }

    /// All of ℂⁿ.
    pub fn full(ambient: usize) -> Self {
        Self { ambient, basis: CMat::identity(ambient, ambient) }
    }

    /// Span of the listed coordinate vectors.
    pub fn coordinates(ambient: usize, indices: &[usize]) -> Self {
        let mut basis = CMat::zeros(ambient, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            assert!(i < ambient, "coordinate index {i} out of range {ambient}");
            basis[(i, c)] = Cpx::new(1.0, 0.0);
        }
        Self { ambient, basis }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// Orthogonal complement, via the range of `I − BB†`.
    pub fn orthogonal_complement(&self) -> Subspace {
        let n = self.ambient;
        let p = CMat::identity(n, n) - &self.basis * self.basis.adjoint();
        let dec = svd(&p);
        let k = n - self.dim();
        Subspace { ambient: n, basis: dec.u.columns(0, k).clone_owned() }
    }

    /// The Hermitian direction `2BB† − I`: eigenvalue +1 on the subspace,
    /// −1 on its complement, spectral norm 1.
    pub fn signature_direction(&self) -> HermitianMatrix {
        let n = self.ambient;
        let two_p = &self.basis * self.basis.adjoint() * Cpx::new(2.0, 0.0);
        HermitianMatrix::symmetrize_unchecked(two_p - CMat::identity(n, n))
    }
}

/// The nested chain of prefix subspaces of an eigenbasis, with the
/// eigenvalue gaps that weight them in the recession formula
/// (`gaps[i] = λ_{i+1} − λ_{i+2}`, last entry `λ_n − 0`).
#[derive(Clone, Debug)]
pub struct Flag {
    basis: CMat,
    gaps: Vec<f64>,
}

impl Flag {
    /// Build the flag of a Hermitian direction from its descending
    /// eigendecomposition.
    pub fn from_direction(h: &HermitianMatrix) -> Flag {
        let dec = h.eig();
        let lam = dec.eigenvalues();
        let n = lam.len();
        let gaps = (0..n).map(|i| if i + 1 < n { lam[i] - lam[i + 1] } else { lam[i] }).collect();
        Flag { basis: dec.into_vectors(), gaps }
    }

    pub fn dim(&self) -> usize {
        self.gaps.len()
    }

    /// Eigenvalue gaps, the last one measured against 0.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// Span of the first `i` basis columns; `i = 0` gives the zero
    /// subspace.
    pub fn prefix(&self, i: usize) -> Subspace {
        assert!(i <= self.dim(), "prefix {i} exceeds flag dimension {}", self.dim());
        Subspace { ambient: self.dim(), basis: self.basis.columns(0, i).clone_owned() }
    }
}

/// `dim 𝒜U`: rank of the stacked images (A₁B ⋯ A_mB) of the subspace
/// basis B under every tuple matrix.
///
/// Dimensions must match; mismatches are a caller bug and panic.
pub fn dim_au(tuple: &MatrixTuple, u: &Subspace) -> usize {
    assert_eq!(u.ambient(), tuple.dim(), "subspace ambient dimension must match the tuple");
    let k = u.dim();
    if k == 0 {
        return 0;
    }
    let n = tuple.dim();
    let m = tuple.len();
    let mut stack = CMat::zeros(n, m * k);
    for (idx, a) in tuple.matrices().iter().enumerate() {
        stack.view_mut((0, idx * k), (n, k)).copy_from(&(a * u.basis()));
    }
    rank(&stack)
}

/// `dim U − dim 𝒜U`, the quantity a rank witness maximizes.
fn deficiency(tuple: &MatrixTuple, u: &Subspace) -> usize {
    u.dim().saturating_sub(dim_au(tuple, u))
}

fn left_support_or_err(tuple: &MatrixTuple) -> Result<(), RankError> {
    let n = tuple.dim();
    let (left_rank, right_rank) = check_full_support(tuple);
    if left_rank < n {
        return Err(RankError::Cp(CpError::NotFullSupport { left_rank, right_rank, n }));
    }
    Ok(())
}

/// The asymptotic linear growth rate of capacity along the ray `exp(tH)`,
/// evaluated as a gap-weighted sum of flag deficiencies:
/// `Σ_i (λ_i − λ_{i+1})·(dim 𝒜U_i − i)` with `λ_{n+1} := 0`.
///
/// Gaps below `1e−8·max(1, ‖H‖_∞)` are skipped; their weight is negligible
/// and skipping them makes the value independent of the eigenbasis chosen
/// inside tied eigenspaces.
pub fn finfty_formula(tuple: &MatrixTuple, h: &HermitianMatrix) -> Result<f64, RankError> {
    left_support_or_err(tuple)?;
    let flag = Flag::from_direction(h);
    let radius = schatten_norm(h, LpNorm::Inf);
    let delta = FORMULA_GAP_REL * radius.max(1.0);
    let mut total = 0.0;
    for i in 1..=flag.dim() {
        let gap = flag.gaps()[i - 1];
        if gap.abs() <= delta {
            continue;
        }
        let d = dim_au(tuple, &flag.prefix(i)) as f64;
        total += gap * (d - i as f64);
    }
    Ok(total)
}

/// The finite-horizon growth rate `(f(exp(tH)) − f(I))/t`.
///
/// `log det T(exp(tH))` is evaluated scale by scale (descending eigenvalue
/// clusters of tH, each deflated against the directions captured by larger
/// scales), so the value stays accurate far beyond the exponent range of
/// direct matrix exponentials; `t·‖H‖_∞ = 1000` is routine. By geodesic
/// convexity the result is nondecreasing in t.
pub fn finfty_numeric(tuple: &MatrixTuple, h: &HermitianMatrix, t: f64) -> Result<f64, RankError> {
    left_support_or_err(tuple)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(RankError::BadRayParameter { t });
    }
    let log_det_ray = log_det_t_along_ray(tuple, h, t)?;
    let f_at_i = capacity_f(tuple, &PDPoint::identity(tuple.dim())).map_err(RankError::Cp)?;
    let f_at_ray = log_det_ray - t * h.trace();
    Ok((f_at_ray - f_at_i) / t)
}

/// `log det Σ_k A_k exp(tH) A_k†` in the log domain.
///
/// Writing `exp(tH) = Σ_j e^{tλ_j} u_j u_j†`, the operator value is a sum
/// of rank-one terms `e^{tλ_j} (A_k u_j)(A_k u_j)†` whose scales span far
/// more than floating point can hold at large t. Eigenvalues are grouped
/// into clusters of nearby scale; clusters are processed in descending
/// order, each deflated against the orthonormal directions already
/// captured, and each captured direction contributes `t·λ_c + log g` with g
/// its projected Gram eigenvalue. Cross-cluster leakage is bounded by
/// `e^{−RAY_CLUSTER_GAP}` relative.
fn log_det_t_along_ray(
    tuple: &MatrixTuple,
    h: &HermitianMatrix,
    t: f64,
) -> Result<f64, RankError> {
    let n = tuple.dim();
    let m = tuple.len();
    let dec = h.eig();
    let lam = dec.eigenvalues();
    let u = dec.vectors();

    // Greedy descending clustering: extend while both the link to the
    // previous eigenvalue and the total spread stay in range.
    let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
    for j in 0..n {
        let extend = match clusters.last() {
            Some((reference, members)) => {
                let prev = lam[*members.last().unwrap()];
                t * (prev - lam[j]) <= RAY_CLUSTER_GAP
                    && t * (reference - lam[j]) <= RAY_CLUSTER_SPREAD
            }
            None => false,
        };
        if extend {
            clusters.last_mut().unwrap().1.push(j);
        } else {
            clusters.push((lam[j], vec![j]));
        }
    }

    let mut captured_basis: Vec<DVector<Cpx>> = Vec::new();
    let mut log_det = 0.0;
    for (reference, members) in &clusters {
        // Columns A_k u_j, scaled by the absorbed within-cluster weight.
        let mut cols = CMat::zeros(n, m * members.len());
        let mut scale2 = 0.0f64;
        for (c, &j) in members.iter().enumerate() {
            let weight = ((t * (lam[j] - reference)) / 2.0).exp();
            let uj = u.column(j);
            for (k, a) in tuple.matrices().iter().enumerate() {
                let img = (a * uj) * Cpx::new(weight, 0.0);
                scale2 = scale2.max(img.norm_squared());
                cols.set_column(c * m + k, &img);
            }
        }
        // Deflate against everything captured at larger scales.
        for c in 0..cols.ncols() {
            for _pass in 0..2 {
                for q in &captured_basis {
                    let overlap = q.dotc(&cols.column(c));
                    let updated = cols.column(c) - q * overlap;
                    cols.set_column(c, &updated);
                }
            }
        }
        let gram = HermitianMatrix::symmetrize_unchecked(&cols * cols.adjoint());
        let ge = gram.eig();
        let gmax = ge.max_eigenvalue();
        if !(gmax > 0.0) {
            continue;
        }
        let floor = (RAY_CAPTURE_REL * gmax).max(RAY_NOISE_REL * scale2);
        for i in 0..n {
            let g = ge.eigenvalues()[i];
            if g > floor {
                log_det += t * reference + g.ln();
                let mut vec = ge.vectors().column(i).clone_owned();
                for q in &captured_basis {
                    let overlap = q.dotc(&vec);
                    vec -= q * overlap;
                }
                let norm = vec.norm();
                if norm > 0.5 {
                    captured_basis.push(vec / Cpx::new(norm, 0.0));
                }
            }
        }
    }
    if captured_basis.len() < n {
        return Err(RankError::RayDeficient { captured: captured_basis.len(), n });
    }
    Ok(log_det)
}

/// Round a flow direction to candidate subspaces: one flag prefix per
/// eigenvalue gap exceeding `delta_rel·‖H‖_∞`, ordered by gap size
/// descending (ties keep index order). A vanishing direction yields none.
pub fn round_direction(h: &HermitianMatrix, delta_rel: f64) -> Vec<Subspace> {
    let radius = schatten_norm(h, LpNorm::Inf);
    if radius < 1e-12 {
        return Vec::new();
    }
    let delta = delta_rel * radius;
    let flag = Flag::from_direction(h);
    let n = flag.dim();
    let mut hits: Vec<(usize, f64)> = (1..n)
        .filter_map(|i| {
            let gap = flag.gaps()[i - 1];
            (gap > delta).then_some((i, gap))
        })
        .collect();
    hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    hits.into_iter().map(|(i, _)| flag.prefix(i)).collect()
}

/// Best over `trials` seeded draws of `rank(Σ_k A_k ⊗ R_k)` with d×d
/// standard complex Gaussian R_k; trial `i` uses generator seed
/// `seed + i`, so any single trial is reproducible from its derived seed.
pub fn blowup_rank(tuple: &MatrixTuple, d: usize, trials: usize, seed: u64) -> usize {
    assert!(d >= 1, "blow-up size must be at least 1");
    assert!(trials >= 1, "at least one trial required");
    let mut best = 0;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let mut acc = CMat::zeros(tuple.dim() * d, tuple.dim() * d);
        for a in tuple.matrices() {
            let r = CMat::from_fn(d, d, |_, _| {
                Cpx::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            acc += a.kronecker(&r);
        }
        best = best.max(rank(&acc));
        if best == tuple.dim() * d {
            break;
        }
    }
    best
}

/// The blow-up lower-bound witness stored in a certificate: re-running a
/// single trial with the stored seed reproduces `rank`.
#[derive(Clone, Debug)]
pub struct BlowupWitness {
    pub d: usize,
    pub seed: u64,
    pub rank: usize,
}

impl BlowupWitness {
    /// The noncommutative rank bound this witness certifies, `⌈rank/d⌉`.
    pub fn bound(&self) -> usize {
        self.rank.div_ceil(self.d)
    }
}

/// A two-sided noncommutative rank certificate.
#[derive(Clone, Debug)]
pub struct RankCertificate {
    /// The reported rank: always the subspace upper bound `n − (dim U −
    /// dim 𝒜U)`.
    pub ncrank: usize,
    /// Whether the blow-up lower bound met the upper bound.
    pub certified: bool,
    /// Subspace attaining the upper bound.
    pub upper_witness: Subspace,
    /// Blow-up draw attaining the lower bound.
    pub lower_witness: BlowupWitness,
    /// `n − ncrank`.
    pub corank: usize,
}

/// Keep the better of two candidates: larger deficiency first, and among
/// ties the smallest subspace, which makes the reported witness as economical
/// as possible. When no candidate has positive deficiency the caller reports
/// ℂⁿ instead, the honest trivial witness.
fn better(tuple: &MatrixTuple, best: &mut (usize, Subspace), candidate: Subspace) {
    let d = deficiency(tuple, &candidate);
    if d > best.0 || (d == best.0 && candidate.dim() < best.1.dim()) {
        *best = (d, candidate);
    }
}

/// Map a deficiency witness V of the adjoint tuple to one of the primal
/// tuple: `U := (𝒜†V)^⊥` satisfies `dim U − dim 𝒜U ≥ dim V − dim 𝒜†V`.
fn map_adjoint_witness(tuple: &MatrixTuple, v: &Subspace) -> Subspace {
    let n = tuple.dim();
    let k = v.dim();
    if k == 0 {
        return Subspace::full(n);
    }
    let m = tuple.len();
    let mut stack = CMat::zeros(n, m * k);
    for (idx, a) in tuple.matrices().iter().enumerate() {
        stack.view_mut((0, idx * k), (n, k)).copy_from(&(a.adjoint() * v.basis()));
    }
    Subspace::from_span(n, &stack).orthogonal_complement()
}

/// Deterministic candidate pool that needs no flow: coordinate subsets (up
/// to 2^n for small n), prefixes and suffixes of the stacked tuple's
/// singular bases, and adjoint-side coordinate subsets mapped through
/// `(𝒜†V)^⊥`.
fn cheap_candidates(tuple: &MatrixTuple) -> Vec<Subspace> {
    let n = tuple.dim();
    let mut out = vec![Subspace::zero(n), Subspace::full(n)];
    if n <= EXHAUSTIVE_DIM_LIMIT {
        for mask in 1u32..(1u32 << n) {
            let indices: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let coords = Subspace::coordinates(n, &indices);
            out.push(map_adjoint_witness(tuple, &coords));
            out.push(coords);
        }
    }
    for basis in [svd(&tuple.horizontal_stack()).u, svd(&tuple.vertical_stack()).v] {
        for i in 1..n {
            out.push(Subspace { ambient: n, basis: basis.columns(0, i).clone_owned() });
            out.push(Subspace { ambient: n, basis: basis.columns(n - i, i).clone_owned() });
        }
    }
    out
}

/// Locally refine an approximate deficiency witness by alternating least
/// squares: the image side becomes the `dim U − delta_guess` dominant left
/// singular directions of the stacked images, then the witness becomes the
/// `dim U` least-excited right singular directions of the image-deflated
/// tuple stack. Near an exact witness the error contracts at each sweep.
/// The caller re-evaluates the exact deficiency of the result, so an
/// unconverged refinement can only fail to help, never mislead.
fn refine_candidate(
    tuple: &MatrixTuple,
    seed: &Subspace,
    delta_guess: usize,
) -> Option<Subspace> {
    let n = tuple.dim();
    let m = tuple.len();
    let u_dim = seed.dim();
    if delta_guess == 0 || delta_guess > u_dim || u_dim == 0 || u_dim >= n {
        return None;
    }
    let image_dim = u_dim - delta_guess;
    let mut basis = seed.basis().clone_owned();
    let mut best_resid = f64::INFINITY;
    let mut stalled = 0usize;
    for _ in 0..REFINE_PASSES {
        let proj = if image_dim == 0 {
            None
        } else {
            let mut images = CMat::zeros(n, m * u_dim);
            for (idx, a) in tuple.matrices().iter().enumerate() {
                images.view_mut((0, idx * u_dim), (n, u_dim)).copy_from(&(a * &basis));
            }
            let v = svd(&images).u.columns(0, image_dim).clone_owned();
            Some(&v * v.adjoint())
        };
        let mut stack = CMat::zeros(m * n, n);
        for (idx, a) in tuple.matrices().iter().enumerate() {
            let block = match &proj {
                Some(p) => a - p * a,
                None => a.clone_owned(),
            };
            stack.view_mut((idx * n, 0), (n, n)).copy_from(&block);
        }
        let f = svd(&stack);
        basis = f.v.columns(n - u_dim, u_dim).clone_owned();
        // The witness condition holds once every retained direction is
        // annihilated up to roundoff.
        let resid = f.sigma[n - u_dim];
        if resid <= 1e-14 * f.sigma[0].max(1.0) {
            break;
        }
        if resid <= REFINE_STALL_DROP * best_resid {
            best_resid = resid;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= REFINE_STALL_PASSES {
                break;
            }
        }
    }
    Subspace::new(n, basis).ok()
}

/// Direction-search candidates from running the minimizing-movement flow on
/// whichever side has full support, rounding the limiting direction (and
/// its negation) to flag prefixes. Each rounded prefix also seeds a sweep
/// of alternating refinements over candidate deficiencies, which turns a
/// merely approximate flow direction into an exact witness when one is
/// nearby. Adjoint-side hits are mapped back.
fn flow_candidates(tuple: &MatrixTuple, cfg: &FlowConfig) -> Vec<Subspace> {
    let n = tuple.dim();
    let (left_rank, right_rank) = check_full_support(tuple);
    let mut flow_cfg = cfg.clone();
    flow_cfg.max_iters = cfg.max_iters.min(FLOW_FALLBACK_ITERS);
    let mut out = Vec::new();
    // Both the averaged displacement direction and the log of the final
    // iterate carry the limiting flag; the latter aligns better the further
    // the flow has escaped toward the boundary.
    let directions_of = |t: &MatrixTuple| -> Vec<HermitianMatrix> {
        match run_minimizing_movement(t, &PDPoint::identity(n), &flow_cfg) {
            Ok(trace) => {
                let mut dirs = Vec::new();
                if let Some(dir) = trace.tail_direction(flow_cfg.norm) {
                    dirs.push(dir.scaled(-1.0));
                    dirs.push(dir);
                }
                if let IterateState::Point(x) = &trace.last().state {
                    let state_log = x.log();
                    dirs.push(state_log.scaled(-1.0));
                    dirs.push(state_log);
                }
                dirs
            }
            Err(_) => Vec::new(),
        }
    };
    let expand = |t: &MatrixTuple, rounded: Vec<Subspace>| -> Vec<Subspace> {
        let mut local = Vec::new();
        for cand in rounded {
            for dg in 1..=cand.dim() {
                if let Some(r) = refine_candidate(t, &cand, dg) {
                    local.push(r);
                }
            }
            local.push(cand);
        }
        local
    };
    if left_rank == n {
        for dir in directions_of(tuple) {
            out.extend(expand(tuple, round_direction(&dir, cfg.round_delta_rel)));
        }
    } else if right_rank == n {
        let adjoint = tuple.adjoint();
        for dir in directions_of(&adjoint) {
            for v in expand(&adjoint, round_direction(&dir, cfg.round_delta_rel)) {
                out.push(map_adjoint_witness(tuple, &v));
            }
        }
    }
    out
}

/// Randomized global witness search: refine from seeded random starts for
/// every plausible (dimension, deficiency) pair, on the tuple itself and on
/// its adjoint (mapped back). The alternating refinement's basin for a
/// clean witness is large, so a couple of restarts per pair suffice; pairs
/// without a nearby witness stall out quickly. Deterministic in the seed.
fn search_candidates(tuple: &MatrixTuple, seed: u64) -> Vec<Subspace> {
    let n = tuple.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed));
    let adjoint = tuple.adjoint();
    let mut out = Vec::new();
    for u_dim in 1..n {
        for dg in 1..=u_dim {
            for _restart in 0..2 {
                for primal in [true, false] {
                    let start = Subspace::from_span(n, &gaussian_cmat(&mut rng, n, u_dim));
                    if start.dim() != u_dim {
                        continue;
                    }
                    let t = if primal { tuple } else { &adjoint };
                    if let Some(refined) = refine_candidate(t, &start, dg) {
                        out.push(if primal {
                            refined
                        } else {
                            map_adjoint_witness(tuple, &refined)
                        });
                    }
                }
            }
        }
    }
    out
}

/// Best blow-up lower bound over d = 1..max(1, n−1), with the single trial
/// that attained it.
fn blowup_bound(tuple: &MatrixTuple, cfg: &FlowConfig) -> (usize, BlowupWitness) {
    let n = tuple.dim();
    let mut best = (0usize, BlowupWitness { d: 1, seed: cfg.seed, rank: 0 });
    for d in 1..=1.max(n.saturating_sub(1)) {
        let mut rank_d = 0usize;
        let mut seed_d = cfg.seed;
        for trial in 0..cfg.blowup_trials {
            let seed = cfg.seed.wrapping_add(trial as u64);
            let r = blowup_rank(tuple, d, 1, seed);
            if r > rank_d {
                rank_d = r;
                seed_d = seed;
            }
            if rank_d == n * d {
                break;
            }
        }
        let bound = rank_d.div_ceil(d);
        if bound > best.0 {
            best = (bound, BlowupWitness { d, seed: seed_d, rank: rank_d });
        }
        if best.0 == n {
            break;
        }
    }
    best
}

/// Certify the noncommutative rank of a tuple.
///
/// The upper bound is maximized deficiency over a candidate pool:
/// coordinate and singular-basis subspaces always, a reduced-tuple
/// recursion when the tuple is support-deficient, and — only while the
/// cheap pool has not met the blow-up lower bound — two escalating
/// fallbacks: flow-direction rounding with refinement (at most
/// [`FLOW_FALLBACK_ITERS`] outer steps), then a seeded random-restart
/// refinement sweep over all (dimension, deficiency) pairs. The result is
/// certified when the bounds coincide; otherwise the reported rank is the
/// upper bound and `certified` is false.
pub fn ncrank(tuple: &MatrixTuple, cfg: &FlowConfig) -> Result<RankCertificate, RankError> {
    cfg.validate()?;
    let n = tuple.dim();
    if rank(&tuple.horizontal_stack()) == 0 {
        // The zero tuple: every subspace is annihilated.
        return Ok(RankCertificate {
            ncrank: 0,
            certified: true,
            upper_witness: Subspace::full(n),
            lower_witness: BlowupWitness { d: 1, seed: cfg.seed, rank: 0 },
            corank: n,
        });
    }
    let mut best = (0usize, Subspace::zero(n));
    for candidate in cheap_candidates(tuple) {
        better(tuple, &mut best, candidate);
    }
    if let Some(candidate) = reduction_candidate(tuple, cfg) {
        better(tuple, &mut best, candidate);
    }
    let (lower, lower_witness) = blowup_bound(tuple, cfg);
    if n - best.0 > lower {
        for candidate in flow_candidates(tuple, cfg) {
            better(tuple, &mut best, candidate);
        }
    }
    if n - best.0 > lower {
        for candidate in search_candidates(tuple, cfg.seed) {
            better(tuple, &mut best, candidate);
        }
    }
    if best.0 == 0 {
        best.1 = Subspace::full(n);
    }
    let upper = n - best.0;
    Ok(RankCertificate {
        ncrank: upper,
        certified: upper == lower,
        upper_witness: best.1,
        lower_witness,
        corank: best.0,
    })
}

/// For a support-deficient tuple, reduce, certify the strictly smaller
/// core, and lift its witness: with the reduction transform (g, h) and core
/// witness V, the subspace `h·(V ⊕ tail coordinates)` has deficiency
/// `(n − n′) + deficiency(V)`.
fn reduction_candidate(tuple: &MatrixTuple, cfg: &FlowConfig) -> Option<Subspace> {
    let n = tuple.dim();
    let red = reduce_tuple(tuple).ok()?;
    let np = red.core.dim();
    if np >= n {
        return None;
    }
    let core_cert = ncrank(&red.core, cfg).ok()?;
    let v = core_cert.upper_witness;
    let mut padded = CMat::zeros(n, v.dim() + (n - np));
    padded.view_mut((0, 0), (np, v.dim())).copy_from(v.basis());
    for (c, i) in (np..n).enumerate() {
        padded[(i, v.dim() + c)] = Cpx::new(1.0, 0.0);
    }
    let basis = red.transform.h() * padded;
    Subspace::new(n, basis).ok()
}

/// A support-deficient tuple rotated into block form, with its full-support
/// core.
#[derive(Clone, Debug)]
pub struct Reduction {
    /// The n′×n′ leading block tuple (full support on at least one side).
    pub core: MatrixTuple,
    /// Unitary pair (g, h) with `g†·A_k·h` supported in the leading block;
    /// `corank(𝒜) = (n − n′) + corank(core)`.
    pub transform: ScalingPair,
    /// Per-side support deficiencies `(n − left rank, n − right rank)` of
    /// the input.
    pub defect: (usize, usize),
}

/// Whether the first `k` coordinate vectors already span the same space as
/// the first `k` columns of `basis` (so the identity ordering can replace
/// it, and an input already in block form reduces to its leading block
/// exactly).
fn aligned_to_coordinates(basis: &CMat, k: usize) -> bool {
    (0..k).all(|i| {
        let row_mass: f64 = (0..k).map(|j| basis[(i, j)].norm_sqr()).sum();
        (1.0 - row_mass).abs() <= 1e-12
    })
}

/// Rotate a support-deficient tuple into block form: the left basis orders
/// the range of the stacked tuple first, the right basis the orthogonal
/// complement of the common kernel first, leaving every matrix supported in
/// its leading ℓ×r block. The returned core is the leading
/// max(ℓ,r)-dimensional block, which has full support on its larger side;
/// a defensive loop composes further passes should numerics disagree. An
/// input already in block form keeps its coordinate ordering and reduces to
/// its leading block exactly.
pub fn reduce_tuple(tuple: &MatrixTuple) -> Result<Reduction, RankError> {
    let n = tuple.dim();
    let (left_rank, right_rank) = check_full_support(tuple);
    if left_rank == n && right_rank == n {
        return Err(RankError::AlreadyFullSupport);
    }
    if left_rank == 0 {
        return Err(RankError::ZeroTuple);
    }
    let defect = (n - left_rank, n - right_rank);

    let mut core = tuple.clone();
    let mut g = CMat::identity(n, n);
    let mut h = CMat::identity(n, n);
    for _pass in 0..n {
        let dim = core.dim();
        let (l, r) = check_full_support(&core);
        if l == dim || r == dim {
            break;
        }
        let wu = svd(&core.horizontal_stack()).u;
        let w = if aligned_to_coordinates(&wu, l) { CMat::identity(dim, dim) } else { wu };
        let vv = svd(&core.vertical_stack()).v;
        let v = if aligned_to_coordinates(&vv, r) { CMat::identity(dim, dim) } else { vv };
        let np = l.max(r);
        let scale = core.matrices().iter().map(|a| a.norm()).fold(0.0f64, f64::max);
        let mut blocks = Vec::with_capacity(core.len());
        let mut leak = 0.0f64;
        for a in core.matrices() {
            let rotated = w.adjoint() * a * &v;
            for i in 0..dim {
                for j in 0..dim {
                    if i >= l || j >= r {
                        leak = leak.max(rotated[(i, j)].norm());
                    }
                }
            }
            blocks.push(rotated.view((0, 0), (np, np)).clone_owned());
        }
        if leak > REDUCTION_ZERO_TOL * scale.max(1.0) {
            return Err(RankError::ReductionLeak { mass: leak });
        }
        // Embed this pass's unitaries into the ambient transform.
        let mut w_full = CMat::identity(n, n);
        w_full.view_mut((0, 0), (dim, dim)).copy_from(&w);
        let mut v_full = CMat::identity(n, n);
        v_full.view_mut((0, 0), (dim, dim)).copy_from(&v);
        g = &g * w_full;
        h = &h * v_full;
        core = MatrixTuple::new(blocks).map_err(RankError::Cp)?;
    }
    let transform = ScalingPair::new(g, h).map_err(RankError::Cp)?;
    Ok(Reduction { core, transform, defect })
}

/// Result of minimizing the recession function over the unit
/// spectral-norm ball.
#[derive(Clone, Debug)]
pub struct MinBall {
    /// `−2·corank`, the minimum value.
    pub value: f64,
    /// A subspace attaining it.
    pub witness: Subspace,
    /// The minimizing direction `2BB† − I` of the witness.
    pub direction: HermitianMatrix,
    /// Whether the underlying rank certificate was certified.
    pub certified: bool,
}

/// Minimize `f^∞` over directions of spectral norm at most 1. The minimum
/// equals `−2·(dim U − dim 𝒜U)` for a best subspace U and is attained at
/// its signature direction.
pub fn min_finfty_ball(tuple: &MatrixTuple, cfg: &FlowConfig) -> Result<MinBall, RankError> {
    left_support_or_err(tuple)?;
    let cert = ncrank(tuple, cfg)?;
    let witness = cert.upper_witness;
    let direction = witness.signature_direction();
    Ok(MinBall {
        value: -2.0 * cert.corank as f64,
        witness,
        direction,
        certified: cert.certified,
    })
}
