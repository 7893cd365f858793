//! Iterative drivers that decrease capacity and track scaling residuals.
//!
//! Three engines share one trace format. Operator Sinkhorn alternately
//! normalizes the two marginals of the scaled tuple; it is the cheap driver
//! for the scalable regime. Riemannian gradient descent moves along
//! geodesics of the positive definite cone against the capacity gradient.
//! The minimizing-movement driver discretizes the steepest-descent flow of
//! capacity with respect to a smoothed ℓ_p tangent norm: each outer step
//! solves a proximal subproblem `min_Y f(Y) + d_p(X_k, Y)²/(2τ)` by inner
//! gradient descent.
//!
//! On scalable tuples all three drive the residual sum to zero. On
//! rank-deficient tuples capacity is unbounded below and the iterates run
//! off toward the boundary of the cone; the trace then carries the payoff:
//! the slope column converges to twice the corank, and the normalized log
//! iterate `log X / d(I, X)` converges to a direction whose top eigenvalue
//! gap exposes the certifying subspace.

use crate::cp::{
    capacity_f, check_full_support, grad_f, residual_of_scaled, scale_tuple, scaling_from_point,
    CpError, MatrixTuple, ResidualReport, ScalingPair,
};
use crate::linalg::{CMat, Cpx, HermitianMatrix, LpNorm};
use crate::manifold::{cotangent_dual_norm, geodesic, pairing, ManifoldError, PDPoint};
use thiserror::Error;

/// Armijo sufficient-decrease constant for backtracking line searches.
const ARMIJO_C: f64 = 1e-4;
/// Maximum halvings per line search.
const MAX_HALVINGS: u32 = 30;
/// Stagnation window (iterations) and relative-decrease floor.
const STAGNATION_WINDOW: usize = 50;
const STAGNATION_REL: f64 = 1e-12;
/// Inner tolerance and iteration cap for the proximal subproblem.
const INNER_TOL: f64 = 1e-6;
const INNER_MAX_ITERS: usize = 200;
/// A marginal eigenvalue below this (relative to the largest) counts as
/// singular and stalls Sinkhorn.
const MARGINAL_SINGULAR_TOL: f64 = 1e-12;
/// Direction extraction only when the iterate has moved this far from I.
const DIRECTION_MIN_DIST: f64 = 1e-6;
/// Tail window for averaged direction extraction.
const DIRECTION_TAIL: usize = 10;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid flow configuration: {reason}")]
    Config { reason: String },
    #[error("marginal is singular; Sinkhorn stalled on a defect subspace of dimension {}", kernel.ncols())]
    Stalled { kernel: CMat },
    #[error(transparent)]
    Cp(#[from] CpError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

/// Knobs shared by all engines. `Default` gives the documented defaults;
/// [`FlowConfig::validate`] is called by every `run_*` entry point.
#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub max_iters: usize,
    /// Initial line-search step (gradient descent and inner proximal solves).
    pub step_size: f64,
    /// Residual-sum stopping tolerance, measured in `norm`.
    pub tolerance: f64,
    /// Norm used for residual stopping, distance, and direction columns.
    pub norm: LpNorm,
    /// Exponent p ≥ 2 (or ∞) of the smoothed tangent norm in the
    /// minimizing-movement penalty.
    pub smoothing_p: f64,
    /// Proximal parameter τ of the minimizing-movement scheme.
    pub mm_tau: f64,
    /// Seed for any randomized consumer of the config (rank certification,
    /// instance generation); the engines themselves are deterministic.
    pub seed: u64,
    /// Relative eigenvalue-gap threshold when rounding a flow direction to
    /// candidate subspaces.
    pub round_delta_rel: f64,
    /// Random trials per blowup dimension in rank certification.
    pub blowup_trials: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            step_size: 0.1,
            tolerance: 1e-6,
            norm: LpNorm::One,
            smoothing_p: 8.0,
            mm_tau: 0.1,
            seed: 0,
            round_delta_rel: 1e-3,
            blowup_trials: 20,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |reason: &str| Err(EngineError::Config { reason: reason.to_string() });
        if self.max_iters < 1 {
            return fail("max_iters must be at least 1");
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return fail("step_size must be positive and finite");
        }
        if !(self.tolerance >= 0.0) {
            return fail("tolerance must be nonnegative");
        }
        if !(self.smoothing_p >= 2.0) {
            return fail("smoothing_p must be at least 2 (or infinite)");
        }
        if !(self.mm_tau > 0.0 && self.mm_tau.is_finite()) {
            return fail("mm_tau must be positive and finite");
        }
        if self.blowup_trials < 1 {
            return fail("blowup_trials must be at least 1");
        }
        if !(self.round_delta_rel > 0.0) {
            return fail("round_delta_rel must be positive");
        }
        Ok(())
    }

    fn smoothing_norm(&self) -> LpNorm {
        if self.smoothing_p.is_infinite() {
            LpNorm::Inf
        } else {
            LpNorm::new(self.smoothing_p).expect("validated exponent")
        }
    }
}

/// The state a trace record describes: a point on the cone (gradient
/// flows) or a scaling pair (Sinkhorn).
#[derive(Clone, Debug)]
pub enum IterateState {
    Point(PDPoint),
    Pair(ScalingPair),
}

/// One recorded iterate.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub step: usize,
    pub state: IterateState,
    /// Capacity value (for Sinkhorn: capacity of the scaled tuple at I).
    pub f: f64,
    /// Residual sum in ℓ₁ and ℓ₂.
    pub res_l1: f64,
    pub res_l2: f64,
    /// `‖df(X)‖` in the ℓ_∞-dual (trace) cotangent norm; for Sinkhorn the
    /// left ℓ₁ residual, which is that slope for the adjoint-side point.
    pub slope: f64,
    /// `d_v(I, X)` in the configured norm.
    pub dist: f64,
    /// `log X / d_v(I, X)` once the iterate is far enough from I.
    pub direction: Option<HermitianMatrix>,
    /// Line-search step actually accepted to reach this iterate (0 at step 0).
    pub eta: f64,
    /// Whether a failed proximal subproblem downgraded this step to a plain
    /// gradient step.
    pub downgraded: bool,
}

/// Why a run stopped.
#[derive(Clone, Debug)]
pub enum StopReason {
    /// Residual sum (in the configured norm) reached the tolerance.
    Converged { residual: f64 },
    MaxIters,
    /// A Sinkhorn marginal went singular; columns span its kernel.
    Stalled { kernel: CMat },
    /// The iterate hit the positive-definite boundary (ill-conditioned
    /// T(X), failed geodesic, or a rejected point).
    Boundary { detail: String },
    /// Relative f-decrease fell below the stagnation floor, or a line
    /// search could make no progress.
    Stagnation,
}

#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub records: Vec<TraceRecord>,
    pub stop: StopReason,
}

impl FlowTrace {
    pub fn last(&self) -> &TraceRecord {
        self.records.last().expect("traces always hold the starting record")
    }

    pub fn min_slope(&self) -> f64 {
        self.records.iter().fold(f64::INFINITY, |m, r| m.min(r.slope))
    }

    pub fn min_res_l1(&self) -> f64 {
        self.records.iter().fold(f64::INFINITY, |m, r| m.min(r.res_l1))
    }

    /// Average of the last few recorded directions (log-domain matrices,
    /// each already normalized), renormalized to unit `v`-norm. `None` when
    /// no record has moved far enough from I.
    pub fn tail_direction(&self, v: LpNorm) -> Option<HermitianMatrix> {
        let tail: Vec<&HermitianMatrix> = self
            .records
            .iter()
            .rev()
            .filter_map(|r| r.direction.as_ref())
            .take(DIRECTION_TAIL)
            .collect();
        if tail.is_empty() {
            return None;
        }
        let n = tail[0].dim();
        let mut acc = CMat::zeros(n, n);
        for d in &tail {
            acc += d.matrix();
        }
        let mean =
            HermitianMatrix::symmetrize_unchecked(acc * Cpx::new(1.0 / tail.len() as f64, 0.0));
        let norm = crate::linalg::schatten_norm(&mean, v);
        if norm < 1e-12 {
            return None;
        }
        Some(mean.scaled(1.0 / norm))
    }
}

/// ℓ₁, ℓ₂, and configured-norm residual sums of an already scaled tuple,
/// from one spectral pass per marginal.
fn residual_sums(scaled: &MatrixTuple, v: LpNorm) -> Result<(f64, f64, f64), EngineError> {
    let l1 = residual_of_scaled(scaled, LpNorm::One)?;
    let l2 = residual_of_scaled(scaled, LpNorm::Two)?;
    let in_cfg = match v {
        LpNorm::One => l1.sum,
        LpNorm::Two => l2.sum,
        other => residual_of_scaled(scaled, other)?.sum,
    };
    Ok((l1.sum, l2.sum, in_cfg))
}

/// Distance from I and normalized log-direction of a point.
fn dist_and_direction(x: &PDPoint, v: LpNorm) -> (f64, Option<HermitianMatrix>) {
    let logs: Vec<f64> =
        x.eig().eigenvalues().iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).collect();
    let dist = v.apply(&logs);
    if dist > DIRECTION_MIN_DIST {
        (dist, Some(x.log().scaled(1.0 / dist)))
    } else {
        (dist, None)
    }
}

// --- Sinkhorn ---

/// Normalize one marginal: given the positive semidefinite marginal matrix,
/// return its inverse square root, or the kernel basis if it is singular.
fn marginal_inv_sqrt(marginal: &HermitianMatrix) -> Result<HermitianMatrix, EngineError> {
    let eig = marginal.eig();
    let max = eig.max_eigenvalue().max(f64::MIN_POSITIVE);
    let defect: Vec<usize> = (0..eig.dim())
        .filter(|&i| eig.eigenvalues()[i] <= MARGINAL_SINGULAR_TOL * max)
        .collect();
    if !defect.is_empty() {
        let mut kernel = CMat::zeros(eig.dim(), defect.len());
        for (c, &i) in defect.iter().enumerate() {
            kernel.set_column(c, &eig.vectors().column(i));
        }
        return Err(EngineError::Stalled { kernel });
    }
    Ok(eig.map_eigenvalues(|l| 1.0 / l.sqrt()))
}

/// One full Sinkhorn step: normalize the left marginal exactly, then the
/// right. After it, `T*(I) = I` to rounding and the left residual carries
/// the whole residual sum.
pub fn sinkhorn_step(tuple: &MatrixTuple, s: &ScalingPair) -> Result<ScalingPair, EngineError> {
    let id = HermitianMatrix::identity(tuple.dim());
    let scaled = scale_tuple(tuple, s)?;
    let left = scaled.apply_t(&id)?;
    let g = s.g() * marginal_inv_sqrt(&left)?.matrix();
    let half = ScalingPair::new(g, s.h().clone())?;
    let rescaled = scale_tuple(tuple, &half)?;
    let right = rescaled.apply_tstar(&id)?;
    let h = half.h() * marginal_inv_sqrt(&right)?.matrix();
    Ok(ScalingPair::new(half.g().clone(), h)?)
}

/// Run operator Sinkhorn from the identity pair.
///
/// The starting state is recorded as step 0 before any normalization. A
/// singular marginal or a scaling matrix drifting to numerical singularity
/// ends the trace with [`StopReason::Stalled`] / [`StopReason::Boundary`]
/// rather than an error: the prefix is valid output.
pub fn run_sinkhorn(tuple: &MatrixTuple, cfg: &FlowConfig) -> Result<FlowTrace, EngineError> {
    cfg.validate()?;
    let n = tuple.dim();
    let (left_rank, right_rank) = check_full_support(tuple);
    if left_rank < n || right_rank < n {
        return Err(EngineError::Cp(CpError::NotFullSupport { left_rank, right_rank, n }));
    }
    let mut records = Vec::new();
    let mut s = ScalingPair::identity(n);
    let mut step = 0usize;
    let stop = loop {
        let record = sinkhorn_record(tuple, &s, step, cfg)?;
        let res_cfg = record.0;
        records.push(record.1);
        if res_cfg <= cfg.tolerance {
            break StopReason::Converged { residual: res_cfg };
        }
        if step >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        match sinkhorn_step(tuple, &s) {
            Ok(next) => s = next,
            Err(EngineError::Stalled { kernel }) => break StopReason::Stalled { kernel },
            Err(EngineError::Cp(CpError::SingularScaling { ratio })) => {
                break StopReason::Boundary {
                    detail: format!("scaling pair drifted to singularity (σ ratio {ratio:e})"),
                }
            }
            Err(other) => return Err(other),
        }
        step += 1;
    };
    Ok(FlowTrace { records, stop })
}

fn sinkhorn_record(
    tuple: &MatrixTuple,
    s: &ScalingPair,
    step: usize,
    cfg: &FlowConfig,
) -> Result<(f64, TraceRecord), EngineError> {
    let id = HermitianMatrix::identity(tuple.dim());
    let scaled = scale_tuple(tuple, s)?;
    let (res_l1, res_l2, res_cfg) = residual_sums(&scaled, cfg.norm)?;
    let left_dev = &scaled.apply_t(&id)? - &id;
    let slope = crate::linalg::schatten_norm(&left_dev, LpNorm::One);
    // Capacity of the scaled tuple at I: Σ log λ(T(I)).
    let f = {
        let t_id = scaled.apply_t(&id)?;
        t_id.eig().eigenvalues().iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).sum()
    };
    // The point of the cone this pair corresponds to is X = h·h†.
    let x = HermitianMatrix::symmetrize_unchecked(s.h() * s.h().adjoint());
    let x_eig = x.eig();
    let logs: Vec<f64> =
        x_eig.eigenvalues().iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).collect();
    let dist = cfg.norm.apply(&logs);
    let direction = if dist > DIRECTION_MIN_DIST {
        Some(x_eig.map_eigenvalues(|l| l.max(f64::MIN_POSITIVE).ln()).scaled(1.0 / dist))
    } else {
        None
    };
    Ok((
        res_cfg,
        TraceRecord {
            step,
            state: IterateState::Pair(s.clone()),
            f,
            res_l1,
            res_l2,
            slope,
            dist,
            direction,
            eta: 0.0,
            downgraded: false,
        },
    ))
}

// --- Gradient descent ---

/// Backtracking geodesic step against the d₂-Riemannian gradient of an
/// objective. Returns the accepted point, its value, and the accepted step;
/// `None` when the line search cannot decrease the objective.
fn armijo_step(
    objective: &dyn Fn(&PDPoint) -> Result<f64, CpError>,
    x: &PDPoint,
    fx: f64,
    grad_form: &HermitianMatrix,
    eta0: f64,
) -> Option<(PDPoint, f64, f64)> {
    let riem_grad = HermitianMatrix::symmetrize_unchecked(
        x.matrix().matrix() * grad_form.matrix() * x.matrix().matrix(),
    );
    let decrease = pairing(grad_form, &riem_grad);
    if !(decrease > 0.0) {
        return None;
    }
    let mut eta = eta0;
    for _ in 0..=MAX_HALVINGS {
        if let Ok(candidate) = geodesic(x, &riem_grad, -eta) {
            if let Ok(fc) = objective(&candidate) {
                if fc <= fx - ARMIJO_C * eta * decrease {
                    return Some((candidate, fc, eta));
                }
            }
        }
        eta *= 0.5;
    }
    None
}

fn flow_record(
    tuple: &MatrixTuple,
    x: &PDPoint,
    step: usize,
    cfg: &FlowConfig,
    eta: f64,
    downgraded: bool,
) -> Result<(f64, f64, HermitianMatrix, TraceRecord), CpError> {
    let f = capacity_f(tuple, x)?;
    let grad = grad_f(tuple, x)?;
    let slope = cotangent_dual_norm(x, &grad.form, LpNorm::Inf);
    let (pair, l1) = scaling_from_point(tuple, x)?;
    let scaled = scale_tuple(tuple, &pair)?;
    let l2 = residual_of_scaled(&scaled, LpNorm::Two)?;
    let res_cfg = match cfg.norm {
        LpNorm::One => l1.sum,
        LpNorm::Two => l2.sum,
        other => residual_of_scaled(&scaled, other)?.sum,
    };
    let (dist, direction) = dist_and_direction(x, cfg.norm);
    let record = TraceRecord {
        step,
        state: IterateState::Point(x.clone()),
        f,
        res_l1: l1.sum,
        res_l2: l2.sum,
        slope,
        dist,
        direction,
        eta,
        downgraded,
    };
    Ok((res_cfg, f, grad.form, record))
}

fn stagnated(records: &[TraceRecord]) -> bool {
    if records.len() <= STAGNATION_WINDOW {
        return false;
    }
    let now = records.last().unwrap().f;
    let then = records[records.len() - 1 - STAGNATION_WINDOW].f;
    then - now < STAGNATION_REL * now.abs().max(1.0)
}

/// Riemannian gradient descent on capacity, from `x0`.
///
/// Each iterate is recorded before stepping; a boundary failure (cond
/// limit, failed geodesic) ends the trace with the prefix intact.
pub fn run_gradient_descent(
    tuple: &MatrixTuple,
    x0: &PDPoint,
    cfg: &FlowConfig,
) -> Result<FlowTrace, EngineError> {
    cfg.validate()?;
    precheck_left_support(tuple)?;
    let objective = |y: &PDPoint| capacity_f(tuple, y);
    let mut records = Vec::new();
    let mut x = x0.clone();
    let mut eta_used = 0.0;
    let mut step = 0usize;
    let stop = loop {
        let (res_cfg, f, grad_form, record) =
            match flow_record(tuple, &x, step, cfg, eta_used, false) {
                Ok(parts) => parts,
                Err(err) => break boundary_stop(err)?,
            };
        records.push(record);
        if res_cfg <= cfg.tolerance {
            break StopReason::Converged { residual: res_cfg };
        }
        if step >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        if stagnated(&records) {
            break StopReason::Stagnation;
        }
        match armijo_step(&objective, &x, f, &grad_form, cfg.step_size) {
            Some((next, _, eta)) => {
                x = next;
                eta_used = eta;
            }
            None => break StopReason::Stagnation,
        }
        step += 1;
    };
    Ok(FlowTrace { records, stop })
}

// --- Minimizing movement ---

/// Value and gradient form of the proximal penalty `d_p(X_k, Y)²/(2τ)`.
///
/// With M = X_k^{−1/2} Y X_k^{−1/2}, eigenvalues μ and λ = log μ, the
/// penalty's differential at Y is `(d/τ)·X_k^{−1/2}·w·diag(gᵢ/μᵢ)·w†·X_k^{−1/2}`
/// where g = ∇v_p(λ) (an even tie-split subgradient when p = ∞).
pub(crate) fn proximal_penalty(
    xk: &PDPoint,
    y: &PDPoint,
    vp: LpNorm,
    tau: f64,
) -> (f64, HermitianMatrix) {
    let n = xk.dim();
    let m = y.matrix().congruence(xk.inv_sqrt().matrix());
    let md = m.eig();
    let mu: Vec<f64> = md.eigenvalues().iter().map(|l| l.max(f64::MIN_POSITIVE)).collect();
    let lam: Vec<f64> = mu.iter().map(|u| u.ln()).collect();
    let d = vp.apply(&lam);
    if d < 1e-14 {
        return (0.0, HermitianMatrix::zeros(n));
    }
    let g = lp_gradient(&lam, d, vp);
    let weights: Vec<f64> = g.iter().zip(&mu).map(|(gi, ui)| gi / ui).collect();
    let mut scaled_cols = md.vectors().clone();
    for (i, w) in weights.iter().enumerate() {
        let wc = Cpx::new(*w, 0.0);
        for z in scaled_cols.column_mut(i).iter_mut() {
            *z *= wc;
        }
    }
    let core = HermitianMatrix::symmetrize_unchecked(scaled_cols * md.vectors().adjoint());
    let form = core.congruence(xk.inv_sqrt().matrix()).scaled(d / tau);
    (d * d / (2.0 * tau), form)
}

/// Gradient (or even tie-split subgradient at p = ∞) of v_p at λ, scaled so
/// that it pairs to the norm: Σ gᵢλᵢ = v_p(λ).
fn lp_gradient(lam: &[f64], d: f64, vp: LpNorm) -> Vec<f64> {
    match vp {
        LpNorm::Inf => {
            let peak = lam.iter().fold(0.0f64, |m, l| m.max(l.abs()));
            let ties: Vec<usize> = (0..lam.len())
                .filter(|&i| lam[i].abs() >= peak * (1.0 - 1e-12))
                .collect();
            let share = 1.0 / ties.len() as f64;
            let mut g = vec![0.0; lam.len()];
            for i in ties {
                g[i] = share * lam[i].signum();
            }
            g
        }
        LpNorm::One => lam.iter().map(|l| l.signum()).collect(),
        LpNorm::Two => lam.iter().map(|l| l / d).collect(),
        LpNorm::P(p) => {
            lam.iter().map(|l| l.signum() * (l.abs() / d).powf(p - 1.0)).collect()
        }
    }
}

/// Solve the proximal subproblem `min_Y f(Y) + d_p(X_k, Y)²/(2τ)` to the
/// inner tolerance; `None` when the inner solver fails to reach it.
fn proximal_solve(
    tuple: &MatrixTuple,
    xk: &PDPoint,
    vp: LpNorm,
    cfg: &FlowConfig,
) -> Option<(PDPoint, f64)> {
    let phi = |y: &PDPoint| -> Result<f64, CpError> {
        Ok(capacity_f(tuple, y)? + proximal_penalty(xk, y, vp, cfg.mm_tau).0)
    };
    let phi_grad = |y: &PDPoint| -> Result<HermitianMatrix, CpError> {
        let base = grad_f(tuple, y)?;
        let (_, pen) = proximal_penalty(xk, y, vp, cfg.mm_tau);
        Ok(HermitianMatrix::symmetrize_unchecked(base.form.matrix() + pen.matrix()))
    };
    let mut y = xk.clone();
    let mut fy = phi(&y).ok()?;
    let mut eta_accum = 0.0;
    for _ in 0..INNER_MAX_ITERS {
        let grad = phi_grad(&y).ok()?;
        if cotangent_dual_norm(&y, &grad, LpNorm::Two) <= INNER_TOL {
            return Some((y, eta_accum));
        }
        match armijo_step(&phi, &y, fy, &grad, cfg.step_size) {
            Some((next, fnext, eta)) => {
                y = next;
                fy = fnext;
                eta_accum += eta;
            }
            None => return None,
        }
    }
    let grad = phi_grad(&y).ok()?;
    if cotangent_dual_norm(&y, &grad, LpNorm::Two) <= INNER_TOL {
        Some((y, eta_accum))
    } else {
        None
    }
}

/// Minimizing-movement flow: repeated proximal steps of capacity in the
/// smoothed ℓ_p tangent metric. A failed subproblem downgrades that step to
/// plain gradient descent and flags the resulting record.
pub fn run_minimizing_movement(
    tuple: &MatrixTuple,
    x0: &PDPoint,
    cfg: &FlowConfig,
) -> Result<FlowTrace, EngineError> {
    cfg.validate()?;
    precheck_left_support(tuple)?;
    let vp = cfg.smoothing_norm();
    let objective = |y: &PDPoint| capacity_f(tuple, y);
    let mut records = Vec::new();
    let mut x = x0.clone();
    let mut eta_used = 0.0;
    let mut downgraded = false;
    let mut step = 0usize;
    let stop = loop {
        let (res_cfg, f, grad_form, record) =
            match flow_record(tuple, &x, step, cfg, eta_used, downgraded) {
                Ok(parts) => parts,
                Err(err) => break boundary_stop(err)?,
            };
        records.push(record);
        if res_cfg <= cfg.tolerance {
            break StopReason::Converged { residual: res_cfg };
        }
        if step >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        if stagnated(&records) {
            break StopReason::Stagnation;
        }
        match proximal_solve(tuple, &x, vp, cfg) {
            Some((next, eta)) => {
                x = next;
                eta_used = eta;
                downgraded = false;
            }
            None => match armijo_step(&objective, &x, f, &grad_form, cfg.step_size) {
                Some((next, _, eta)) => {
                    x = next;
                    eta_used = eta;
                    downgraded = true;
                }
                None => break StopReason::Stagnation,
            },
        }
        step += 1;
    };
    Ok(FlowTrace { records, stop })
}

fn precheck_left_support(tuple: &MatrixTuple) -> Result<(), EngineError> {
    let n = tuple.dim();
    let (left_rank, right_rank) = check_full_support(tuple);
    if left_rank < n {
        return Err(EngineError::Cp(CpError::NotFullSupport { left_rank, right_rank, n }));
    }
    Ok(())
}

/// Classify a record-time failure: boundary-flavored errors close the trace
/// gracefully, anything else propagates.
fn boundary_stop(err: CpError) -> Result<StopReason, EngineError> {
    match err {
        CpError::IllConditioned { cond } => {
            Ok(StopReason::Boundary { detail: format!("T(X) condition number {cond:e}") })
        }
        CpError::Manifold(ManifoldError::BoundaryProximity { min_eig, max_eig }) => {
            Ok(StopReason::Boundary {
                detail: format!("iterate eigenvalues span [{min_eig:e}, {max_eig:e}]"),
            })
        }
        CpError::SingularScaling { ratio } => {
            Ok(StopReason::Boundary { detail: format!("scaling σ ratio {ratio:e}") })
        }
        other => Err(EngineError::Cp(other)),
    }
}

/// Convenience: the residual report of a pair in ℓ₁, for callers that hold
/// a finished trace's pair state.
pub fn pair_residual(tuple: &MatrixTuple, s: &ScalingPair) -> Result<ResidualReport, EngineError> {
    Ok(crate::cp::residual(tuple, s, LpNorm::One)?)
}
