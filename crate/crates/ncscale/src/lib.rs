//! Operator scaling on tuples of complex matrices.
//!
//! A tuple A = (A_1, …, A_m) of n×n complex matrices defines a completely
//! positive operator `T(X) = Σ A_k X A_k†` together with its adjoint
//! `T*(X) = Σ A_k† X A_k`. Scaling the tuple by invertible `(g, h)` replaces
//! each `A_k` by `g† A_k h`. The central quantity this crate computes is how
//! close a tuple can be brought to *doubly stochastic* (`T(I) = I` and
//! `T*(I) = I`) by scaling: the infimum of the trace-norm residual
//! `‖T(I) − I‖₁ + ‖T*(I) − I‖₁` over all scalings equals twice the corank of
//! the tuple's noncommutative rank, so scaling flows double as rank
//! certificates.
//!
//! The crate is organized bottom-up:
//!
//! - [`linalg`]: dense complex Hermitian spectral calculus (Jacobi
//!   eigendecomposition, one-sided Jacobi SVD, Schatten norms and their duals).
//! - [`manifold`]: the positive definite cone as a metric manifold — geodesics,
//!   the invariant Finsler distances `d_v`, tangent/cotangent norms, slopes.
//! - [`cp`]: matrix tuples, scaling pairs, marginals and residuals, the
//!   log-det capacity function and its gradient.
//! - [`engine`]: the three flows (operator Sinkhorn, Riemannian gradient
//!   descent, minimizing movements) with step-by-step traces.
//! - [`ncrank`]: recession formula, shrunk-subspace search, blow-up lower
//!   bounds, support reduction, and rank certificates.
//! - [`instance`]: instance files and the named/generated instance families.
//! - [`cli`]: the `ncscale` command-line interface.

pub mod cli;
pub mod cp;
pub mod engine;
pub mod instance;
pub mod linalg;
pub mod manifold;
pub mod ncrank;

mod guide;

#[cfg_attr(not(test), allow(dead_code))]
pub(crate) mod sampling;
#[cfg(test)]
pub(crate) mod testutil;
