//! Inexact trust-region subproblem solver.
//!
//! Finds `Δ̂` with `‖Δ̂‖ ≤ D` such that some `v` in the normal cone of the ball
//! at `Δ̂` gives `‖AΔ̂ + b + v‖ ≤ δ`. The nonconvex problem is convexified with
//! a `MinEvec` estimate of `λmin(A)` and the convex problem is solved with
//! FISTA followed by Super FISTA-G, which drives the projected gradient norm
//! (not just the objective gap) to zero at an accelerated rate.

use alloc::vec;
use alloc::vec::Vec;

use crate::eig::{min_evec_budgeted, MinEvecCase};
use crate::linops::{ShiftedOperator, SymmetricOp};
use crate::rng::SeedStream;
use crate::{vecops, Error, Result};

/// Relative tolerance for "on the boundary" after FISTA+SFG.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Relative tolerance for "strictly inside" in [`residual_of`].
pub const INTERIOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TrustRegionSubproblem<'a, O: SymmetricOp + ?Sized> {
    pub a_op: &'a O,
    pub b: &'a [f64],
    pub radius: f64,
    pub delta: f64,
    pub q: f64,
    /// Upper bound on `max{λmax(A) − λmin(A), λmax(A)}`.
    pub b_bound: f64,
    /// Upper bound on `λmax(A)`, used as the Lipschitz constant in the convex
    /// branch. Defaults to `b_bound` when `None`.
    pub lambda_max_bound: Option<f64>,
    /// Any bound on `‖A‖_F`; sets the Lanczos breakdown threshold.
    pub norm_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TrBranch {
    Convex,
    RegularizedInterior,
    RegularizedBoundary,
}

#[derive(Debug, Clone)]
pub struct TRSolution {
    pub delta_vec: Vec<f64>,
    pub residual: f64,
    pub matvecs_used: u64,
    pub branch: TrBranch,
    pub lambda_hat: f64,
    /// Iterations of each FISTA / SFG phase.
    pub inner_iters: usize,
    /// Lipschitz constant used by the convex solver.
    pub lg: f64,
    pub retried: bool,
    pub draw_index: u64,
}

/// `min_{v ∈ N(Δ)} ‖AΔ + b + v‖` for the ball of radius `d_radius`.
///
/// Uses exactly one matvec.
pub fn residual_of<O: SymmetricOp + ?Sized>(
    a_op: &O,
    b: &[f64],
    d_radius: f64,
    delta_vec: &[f64],
) -> Result<f64> {
    let nd = vecops::norm(delta_vec);
    if nd > d_radius * (1.0 + INTERIOR_TOL) {
        return Err(Error::OutsideBall { norm: nd, radius: d_radius });
    }
    let mut r = a_op.apply(delta_vec);
    vecops::axpy(1.0, b, &mut r);
    if nd < d_radius * (1.0 - INTERIOR_TOL) {
        return Ok(vecops::norm(&r));
    }
    let c = (-vecops::dot(&r, delta_vec) / (nd * nd)).max(0.0);
    vecops::axpy(c, delta_vec, &mut r);
    Ok(vecops::norm(&r))
}

/// `Ax + b`, one matvec.
fn quad_grad<O: SymmetricOp + ?Sized>(a: &O, b: &[f64], x: &[f64], out: &mut [f64]) {
    a.apply_into(x, out);
    vecops::axpy(1.0, b, out);
}

/// Projected FISTA on `½xᵀAx + bᵀx` over the ball of radius `d_radius`.
/// One matvec per iteration.
pub fn fista<O: SymmetricOp + ?Sized>(
    a_psd: &O,
    b: &[f64],
    d_radius: f64,
    lg: f64,
    n_iters: usize,
    x_start: &[f64],
) -> Vec<f64> {
    let d = x_start.len();
    let mut x = x_start.to_vec();
    let mut y = x_start.to_vec();
    let mut t = 1.0f64;
    let mut g = vec![0.0; d];
    for _ in 0..n_iters {
        quad_grad(a_psd, b, &y, &mut g);
        let mut x_next = vecops::add_scaled(&y, -1.0 / lg, &g);
        vecops::project_ball(&mut x_next, d_radius);
        let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
        let mom = (t - 1.0) / t_next;
        for i in 0..d {
            y[i] = x_next[i] + mom * (x_next[i] - x[i]);
        }
        x = x_next;
        t = t_next;
    }
    x
}

/// Super FISTA-G with step `1/(4·lg)`; returns `x̃_N`. One matvec per iteration.
pub fn sfg<O: SymmetricOp + ?Sized>(
    a_psd: &O,
    b: &[f64],
    d_radius: f64,
    lg: f64,
    n_iters: usize,
    x_start: &[f64],
) -> Result<Vec<f64>> {
    if n_iters < 2 {
        return Err(Error::IterBudgetTooSmall(n_iters));
    }
    let d = x_start.len();
    let n = n_iters as f64;
    let mut x = x_start.to_vec();
    let mut y = x_start.to_vec();
    let mut g = vec![0.0; d];
    for k in 0..n_iters {
        quad_grad(a_psd, b, &y, &mut g);
        let mut x_next = vecops::add_scaled(&y, -0.25 / lg, &g);
        vecops::project_ball(&mut x_next, d_radius);
        if k + 1 < n_iters {
            let kf = k as f64;
            let (c1, c2) = if k + 2 == n_iters {
                (0.3, 0.075)
            } else {
                let den = (n - kf + 2.0) * (2.0 * n - 2.0 * kf - 1.0);
                (
                    (n - kf) * (2.0 * n - 2.0 * kf - 3.0) / den,
                    (4.0 * n - 4.0 * kf - 5.0) * (2.0 * n - 2.0 * kf - 3.0) / (6.0 * den),
                )
            };
            for i in 0..d {
                y[i] = x_next[i] + c1 * (x_next[i] - x[i]) + c2 * (x_next[i] - y[i]);
            }
        }
        x = x_next;
    }
    Ok(x)
}

/// Iteration count `⌈√(10·lg·D/δ)⌉` (at least 2) for each of the two phases.
pub fn fista_sfg_iters(lg: f64, d_radius: f64, delta: f64) -> usize {
    (libm::ceil(libm::sqrt(10.0 * lg.max(0.0) * d_radius / delta)) as usize).max(2)
}

/// FISTA then Super FISTA-G from the origin, `N` iterations each.
pub fn fista_plus_sfg<O: SymmetricOp + ?Sized>(
    a_psd: &O,
    b: &[f64],
    d_radius: f64,
    delta: f64,
    lg: f64,
) -> Result<Vec<f64>> {
    let n = fista_sfg_iters(lg, d_radius, delta);
    fista_plus_sfg_iters(a_psd, b, d_radius, lg, n)
}

fn fista_plus_sfg_iters<O: SymmetricOp + ?Sized>(
    a_psd: &O,
    b: &[f64],
    d_radius: f64,
    lg: f64,
    n: usize,
) -> Result<Vec<f64>> {
    if vecops::norm(b) == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let x0 = vec![0.0; b.len()];
    let xf = fista(a_psd, b, d_radius, lg, n, &x0);
    sfg(a_psd, b, d_radius, lg, n, &xf)
}

/// Solves the subproblem to the residual certificate `≤ δ`.
///
/// On a failed certificate (a probabilistic oracle miss) the solve is
/// retried once with fresh randomness and doubled budgets.
pub fn tr_solve<O: SymmetricOp + ?Sized>(
    p: &TrustRegionSubproblem<'_, O>,
    rng: &mut SeedStream,
) -> Result<TRSolution> {
    if !(p.radius > 0.0) {
        return Err(Error::NonPositiveRadius(p.radius));
    }
    if !(p.delta > 0.0) {
        return Err(Error::InvalidDelta(p.delta));
    }
    if !(p.q > 0.0 && p.q < 1.0) {
        return Err(Error::InvalidProbability(p.q));
    }
    if p.b.len() != p.a_op.dim() {
        return Err(Error::DimensionMismatch { expected: p.a_op.dim(), got: p.b.len() });
    }
    let before = p.a_op.matvecs();
    let first = attempt(p, 1, rng)?;
    let sol = if first.residual <= p.delta {
        first
    } else {
        let mut second = attempt(p, 2, rng)?;
        second.retried = true;
        if second.residual > p.delta {
            return Err(Error::CertificateFailure { residual: second.residual, delta: p.delta });
        }
        second
    };
    Ok(TRSolution { matvecs_used: p.a_op.matvecs() - before, ..sol })
}

fn attempt<O: SymmetricOp + ?Sized>(
    p: &TrustRegionSubproblem<'_, O>,
    mult: usize,
    rng: &mut SeedStream,
) -> Result<TRSolution> {
    let (a, b, radius, delta) = (p.a_op, p.b, p.radius, p.delta);
    let draw_index = rng.draws();
    let me = min_evec_budgeted(a, delta / (2.0 * radius), p.q / 2.0, p.b_bound, p.norm_scale, mult, rng)?;

    let (delta_vec, branch, lg, iters) = match me.case {
        MinEvecCase::PsdCertified => {
            let lg = p.lambda_max_bound.unwrap_or(p.b_bound).max(f64::MIN_POSITIVE);
            let n = fista_sfg_iters(lg, radius, delta) * mult;
            (fista_plus_sfg_iters(a, b, radius, lg, n)?, TrBranch::Convex, lg, n)
        }
        MinEvecCase::NegativeEig => {
            let lam = me.lambda_hat;
            let reg = ShiftedOperator::new(a, lam);
            let lg = (p.b_bound - lam).max(f64::MIN_POSITIVE);
            let n = fista_sfg_iters(lg, radius, 0.5 * delta) * mult;
            let tilde = fista_plus_sfg_iters(&reg, b, radius, lg, n)?;
            let nt = vecops::norm(&tilde);
            if nt >= radius * (1.0 - BOUNDARY_TOL) {
                (tilde, TrBranch::RegularizedBoundary, lg, n)
            } else {
                let mut v = me.v_hat.clone();
                let mut tv = vecops::dot(&tilde, &v);
                if tv > 0.0 {
                    vecops::scale(-1.0, &mut v);
                    tv = -tv;
                }
                let alpha = libm::sqrt(tv * tv + (radius * radius - nt * nt)) - tv;
                (vecops::add_scaled(&tilde, alpha, &v), TrBranch::RegularizedInterior, lg, n)
            }
        }
    };
    let residual = residual_of(a, b, radius, &delta_vec)?;
    Ok(TRSolution {
        delta_vec,
        residual,
        matvecs_used: 0,
        branch,
        lambda_hat: me.lambda_hat,
        inner_iters: iters,
        lg,
        retried: false,
        draw_index,
    })
}

/// `½ΔᵀAΔ + bᵀΔ`, one matvec.
pub fn tr_objective<O: SymmetricOp + ?Sized>(a_op: &O, b: &[f64], x: &[f64]) -> f64 {
    0.5 * vecops::dot(x, &a_op.apply(x)) + vecops::dot(b, x)
}

/// Cost envelope `4·(√(B·D/δ)·log(d·B·D/(q²δ)) + √(lg·D/δ))`.
pub fn matvec_envelope(d: usize, b_bound: f64, lg: f64, radius: f64, delta: f64, q: f64) -> f64 {
    let bd = b_bound * radius / delta;
    let log_arg = (d as f64 * bd / (q * q)).max(core::f64::consts::E);
    4.0 * (libm::sqrt(bd) * libm::log(log_arg) + libm::sqrt(lg * radius / delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::SymOperator;

    fn sub<'a>(a: &'a SymOperator, b: &'a [f64], radius: f64, delta: f64, b_bound: f64) -> TrustRegionSubproblem<'a, SymOperator> {
        TrustRegionSubproblem {
            a_op: a,
            b,
            radius,
            delta,
            q: 0.01,
            b_bound,
            lambda_max_bound: None,
            norm_scale: a.frobenius_norm(),
        }
    }

    #[test]
    fn residual_interior_zero() {
        let a = SymOperator::identity(2);
        assert_eq!(residual_of(&a, &[0.0, 0.0], 1.0, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn residual_boundary_kkt_cases() {
        let a = SymOperator::diagonal(&[2.0, 1.0]);
        let r = residual_of(&a, &[-4.0, 0.0], 1.0, &[1.0, 0.0]).unwrap();
        assert!(r.abs() < 1e-15);
        let a = SymOperator::diagonal(&[-1.0, 1.0]);
        let r = residual_of(&a, &[0.0, 0.0], 1.0, &[1.0, 0.0]).unwrap();
        assert!(r.abs() < 1e-15);
        assert_eq!(a.matvecs(), 1);
    }

    #[test]
    fn residual_boundary_outward_gradient_not_absorbed() {
        // r points outward along Δ: c* = 0, residual = ‖r‖
        let a = SymOperator::zeros(2);
        let r = residual_of(&a, &[1.0, 0.0], 1.0, &[1.0, 0.0]).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn residual_rejects_outside() {
        let a = SymOperator::identity(2);
        assert!(matches!(residual_of(&a, &[0.0, 0.0], 1.0, &[2.0, 0.0]), Err(Error::OutsideBall { .. })));
    }

    #[test]
    fn fista_fixed_point_at_zero() {
        let a = SymOperator::identity(3);
        let x = fista(&a, &[0.0; 3], 1.0, 1.0, 10, &[0.0; 3]);
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(a.matvecs(), 10);
    }

    #[test]
    fn fista_scalar_constrained() {
        let a = SymOperator::identity(1);
        let x = fista(&a, &[-2.0], 1.0, 1.0, 50, &[0.0]);
        // minimizer on [-1, 1] is 1 with value -1.5
        let gap = 0.5 * x[0] * x[0] - 2.0 * x[0] + 1.5;
        assert!(gap <= 2.0 / 51.0f64.powi(2));
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sfg_needs_two_iterations() {
        let a = SymOperator::identity(1);
        assert_eq!(sfg(&a, &[1.0], 1.0, 1.0, 1, &[0.0]).unwrap_err(), Error::IterBudgetTooSmall(1));
        assert_eq!(sfg(&a, &[0.0], 1.0, 1.0, 4, &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn sfg_scalar_boundary_residual() {
        let a = SymOperator::identity(1);
        let x = sfg(&a, &[-2.0], 1.0, 1.0, 8, &[0.0]).unwrap();
        let res = residual_of(&a, &[-2.0], 1.0, &x).unwrap();
        // f(x0) - f* = 0 - (-1.5)
        let bound = (50.0 * 1.0 * 1.5 / (9.0 * 10.0f64)).sqrt();
        assert!(res <= bound, "{res} > {bound}");
    }

    #[test]
    fn fista_plus_sfg_kkt_example() {
        let a = SymOperator::diagonal(&[2.0, 1.0]);
        let b = [-4.0, 0.0];
        let x = fista_plus_sfg(&a, &b, 1.0, 1e-4, 2.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-4 && x[1].abs() < 1e-4);
        assert!(residual_of(&a, &b, 1.0, &x).unwrap() <= 1e-4);
    }

    #[test]
    fn fista_plus_sfg_zero_rhs() {
        let a = SymOperator::identity(3);
        assert_eq!(fista_plus_sfg(&a, &[0.0; 3], 1.0, 1e-6, 1.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn tr_solve_identity_zero() {
        let a = SymOperator::identity(2);
        let b = [0.0, 0.0];
        let mut s = SeedStream::new(1);
        let sol = tr_solve(&sub(&a, &b, 1.0, 1e-6, 1.0), &mut s).unwrap();
        assert_eq!(sol.branch, TrBranch::Convex);
        assert!(vecops::norm(&sol.delta_vec) < 1e-12);
    }

    #[test]
    fn tr_solve_convex_boundary() {
        let a = SymOperator::diagonal(&[2.0, 1.0]);
        let b = [-4.0, 0.0];
        let mut s = SeedStream::new(2);
        let sol = tr_solve(&sub(&a, &b, 1.0, 1e-6, 2.0), &mut s).unwrap();
        assert!((sol.delta_vec[0] - 1.0).abs() < 1e-5 && sol.delta_vec[1].abs() < 1e-5);
        assert!(sol.residual <= 1e-6);
    }

    #[test]
    fn tr_solve_negative_curvature() {
        let a = SymOperator::diagonal(&[-1.0, 1.0]);
        let b = [0.0, 0.0];
        for seed in 0..10 {
            let mut s = SeedStream::new(seed);
            let sol = tr_solve(&sub(&a, &b, 1.0, 1e-6, 2.0), &mut s).unwrap();
            assert!(matches!(sol.branch, TrBranch::RegularizedInterior | TrBranch::RegularizedBoundary));
            assert!((sol.delta_vec[0].abs() - 1.0).abs() < 1e-4, "{:?}", sol.delta_vec);
            let obj = tr_objective(&a, &b, &sol.delta_vec);
            assert!((obj + 0.5).abs() < 1e-6);
            assert!(sol.residual <= 1e-6);
            assert!((vecops::norm(&sol.delta_vec) - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn tr_solve_validates() {
        let a = SymOperator::identity(2);
        let b = [0.0, 0.0];
        let mut s = SeedStream::new(1);
        assert!(matches!(tr_solve(&sub(&a, &b, 0.0, 1e-3, 1.0), &mut s), Err(Error::NonPositiveRadius(_))));
        assert!(matches!(tr_solve(&sub(&a, &b, 1.0, -1.0, 1.0), &mut s), Err(Error::InvalidDelta(_))));
        let b3 = [0.0; 3];
        assert!(matches!(tr_solve(&sub(&a, &b3, 1.0, 1e-3, 1.0), &mut s), Err(Error::DimensionMismatch { .. })));
    }
}
