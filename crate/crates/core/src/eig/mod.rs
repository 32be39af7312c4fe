//! Randomized Lanczos machinery.
//!
//! [`min_evec`] either certifies that a matrix is PSD or returns a
//! `δ`-accurate minimum eigenpair; [`sep`] is the approximate separation
//! oracle for the operator-norm ball `{‖B‖op ≤ L1}`. Both start Lanczos from a
//! uniformly random unit vector and run a number of steps fixed in advance
//! from `(d, δ, q)`, capped at `d`.

pub mod tridiag;

use alloc::vec;
use alloc::vec::Vec;

use crate::linops::{symmetric_eigen, SymOperator, SymmetricOp};
use crate::rng::SeedStream;
use crate::{vecops, Error, Result};

pub use tridiag::{tridiag_eig, TridiagEigen};

/// Relative threshold on `β_{k+1}` below which the Krylov space is treated as
/// invariant.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Partial Lanczos tridiagonalization `A V = V T + β_{N+1} v_{N+1} e_Nᵀ`.
#[derive(Debug, Clone)]
pub struct LanczosFactorization {
    /// `α_1..α_N`
    pub alphas: Vec<f64>,
    /// `β_2..β_{N+1}`; the last entry couples to the (possibly absent) `v_{N+1}`.
    pub betas: Vec<f64>,
    /// `v_1..v_N`, plus `v_{N+1}` when `β_{N+1}` is above the breakdown threshold.
    pub basis: Vec<Vec<f64>>,
    /// Step `k` at which `β_{k+1}` fell below the breakdown threshold.
    pub breakdown_at: Option<usize>,
}

impl LanczosFactorization {
    /// Number of completed steps `N`.
    pub fn steps(&self) -> usize {
        self.alphas.len()
    }

    /// Off-diagonal of `T` (`β_2..β_N`).
    pub fn offdiag(&self) -> &[f64] {
        let n = self.steps();
        &self.betas[..n.saturating_sub(1)]
    }

    /// `β_{N+1}`, zero after breakdown.
    pub fn residual_beta(&self) -> f64 {
        match self.breakdown_at {
            Some(_) => 0.0,
            None => self.betas.last().copied().unwrap_or(0.0),
        }
    }

    /// `Σ_k z_k v_k` over the first `z.len()` basis vectors.
    pub fn lift(&self, z: &[f64]) -> Vec<f64> {
        let d = self.basis[0].len();
        let mut out = vec![0.0; d];
        for (zk, vk) in z.iter().zip(&self.basis) {
            vecops::axpy(*zk, vk, &mut out);
        }
        out
    }
}

/// Incremental Lanczos with full reorthogonalization.
struct Lanczos<'a, O: SymmetricOp + ?Sized> {
    op: &'a O,
    fac: LanczosFactorization,
    tol: f64,
}

impl<'a, O: SymmetricOp + ?Sized> Lanczos<'a, O> {
    fn start(op: &'a O, v1: Vec<f64>, scale: f64) -> Self {
        Self {
            op,
            fac: LanczosFactorization {
                alphas: Vec::new(),
                betas: Vec::new(),
                basis: vec![v1],
                breakdown_at: None,
            },
            tol: BREAKDOWN_TOL * scale,
        }
    }

    /// Runs steps until `n` are complete or the space becomes invariant.
    fn extend_to(&mut self, n: usize) {
        let d = self.op.dim();
        let mut w = vec![0.0; d];
        while self.fac.steps() < n && self.fac.breakdown_at.is_none() {
            let k = self.fac.steps();
            let vk = &self.fac.basis[k];
            self.op.apply_into(vk, &mut w);
            if k > 0 {
                vecops::axpy(-self.fac.betas[k - 1], &self.fac.basis[k - 1], &mut w);
            }
            let alpha = vecops::dot(&w, vk);
            vecops::axpy(-alpha, vk, &mut w);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for v in &self.fac.basis {
                    let c = vecops::dot(&w, v);
                    vecops::axpy(-c, v, &mut w);
                }
            }
            let beta = vecops::norm(&w);
            self.fac.alphas.push(alpha);
            self.fac.betas.push(beta);
            if beta <= self.tol || beta == 0.0 || k + 1 >= d {
                if beta <= self.tol || beta == 0.0 {
                    self.fac.breakdown_at = Some(k + 1);
                }
                if k + 1 >= d {
                    // Krylov space saturated; no further basis vector exists.
                    break;
                }
            } else {
                let mut next = w.clone();
                vecops::scale(1.0 / beta, &mut next);
                self.fac.basis.push(next);
            }
        }
    }

    fn finish(mut self) -> LanczosFactorization {
        let n = self.fac.steps();
        self.fac.basis.truncate(if self.fac.breakdown_at.is_some() { n } else { n + 1 });
        self.fac
    }
}

/// Runs `n_steps` of Lanczos from the unit vector `v1`.
///
/// Stops early at breakdown. Uses exactly `min(n_steps, breakdown)` matvecs.
pub fn lanczos_factorize<O: SymmetricOp + ?Sized>(
    op: &O,
    v1: &[f64],
    n_steps: usize,
    norm_scale: f64,
) -> Result<LanczosFactorization> {
    let d = op.dim();
    if v1.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: v1.len() });
    }
    let nv = vecops::norm(v1);
    if (nv - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitStart(nv));
    }
    let mut l = Lanczos::start(op, v1.to_vec(), norm_scale);
    l.extend_to(n_steps.min(d));
    Ok(l.finish())
}

/// Which branch of the `MinEvec` certificate was returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MinEvecCase {
    /// `λ̂ ≥ 0`, so `A` is PSD (with probability `1 − q`).
    PsdCertified,
    /// `λ̂ < 0` with `λ̂ ≤ λmin ≤ λ̂ + δ` and `‖A v̂ − λ̂ v̂‖ ≤ δ`.
    NegativeEig,
}

#[derive(Debug, Clone)]
pub struct MinEvecResult {
    pub lambda_hat: f64,
    /// Zero in the PSD case, unit otherwise.
    pub v_hat: Vec<f64>,
    pub case: MinEvecCase,
    pub matvecs_used: u64,
    pub lanczos_steps: usize,
    /// Position of the random start in the run's seed stream.
    pub draw_index: u64,
}

/// Stage-1 step count `⌈¼√(2B/δ)·log(11d/q²) + ½⌉`, uncapped.
pub fn min_evec_stage1_steps(d: usize, delta: f64, q: f64, b_bound: f64) -> usize {
    let n = 0.25 * libm::sqrt(2.0 * b_bound.max(0.0) / delta) * libm::log(11.0 * d as f64 / (q * q)) + 0.5;
    libm::ceil(n).max(1.0) as usize
}

/// Stage-2 step count `⌈¼√(2B/δ)·log(44dB/(q²δ)) + ½⌉`, uncapped.
pub fn min_evec_stage2_steps(d: usize, delta: f64, q: f64, b_bound: f64) -> usize {
    let b = b_bound.max(0.0);
    let arg = 44.0 * d as f64 * b / (q * q * delta);
    let n = 0.25 * libm::sqrt(2.0 * b / delta) * libm::log(arg.max(1.0)) + 0.5;
    libm::ceil(n).max(1.0) as usize
}

/// The `MinEvec(A; δ, q)` oracle.
///
/// `b_bound` must bound `λmax(A) − λmin(A)`; `norm_scale` sets the Lanczos
/// breakdown threshold (any bound on `‖A‖_F`).
pub fn min_evec<O: SymmetricOp + ?Sized>(
    op: &O,
    delta: f64,
    q: f64,
    b_bound: f64,
    norm_scale: f64,
    rng: &mut SeedStream,
) -> Result<MinEvecResult> {
    min_evec_budgeted(op, delta, q, b_bound, norm_scale, 1, rng)
}

/// [`min_evec`] with both step counts multiplied by `budget_mult` (still capped at `d`).
pub fn min_evec_budgeted<O: SymmetricOp + ?Sized>(
    op: &O,
    delta: f64,
    q: f64,
    b_bound: f64,
    norm_scale: f64,
    budget_mult: usize,
    rng: &mut SeedStream,
) -> Result<MinEvecResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidProbability(q));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidDelta(delta));
    }
    let d = op.dim();
    let before = op.matvecs();
    let draw_index = rng.draws();
    let v1 = rng.unit_vector(d);
    let n1 = (min_evec_stage1_steps(d, delta, q, b_bound) * budget_mult).min(d);
    let mut lz = Lanczos::start(op, v1, norm_scale);
    lz.extend_to(n1);

    let t = tridiag_eig(&lz.fac.alphas, lz.fac.offdiag());
    let lambda_bar = t.values[0];
    let lambda_hat = lambda_bar - 0.5 * delta;
    if lambda_hat >= 0.0 {
        let steps = lz.fac.steps();
        return Ok(MinEvecResult {
            lambda_hat,
            v_hat: vec![0.0; d],
            case: MinEvecCase::PsdCertified,
            matvecs_used: op.matvecs() - before,
            lanczos_steps: steps,
            draw_index,
        });
    }

    let n2 = (min_evec_stage2_steps(d, delta, q, b_bound) * budget_mult).max(n1).min(d);
    lz.extend_to(n2);
    let fac = lz.finish();
    let n = fac.steps();

    // M = (T' − λ̂ I)² + β²_{N+1} e_N e_Nᵀ, pentadiagonal
    let alphas = &fac.alphas;
    let off = fac.offdiag();
    let mut m = vec![0.0; n * n];
    let sh = |i: usize| alphas[i] - lambda_hat;
    for i in 0..n {
        let mut diag = sh(i) * sh(i);
        if i > 0 {
            diag += off[i - 1] * off[i - 1];
        }
        if i + 1 < n {
            diag += off[i] * off[i];
        }
        m[i * n + i] = diag;
        if i + 1 < n {
            let v = off[i] * (sh(i) + sh(i + 1));
            m[i * n + i + 1] = v;
            m[(i + 1) * n + i] = v;
        }
        if i + 2 < n {
            let v = off[i] * off[i + 1];
            m[i * n + i + 2] = v;
            m[(i + 2) * n + i] = v;
        }
    }
    let rb = fac.residual_beta();
    m[(n - 1) * n + (n - 1)] += rb * rb;

    let eig = symmetric_eigen(n, &m);
    let mut v_hat = fac.lift(&eig.vectors[0]);
    let nv = vecops::norm(&v_hat);
    vecops::scale(1.0 / nv, &mut v_hat);

    Ok(MinEvecResult {
        lambda_hat,
        v_hat,
        case: MinEvecCase::NegativeEig,
        matvecs_used: op.matvecs() - before,
        lanczos_steps: n,
        draw_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SepCase {
    /// `γ ≤ 1`: `‖W‖op ≤ 2L1`, `S = 0`.
    InsideDoubled,
    /// `γ > 1`: `‖W/γ‖op ≤ 2L1` and `S` separates `W` from the `L1` ball.
    Separated,
}

/// Rank-one symmetric matrix `coeff · u uᵀ`, `u` unit.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub coeff: f64,
    pub u: Vec<f64>,
}

impl RankOne {
    pub fn to_dense(&self) -> SymOperator {
        SymOperator::rank_one(self.coeff, &self.u)
    }

    /// `⟨S, W⟩ = coeff · uᵀ W u`, read from dense storage.
    pub fn frobenius_dot(&self, w: &SymOperator) -> f64 {
        let d = self.u.len();
        let mut acc = 0.0;
        for i in 0..d {
            let row = &w.entries()[i * d..(i + 1) * d];
            acc += self.u[i] * vecops::dot(row, &self.u);
        }
        self.coeff * acc
    }

    /// `‖S‖_F = ‖S‖_* = |coeff|·‖u‖²`
    pub fn frobenius_norm(&self) -> f64 {
        self.coeff.abs() * vecops::dot(&self.u, &self.u)
    }
}

#[derive(Debug, Clone)]
pub struct SepResult {
    pub gamma: f64,
    /// `None` means `S = 0` (Case I).
    pub separator: Option<RankOne>,
    pub case: SepCase,
    pub matvecs_used: u64,
    pub lanczos_steps: usize,
    pub ritz_max: f64,
    pub ritz_min: f64,
    pub draw_index: u64,
}

impl SepResult {
    pub fn s_mat(&self, dim: usize) -> SymOperator {
        match &self.separator {
            Some(r) => r.to_dense(),
            None => SymOperator::zeros(dim),
        }
    }
}

/// `⌈½·log(11d/q²) + ½⌉`, uncapped.
pub fn sep_steps(d: usize, q: f64) -> usize {
    let n = 0.5 * libm::log(11.0 * d as f64 / (q * q)) + 0.5;
    libm::ceil(n).max(1.0) as usize
}

/// The `SEP(W; q)` oracle for the ball `{‖B‖op ≤ l1}`.
pub fn sep<O: SymmetricOp + ?Sized>(
    w: &O,
    l1: f64,
    q: f64,
    norm_scale: f64,
    rng: &mut SeedStream,
) -> Result<SepResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidProbability(q));
    }
    let d = w.dim();
    let before = w.matvecs();
    let draw_index = rng.draws();
    let v1 = rng.unit_vector(d);
    let n = sep_steps(d, q).min(d);
    let mut lz = Lanczos::start(w, v1, norm_scale);
    lz.extend_to(n);
    let fac = lz.finish();
    let t = tridiag_eig(&fac.alphas, fac.offdiag());
    let (lam_max, z_max) = t.max_pair();
    let (lam_min, z_min) = t.min_pair();
    let gamma = lam_max.max(-lam_min) / l1;
    let steps = fac.steps();

    let separator = if gamma <= 1.0 {
        None
    } else {
        let (coeff, z) = if lam_max >= -lam_min { (1.0 / l1, z_max) } else { (-1.0 / l1, z_min) };
        let mut u = fac.lift(z);
        let nu = vecops::norm(&u);
        vecops::scale(1.0 / nu, &mut u);
        Some(RankOne { coeff, u })
    };
    Ok(SepResult {
        gamma,
        case: if separator.is_some() { SepCase::Separated } else { SepCase::InsideDoubled },
        separator,
        matvecs_used: w.matvecs() - before,
        lanczos_steps: steps,
        ritz_max: lam_max,
        ritz_min: lam_min,
        draw_index,
    })
}
