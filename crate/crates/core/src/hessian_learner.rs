//! Online learning of the Hessian approximations `B_n` over the operator-norm
//! ball `{‖B‖op ≤ L1}` without ever projecting onto it.
//!
//! The learner keeps an ambient iterate `W_n` in the Frobenius ball of radius
//! `√d·L1` and plays `B_n = W_n` or `W_n/γ_n` according to the `SEP` oracle.
//! In the separated case the gradient is corrected with the separating
//! direction so the surrogate linear regret dominates the true one.

use alloc::vec::Vec;

use crate::eig::{sep, SepCase, SepResult};
use crate::linops::{MatvecCounter, SymOperator, SymmetricOp};
use crate::rng::SeedStream;
use crate::{vecops, Error, Result};

/// `ℓ(B) = ‖y − B s‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadLoss {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
}

impl QuadLoss {
    pub fn new(y: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if y.len() != s.len() {
            return Err(Error::DimensionMismatch { expected: y.len(), got: s.len() });
        }
        Ok(Self { y, s })
    }

    fn check(&self, d: usize) -> Result<()> {
        for v in [&self.y, &self.s] {
            if v.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: v.len() });
            }
        }
        Ok(())
    }
}

/// `r = y − B s` (one matvec) together with `B s`.
fn residual<O: SymmetricOp + ?Sized>(b: &O, q: &QuadLoss) -> (Vec<f64>, Vec<f64>) {
    let bs = b.apply(&q.s);
    (vecops::sub(&q.y, &bs), bs)
}

/// `‖y − B s‖²`, one matvec.
pub fn loss<O: SymmetricOp + ?Sized>(b: &O, q: &QuadLoss) -> Result<f64> {
    q.check(b.dim())?;
    let (r, _) = residual(b, q);
    Ok(vecops::dot(&r, &r))
}

/// `∇ℓ(B) = −r sᵀ − s rᵀ` with `r = y − B s`, one matvec.
pub fn loss_gradient(b: &SymOperator, q: &QuadLoss) -> Result<SymOperator> {
    q.check(b.dim())?;
    let (r, _) = residual(b, q);
    let mut g = SymOperator::zeros(b.dim());
    g.add_sym_outer(-1.0, &r, &q.s);
    Ok(g)
}

/// `ρ = 1/(16D²)`.
pub fn default_rho(d_radius: f64) -> Result<f64> {
    if !(d_radius > 0.0) {
        return Err(Error::NonPositiveRadius(d_radius));
    }
    Ok(1.0 / (16.0 * d_radius * d_radius))
}

/// One learner update, as seen from outside.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LearnerRecord {
    /// `γ_n` of the played `B_n`.
    pub gamma: f64,
    pub case: SepCase,
    /// `ℓ_n(B_n)`.
    pub loss: f64,
    /// `‖G̃_n‖_F`
    pub g_tilde_fro: f64,
    /// `max{0, −⟨G_n, B_n⟩}`, the weight on the separator.
    pub correction: f64,
    /// `‖W_{n+1}‖_F` after projection.
    pub w_next_fro: f64,
    /// Whether the Frobenius projection was active.
    pub projected: bool,
    /// Matvecs of the `SEP` call that produced `B_{n+1}`.
    pub sep_matvecs: u64,
    pub sep_steps: usize,
    pub sep_draw_index: u64,
}

/// Matrices behind one update, for the surrogate audit.
#[derive(Debug, Clone)]
pub struct LearnerSnapshot {
    pub w: SymOperator,
    pub b: SymOperator,
    pub grad: SymOperator,
    pub g_tilde: SymOperator,
}

impl LearnerSnapshot {
    /// `⟨G̃, W − H⟩ − ⟨G, B − H⟩`; nonnegative whenever `‖H‖op ≤ L1` and the
    /// `SEP` call succeeded.
    pub fn surrogate_margin(&self, h: &SymOperator) -> f64 {
        let lhs = self.grad.frobenius_dot(&self.b) - self.grad.frobenius_dot(h);
        let rhs = self.g_tilde.frobenius_dot(&self.w) - self.g_tilde.frobenius_dot(h);
        rhs - lhs
    }
}

/// `(W_n, B_n)` together with the cached `SEP` output that produced `B_n`.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub w_mat: SymOperator,
    pub b_mat: SymOperator,
    pub rho: f64,
    pub l1: f64,
    pub dim: usize,
    pub q_per_call: f64,
    pub sep_out: SepResult,
    pub sep_calls: u64,
}

impl LearnerState {
    /// `W_1 = 0`; `B_1` comes from one `SEP` call on `W_1` (which gives `B_1 = 0`).
    pub fn new(
        dim: usize,
        l1: f64,
        rho: f64,
        q_per_call: f64,
        counter: MatvecCounter,
        rng: &mut SeedStream,
    ) -> Result<Self> {
        Self::from_w(SymOperator::zeros(dim).with_counter(counter), l1, rho, q_per_call, rng)
    }

    /// Starts from an arbitrary `W_1` in the Frobenius ball.
    pub fn from_w(w: SymOperator, l1: f64, rho: f64, q_per_call: f64, rng: &mut SeedStream) -> Result<Self> {
        if !(l1 > 0.0) {
            return Err(Error::InvalidParams("l1 must be positive"));
        }
        if !(rho > 0.0) {
            return Err(Error::InvalidParams("rho must be positive"));
        }
        let dim = w.dim();
        let (b, out) = play(&w, l1, q_per_call, rng)?;
        Ok(Self { w_mat: w, b_mat: b, rho, l1, dim, q_per_call, sep_out: out, sep_calls: 1 })
    }

    pub fn radius(&self) -> f64 {
        libm::sqrt(self.dim as f64) * self.l1
    }

    pub fn gamma(&self) -> f64 {
        self.sep_out.gamma
    }
}

/// Runs `SEP(W)` and returns the played `B` with the oracle output.
fn play(w: &SymOperator, l1: f64, q: f64, rng: &mut SeedStream) -> Result<(SymOperator, SepResult)> {
    let out = sep(w, l1, q, w.frobenius_norm(), rng)?;
    let mut b = w.clone();
    if out.case == SepCase::Separated {
        b.scale(1.0 / out.gamma);
    }
    Ok((b, out))
}

/// Observes `ℓ_n` at the played `B_n`, takes the surrogate gradient step on
/// `W`, projects onto the Frobenius ball and queries `SEP(W_{n+1})` for
/// `B_{n+1}`.
///
/// Returns the record and, when `keep` is set, the matrices of step `n`.
pub fn learner_step(
    state: &mut LearnerState,
    q: &QuadLoss,
    rng: &mut SeedStream,
    keep: bool,
) -> Result<(LearnerRecord, Option<LearnerSnapshot>)> {
    q.check(state.dim)?;
    let (r, bs) = residual(&state.b_mat, q);
    let loss_val = vecops::dot(&r, &r);
    let gamma = state.sep_out.gamma;
    let case = state.sep_out.case;

    // ⟨G, B⟩ = −2 rᵀ B s
    let g_dot_b = -2.0 * vecops::dot(&r, &bs);
    let correction = match case {
        SepCase::Separated => (-g_dot_b).max(0.0),
        SepCase::InsideDoubled => 0.0,
    };

    let mut grad = SymOperator::zeros(state.dim);
    grad.add_sym_outer(-1.0, &r, &q.s);
    let mut g_tilde = grad.clone();
    if correction > 0.0 {
        if let Some(sep) = &state.sep_out.separator {
            g_tilde.add_rank_one(correction * sep.coeff, &sep.u);
        }
    }

    let mut w_next = state.w_mat.clone();
    w_next.add_scaled(-state.rho, &g_tilde);
    let nf = w_next.frobenius_norm();
    let radius = state.radius();
    let projected = nf > radius;
    if projected {
        w_next.scale(radius / nf);
    }

    let snapshot = keep.then(|| LearnerSnapshot {
        w: state.w_mat.clone(),
        b: state.b_mat.clone(),
        grad: grad.clone(),
        g_tilde: g_tilde.clone(),
    });

    let (b_next, out) = play(&w_next, state.l1, state.q_per_call, rng)?;
    let record = LearnerRecord {
        gamma,
        case,
        loss: loss_val,
        g_tilde_fro: g_tilde.frobenius_norm(),
        correction,
        w_next_fro: w_next.frobenius_norm(),
        projected,
        sep_matvecs: out.matvecs_used,
        sep_steps: out.lanczos_steps,
        sep_draw_index: out.draw_index,
    };
    state.w_mat = w_next;
    state.b_mat = b_next;
    state.sep_out = out;
    state.sep_calls += 1;
    Ok((record, snapshot))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn loss_examples() {
        let b = SymOperator::zeros(2);
        let q = QuadLoss::new(e(2, 0), e(2, 0)).unwrap();
        assert_eq!(loss(&b, &q).unwrap(), 1.0);
        let b = SymOperator::diagonal(&[2.0, 3.0]);
        let q = QuadLoss::new(alloc::vec![2.0, 3.0], alloc::vec![1.0, 1.0]).unwrap();
        assert_eq!(loss(&b, &q).unwrap(), 0.0);
        assert_eq!(b.matvecs(), 1);
        assert!(matches!(loss(&SymOperator::zeros(3), &q), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn loss_gradient_examples() {
        let b = SymOperator::diagonal(&[2.0, 3.0]);
        let q = QuadLoss::new(alloc::vec![2.0, 3.0], alloc::vec![1.0, 1.0]).unwrap();
        assert_eq!(loss_gradient(&b, &q).unwrap().frobenius_norm(), 0.0);

        let q = QuadLoss::new(e(2, 0), e(2, 1)).unwrap();
        let g = loss_gradient(&SymOperator::zeros(2), &q).unwrap();
        assert_eq!(g.entries(), &[0.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(default_rho(1.0).unwrap(), 1.0 / 16.0);
        assert_eq!(default_rho(0.5).unwrap(), 0.25);
        assert_eq!(default_rho(2.0).unwrap(), 1.0 / 64.0);
        assert_eq!(default_rho(0.0), Err(Error::NonPositiveRadius(0.0)));
    }

    #[test]
    fn zero_s_leaves_w_at_zero() {
        let mut s = SeedStream::new(1);
        let mut st = LearnerState::new(3, 1.0, 0.1, 0.01, MatvecCounter::new(), &mut s).unwrap();
        let q = QuadLoss::new(alloc::vec![1.0, 2.0, 3.0], alloc::vec![0.0; 3]).unwrap();
        let (rec, _) = learner_step(&mut st, &q, &mut s, false).unwrap();
        assert_eq!(rec.g_tilde_fro, 0.0);
        assert_eq!(st.w_mat.frobenius_norm(), 0.0);
        assert_eq!(st.b_mat.frobenius_norm(), 0.0);
    }

    #[test]
    fn hand_evaluated_step() {
        let mut s = SeedStream::new(2);
        let mut st = LearnerState::new(2, 1.0, 1.0 / 16.0, 0.01, MatvecCounter::new(), &mut s).unwrap();
        assert_eq!(st.gamma(), 0.0);
        assert_eq!(st.b_mat.frobenius_norm(), 0.0);
        let q = QuadLoss::new(e(2, 0), e(2, 0)).unwrap();
        let (rec, snap) = learner_step(&mut st, &q, &mut s, true).unwrap();
        assert_eq!(rec.case, SepCase::InsideDoubled);
        assert_eq!(snap.unwrap().grad.entries(), &[-2.0, 0.0, 0.0, 0.0]);
        assert_eq!(st.w_mat.entries(), &[0.125, 0.0, 0.0, 0.0]);
        assert!(!rec.projected);
    }

    #[test]
    fn projection_halves_when_twice_the_radius() {
        // √d·L1 = √2; choose W − ρG̃ with Frobenius norm 2√2
        let mut s = SeedStream::new(3);
        let w = SymOperator::zeros(2);
        let mut st = LearnerState::from_w(w, 1.0, 1.0, 0.01, &mut s).unwrap();
        let a = 2.0f64;
        let q = QuadLoss::new(alloc::vec![a, 0.0], alloc::vec![1.0, 0.0]).unwrap();
        // G = −2a e1e1ᵀ, W − ρG = 2a e1e1ᵀ with norm 4 → needs 2√2
        let target = 2.0 * 2.0f64.sqrt();
        st.rho = target / (2.0 * a);
        let (rec, _) = learner_step(&mut st, &q, &mut s, false).unwrap();
        assert!(rec.projected);
        assert!((st.w_mat.get(0, 0) - target / 2.0).abs() < 1e-14);
        assert!((st.w_mat.frobenius_norm() - 2.0f64.sqrt()).abs() < 1e-14);
    }
}
