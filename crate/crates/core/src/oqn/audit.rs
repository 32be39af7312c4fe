//! Whole-run audits of the inequalities the method's analysis rests on.
//!
//! Every check is reported as a [`Margin`] (`rhs − lhs`, with a tolerance
//! scaled to the right-hand side) so failures show how far off they were.

use alloc::vec::Vec;

use super::{HintRule, RunReport};
use crate::eig::sep_steps;
use crate::problems::ObjectiveSpec;

/// `lhs ≤ rhs` up to `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Margin {
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
}

impl Margin {
    pub fn new(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self { lhs, rhs, tol }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn ok(&self) -> bool {
        self.margin() >= -self.tol
    }
}

#[derive(Debug, Clone, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AuditSummary {
    /// Shifting regret against `4KD²/η + (3η/2)(‖g_1−h_1‖² + Σℓ_n) + 2DKTδ`.
    pub regret: Margin,
    /// Worst per-step `f(x_{n−1}) − f(x_n) + ⟨g_n,Δ_n⟩ + L2D³/48 ≥ 0`, normalized by `1 + |f|`.
    pub descent_min: Option<f64>,
    pub descent_ok: Option<bool>,
    /// Worst per-episode `‖mean g‖ + (L2/2)T²D² − ‖∇f(w̄)‖`.
    pub averaging_min: Option<f64>,
    pub averaging_ok: bool,
    /// Mean episode gradient norm against the conversion bound.
    pub conversion: Option<Margin>,
    /// Dynamic regret of the Hessian learner against `H_n = ∇²f(z_n)`.
    pub dynamic_regret: Option<Margin>,
    /// `max_n ℓ_n(H_n)` against `L2²D⁴/4`.
    pub comparator_loss: Option<Margin>,
    /// `max_n ‖H_{n+1} − H_n‖_F` against `2L2√d·D`.
    pub comparator_path: Option<Margin>,
    /// Worst surrogate-domination margin and the number of negative ones.
    pub surrogate_min: Option<f64>,
    pub surrogate_violations: usize,
    /// Worst `‖Δ − Π(Δ − η(AΔ + b))‖ / (ηδ)`.
    pub fixed_point_ratio: Option<f64>,
    pub hint_identity_max: Option<f64>,
    /// Gradient total against `2M + K + 1`.
    pub gradients_expected: u64,
    pub gradients_ok: bool,
    /// Worst `residual/δ` over trust-region calls.
    pub tr_residual_ratio: f64,
    /// Worst `matvecs/envelope` over trust-region calls.
    pub tr_envelope_ratio: f64,
    /// Worst `SEP` matvecs against `⌈½log(11d/q²) + ½⌉`.
    pub sep_budget_ok: bool,
    pub max_delta_ratio: f64,
}

impl AuditSummary {
    /// Deterministic checks only; probabilistic ones (surrogate) are reported
    /// but not gated here.
    pub fn all_ok(&self) -> bool {
        self.regret.ok()
            && self.descent_ok.unwrap_or(true)
            && self.averaging_ok
            && self.conversion.is_none_or(|m| m.ok())
            && self.comparator_loss.is_none_or(|m| m.ok())
            && self.comparator_path.is_none_or(|m| m.ok())
            && self.gradients_ok
            && self.tr_residual_ratio <= 1.0
            && self.sep_budget_ok
            && self.max_delta_ratio <= 1.0 + 1e-12
    }
}

/// Relative tolerance for whole-run inequalities.
pub const REL_TOL: f64 = 1e-6;
/// Tolerance for per-step and per-episode inequalities.
pub const STEP_TOL: f64 = 1e-9;

/// Recomputes every audit from the report's logs.
pub fn audit_regret(r: &RunReport, spec: &ObjectiveSpec) -> AuditSummary {
    let p = &r.params;
    let big_d = p.d_radius;
    let eta = p.eta;
    let k = r.episodes.len() as f64;
    let t = p.t_len as f64;
    let d = spec.dim as f64;
    let mut a = AuditSummary::default();

    // shifting regret
    let reg: f64 = r.episodes.iter().map(|e| e.episode_regret).sum();
    let sum_loss: f64 = r.steps.iter().filter_map(|s| s.loss).sum();
    let rhs = 4.0 * k * big_d * big_d / eta
        + 1.5 * eta * (r.g1_minus_h1_sq + sum_loss)
        + 2.0 * big_d * k * t * p.delta_tr;
    a.regret = Margin::new(reg, rhs, REL_TOL * rhs.abs());

    // per-step descent
    let mut worst: Option<f64> = None;
    for s in &r.steps {
        if let (Some(m), Some(f)) = (s.descent_margin, s.f_x) {
            let rel = m / (1.0 + f.abs());
            worst = Some(worst.map_or(rel, |w: f64| w.min(rel)));
        }
    }
    a.descent_min = worst;
    a.descent_ok = worst.map(|w| w >= -STEP_TOL);

    // averaging
    a.averaging_min = r.episodes.iter().map(|e| e.averaging_margin).reduce(f64::min);
    a.averaging_ok = a.averaging_min.is_none_or(|m| m >= -STEP_TOL);

    // conversion bound
    if !r.episodes.is_empty() && !r.stationary_start {
        let gap = r.f0.map(|f0| f0 - spec.f_lower).or(p.gap);
        if let Some(gap) = gap {
            let dkt = big_d * k * t;
            let lhs = r.episodes.iter().map(|e| e.grad_norm_at_wbar).sum::<f64>() / k;
            let rhs = gap / dkt + reg / dkt + spec.l2 * big_d * big_d / 48.0 + 0.5 * spec.l2 * t * t * big_d * big_d;
            a.conversion = Some(Margin::new(lhs, rhs, REL_TOL * rhs.abs()));
        }
    }

    // Hessian comparators
    let hl: Option<Vec<f64>> = r.steps.iter().filter(|s| s.loss.is_some()).map(|s| s.hess_loss).collect();
    if let (Some(hl), Some(w1h1)) = (hl, r.w1_minus_h1_sq) {
        if r.hint == HintRule::QuasiNewton {
            let path: f64 = r.steps.iter().filter_map(|s| s.hess_path).sum();
            let rhs = 16.0 * big_d * big_d * w1h1
                + 2.0 * hl.iter().sum::<f64>()
                + 64.0 * spec.l1 * big_d * big_d * libm::sqrt(d) * path;
            a.dynamic_regret = Some(Margin::new(sum_loss, rhs, REL_TOL * rhs.abs()));
        }
        let max_hl = hl.iter().copied().fold(0.0, f64::max);
        a.comparator_loss = Some(Margin::new(max_hl, spec.l2 * spec.l2 * libm::pow(big_d, 4.0) / 4.0, STEP_TOL));
        let max_path = r.steps.iter().filter_map(|s| s.hess_path).fold(0.0, f64::max);
        a.comparator_path = Some(Margin::new(max_path, 2.0 * spec.l2 * libm::sqrt(d) * big_d, STEP_TOL));
    }
    let sm: Vec<f64> = r.steps.iter().filter_map(|s| s.surrogate_margin).collect();
    if !sm.is_empty() {
        a.surrogate_min = sm.iter().copied().reduce(f64::min);
        a.surrogate_violations = sm.iter().filter(|&&m| m < -1e-8).count();
    }
    a.fixed_point_ratio = r
        .steps
        .iter()
        .filter_map(|s| s.fixed_point_gap)
        .map(|g| g / (eta * p.delta_tr))
        .reduce(f64::max);
    a.hint_identity_max = r.steps.iter().filter_map(|s| s.hint_identity_err).reduce(f64::max);

    // counting
    a.gradients_expected = if r.stationary_start {
        1
    } else {
        2 * r.steps_done as u64 + r.episodes.len() as u64 + 1 + (r.early_exit && r.steps_done < p.m_total) as u64
    };
    a.gradients_ok = r.gradients == a.gradients_expected;
    a.tr_residual_ratio = r.steps.iter().filter_map(|s| s.tr.as_ref()).map(|t| t.residual / t.delta).fold(0.0, f64::max);
    a.tr_envelope_ratio =
        r.steps.iter().filter_map(|s| s.tr.as_ref()).map(|t| t.matvecs as f64 / t.envelope).fold(0.0, f64::max);
    let sep_cap = sep_steps(spec.dim, p.q_per_call()).min(spec.dim) as u64;
    a.sep_budget_ok = r.steps.iter().filter_map(|s| s.learner.as_ref()).all(|l| l.sep_matvecs <= sep_cap);
    a.max_delta_ratio = r.steps.iter().map(|s| s.delta_next_norm / big_d).fold(0.0, f64::max);
    a
}
