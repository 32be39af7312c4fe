//! Hyperparameters `(D, η, T, K, δ)` from the problem constants and budget.

use crate::problems::ObjectiveSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HyperParams {
    /// Per-step displacement radius `D`.
    pub d_radius: f64,
    pub eta: f64,
    /// Episode length `T`.
    pub t_len: usize,
    /// Number of episodes `K`.
    pub k_eps: usize,
    /// `M = K·T`.
    pub m_total: usize,
    /// Trust-region accuracy `δ`.
    pub delta_tr: f64,
    /// Total failure budget `p`, split as `p/(2M)` per randomized call.
    pub p_fail: f64,
    /// The `f(x0) − f*` bound the parameters were derived from, if any.
    pub gap: Option<f64>,
}

impl HyperParams {
    /// Explicit parameters; `M = K·T`.
    pub fn manual(d_radius: f64, eta: f64, t_len: usize, k_eps: usize, delta_tr: f64, p_fail: f64) -> Result<Self> {
        let p = Self {
            d_radius,
            eta,
            t_len,
            k_eps,
            m_total: t_len * k_eps,
            delta_tr,
            p_fail,
            gap: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_radius > 0.0 && self.d_radius.is_finite()) {
            return Err(Error::NonPositiveRadius(self.d_radius));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParams("eta must be positive"));
        }
        if !(self.delta_tr > 0.0 && self.delta_tr.is_finite()) {
            return Err(Error::InvalidDelta(self.delta_tr));
        }
        if self.t_len == 0 || self.k_eps == 0 {
            return Err(Error::InvalidParams("T and K must be at least 1"));
        }
        if self.m_total != self.t_len * self.k_eps {
            return Err(Error::InvalidParams("M must equal K*T"));
        }
        if !(self.p_fail > 0.0 && self.p_fail < 1.0) {
            return Err(Error::InvalidProbability(self.p_fail));
        }
        Ok(())
    }

    /// Per-call failure probability `p/(2M)`.
    pub fn q_per_call(&self) -> f64 {
        self.p_fail / (2.0 * self.m_total as f64)
    }
}

/// Raw `(D, η, T)` before rounding, for a budget `m`.
pub fn raw_params(gap: f64, d: usize, l1: f64, l2: f64, m: usize) -> (f64, f64, f64) {
    let df = d as f64;
    let mf = m as f64;
    let big_d = libm::pow(
        gap / (52.0 * libm::pow(df, 0.4) * libm::pow(l1, 0.4) * libm::pow(l2, 0.6) * mf),
        5.0 / 13.0,
    );
    let eta = libm::pow(1.0 / (24.0 * df * l1 * libm::pow(l2, 2.0 / 3.0) * libm::pow(big_d, 2.0 / 3.0)), 0.6);
    let t = 3.0 / libm::cbrt(big_d * l2 * eta);
    (big_d, eta, t)
}

/// Parameters for a budget of `m_budget` iterations.
///
/// `gap_bound` overrides `f(x0) − f*` from the value oracle. `T` is the
/// rounded episode length even if it exceeds the budget (then `K = 1`).
pub fn compute_hyperparams(
    spec: &ObjectiveSpec,
    m_budget: usize,
    p_fail: f64,
    gap_bound: Option<f64>,
) -> Result<HyperParams> {
    if m_budget == 0 {
        return Err(Error::InvalidParams("budget must be at least 1"));
    }
    if !(spec.l2 > 0.0) {
        return Err(Error::ZeroL2);
    }
    let gap = gap_bound.or_else(|| spec.gap()).ok_or(Error::NoGapEstimate)?;
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::InvalidParams("gap bound must be positive"));
    }
    let (d_radius, eta, t_raw) = raw_params(gap, spec.dim, spec.l1, spec.l2, m_budget);
    let t_len = (libm::round(t_raw) as usize).max(1);
    let k_eps = (m_budget / t_len).max(1);
    let m_total = k_eps * t_len;
    let p = HyperParams {
        d_radius,
        eta,
        t_len,
        k_eps,
        m_total,
        delta_tr: d_radius / (eta * t_len as f64),
        p_fail,
        gap: Some(gap),
    };
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{catalog, quadratic};
    use crate::SymOperator;

    #[test]
    fn unit_instance() {
        let (d, eta, t) = raw_params(52.0, 1, 1.0, 1.0, 1);
        assert!((d - 1.0).abs() < 1e-15);
        assert!((eta - libm::pow(1.0 / 24.0, 0.6)).abs() < 1e-15);
        assert_eq!(libm::round(t), 6.0);
    }

    #[test]
    fn errors() {
        let q = quadratic(SymOperator::identity(2));
        assert_eq!(compute_hyperparams(&q, 10, 0.01, None), Err(Error::ZeroL2));
        let mut c = catalog("cosine_mixture", 2, 0).unwrap();
        c.value = None;
        assert_eq!(compute_hyperparams(&c, 10, 0.01, None), Err(Error::NoGapEstimate));
        assert!(compute_hyperparams(&c, 10, 0.01, Some(1.0)).is_ok());
    }

    #[test]
    fn budget_structure() {
        let c = catalog("cosine_mixture", 4, 0).unwrap();
        let p = compute_hyperparams(&c, 120, 0.01, None).unwrap();
        assert_eq!(p.m_total, p.k_eps * p.t_len);
        assert!(p.m_total <= 120);
        assert!((p.delta_tr - p.d_radius / (p.eta * p.t_len as f64)).abs() < 1e-15);
    }
}
