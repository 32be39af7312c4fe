//! Comparison methods: plain gradient descent and the optimistic-gradient
//! conversion (the main method with `B ≡ 0`).

use oqn_core::oqn::{run, AuditLevel, HintRule, HyperParams, RunOptions, RunReport};
use oqn_core::problems::{eval_gradient, GradientCounter, ObjectiveSpec};
use oqn_core::vecops;
use oqn_core::{Result, SeedStream};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GdReport {
    pub step_size: f64,
    /// `‖∇f(x_k)‖` for `k = 0..steps`.
    pub grad_norms: Vec<f64>,
    pub x_final: Vec<f64>,
    pub best_grad_norm: f64,
    pub gradients: u64,
}

/// `x_{k+1} = x_k − α∇f(x_k)`, one gradient per step. `α` defaults to `1/L1`.
pub fn baseline_gd(spec: &ObjectiveSpec, steps: usize, step_size: Option<f64>) -> Result<GdReport> {
    let alpha = step_size.unwrap_or(1.0 / spec.l1);
    let counter = GradientCounter::new();
    let mut x = spec.x0.clone();
    let mut grad_norms = Vec::with_capacity(steps);
    for _ in 0..steps {
        let g = eval_gradient(spec, &counter, &x)?;
        grad_norms.push(vecops::norm(&g));
        vecops::axpy(-alpha, &g, &mut x);
    }
    let best_grad_norm = grad_norms.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GdReport { step_size: alpha, grad_norms, x_final: x, best_grad_norm, gradients: counter.get() })
}

/// Optimistic gradient: `h_{n+1} = ∇f(z_n)`, no Hessian learner.
pub fn baseline_og(
    spec: &ObjectiveSpec,
    params: &HyperParams,
    audit: AuditLevel,
    eps_target: Option<f64>,
    rng: &mut SeedStream,
) -> Result<RunReport> {
    run(spec, params, RunOptions { audit, hint: HintRule::OptimisticGradient, eps_target }, rng)
}
