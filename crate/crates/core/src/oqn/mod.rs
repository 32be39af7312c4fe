//! The optimizer: online-to-nonconvex conversion driven by an optimistic
//! learner whose hint is a learned quasi-Newton model.
//!
//! Each iteration moves `x_n = x_{n−1} + Δ_n`, evaluates the gradient at the
//! midpoint `w_n` and at `z_n = x_n + ½Δ_n`, and picks `Δ_{n+1}` by an inexact
//! trust-region solve of the implicit optimistic update. Iterations are grouped
//! into `K` episodes of length `T`; the answer is the best episode average.

mod audit;
mod params;

pub use audit::{audit_regret, AuditSummary, Margin};
pub use params::{compute_hyperparams, raw_params, HyperParams};

use alloc::vec;
use alloc::vec::Vec;

use crate::hessian_learner::{default_rho, learner_step, LearnerRecord, LearnerState, QuadLoss};
use crate::linops::{MatvecCounter, ShiftedOperator, SymOperator, SymmetricOp};
use crate::problems::{eval_gradient, GradientCounter, ObjectiveSpec};
use crate::rng::SeedStream;
use crate::trsolver::{matvec_envelope, tr_solve, TrBranch, TrustRegionSubproblem};
use crate::{vecops, Error, Result};

/// How the next hint is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum HintRule {
    /// `h_{n+1} = ∇f(z_n) + ½B_n(Δ_{n+1} − Δ_n)` with learned `B_n`.
    #[default]
    QuasiNewton,
    /// `B ≡ 0`: `h_{n+1} = ∇f(z_n)` and a closed-form projected update.
    OptimisticGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AuditLevel {
    /// Only what the counters and logged quantities give for free.
    Off,
    /// Adds value-oracle audits (per-step descent, episode bound).
    #[default]
    Episode,
    /// Adds Hessian-oracle audits and dense fixed-point checks.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub audit: AuditLevel,
    pub hint: HintRule,
    /// Stop after the first episode whose `‖∇f(w̄)‖` is at most this.
    pub eps_target: Option<f64>,
}

/// Gradient norm below `STATIONARY_TOL · L1` at `x0` counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrRecord {
    pub branch: TrBranch,
    pub lambda_hat: f64,
    pub matvecs: u64,
    pub residual: f64,
    pub delta: f64,
    pub retried: bool,
    pub lg: f64,
    pub b_bound: f64,
    pub q: f64,
    pub inner_iters: usize,
    /// Cost envelope this call is audited against.
    pub envelope: f64,
    pub draw_index: u64,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepRecord {
    pub n: usize,
    pub g_norm: f64,
    /// `⟨g_n, Δ_n⟩`
    pub g_dot_delta: f64,
    pub delta_next_norm: f64,
    pub tr: Option<TrRecord>,
    /// `ℓ_n(B_n)`; absent on the last step.
    pub loss: Option<f64>,
    pub learner: Option<LearnerRecord>,
    /// `f(x_{n−1}) − f(x_n) + ⟨g_n, Δ_n⟩ + L2·D³/48`
    pub descent_margin: Option<f64>,
    pub f_x: Option<f64>,
    /// `ℓ_n(∇²f(z_n))`
    pub hess_loss: Option<f64>,
    /// `‖∇²f(z_n) − ∇²f(z_{n−1})‖_F`
    pub hess_path: Option<f64>,
    pub surrogate_margin: Option<f64>,
    /// `‖Δ_{n+1} − Π(Δ_{n+1} − η(A_nΔ_{n+1} + b_n))‖`
    pub fixed_point_gap: Option<f64>,
    /// `‖h_{n+1} − ∇f(z_n) − ½B_n(Δ_{n+1} − Δ_n)‖` with a fresh product.
    pub hint_identity_err: Option<f64>,
    pub in_box: bool,
    pub cum_gradients: u64,
    pub cum_matvecs: u64,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeRecord {
    pub k: usize,
    pub w_bar: Vec<f64>,
    pub grad_norm_at_wbar: f64,
    /// `‖(1/T)Σ g_n‖`
    pub mean_g_norm: f64,
    pub u_k: Vec<f64>,
    /// `Σ ⟨g_n, Δ_n − u^k⟩`
    pub episode_regret: f64,
    pub sum_loss: f64,
    /// `‖mean g‖ + (L2/2)T²D² − ‖∇f(w̄)‖`
    pub averaging_margin: f64,
    pub first_step: usize,
    pub last_step: usize,
    pub cum_gradients: u64,
    pub cum_matvecs: u64,
}

#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunReport {
    pub problem: alloc::string::String,
    pub dim: usize,
    pub params: HyperParams,
    pub hint: HintRule,
    pub audit_level: AuditLevel,
    pub seed: u64,
    pub episodes: Vec<EpisodeRecord>,
    pub steps: Vec<StepRecord>,
    pub w_hat: Vec<f64>,
    pub grad_norm_final: f64,
    pub best_episode: Option<usize>,
    pub steps_done: usize,
    pub gradients: u64,
    pub matvecs: u64,
    pub tr_calls: u64,
    pub tr_retries: u64,
    /// Convex, regularized-interior, regularized-boundary.
    pub tr_branches: [u64; 3],
    pub sep_calls: u64,
    pub stationary_start: bool,
    pub early_exit: bool,
    pub box_violations: usize,
    pub f0: Option<f64>,
    /// `‖g_1 − h_1‖²`
    pub g1_minus_h1_sq: f64,
    /// `‖W_1 − ∇²f(z_1)‖_F²` when the Hessian oracle ran.
    pub w1_minus_h1_sq: Option<f64>,
    pub audit: AuditSummary,
}

/// Mutable state of one run between iterations.
#[derive(Debug, Clone)]
pub struct OqnState {
    pub n: usize,
    pub x: Vec<f64>,
    pub delta_vec: Vec<f64>,
    pub hint: Vec<f64>,
    /// `g_{n+1} = ∇f(w_{n+1})`, computed eagerly during step `n`.
    pub g_cached: Option<Vec<f64>>,
    pub grad_z_prev: Option<Vec<f64>>,
    pub learner: Option<LearnerState>,
    pub grads: GradientCounter,
    pub matvecs: MatvecCounter,
    pub options: RunOptions,
    sum_w: Vec<f64>,
    sum_g: Vec<f64>,
    ep_g_dot_delta: f64,
    ep_loss: f64,
    ep_first: usize,
    f_prev: Option<f64>,
    prev_hess: Option<SymOperator>,
    pub f0: Option<f64>,
    pub g1_minus_h1_sq: f64,
    pub w1_minus_h1_sq: Option<f64>,
    pub episodes: Vec<EpisodeRecord>,
    pub steps: Vec<StepRecord>,
    pub tr_calls: u64,
    pub tr_retries: u64,
    pub tr_branches: [u64; 3],
    pub stopped: bool,
}

fn wants_value(opts: &RunOptions, spec: &ObjectiveSpec) -> bool {
    opts.audit >= AuditLevel::Episode && spec.value.is_some()
}

fn wants_hess(opts: &RunOptions, spec: &ObjectiveSpec) -> bool {
    opts.audit >= AuditLevel::Full && spec.hess.is_some()
}

/// `Δ1 = −D∇f(x0)/‖∇f(x0)‖`, `h1 = ∇f(x0)`, `B_1 = 0`. Costs one gradient.
pub fn init(spec: &ObjectiveSpec, params: &HyperParams, options: RunOptions, rng: &mut SeedStream) -> Result<OqnState> {
    params.validate()?;
    if spec.x0.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: spec.x0.len() });
    }
    let grads = GradientCounter::new();
    let matvecs = MatvecCounter::new();
    let g0 = eval_gradient(spec, &grads, &spec.x0)?;
    let gn = vecops::norm(&g0);
    if gn <= STATIONARY_TOL * spec.l1 {
        return Err(Error::StationaryStart(gn));
    }
    let d = spec.dim;
    let mut delta_vec = g0.clone();
    vecops::scale(-params.d_radius / gn, &mut delta_vec);
    let learner = match options.hint {
        HintRule::QuasiNewton => Some(LearnerState::new(
            d,
            spec.l1,
            default_rho(params.d_radius)?,
            params.q_per_call(),
            matvecs.clone(),
            rng,
        )?),
        HintRule::OptimisticGradient => None,
    };
    let f0 = if wants_value(&options, spec) { Some(spec.value_at(&spec.x0)?) } else { None };
    Ok(OqnState {
        n: 0,
        x: spec.x0.clone(),
        delta_vec,
        hint: g0,
        g_cached: None,
        grad_z_prev: None,
        learner,
        grads,
        matvecs,
        options,
        sum_w: vec![0.0; d],
        sum_g: vec![0.0; d],
        ep_g_dot_delta: 0.0,
        ep_loss: 0.0,
        ep_first: 1,
        f_prev: f0,
        prev_hess: None,
        f0,
        g1_minus_h1_sq: 0.0,
        w1_minus_h1_sq: None,
        episodes: Vec::new(),
        steps: Vec::new(),
        tr_calls: 0,
        tr_retries: 0,
        tr_branches: [0; 3],
        stopped: false,
    })
}

/// `b_bound = max{2L1, L1 + 1/η}` for `A_n = ½B_n + I/η` with `‖B_n‖op ≤ 2L1`.
pub fn tr_b_bound(l1: f64, eta: f64) -> f64 {
    (2.0 * l1).max(l1 + 1.0 / eta)
}

/// One full iteration `n = state.n + 1`.
pub fn step(state: &mut OqnState, spec: &ObjectiveSpec, params: &HyperParams, rng: &mut SeedStream) -> Result<()> {
    if state.n >= params.m_total {
        return Err(Error::InvalidParams("iteration budget exhausted"));
    }
    let opts = state.options;
    let n = state.n + 1;
    let last = n == params.m_total;
    let d = spec.dim;
    let big_d = params.d_radius;
    let eta = params.eta;
    let q = params.q_per_call();

    let d_n = core::mem::take(&mut state.delta_vec);
    let x = vecops::add(&state.x, &d_n);
    let w = vecops::add_scaled(&state.x, 0.5, &d_n);
    let g = match state.g_cached.take() {
        Some(g) => g,
        None => eval_gradient(spec, &state.grads, &w)?,
    };
    let z = vecops::add_scaled(&x, 0.5, &d_n);
    let gz = eval_gradient(spec, &state.grads, &z)?;
    if n == 1 {
        let e = vecops::sub(&g, &state.hint);
        state.g1_minus_h1_sq = vecops::dot(&e, &e);
    }

    // b_n = ∇f(z_n) + g_n − h_n − ½B_nΔ_n − Δ_n/η
    let mut b = vecops::add(&gz, &g);
    vecops::axpy(-1.0, &state.hint, &mut b);
    vecops::axpy(-1.0 / eta, &d_n, &mut b);

    let mut tr_rec = None;
    let mut fixed_point_gap = None;
    let mut hint_identity_err = None;
    let (delta_next, hint_next) = match &state.learner {
        Some(ls) => {
            let bd = ls.b_mat.apply(&d_n);
            vecops::axpy(-0.5, &bd, &mut b);
            let a = ShiftedOperator::affine(&ls.b_mat, 0.5, 1.0 / eta);
            let b_bound = tr_b_bound(spec.l1, eta);
            let lmax = spec.l1 + 1.0 / eta;
            let sub = TrustRegionSubproblem {
                a_op: &a,
                b: &b,
                radius: big_d,
                delta: params.delta_tr,
                q,
                b_bound,
                lambda_max_bound: Some(lmax),
                norm_scale: 0.5 * ls.b_mat.frobenius_norm() + libm::sqrt(d as f64) / eta,
            };
            let sol = tr_solve(&sub, rng)?;
            state.tr_calls += 1;
            state.tr_retries += sol.retried as u64;
            state.tr_branches[match sol.branch {
                TrBranch::Convex => 0,
                TrBranch::RegularizedInterior => 1,
                TrBranch::RegularizedBoundary => 2,
            }] += 1;
            tr_rec = Some(TrRecord {
                branch: sol.branch,
                lambda_hat: sol.lambda_hat,
                matvecs: sol.matvecs_used,
                residual: sol.residual,
                delta: params.delta_tr,
                retried: sol.retried,
                lg: sol.lg,
                b_bound,
                q,
                inner_iters: sol.inner_iters,
                envelope: matvec_envelope(d, b_bound, sol.lg, big_d, params.delta_tr, q),
                draw_index: sol.draw_index,
            });
            let bd_next = ls.b_mat.apply(&sol.delta_vec);
            let mut h = gz.clone();
            vecops::axpy(0.5, &bd_next, &mut h);
            vecops::axpy(-0.5, &bd, &mut h);

            if opts.audit >= AuditLevel::Full {
                let dense = ls.b_mat.clone().with_counter(MatvecCounter::new());
                let diff = vecops::sub(&sol.delta_vec, &d_n);
                let bdiff = dense.apply(&diff);
                let mut e = vecops::sub(&h, &gz);
                vecops::axpy(-0.5, &bdiff, &mut e);
                hint_identity_err = Some(vecops::norm(&e));

                let a_dense = ShiftedOperator::affine(&dense, 0.5, 1.0 / eta);
                let mut ad = a_dense.apply(&sol.delta_vec);
                vecops::axpy(1.0, &b, &mut ad);
                let mut p = vecops::add_scaled(&sol.delta_vec, -eta, &ad);
                vecops::project_ball(&mut p, big_d);
                fixed_point_gap = Some(vecops::norm(&vecops::sub(&p, &sol.delta_vec)));
            }
            (sol.delta_vec, h)
        }
        None => {
            // A = I/η: the minimizer is the projection of −ηb
            let mut v = b.clone();
            vecops::scale(-eta, &mut v);
            vecops::project_ball(&mut v, big_d);
            (v, gz.clone())
        }
    };
    let delta_next_norm = vecops::norm(&delta_next);
    if delta_next_norm > big_d * (1.0 + 1e-12) {
        return Err(Error::OutsideBall { norm: delta_next_norm, radius: big_d });
    }

    let hess_z = if wants_hess(&opts, spec) && !last { Some(spec.hessian_at(&z)?) } else { None };

    let mut loss = None;
    let mut learner_rec = None;
    let mut hess_loss = None;
    let mut surrogate_margin = None;
    if !last {
        let w_next = vecops::add_scaled(&x, 0.5, &delta_next);
        let g_next = eval_gradient(spec, &state.grads, &w_next)?;
        let y = vecops::sub(&g_next, &gz);
        let mut s = vecops::sub(&delta_next, &d_n);
        vecops::scale(0.5, &mut s);
        if let Some(h) = &hess_z {
            let r = vecops::sub(&y, &h.clone().with_counter(MatvecCounter::new()).apply(&s));
            hess_loss = Some(vecops::dot(&r, &r));
            if n == 1 {
                let mut wmh = state.learner.as_ref().map(|l| l.w_mat.clone()).unwrap_or_else(|| SymOperator::zeros(d));
                wmh.add_scaled(-1.0, h);
                let f = wmh.frobenius_norm();
                state.w1_minus_h1_sq = Some(f * f);
            }
        }
        let ql = QuadLoss::new(y, s)?;
        match state.learner.as_mut() {
            Some(ls) => {
                let (rec, snap) = learner_step(ls, &ql, rng, hess_z.is_some())?;
                if let (Some(snap), Some(h)) = (snap, &hess_z) {
                    surrogate_margin = Some(snap.surrogate_margin(h));
                }
                loss = Some(rec.loss);
                learner_rec = Some(rec);
            }
            None => loss = Some(vecops::dot(&ql.y, &ql.y)),
        }
        state.g_cached = Some(g_next);
    }

    let hess_path = match (&hess_z, &state.prev_hess) {
        (Some(h), Some(p)) => {
            let mut diff = h.clone();
            diff.add_scaled(-1.0, p);
            Some(diff.frobenius_norm())
        }
        _ => None,
    };
    if hess_z.is_some() {
        state.prev_hess = hess_z;
    }

    let g_dot_delta = vecops::dot(&g, &d_n);
    let (descent_margin, f_x) = if wants_value(&opts, spec) {
        let fx = spec.value_at(&x)?;
        let fp = state.f_prev.unwrap_or(fx);
        let big_d3 = big_d * big_d * big_d;
        state.f_prev = Some(fx);
        (Some(fp - fx + g_dot_delta + spec.l2 * big_d3 / 48.0), Some(fx))
    } else {
        (None, None)
    };

    vecops::axpy(1.0, &w, &mut state.sum_w);
    vecops::axpy(1.0, &g, &mut state.sum_g);
    state.ep_g_dot_delta += g_dot_delta;
    state.ep_loss += loss.unwrap_or(0.0);

    state.steps.push(StepRecord {
        n,
        g_norm: vecops::norm(&g),
        g_dot_delta,
        delta_next_norm,
        tr: tr_rec,
        loss,
        learner: learner_rec,
        descent_margin,
        f_x,
        hess_loss,
        hess_path,
        surrogate_margin,
        fixed_point_gap,
        hint_identity_err,
        in_box: spec.in_valid_box(&x),
        cum_gradients: state.grads.get(),
        cum_matvecs: state.matvecs.get(),
    });

    state.x = x;
    state.delta_vec = delta_next;
    state.hint = hint_next;
    state.grad_z_prev = Some(gz);
    state.n = n;

    if n % params.t_len == 0 {
        close_episode(state, spec, params, n)?;
        if let Some(eps) = opts.eps_target {
            if state.episodes.last().is_some_and(|e| e.grad_norm_at_wbar <= eps) {
                state.stopped = true;
            }
        }
    }
    Ok(())
}

fn close_episode(state: &mut OqnState, spec: &ObjectiveSpec, params: &HyperParams, n: usize) -> Result<()> {
    let t = params.t_len as f64;
    let big_d = params.d_radius;
    let mut w_bar = core::mem::replace(&mut state.sum_w, vec![0.0; spec.dim]);
    vecops::scale(1.0 / t, &mut w_bar);
    let sum_g = core::mem::replace(&mut state.sum_g, vec![0.0; spec.dim]);
    let gw = eval_gradient(spec, &state.grads, &w_bar)?;
    let grad_norm = vecops::norm(&gw);
    let sg = vecops::norm(&sum_g);
    let u_k = if sg > 0.0 {
        let mut u = sum_g.clone();
        vecops::scale(-big_d / sg, &mut u);
        u
    } else {
        vec![0.0; spec.dim]
    };
    let regret = state.ep_g_dot_delta - vecops::dot(&sum_g, &u_k);
    let mean_g_norm = sg / t;
    state.episodes.push(EpisodeRecord {
        k: state.episodes.len() + 1,
        w_bar,
        grad_norm_at_wbar: grad_norm,
        mean_g_norm,
        u_k,
        episode_regret: regret,
        sum_loss: state.ep_loss,
        averaging_margin: mean_g_norm + 0.5 * spec.l2 * t * t * big_d * big_d - grad_norm,
        first_step: state.ep_first,
        last_step: n,
        cum_gradients: state.grads.get(),
        cum_matvecs: state.matvecs.get(),
    });
    state.ep_g_dot_delta = 0.0;
    state.ep_loss = 0.0;
    state.ep_first = n + 1;
    Ok(())
}

/// Runs all `M` iterations and returns the audited report.
///
/// A stationary start yields a one-episode report at `x0` with a single
/// gradient evaluation.
pub fn run(spec: &ObjectiveSpec, params: &HyperParams, options: RunOptions, rng: &mut SeedStream) -> Result<RunReport> {
    let seed = rng.seed();
    let mut state = match init(spec, params, options, rng) {
        Ok(s) => s,
        Err(Error::StationaryStart(gn)) => return Ok(stationary_report(spec, params, options, seed, gn)),
        Err(e) => return Err(e),
    };
    while state.n < params.m_total && !state.stopped {
        step(&mut state, spec, params, rng)?;
    }
    Ok(finish(state, spec, params, seed))
}

fn stationary_report(spec: &ObjectiveSpec, params: &HyperParams, options: RunOptions, seed: u64, gn: f64) -> RunReport {
    let mut r = RunReport {
        problem: spec.name.clone(),
        dim: spec.dim,
        params: *params,
        hint: options.hint,
        audit_level: options.audit,
        seed,
        episodes: vec![EpisodeRecord {
            k: 1,
            w_bar: spec.x0.clone(),
            grad_norm_at_wbar: gn,
            mean_g_norm: gn,
            u_k: vec![0.0; spec.dim],
            episode_regret: 0.0,
            sum_loss: 0.0,
            averaging_margin: 0.0,
            first_step: 0,
            last_step: 0,
            cum_gradients: 1,
            cum_matvecs: 0,
        }],
        steps: Vec::new(),
        w_hat: spec.x0.clone(),
        grad_norm_final: gn,
        best_episode: Some(1),
        steps_done: 0,
        gradients: 1,
        matvecs: 0,
        tr_calls: 0,
        tr_retries: 0,
        tr_branches: [0; 3],
        sep_calls: 0,
        stationary_start: true,
        early_exit: false,
        box_violations: 0,
        f0: None,
        g1_minus_h1_sq: 0.0,
        w1_minus_h1_sq: None,
        audit: AuditSummary::default(),
    };
    r.audit = audit_regret(&r, spec);
    r
}

/// Assembles the report from a state; `ŵ` is the best episode average
/// (ties go to the earliest episode).
pub fn finish(state: OqnState, spec: &ObjectiveSpec, params: &HyperParams, seed: u64) -> RunReport {
    let mut best: Option<usize> = None;
    for (i, e) in state.episodes.iter().enumerate() {
        if best.is_none_or(|b| e.grad_norm_at_wbar < state.episodes[b].grad_norm_at_wbar) {
            best = Some(i);
        }
    }
    let (w_hat, grad_norm_final) = match best {
        Some(i) => (state.episodes[i].w_bar.clone(), state.episodes[i].grad_norm_at_wbar),
        None => (state.x.clone(), f64::NAN),
    };
    let mut r = RunReport {
        problem: spec.name.clone(),
        dim: spec.dim,
        params: *params,
        hint: state.options.hint,
        audit_level: state.options.audit,
        seed,
        box_violations: state.steps.iter().filter(|s| !s.in_box).count(),
        episodes: state.episodes,
        steps: state.steps,
        w_hat,
        grad_norm_final,
        best_episode: best.map(|i| i + 1),
        steps_done: state.n,
        gradients: state.grads.get(),
        matvecs: state.matvecs.get(),
        tr_calls: state.tr_calls,
        tr_retries: state.tr_retries,
        tr_branches: state.tr_branches,
        sep_calls: state.learner.as_ref().map_or(0, |l| l.sep_calls),
        stationary_start: false,
        early_exit: state.stopped,
        f0: state.f0,
        g1_minus_h1_sq: state.g1_minus_h1_sq,
        w1_minus_h1_sq: state.w1_minus_h1_sq,
        audit: AuditSummary::default(),
    };
    r.audit = audit_regret(&r, spec);
    r
}
