//! Randomized verification suites. Each check draws seeded instances, compares
//! against a dense oracle or a logged certificate, and reports the worst
//! margin seen. Failures are results, not errors.

use std::fmt;
use std::str::FromStr;

use nalgebra::SymmetricEigen;
use oqn_core::eig::{min_evec, sep, MinEvecCase, SepCase};
use oqn_core::oqn::{compute_hyperparams, run, AuditLevel, HintRule, HyperParams, RunOptions, RunReport};
use oqn_core::problems::{catalog, fd_check_gradient, fd_check_hessian, FD_GRAD_STEP, FD_HESS_STEP, CATALOG};
use oqn_core::trsolver::{residual_of, tr_objective, tr_solve, TrustRegionSubproblem};
use oqn_core::{vecops, SeedStream, SymOperator};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brute_tr::{brute_tr, to_matrix};

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("unknown verification level `{0}` (expected quick or full)")]
    UnknownLevel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    Quick,
    Full,
}

impl FromStr for VerifyLevel {
    type Err = VerifyError;
    fn from_str(s: &str) -> Result<Self, VerifyError> {
        match s {
            "quick" => Ok(VerifyLevel::Quick),
            "full" => Ok(VerifyLevel::Full),
            _ => Err(VerifyError::UnknownLevel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    pub failures: usize,
    /// Smallest `rhs − lhs` (or equivalent) seen; negative means a violation.
    pub worst_margin: f64,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} ({} trials, {} failures, worst margin {:.3e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.trials,
            self.failures,
            self.worst_margin
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifySummary {
    pub level: VerifyLevel,
    pub checks: Vec<CheckResult>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn random_sym(d: usize, rng: &mut SeedStream) -> Vec<f64> {
    let mut e = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let v = rng.uniform(-1.0, 1.0);
            e[i * d + j] = v;
            e[j * d + i] = v;
        }
    }
    e
}

fn fro(e: &[f64]) -> f64 {
    vecops::norm(e)
}

fn dense_eigs(d: usize, e: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(to_matrix(d, e)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `tr_solve` against the exact solver: norm, residual and objective.
pub fn tr_vs_brute(trials: usize, max_dim: usize, seed: u64) -> CheckResult {
    let mut rng = SeedStream::new(seed);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    let mut errors = 0;
    for _ in 0..trials {
        let d = 2 + (rng.uniform(0.0, 1.0) * (max_dim - 1) as f64) as usize;
        let d = d.min(max_dim);
        let e = random_sym(d, &mut rng);
        let mut b = rng.unit_vector(d);
        vecops::scale(rng.uniform(0.0, 5.0), &mut b);
        let radius = [0.1, 1.0, 10.0][(rng.uniform(0.0, 3.0) as usize).min(2)];
        let delta = if rng.uniform(0.0, 1.0) < 0.5 { 1e-2 } else { 1e-4 };
        let nf = fro(&e);
        let a = SymOperator::from_dense(d, e.clone()).expect("square");
        let p = TrustRegionSubproblem {
            a_op: &a,
            b: &b,
            radius,
            delta,
            q: 0.01,
            b_bound: 2.0 * nf,
            lambda_max_bound: Some(nf),
            norm_scale: nf,
        };
        let sol = match tr_solve(&p, &mut rng) {
            Ok(s) => s,
            Err(_) => {
                errors += 1;
                failures += 1;
                continue;
            }
        };
        let exact = brute_tr(&to_matrix(d, &e), &b, radius).expect("d <= 20");
        let obj = tr_objective(&a, &b, &sol.delta_vec);
        let res = residual_of(&a, &b, radius, &sol.delta_vec).unwrap_or(f64::INFINITY);
        let m_obj = exact.value + delta * radius + 1e-9 - obj;
        let m_norm = radius * (1.0 + 1e-12) - vecops::norm(&sol.delta_vec);
        let m_res = delta - res;
        let m = m_obj.min(m_norm / radius).min(m_res / delta);
        worst = worst.min(m);
        if m_obj < 0.0 || m_norm < 0.0 || m_res < 0.0 {
            failures += 1;
        }
    }
    CheckResult {
        name: "tr_solve vs brute_tr".into(),
        passed: failures == 0,
        trials,
        failures,
        worst_margin: worst,
        detail: format!("d<={max_dim}, objective within dD+1e-9, residual<=d, norm<=D ({errors} solver errors)"),
    }
}

/// `λ̂ ≤ λmin ≤ λ̂ + δ` in at least 95% of trials, Case-b residual in all.
pub fn min_evec_sandwich(trials: usize, max_dim: usize, q: f64, seed: u64) -> CheckResult {
    let mut rng = SeedStream::new(seed);
    let (mut sandwich_ok, mut case_b, mut resid_fail) = (0usize, 0usize, 0usize);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let d = (2 + (rng.uniform(0.0, 1.0) * (max_dim - 1) as f64) as usize).min(max_dim);
        let mut e = random_sym(d, &mut rng);
        // shift so both PSD and indefinite instances occur
        let shift = rng.uniform(-1.0, 1.5) * 2.0 * (d as f64).sqrt();
        for i in 0..d {
            e[i * d + i] += shift;
        }
        let nf = fro(&e);
        let delta = nf * if rng.uniform(0.0, 1.0) < 0.5 { 0.05 } else { 0.005 };
        let a = SymOperator::from_dense(d, e.clone()).expect("square");
        let r = min_evec(&a, delta, q, 2.0 * nf, nf, &mut rng).expect("valid inputs");
        let lmin = dense_eigs(d, &e)[0];
        let m = (lmin - r.lambda_hat).min(r.lambda_hat + delta - lmin) / delta;
        worst = worst.min(m);
        if m >= -1e-12 {
            sandwich_ok += 1;
        }
        if r.case == MinEvecCase::NegativeEig {
            case_b += 1;
            let av = a.matvec(&r.v_hat).expect("dim");
            let resid = vecops::norm(&vecops::add_scaled(&av, -r.lambda_hat, &r.v_hat));
            if resid > delta {
                resid_fail += 1;
            }
        }
    }
    let frac = sandwich_ok as f64 / trials as f64;
    CheckResult {
        name: "MinEvec sandwich".into(),
        passed: frac >= 0.95 && resid_fail == 0,
        trials,
        failures: trials - sandwich_ok + resid_fail,
        worst_margin: worst,
        detail: format!("sandwich rate {frac:.4} (need 0.95), case-b residual failures {resid_fail}/{case_b}"),
    }
}

/// Membership bounds in at least 95% of trials, exact separation in all.
pub fn sep_contract(trials: usize, max_dim: usize, q: f64, seed: u64) -> CheckResult {
    let mut rng = SeedStream::new(seed);
    let l1 = 1.0;
    let (mut member_ok, mut case2, mut sep_fail) = (0usize, 0usize, 0usize);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let d = (2 + (rng.uniform(0.0, 1.0) * (max_dim - 1) as f64) as usize).min(max_dim);
        let mut e = random_sym(d, &mut rng);
        let c = rng.uniform(0.1, 4.0) / (d as f64).sqrt();
        vecops::scale(c, &mut e);
        let w = SymOperator::from_dense(d, e.clone()).expect("square");
        let r = sep(&w, l1, q, fro(&e), &mut rng).expect("valid inputs");
        let eigs = dense_eigs(d, &e);
        let op = eigs[0].abs().max(eigs[d - 1].abs());
        let bound_ok = match r.case {
            SepCase::InsideDoubled => op <= 2.0 * l1,
            SepCase::Separated => op / r.gamma <= 2.0 * l1,
        };
        if bound_ok {
            member_ok += 1;
        }
        if let Some(s) = &r.separator {
            case2 += 1;
            let m = s.frobenius_dot(&w) - l1 * s.frobenius_norm() - (r.gamma - 1.0) + 1e-9;
            worst = worst.min(m);
            if m < 0.0 {
                sep_fail += 1;
            }
        }
    }
    let frac = member_ok as f64 / trials as f64;
    CheckResult {
        name: "SEP contract".into(),
        passed: frac >= 0.95 && sep_fail == 0,
        trials,
        failures: trials - member_ok + sep_fail,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        detail: format!("membership rate {frac:.4} (need 0.95), separation failures {sep_fail}/{case2}"),
    }
}

/// Runs `hint` on `problem` for every `(d, M, seed)` with full audits.
pub fn audited_runs(
    problem: &str,
    dims: &[usize],
    budgets: &[usize],
    seeds: &[u64],
    hint: HintRule,
) -> Vec<(String, oqn_core::Result<RunReport>)> {
    let grid: Vec<(usize, usize, u64)> =
        dims.iter().flat_map(|&d| budgets.iter().flat_map(move |&m| seeds.iter().map(move |&s| (d, m, s)))).collect();
    grid.par_iter()
        .map(|&(d, m, s)| {
            let label = format!("{problem} d={d} M={m} seed={s}");
            let r = catalog(problem, d, 0).and_then(|spec| {
                let p = compute_hyperparams(&spec, m, 0.01, None)?;
                run(&spec, &p, RunOptions { audit: AuditLevel::Full, hint, eps_target: None }, &mut SeedStream::new(s))
            });
            (label, r)
        })
        .collect()
}

type Extract = fn(&RunReport) -> Vec<(f64, bool)>;

fn over_runs(name: &str, detail: &str, runs: &[(String, oqn_core::Result<RunReport>)], f: Extract) -> CheckResult {
    let mut trials = 0;
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    let mut first_bad = None;
    for (label, r) in runs {
        match r {
            Ok(r) => {
                for (m, ok) in f(r) {
                    trials += 1;
                    worst = worst.min(m);
                    if !ok {
                        failures += 1;
                        first_bad.get_or_insert_with(|| label.clone());
                    }
                }
            }
            Err(e) => {
                trials += 1;
                failures += 1;
                first_bad.get_or_insert_with(|| format!("{label}: {e}"));
            }
        }
    }
    CheckResult {
        name: name.into(),
        passed: failures == 0 && trials > 0,
        trials,
        failures,
        worst_margin: if worst.is_finite() { worst } else { 0.0 },
        detail: match first_bad {
            Some(l) => format!("{detail}; first failure: {l}"),
            None => detail.into(),
        },
    }
}

pub fn regret_check(runs: &[(String, oqn_core::Result<RunReport>)]) -> CheckResult {
    over_runs("regret inequality", "Reg <= RHS within 1e-6 RHS, every run", runs, |r| {
        let m = r.audit.regret;
        vec![(m.margin() / m.rhs.abs().max(1e-300), m.ok())]
    })
}

pub fn conversion_check(runs: &[(String, oqn_core::Result<RunReport>)]) -> CheckResult {
    over_runs("descent and averaging margins", "per-step and per-episode margins >= -1e-9", runs, |r| {
        let mut v = Vec::new();
        if let (Some(m), Some(ok)) = (r.audit.descent_min, r.audit.descent_ok) {
            v.push((m, ok));
        } else {
            v.push((f64::NEG_INFINITY, false));
        }
        if let Some(m) = r.audit.averaging_min {
            v.push((m, r.audit.averaging_ok));
        }
        v
    })
}

pub fn comparator_check(runs: &[(String, oqn_core::Result<RunReport>)]) -> CheckResult {
    over_runs(
        "Hessian comparator bounds",
        "max loss(H) <= L2^2 D^4/4, max path <= 2 L2 sqrt(d) D, dynamic regret <= RHS",
        runs,
        |r| {
            let mut v = Vec::new();
            for m in [r.audit.comparator_loss, r.audit.comparator_path, r.audit.dynamic_regret] {
                match m {
                    Some(m) => v.push((m.margin(), m.ok())),
                    None => v.push((f64::NEG_INFINITY, false)),
                }
            }
            v
        },
    )
}

pub fn counting_check(runs: &[(String, oqn_core::Result<RunReport>)]) -> CheckResult {
    over_runs(
        "counting audits",
        "gradients = 2M+K+1, trust-region matvecs <= envelope, SEP matvecs <= step cap",
        runs,
        |r| {
            let g = r.gradients as f64 - r.audit.gradients_expected as f64;
            vec![
                (-g.abs(), r.audit.gradients_ok),
                (1.0 - r.audit.tr_envelope_ratio, r.audit.tr_envelope_ratio <= 1.0),
                (if r.audit.sep_budget_ok { 0.0 } else { -1.0 }, r.audit.sep_budget_ok),
            ]
        },
    )
}

/// With `L2 = 0` the per-step descent identity is exact.
pub fn quadratic_identity(seed: u64) -> CheckResult {
    let mut rng = SeedStream::new(seed);
    let spec = catalog("quadratic", 5, seed.max(1)).expect("catalog problem");
    let params = HyperParams::manual(0.05, 0.5, 5, 10, 1e-6, 0.01).expect("valid");
    let r = run(&spec, &params, RunOptions { audit: AuditLevel::Episode, ..Default::default() }, &mut rng);
    let (mut trials, mut failures, mut worst) = (0, 0, f64::INFINITY);
    if let Ok(r) = &r {
        for s in &r.steps {
            if let (Some(m), Some(f)) = (s.descent_margin, s.f_x) {
                trials += 1;
                let slack = 1e-10 * (1.0 + f.abs()) - m.abs();
                worst = worst.min(slack);
                if slack < 0.0 {
                    failures += 1;
                }
            }
        }
    }
    CheckResult {
        name: "quadratic descent identity".into(),
        passed: r.is_ok() && failures == 0 && trials > 0,
        trials,
        failures,
        worst_margin: worst,
        detail: "|f(x_{n-1}) - f(x_n) + <g_n, D_n>| <= 1e-10 (1+|f|)".into(),
    }
}

/// Finite-difference gradient and Hessian checks at random points.
pub fn fd_consistency(points: usize, dim: usize, seed: u64) -> CheckResult {
    let mut rng = SeedStream::new(seed);
    let (mut trials, mut failures, mut worst) = (0, 0, f64::INFINITY);
    let mut notes = Vec::new();
    for name in CATALOG {
        let spec = catalog(name, dim, 1).expect("catalog problem");
        let (mut gmax, mut hmax) = (0.0f64, 0.0f64);
        for _ in 0..points {
            let x: Vec<f64> = spec.x0.iter().map(|&c| c + rng.uniform(-0.5, 0.5)).collect();
            let ge = fd_check_gradient(&spec, &x, FD_GRAD_STEP).unwrap_or(f64::INFINITY);
            let he = fd_check_hessian(&spec, &x, FD_HESS_STEP).unwrap_or(f64::INFINITY);
            gmax = gmax.max(ge);
            hmax = hmax.max(he);
            trials += 1;
            worst = worst.min(1e-6 - ge).min(1e-4 - he);
            if ge > 1e-6 || he > 1e-4 {
                failures += 1;
            }
        }
        notes.push(format!("{name}: grad {gmax:.1e}, hess {hmax:.1e}"));
    }
    CheckResult {
        name: "finite-difference consistency".into(),
        passed: failures == 0,
        trials,
        failures,
        worst_margin: worst,
        detail: notes.join("; "),
    }
}

fn learner_feasibility(trials: usize, seed: u64) -> CheckResult {
    use oqn_core::hessian_learner::{learner_step, LearnerState, QuadLoss};
    let mut rng = SeedStream::new(seed);
    let (mut failures, mut worst, mut n) = (0, f64::INFINITY, 0);
    for _ in 0..trials {
        let d = 2 + (rng.uniform(0.0, 8.0) as usize);
        let w = SymOperator::zeros(d);
        let mut st = LearnerState::from_w(w, 1.0, 0.5, 0.01, &mut rng).expect("valid");
        for _ in 0..10 {
            let mut y = rng.unit_vector(d);
            vecops::scale(rng.uniform(0.0, 3.0), &mut y);
            let s = rng.unit_vector(d);
            let q = QuadLoss::new(y, s).expect("dims");
            if learner_step(&mut st, &q, &mut rng, false).is_err() {
                failures += 1;
                continue;
            }
            n += 1;
            let m = st.radius() * (1.0 + 1e-12) - st.w_mat.frobenius_norm();
            worst = worst.min(m);
            if m < 0.0 {
                failures += 1;
            }
        }
    }
    CheckResult {
        name: "learner feasibility".into(),
        passed: failures == 0,
        trials: n,
        failures,
        worst_margin: worst,
        detail: "||W||_F <= radius after every update".into(),
    }
}

pub fn verify_suite(level: VerifyLevel) -> VerifySummary {
    let mut checks = vec![
        tr_vs_brute(if level == VerifyLevel::Full { 500 } else { 100 }, if level == VerifyLevel::Full { 20 } else { 10 }, 11),
        min_evec_sandwich(if level == VerifyLevel::Full { 1000 } else { 200 }, 10, 0.05, 12),
        sep_contract(if level == VerifyLevel::Full { 1000 } else { 200 }, 10, 0.05, 13),
        learner_feasibility(20, 14),
        quadratic_identity(15),
        fd_consistency(if level == VerifyLevel::Full { 100 } else { 10 }, 6, 16),
    ];
    if level == VerifyLevel::Full {
        let runs = audited_runs("cosine_mixture", &[10], &[1000], &[0, 1], HintRule::QuasiNewton);
        checks.push(regret_check(&runs));
        checks.push(conversion_check(&runs));
        checks.push(comparator_check(&runs));
        checks.push(counting_check(&runs));
    }
    VerifySummary { level, checks }
}
