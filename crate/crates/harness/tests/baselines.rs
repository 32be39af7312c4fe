use oqn_core::oqn::{init, step, AuditLevel, HintRule, HyperParams, RunOptions};
use oqn_core::problems::{catalog, quadratic};
use oqn_core::{SeedStream, SymOperator};
use oqn_harness::baselines::{baseline_gd, baseline_og};

#[test]
fn gd_is_monotone_on_cosine_mixture() {
    let spec = catalog("cosine_mixture", 8, 0).unwrap();
    let r = baseline_gd(&spec, 200, None).unwrap();
    assert_eq!(r.gradients, 200);
    assert_eq!(r.step_size, 1.0 / spec.l1);
    for w in r.grad_norms.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
    }
}

#[test]
fn og_first_step_hand_trace() {
    let spec = quadratic(SymOperator::identity(1)).with_x0(vec![1.0]).unwrap();
    let p = HyperParams::manual(0.1, 1.0, 1, 2, 1e-9, 0.01).unwrap();
    let opts = RunOptions { hint: HintRule::OptimisticGradient, ..Default::default() };
    let mut rng = SeedStream::new(0);
    let mut st = init(&spec, &p, opts, &mut rng).unwrap();
    assert_eq!(st.delta_vec, vec![-0.1]);
    step(&mut st, &spec, &p, &mut rng).unwrap();
    // clip(-0.1 - (0.85 + 0.95 - 1), 0.1)
    assert!((st.delta_vec[0] + 0.1).abs() < 1e-15);
    assert!((st.hint[0] - 0.85).abs() < 1e-15);
}

#[test]
fn og_counts_gradients() {
    let spec = catalog("cosine_mixture", 4, 0).unwrap();
    let p = oqn_core::oqn::compute_hyperparams(&spec, 200, 0.01, None).unwrap();
    let r = baseline_og(&spec, &p, AuditLevel::Episode, None, &mut SeedStream::new(3)).unwrap();
    assert_eq!(r.gradients, 2 * p.m_total as u64 + p.k_eps as u64 + 1);
    assert_eq!(r.sep_calls, 0);
    assert_eq!(r.tr_calls, 0);
    assert!(r.audit.all_ok());
}
