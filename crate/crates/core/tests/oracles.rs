//! Worked examples checked against independent oracles (nalgebra dense
//! eigensolver, closed forms, high-precision constants).

use approx::assert_relative_eq;
use nalgebra::{DMatrix, SymmetricEigen};
use oqn_core::eig::{lanczos_factorize, min_evec, sep, tridiag_eig, MinEvecCase, SepCase};
use oqn_core::hessian_learner::{loss, loss_gradient, QuadLoss};
use oqn_core::linops::{dense_extreme_eig, symmetric_eigen};
use oqn_core::oqn::{compute_hyperparams, raw_params, run, AuditLevel, HintRule, HyperParams, RunOptions};
use oqn_core::problems::{catalog, quadratic};
use oqn_core::trsolver::{fista, residual_of, sfg};
use oqn_core::{vecops, SeedStream, SymOperator, SymmetricOp};

fn random_sym(d: usize, s: &mut SeedStream) -> SymOperator {
    SymOperator::from_dense(d, (0..d * d).map(|_| s.uniform(-1.0, 1.0)).collect()).unwrap()
}

fn to_na(a: &SymOperator) -> DMatrix<f64> {
    let d = a.dim();
    DMatrix::from_row_slice(d, d, a.entries())
}

fn na_eigs(a: &SymOperator) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(to_na(a)).eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}

#[test]
fn matvec_matches_dense_product() {
    let mut s = SeedStream::new(1);
    let a = random_sym(7, &mut s);
    let v: Vec<f64> = (0..7).map(|_| s.gaussian()).collect();
    let got = a.matvec(&v).unwrap();
    let want = to_na(&a) * nalgebra::DVector::from_vec(v);
    for i in 0..7 {
        assert_relative_eq!(got[i], want[i], epsilon = 1e-13);
    }
}

#[test]
fn dense_eig_matches_independent_solver() {
    let mut s = SeedStream::new(2);
    let a = random_sym(20, &mut s);
    let ours = symmetric_eigen(20, a.entries()).values;
    let theirs = na_eigs(&a);
    for (x, y) in ours.iter().zip(&theirs) {
        assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
    }
    let e = dense_extreme_eig(&a).unwrap();
    let r = vecops::add_scaled(&a.apply(&e.v_min), -e.lambda_min, &e.v_min);
    assert!(vecops::norm(&r) <= 1e-9 * a.frobenius_norm());
}

#[test]
fn tridiag_matches_dense_oracle() {
    let mut s = SeedStream::new(3);
    let diag: Vec<f64> = (0..10).map(|_| s.uniform(-2.0, 2.0)).collect();
    let off: Vec<f64> = (0..9).map(|_| s.uniform(-1.0, 1.0)).collect();
    let mut m = DMatrix::zeros(10, 10);
    for i in 0..10 {
        m[(i, i)] = diag[i];
        if i < 9 {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let mut want: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    want.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let got = tridiag_eig(&diag, &off).values;
    for (x, y) in got.iter().zip(&want) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn lanczos_diag_123_recovers_spectrum() {
    let a = SymOperator::diagonal(&[1.0, 2.0, 3.0]);
    let v1 = [1.0 / 3f64.sqrt(); 3];
    let f = lanczos_factorize(&a, &v1, 3, a.frobenius_norm()).unwrap();
    let t = tridiag_eig(&f.alphas, f.offdiag());
    for (x, y) in t.values.iter().zip([1.0, 2.0, 3.0]) {
        assert!((x - y).abs() <= 1e-10);
    }
}

#[test]
fn min_evec_zero_matrix_and_psd() {
    let mut s = SeedStream::new(4);
    let z = SymOperator::zeros(5);
    let r = min_evec(&z, 0.1, 0.01, 1.0, 1.0, &mut s).unwrap();
    assert_eq!(r.case, MinEvecCase::NegativeEig);
    assert!((r.lambda_hat + 0.05).abs() < 1e-15);
    let res = vecops::add_scaled(&z.apply(&r.v_hat), -r.lambda_hat, &r.v_hat);
    assert!((vecops::norm(&res) - 0.05).abs() < 1e-12);

    let p = SymOperator::diagonal(&[1.0, 2.0]);
    let r = min_evec(&p, 0.5, 0.01, 1.0, p.frobenius_norm(), &mut s).unwrap();
    assert_eq!(r.case, MinEvecCase::PsdCertified);
    assert!(r.lambda_hat >= 0.0);
}

#[test]
fn min_evec_diag_neg2_3_against_oracle() {
    let a = SymOperator::diagonal(&[-2.0, 3.0]);
    let mut misses = 0;
    for seed in 0..100 {
        let mut s = SeedStream::new(seed);
        let r = min_evec(&a, 0.1, 0.01, 5.0, a.frobenius_norm(), &mut s).unwrap();
        assert_eq!(r.case, MinEvecCase::NegativeEig);
        let res = vecops::add_scaled(&a.apply(&r.v_hat), -r.lambda_hat, &r.v_hat);
        assert!(vecops::norm(&res) <= 0.1);
        if !(r.lambda_hat >= -2.1 && r.lambda_hat <= -2.0) {
            misses += 1;
        }
    }
    assert!(misses <= 1);
}

#[test]
fn sep_examples_with_nuclear_norm_check() {
    let mut s = SeedStream::new(5);
    let w = SymOperator::rank_one(3.0, &[1.0, 0.0]);
    let r = sep(&w, 1.0, 0.01, w.frobenius_norm(), &mut s).unwrap();
    assert_eq!(r.case, SepCase::Separated);
    assert!((r.gamma - 3.0).abs() < 1e-12);
    let sm = r.s_mat(2);
    let nuclear: f64 = na_eigs(&sm).iter().map(|v| v.abs()).sum();
    assert!(sm.frobenius_dot(&w) - 1.0 * nuclear >= r.gamma - 1.0 - 1e-9);

    let w = SymOperator::rank_one(-5.0, &[0.0, 1.0]);
    let r = sep(&w, 2.0, 0.01, w.frobenius_norm(), &mut s).unwrap();
    assert!((r.gamma - 2.5).abs() < 1e-12);
    let sep1 = r.separator.unwrap();
    assert!((sep1.coeff + 0.5).abs() < 1e-15);
    assert!((sep1.u[1].abs() - 1.0).abs() < 1e-12);
}

#[test]
fn residual_kkt_closed_forms() {
    let a = SymOperator::diagonal(&[2.0, 1.0]);
    assert!(residual_of(&a, &[-4.0, 0.0], 1.0, &[1.0, 0.0]).unwrap() < 1e-15);
    let a = SymOperator::diagonal(&[-1.0, 1.0]);
    assert!(residual_of(&a, &[0.0, 0.0], 1.0, &[1.0, 0.0]).unwrap() < 1e-15);
}

#[test]
fn fista_interior_minimizer_matches_linear_solve() {
    let mut s = SeedStream::new(6);
    let g = DMatrix::from_fn(5, 5, |_, _| s.gaussian());
    let q = &g * g.transpose() + DMatrix::identity(5, 5);
    let a = SymOperator::from_dense(5, q.transpose().as_slice().to_vec()).unwrap();
    let b: Vec<f64> = (0..5).map(|_| s.uniform(-1.0, 1.0)).collect();
    let xstar = q.clone().lu().solve(&(-nalgebra::DVector::from_vec(b.clone()))).unwrap();
    assert!(xstar.norm() < 10.0);
    let lg = na_eigs(&a)[4];
    let x = fista(&a, &b, 10.0, lg, 400, &[0.0; 5]);
    for i in 0..5 {
        assert!((x[i] - xstar[i]).abs() < 1e-6);
    }
}

#[test]
fn sfg_meets_its_residual_bound() {
    let mut s = SeedStream::new(7);
    let g = DMatrix::from_fn(5, 5, |_, _| s.gaussian());
    let q = &g * g.transpose();
    let a = SymOperator::from_dense(5, q.transpose().as_slice().to_vec()).unwrap();
    let b: Vec<f64> = (0..5).map(|_| s.uniform(-3.0, 3.0)).collect();
    let lg = na_eigs(&a)[4];
    let obj = |x: &[f64]| 0.5 * vecops::dot(x, &a.apply(x)) + vecops::dot(&b, x);
    // reference optimum from a long FISTA run
    let xs = fista(&a, &b, 1.0, lg, 20_000, &[0.0; 5]);
    let fstar = obj(&xs);
    for n in [4usize, 8, 16, 32] {
        let x0 = [0.0; 5];
        let gap = obj(&x0) - fstar;
        let x = sfg(&a, &b, 1.0, lg, n, &x0).unwrap();
        let res = residual_of(&a, &b, 1.0, &x).unwrap();
        let bound = (50.0 * lg * gap / ((n as f64 + 1.0) * (n as f64 + 2.0))).sqrt();
        assert!(res <= bound + 1e-9, "N={n}: {res} > {bound}");
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut s = SeedStream::new(8);
    let b = random_sym(4, &mut s);
    let q = QuadLoss::new((0..4).map(|_| s.gaussian()).collect(), (0..4).map(|_| s.gaussian()).collect()).unwrap();
    let g = loss_gradient(&b, &q).unwrap();
    let h = 1e-6;
    for i in 0..4 {
        for j in 0..4 {
            // perturb the symmetric pair; derivative along E_ij + E_ji
            let mut e = vec![0.0; 16];
            e[i * 4 + j] += 1.0;
            if i != j {
                e[j * 4 + i] += 1.0;
            }
            let dir = SymOperator::from_dense(4, e).unwrap();
            let mut bp = b.clone();
            bp.add_scaled(h, &dir);
            let mut bm = b.clone();
            bm.add_scaled(-h, &dir);
            let fd = (loss(&bp, &q).unwrap() - loss(&bm, &q).unwrap()) / (2.0 * h);
            assert!((fd - g.frobenius_dot(&dir)).abs() < 1e-6);
        }
    }
}

#[test]
fn hyperparams_unit_and_high_precision() {
    let (d, eta, t) = raw_params(52.0, 1, 1.0, 1.0, 1);
    assert_relative_eq!(d, 1.0, epsilon = 1e-15);
    assert_relative_eq!(eta, 0.148_550_204_830_500_28, epsilon = 1e-14);
    assert_relative_eq!(t, 5.664_525_067_769_412, epsilon = 1e-12);

    let mut spec = catalog("cosine_mixture", 4, 0).unwrap();
    spec.l1 = 2.0;
    spec.l2 = 1.0;
    let p = compute_hyperparams(&spec, 1000, 0.01, Some(1.0)).unwrap();
    assert_relative_eq!(p.d_radius, 0.011_148_479_486_249_355, max_relative = 1e-13);
    assert_relative_eq!(p.eta, 0.257_711_030_269_112_74, max_relative = 1e-13);
    assert_eq!((p.t_len, p.k_eps, p.m_total), (21, 47, 987));
    assert_relative_eq!(p.delta_tr, 0.002_059_981_580_847_805_6, max_relative = 1e-12);

    // η against the closed form M^{2/13}/(gap^{2/13} d^{7/13} L1^{7/13} L2^{4/13}): constant ratio
    let ratio = |gap: f64, d: usize, l1: f64, l2: f64, m: usize| {
        let (_, eta, _) = raw_params(gap, d, l1, l2, m);
        let closed = (m as f64).powf(2.0 / 13.0)
            / (gap.powf(2.0 / 13.0) * (d as f64).powf(7.0 / 13.0) * l1.powf(7.0 / 13.0) * l2.powf(4.0 / 13.0));
        eta / closed
    };
    let r0 = ratio(1.0, 4, 2.0, 1.0, 1000);
    assert_relative_eq!(r0, 0.272_818_470_226_411_09, max_relative = 1e-12);
    for (gap, d, l1, l2, m) in [(3.0, 7, 0.5, 2.0, 50), (0.1, 1, 9.0, 0.3, 123_456)] {
        assert_relative_eq!(ratio(gap, d, l1, l2, m), r0, max_relative = 1e-12);
    }
}

#[test]
fn quadratic_descent_identity_is_exact() {
    let spec = quadratic(SymOperator::identity(3));
    let p = HyperParams::manual(0.05, 0.5, 5, 8, 1e-6, 0.01).unwrap();
    let r = run(&spec, &p, RunOptions { audit: AuditLevel::Episode, ..Default::default() }, &mut SeedStream::new(3))
        .unwrap();
    for s in &r.steps {
        let m = s.descent_margin.unwrap();
        assert!(m.abs() <= 1e-10 * (1.0 + s.f_x.unwrap().abs()), "{m}");
    }
    // convex instance: episode gradient norms decrease
    for w in r.episodes.windows(2) {
        assert!(w[1].grad_norm_at_wbar <= w[0].grad_norm_at_wbar);
    }
}

#[test]
fn og_explicit_projection_agrees_with_tr_path() {
    // with B ≡ 0 on a quadratic the TR solve of A = I/η reproduces the projection
    let spec = quadratic(SymOperator::identity(1)).with_x0(vec![1.0]).unwrap();
    let p = HyperParams::manual(0.1, 1.0, 1, 1, 1e-8, 0.01).unwrap();
    let og = run(&spec, &p, RunOptions { hint: HintRule::OptimisticGradient, ..Default::default() }, &mut SeedStream::new(0))
        .unwrap();
    let qn = run(&spec, &p, RunOptions::default(), &mut SeedStream::new(0)).unwrap();
    assert!((og.steps[0].delta_next_norm - qn.steps[0].delta_next_norm).abs() <= 1e-8);
    assert_eq!(og.gradients, 2 * p.m_total as u64 + p.k_eps as u64 + 1);
}
