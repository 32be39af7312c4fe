//! Objective oracles and a small catalog of test functions with honest
//! Lipschitz constants.
//!
//! Oracles are plain reentrant closures; the only mutable state is the
//! gradient counter, which belongs to the caller's run.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::linops::{symmetric_eigen, SymOperator, SymmetricOp};
use crate::rng::SeedStream;
use crate::{vecops, Error, Result};

pub type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Returns the Hessian as row-major `d×d` entries.
pub type HessFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Finite-difference step for gradients.
pub const FD_GRAD_STEP: f64 = 1e-5;
/// Finite-difference step for Hessians.
pub const FD_HESS_STEP: f64 = 1e-4;

/// Catalog names accepted by [`catalog`].
pub const CATALOG: [&str; 4] = ["quadratic", "cosine_mixture", "coupled_trig", "rosenbrock_local"];

/// A smooth objective: gradient oracle plus the constants the method consumes.
#[derive(Clone)]
pub struct ObjectiveSpec {
    pub name: String,
    pub dim: usize,
    pub grad: GradFn,
    /// Only used by audits.
    pub value: Option<ValueFn>,
    /// Only used by audits.
    pub hess: Option<HessFn>,
    pub l1: f64,
    pub l2: f64,
    pub f_lower: f64,
    pub x0: Vec<f64>,
    /// `‖x‖∞ ≤ r` box on which `l1`, `l2` are valid; `None` for global constants.
    pub valid_box: Option<f64>,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("l1", &self.l1)
            .field("l2", &self.l2)
            .field("f_lower", &self.f_lower)
            .field("x0", &self.x0)
            .field("has_value", &self.value.is_some())
            .field("has_hess", &self.hess.is_some())
            .field("valid_box", &self.valid_box)
            .finish()
    }
}

impl ObjectiveSpec {
    pub fn value_at(&self, x: &[f64]) -> Result<f64> {
        let v = self.value.as_ref().ok_or(Error::MissingValueOracle)?;
        Ok(v(x))
    }

    pub fn hessian_at(&self, x: &[f64]) -> Result<SymOperator> {
        let h = self.hess.as_ref().ok_or(Error::MissingHessianOracle)?;
        SymOperator::from_dense(self.dim, h(x))
    }

    /// `f(x0) − f*` when a value oracle exists.
    pub fn gap(&self) -> Option<f64> {
        self.value.as_ref().map(|v| v(&self.x0) - self.f_lower)
    }

    /// Whether `x` lies inside the validity box (always true without one).
    pub fn in_valid_box(&self, x: &[f64]) -> bool {
        match self.valid_box {
            Some(r) => x.iter().all(|xi| xi.abs() <= r),
            None => true,
        }
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x0.len() });
        }
        self.x0 = x0;
        Ok(self)
    }
}

/// Run-scoped gradient tally; clones share the count.
#[derive(Debug, Clone, Default)]
pub struct GradientCounter(Arc<AtomicU64>);

impl GradientCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    /// Counted gradient evaluation.
    pub fn eval(&self, spec: &ObjectiveSpec, x: &[f64]) -> Result<Vec<f64>> {
        eval_gradient(spec, self, x)
    }
}

/// `∇f(x)`, bumping `counter` once.
pub fn eval_gradient(spec: &ObjectiveSpec, counter: &GradientCounter, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: x.len() });
    }
    counter.0.fetch_add(1, Ordering::Relaxed);
    let g = (spec.grad)(x);
    if g.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: g.len() });
    }
    if !vecops::all_finite(&g) {
        return Err(Error::NonFinite);
    }
    Ok(g)
}

/// Builds a catalog problem with default family parameters.
pub fn catalog(name: &str, dim: usize, seed: u64) -> Result<ObjectiveSpec> {
    match name {
        "quadratic" => {
            check_dim("quadratic", dim, 1)?;
            Ok(quadratic(random_psd(dim, seed)))
        }
        "cosine_mixture" => cosine_mixture(dim, 0.1),
        "coupled_trig" => coupled_trig(dim, 0.1),
        "rosenbrock_local" => rosenbrock_local(dim),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

fn check_dim(problem: &'static str, dim: usize, min: usize) -> Result<()> {
    if dim < min {
        return Err(Error::InvalidDim { problem, dim, min });
    }
    Ok(())
}

/// `Q = I` for seed 0, otherwise `GGᵀ/d` with Gaussian `G`.
fn random_psd(dim: usize, seed: u64) -> SymOperator {
    if seed == 0 {
        return SymOperator::identity(dim);
    }
    let mut s = SeedStream::new(seed);
    let g: Vec<f64> = (0..dim * dim).map(|_| s.gaussian()).collect();
    let mut q = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += g[i * dim + k] * g[j * dim + k];
            }
            q[i * dim + j] = acc / dim as f64;
        }
    }
    SymOperator::from_dense(dim, q).expect("square by construction")
}

/// `f(x) = ½xᵀQx` with `Q` PSD; `l1 = λmax(Q)`, `l2 = 0`, start at all ones.
pub fn quadratic(q: SymOperator) -> ObjectiveSpec {
    let dim = q.dim();
    let eig = symmetric_eigen(dim, q.entries());
    let l1 = eig.values[dim - 1].max(f64::MIN_POSITIVE);
    let entries: Arc<Vec<f64>> = Arc::new(q.entries().to_vec());
    let mv = {
        let e = entries.clone();
        move |x: &[f64]| -> Vec<f64> {
            (0..dim).map(|i| vecops::dot(&e[i * dim..(i + 1) * dim], x)).collect()
        }
    };
    let mv = Arc::new(mv);
    let grad_mv = mv.clone();
    let val_mv = mv;
    let hess_e = entries;
    ObjectiveSpec {
        name: "quadratic".to_string(),
        dim,
        grad: Arc::new(move |x| grad_mv(x)),
        value: Some(Arc::new(move |x| 0.5 * vecops::dot(x, &val_mv(x)))),
        hess: Some(Arc::new(move |_| hess_e.as_ref().clone())),
        l1,
        l2: 0.0,
        f_lower: 0.0,
        x0: vec![1.0; dim],
        valid_box: None,
    }
}

/// `f(x) = Σ(1 − cos xᵢ) + (μ/2)‖x‖²`, `l1 = 1 + μ`, `l2 = 1`, `f* = 0`.
pub fn cosine_mixture(dim: usize, mu: f64) -> Result<ObjectiveSpec> {
    check_dim("cosine_mixture", dim, 1)?;
    if !(mu >= 0.0) {
        return Err(Error::InvalidParams("cosine_mixture needs mu >= 0"));
    }
    Ok(ObjectiveSpec {
        name: "cosine_mixture".to_string(),
        dim,
        grad: Arc::new(move |x| x.iter().map(|&xi| libm::sin(xi) + mu * xi).collect()),
        value: Some(Arc::new(move |x| {
            x.iter().map(|&xi| 1.0 - libm::cos(xi) + 0.5 * mu * xi * xi).sum()
        })),
        hess: Some(Arc::new(move |x| {
            let d = x.len();
            let mut h = vec![0.0; d * d];
            for i in 0..d {
                h[i * d + i] = libm::cos(x[i]) + mu;
            }
            h
        })),
        l1: 1.0 + mu,
        l2: 1.0,
        f_lower: 0.0,
        x0: vec![core::f64::consts::FRAC_PI_2; dim],
        valid_box: None,
    })
}

/// `f(x) = Σ(1 − cos xᵢ) + κ Σ_{i<j} sin xᵢ sin xⱼ`.
///
/// Row sums of the Hessian and of its directional derivative give
/// `l1 = 1 + 2κ(d−1)` and `l2 = 1 + 2κ(d−1) + 2κ√(d−1)`; `f ≥ −κd/2`.
pub fn coupled_trig(dim: usize, kappa: f64) -> Result<ObjectiveSpec> {
    check_dim("coupled_trig", dim, 1)?;
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParams("coupled_trig needs kappa >= 0"));
    }
    let dm1 = (dim - 1) as f64;
    Ok(ObjectiveSpec {
        name: "coupled_trig".to_string(),
        dim,
        grad: Arc::new(move |x| {
            let s: f64 = x.iter().map(|&xi| libm::sin(xi)).sum();
            x.iter()
                .map(|&xi| {
                    let (si, ci) = (libm::sin(xi), libm::cos(xi));
                    si + kappa * ci * (s - si)
                })
                .collect()
        }),
        value: Some(Arc::new(move |x| {
            let sines: Vec<f64> = x.iter().map(|&xi| libm::sin(xi)).collect();
            let s: f64 = sines.iter().sum();
            let base: f64 = x.iter().map(|&xi| 1.0 - libm::cos(xi)).sum();
            base + 0.5 * kappa * (s * s - vecops::dot(&sines, &sines))
        })),
        hess: Some(Arc::new(move |x| {
            let d = x.len();
            let sines: Vec<f64> = x.iter().map(|&xi| libm::sin(xi)).collect();
            let cosines: Vec<f64> = x.iter().map(|&xi| libm::cos(xi)).collect();
            let s: f64 = sines.iter().sum();
            let mut h = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] = if i == j {
                        cosines[i] - kappa * sines[i] * (s - sines[i])
                    } else {
                        kappa * cosines[i] * cosines[j]
                    };
                }
            }
            h
        })),
        l1: 1.0 + 2.0 * kappa * dm1,
        l2: 1.0 + 2.0 * kappa * dm1 + 2.0 * kappa * libm::sqrt(dm1),
        f_lower: -0.5 * kappa * dim as f64,
        x0: vec![core::f64::consts::FRAC_PI_2; dim],
        valid_box: None,
    })
}

/// Half-width of the box `‖x‖∞ ≤ r` on which the Rosenbrock constants hold.
pub const ROSENBROCK_BOX: f64 = 2.0;

/// Chained Rosenbrock `Σ 100(x_{i+1} − xᵢ²)² + (1 − xᵢ)²`.
///
/// Constants are local to `‖x‖∞ ≤ 2` (Gershgorin on the Hessian and its
/// directional derivative): `l1 = 1200r² + 1200r + 202`, `l2 = 2400r + 700`.
pub fn rosenbrock_local(dim: usize) -> Result<ObjectiveSpec> {
    check_dim("rosenbrock_local", dim, 2)?;
    let r = ROSENBROCK_BOX;
    let x0 = (0..dim).map(|i| if i % 2 == 0 { -1.2 } else { 1.0 }).collect();
    Ok(ObjectiveSpec {
        name: "rosenbrock_local".to_string(),
        dim,
        grad: Arc::new(|x| {
            let d = x.len();
            let mut g = vec![0.0; d];
            for i in 0..d - 1 {
                let t = x[i + 1] - x[i] * x[i];
                g[i] += -400.0 * x[i] * t - 2.0 * (1.0 - x[i]);
                g[i + 1] += 200.0 * t;
            }
            g
        }),
        value: Some(Arc::new(|x| {
            (0..x.len() - 1)
                .map(|i| {
                    let t = x[i + 1] - x[i] * x[i];
                    100.0 * t * t + (1.0 - x[i]) * (1.0 - x[i])
                })
                .sum()
        })),
        hess: Some(Arc::new(|x| {
            let d = x.len();
            let mut h = vec![0.0; d * d];
            for i in 0..d - 1 {
                h[i * d + i] += 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
                h[(i + 1) * d + i + 1] += 200.0;
                h[i * d + i + 1] += -400.0 * x[i];
                h[(i + 1) * d + i] += -400.0 * x[i];
            }
            h
        })),
        l1: 1200.0 * r * r + 1200.0 * r + 202.0,
        l2: 2400.0 * r + 700.0,
        f_lower: 0.0,
        x0,
        valid_box: Some(r),
    })
}

/// Max over coordinates of `|central difference − ∇f(x)ᵢ|`. Uncounted.
pub fn fd_check_gradient(spec: &ObjectiveSpec, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::DivisionByZero);
    }
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: x.len() });
    }
    let f = spec.value.as_ref().ok_or(Error::MissingValueOracle)?;
    let g = (spec.grad)(x);
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..spec.dim {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        worst = worst.max(((fp - fm) / (2.0 * h) - g[i]).abs());
    }
    Ok(worst)
}

/// Max entrywise `|central difference of ∇f − ∇²f(x)|`. Uncounted.
pub fn fd_check_hessian(spec: &ObjectiveSpec, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::DivisionByZero);
    }
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: x.len() });
    }
    let hess = spec.hess.as_ref().ok_or(Error::MissingHessianOracle)?;
    let d = spec.dim;
    let hx = hess(x);
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..d {
        let xj = x[j];
        xp[j] = xj + h;
        let gp = (spec.grad)(&xp);
        xp[j] = xj - h;
        let gm = (spec.grad)(&xp);
        xp[j] = xj;
        for i in 0..d {
            worst = worst.max(((gp[i] - gm[i]) / (2.0 * h) - hx[i * d + j]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn quadratic_identity_gradient() {
        let spec = catalog("quadratic", 2, 0).unwrap();
        assert_eq!(spec.l1, 1.0);
        assert_eq!(spec.l2, 0.0);
        let c = GradientCounter::new();
        assert_eq!(eval_gradient(&spec, &c, &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(eval_gradient(&spec, &c, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(c.get(), 2);
    }

    #[test]
    fn gradient_errors() {
        let spec = catalog("quadratic", 2, 0).unwrap();
        let c = GradientCounter::new();
        assert!(matches!(eval_gradient(&spec, &c, &[1.0]), Err(Error::DimensionMismatch { .. })));
        let mut bad = spec.clone();
        bad.grad = Arc::new(|x| vec![f64::NAN; x.len()]);
        assert_eq!(eval_gradient(&bad, &c, &[1.0, 1.0]), Err(Error::NonFinite));
    }

    #[test]
    fn cosine_mixture_constants_and_origin() {
        let spec = catalog("cosine_mixture", 4, 9).unwrap();
        assert!((spec.l1 - 1.1).abs() < 1e-15);
        assert_eq!(spec.l2, 1.0);
        assert_eq!(spec.x0, vec![FRAC_PI_2; 4]);
        let c = GradientCounter::new();
        assert_eq!(eval_gradient(&spec, &c, &[0.0; 4]).unwrap(), vec![0.0; 4]);
        assert!(vecops::norm(&eval_gradient(&spec, &c, &spec.x0).unwrap()) > 0.0);
    }

    #[test]
    fn catalog_errors() {
        assert!(matches!(catalog("nope", 2, 0), Err(Error::UnknownProblem(_))));
        assert!(matches!(catalog("rosenbrock_local", 1, 0), Err(Error::InvalidDim { min: 2, .. })));
        assert!(matches!(catalog("cosine_mixture", 0, 0), Err(Error::InvalidDim { .. })));
    }

    #[test]
    fn fd_examples() {
        let q = catalog("quadratic", 2, 0).unwrap();
        assert!(fd_check_gradient(&q, &[1.0, 1.0], 1e-5).unwrap() <= 1e-8);
        assert!(fd_check_hessian(&q, &[0.3, -2.0], 1e-4).unwrap() <= 1e-8);
        assert_eq!(fd_check_gradient(&q, &[1.0, 1.0], 0.0), Err(Error::DivisionByZero));

        let c = catalog("cosine_mixture", 3, 0).unwrap();
        let h0 = c.hessian_at(&[0.0; 3]).unwrap();
        for i in 0..3 {
            assert!((h0.get(i, i) - 1.1).abs() < 1e-15);
        }
        assert!(fd_check_hessian(&c, &[0.0; 3], 1e-4).unwrap() <= 1e-6);

        let t = catalog("coupled_trig", 2, 0).unwrap();
        let h = t.hessian_at(&[FRAC_PI_2, FRAC_PI_2]).unwrap();
        assert!(h.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn missing_oracles() {
        let mut spec = catalog("cosine_mixture", 2, 0).unwrap();
        spec.value = None;
        spec.hess = None;
        assert_eq!(fd_check_gradient(&spec, &[0.0, 0.0], 1e-5), Err(Error::MissingValueOracle));
        assert_eq!(fd_check_hessian(&spec, &[0.0, 0.0], 1e-4), Err(Error::MissingHessianOracle));
    }

    #[test]
    fn rosenbrock_minimum_and_box() {
        let r = catalog("rosenbrock_local", 4, 0).unwrap();
        assert_eq!(r.value_at(&[1.0; 4]).unwrap(), 0.0);
        assert_eq!(r.x0, vec![-1.2, 1.0, -1.2, 1.0]);
        assert!(r.in_valid_box(&r.x0));
        assert!(!r.in_valid_box(&[3.0, 0.0, 0.0, 0.0]));
        assert!((r.l1 - 7402.0).abs() < 1e-12);
    }

    #[test]
    fn random_quadratic_is_psd() {
        let spec = catalog("quadratic", 6, 3).unwrap();
        let h = spec.hessian_at(&spec.x0).unwrap();
        let e = symmetric_eigen(6, h.entries());
        assert!(e.values[0] >= -1e-12);
        assert!((e.values[5] - spec.l1).abs() < 1e-12);
    }
}
