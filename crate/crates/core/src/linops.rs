//! Symmetric linear operators with matvec accounting.
//!
//! The algorithm only ever touches its matrices through products with
//! vectors. Each product against stored entries bumps a run-scoped
//! [`MatvecCounter`]; shifts by a multiple of the identity are free.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::eig::tridiag::{householder_tridiagonalize, implicit_ql};
use crate::{vecops, Error, Result};

/// Default dimension cap for [`dense_extreme_eig`].
pub const DENSE_EIG_CAP: usize = 200;

/// Shared matvec tally. Clones refer to the same count, so all operators
/// built for one run can report into a single counter.
#[derive(Debug, Clone, Default)]
pub struct MatvecCounter(Arc<AtomicU64>);

impl MatvecCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// Anything that can apply a symmetric matrix to a vector.
pub trait SymmetricOp {
    fn dim(&self) -> usize;

    /// `out = A v`. Counts one matvec.
    fn apply_into(&self, v: &[f64], out: &mut [f64]);

    /// Current value of the counter this operator reports into.
    fn matvecs(&self) -> u64;

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out);
        out
    }
}

/// Dense symmetric `d×d` matrix, row-major, with a matvec counter.
#[derive(Debug, Clone)]
pub struct SymOperator {
    dim: usize,
    entries: Vec<f64>,
    counter: MatvecCounter,
}

impl SymOperator {
    /// Builds from row-major entries, symmetrizing as `(A + Aᵀ)/2`.
    pub fn from_dense(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        let mut entries = entries;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let m = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
                entries[i * dim + j] = m;
                entries[j * dim + i] = m;
            }
        }
        Ok(Self { dim, entries, counter: MatvecCounter::new() })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; dim * dim], counter: MatvecCounter::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut op = Self::zeros(dim);
        for (i, &v) in diag.iter().enumerate() {
            op.entries[i * dim + i] = v;
        }
        op
    }

    /// `coeff · u uᵀ`
    pub fn rank_one(coeff: f64, u: &[f64]) -> Self {
        let dim = u.len();
        let mut op = Self::zeros(dim);
        op.add_rank_one(coeff, u);
        op
    }

    /// Rebinds this operator to a run's counter.
    pub fn with_counter(mut self, counter: MatvecCounter) -> Self {
        self.counter = counter;
        self
    }

    pub fn counter(&self) -> &MatvecCounter {
        &self.counter
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Matvec against `v`, returning `Av`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(self.apply(v))
    }

    /// `‖A‖_F`, read from storage (no matvec).
    pub fn frobenius_norm(&self) -> f64 {
        vecops::norm(&self.entries)
    }

    /// Frobenius inner product `⟨A, B⟩ = tr(AB)`.
    pub fn frobenius_dot(&self, other: &SymOperator) -> f64 {
        vecops::dot(&self.entries, &other.entries)
    }

    /// `self += coeff · u uᵀ`
    pub fn add_rank_one(&mut self, coeff: f64, u: &[f64]) {
        let d = self.dim;
        for i in 0..d {
            let ci = coeff * u[i];
            let row = &mut self.entries[i * d..(i + 1) * d];
            for (rij, uj) in row.iter_mut().zip(u) {
                *rij += ci * uj;
            }
        }
    }

    /// `self += coeff · (a bᵀ + b aᵀ)`
    pub fn add_sym_outer(&mut self, coeff: f64, a: &[f64], b: &[f64]) {
        let d = self.dim;
        for i in 0..d {
            let row = &mut self.entries[i * d..(i + 1) * d];
            for j in 0..d {
                row[j] += coeff * (a[i] * b[j] + b[i] * a[j]);
            }
        }
    }

    /// `self += coeff · other`
    pub fn add_scaled(&mut self, coeff: f64, other: &SymOperator) {
        vecops::axpy(coeff, &other.entries, &mut self.entries);
    }

    pub fn scale(&mut self, coeff: f64) {
        vecops::scale(coeff, &mut self.entries);
    }

    /// Row-major lower triangle, the debug-dump serialization.
    pub fn lower_triangle(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            out.extend_from_slice(&self.entries[i * d..i * d + i + 1]);
        }
        out
    }

    pub fn from_lower_triangle(dim: usize, lower: &[f64]) -> Result<Self> {
        let need = dim * (dim + 1) / 2;
        if lower.len() != need {
            return Err(Error::DimensionMismatch { expected: need, got: lower.len() });
        }
        let mut op = Self::zeros(dim);
        let mut k = 0;
        for i in 0..dim {
            for j in 0..=i {
                op.entries[i * dim + j] = lower[k];
                op.entries[j * dim + i] = lower[k];
                k += 1;
            }
        }
        Ok(op)
    }
}

impl SymmetricOp for SymOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim);
        self.counter.bump();
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate() {
            *o = vecops::dot(&self.entries[i * d..(i + 1) * d], v);
        }
    }

    fn matvecs(&self) -> u64 {
        self.counter.get()
    }
}

/// The view `scale · base + shift · I`.
///
/// Applying it costs one product with `base`; the identity part is free.
/// [`ShiftedOperator::new`] gives `base − λI`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedOperator<'a, O: SymmetricOp + ?Sized> {
    pub base: &'a O,
    pub scale: f64,
    pub shift: f64,
}

impl<'a, O: SymmetricOp + ?Sized> ShiftedOperator<'a, O> {
    /// `base − lambda · I`
    pub fn new(base: &'a O, lambda: f64) -> Self {
        Self { base, scale: 1.0, shift: -lambda }
    }

    pub fn affine(base: &'a O, scale: f64, shift: f64) -> Self {
        Self { base, scale, shift }
    }
}

impl<O: SymmetricOp + ?Sized> SymmetricOp for ShiftedOperator<'_, O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        self.base.apply_into(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = self.scale * *o + self.shift * vi;
        }
    }

    fn matvecs(&self) -> u64 {
        self.base.matvecs()
    }
}

/// Extreme eigenpairs of a dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct ExtremeEig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub v_min: Vec<f64>,
    pub v_max: Vec<f64>,
}

/// Full eigendecomposition of a dense symmetric matrix: eigenvalues in
/// ascending order and the matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Dense symmetric eigendecomposition (Householder tridiagonalization then
/// implicit QL). Works on any row-major symmetric matrix.
pub fn symmetric_eigen(dim: usize, entries: &[f64]) -> DenseEigen {
    if dim == 0 {
        return DenseEigen { values: Vec::new(), vectors: Vec::new() };
    }
    let mut v: Vec<Vec<f64>> = (0..dim).map(|i| entries[i * dim..(i + 1) * dim].to_vec()).collect();
    let (mut d, mut e) = householder_tridiagonalize(&mut v);
    implicit_ql(&mut d, &mut e, &mut v);
    let vectors = (0..dim).map(|k| (0..dim).map(|i| v[i][k]).collect()).collect();
    DenseEigen { values: d, vectors }
}

/// Brute-force extreme eigenpairs. Test oracle only; never on the hot path.
/// Does not touch the matvec counter.
pub fn dense_extreme_eig(op: &SymOperator) -> Result<ExtremeEig> {
    dense_extreme_eig_capped(op, DENSE_EIG_CAP)
}

pub fn dense_extreme_eig_capped(op: &SymOperator, cap: usize) -> Result<ExtremeEig> {
    if op.dim > cap {
        return Err(Error::DimTooLargeForDenseOracle { dim: op.dim, cap });
    }
    let eig = symmetric_eigen(op.dim, &op.entries);
    let n = eig.values.len();
    Ok(ExtremeEig {
        lambda_min: eig.values[0],
        lambda_max: eig.values[n - 1],
        v_min: eig.vectors[0].clone(),
        v_max: eig.vectors[n - 1].clone(),
    })
}

/// Operator (spectral) norm via the dense eigensolver.
pub fn dense_op_norm(op: &SymOperator) -> Result<f64> {
    let e = dense_extreme_eig(op)?;
    Ok(e.lambda_max.abs().max(e.lambda_min.abs()))
}
