//! Exact trust-region solver for small dimensions.
//!
//! Eigendecompose `A = QΛQᵀ` with nalgebra, then solve the secular equation
//! `‖(Λ + μI)⁻¹c‖ = D` by bisection, handling the hard case explicitly.
//! Independent of the core eigensolvers on purpose.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

pub const BRUTE_MAX_DIM: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum BruteError {
    #[error("brute-force solver limited to d <= {BRUTE_MAX_DIM}, got {0}")]
    DimTooLarge(usize),
    #[error("matrix is {rows}x{cols} but b has length {b}")]
    Shape { rows: usize, cols: usize, b: usize },
    #[error("radius must be positive")]
    BadRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteCase {
    Interior,
    Boundary,
    Hard,
}

#[derive(Debug, Clone)]
pub struct BruteTr {
    pub x: Vec<f64>,
    pub value: f64,
    /// Multiplier `μ ≥ 0` with `(A + μI)x = −b`.
    pub mu: f64,
    pub case: BruteCase,
}

/// `½xᵀAx + bᵀx`
pub fn objective(a: &DMatrix<f64>, b: &[f64], x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    0.5 * xv.dot(&(a * &xv)) + DVector::from_column_slice(b).dot(&xv)
}

/// Row-major square matrix to nalgebra, symmetrized.
pub fn to_matrix(d: usize, entries: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_row_slice(d, d, entries);
    (&m + m.transpose()) * 0.5
}

/// `min ½xᵀAx + bᵀx` over `‖x‖ ≤ radius`.
pub fn brute_tr(a: &DMatrix<f64>, b: &[f64], radius: f64) -> Result<BruteTr, BruteError> {
    let d = b.len();
    if a.nrows() != d || a.ncols() != d {
        return Err(BruteError::Shape { rows: a.nrows(), cols: a.ncols(), b: d });
    }
    if d > BRUTE_MAX_DIM {
        return Err(BruteError::DimTooLarge(d));
    }
    if !(radius > 0.0) {
        return Err(BruteError::BadRadius);
    }
    let eig = SymmetricEigen::new(a.clone());
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let q = &eig.eigenvectors;
    let c: Vec<f64> = (q.transpose() * DVector::from_column_slice(b)).iter().copied().collect();
    let imin = (0..d).min_by(|&i, &j| lam[i].total_cmp(&lam[j])).unwrap();
    let lmin = lam[imin];
    let scale = lam.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let tol = 1e-12 * scale;
    let bnorm: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();

    let coords = |mu: f64| -> Vec<f64> {
        (0..d)
            .map(|i| {
                let den = lam[i] + mu;
                if den.abs() <= tol { 0.0 } else { -c[i] / den }
            })
            .collect()
    };
    let norm = |y: &[f64]| y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let finish = |y: Vec<f64>, mu: f64, case: BruteCase| {
        let x: Vec<f64> = (q * DVector::from_vec(y)).iter().copied().collect();
        let value = objective(a, b, &x);
        BruteTr { x, value, mu, case }
    };

    let lo = (-lmin).max(0.0);
    // Components in the (numerically) singular directions of A + lo·I.
    let singular: Vec<usize> = (0..d).filter(|&i| (lam[i] + lo).abs() <= tol).collect();
    let orth = singular.iter().all(|&i| c[i].abs() <= 1e-12 * bnorm.max(1.0));
    let y_lo = coords(lo);
    let n_lo = norm(&y_lo);
    if orth && n_lo <= radius {
        if lo == 0.0 {
            let case = if n_lo >= radius * (1.0 - 1e-12) { BruteCase::Boundary } else { BruteCase::Interior };
            return Ok(finish(y_lo, 0.0, case));
        }
        // hard case: pad along the bottom eigenvector
        let mut y = y_lo;
        let tau = (radius * radius - n_lo * n_lo).max(0.0).sqrt();
        y[imin] += tau;
        return Ok(finish(y, lo, BruteCase::Hard));
    }

    // ‖y(μ)‖ is decreasing on (lo, ∞) and ≤ ‖b‖/(λmin + μ).
    let mut left = lo;
    let mut right = lo + bnorm / radius + scale + 1.0;
    for _ in 0..400 {
        let mid = 0.5 * (left + right);
        if mid <= left || mid >= right {
            break;
        }
        if norm(&coords(mid)) > radius {
            left = mid;
        } else {
            right = mid;
        }
    }
    let mut y = coords(right);
    // pull onto the sphere exactly
    let n = norm(&y);
    if n > 0.0 {
        for v in &mut y {
            *v *= radius / n;
        }
    }
    Ok(finish(y, right, BruteCase::Boundary))
}
