//! Deterministic dense symmetric eigen-solvers.
//!
//! Eigenpairs come back in ascending order with a fixed sign convention:
//! the largest-magnitude entry of each vector is positive (first such entry
//! on ties). Eigenvalues closer than [`DEGENERACY_TOL`] are ordered by the
//! lexicographic order of their sign-fixed vectors, largest first.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{arg_err, Error, Result};
use crate::kernels::symmetrize;

pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: DVector<f64>,
    /// One eigenvector per column.
    pub vectors: DMatrix<f64>,
}

fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

fn lex_desc(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn check_square_finite(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Shape(format!("expected a square matrix, got {:?}", a.shape())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Full ordered, sign-fixed eigendecomposition of a symmetric matrix.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<EigenResult> {
    check_square_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return arg_err("empty matrix");
    }
    let sym = symmetrize(a);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigendecomposition did not converge".into()))?;

    let mut pairs: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|i| {
            let mut v = eig.eigenvectors.column(i).into_owned();
            fix_sign(&mut v);
            (eig.eigenvalues[i], v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let scale = pairs.iter().map(|p| p.0.abs()).fold(1.0, f64::max);
    let tol = DEGENERACY_TOL * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end].0 - pairs[end - 1].0 <= tol {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lex_desc(&a.1, &b.1));
        }
        start = end;
    }

    let values = DVector::from_iterator(n, pairs.iter().map(|p| p.0));
    let vectors = DMatrix::from_columns(&pairs.iter().map(|p| p.1.clone()).collect::<Vec<_>>());
    Ok(EigenResult { values, vectors })
}

/// The `d` smallest eigenpairs of a symmetric matrix.
pub fn smallest_eigenvectors(a: &DMatrix<f64>, d: usize) -> Result<EigenResult> {
    check_square_finite(a)?;
    if d == 0 || d > a.nrows() {
        return arg_err(format!("requested {d} eigenvectors of a {0}x{0} matrix", a.nrows()));
    }
    let full = symmetric_eigen(a)?;
    Ok(EigenResult {
        values: full.values.rows(0, d).into_owned(),
        vectors: full.vectors.columns(0, d).into_owned(),
    })
}

/// The `d` smallest solutions of `A w = lambda B w` with `B` symmetric
/// positive definite, via Cholesky `B = L L^T`. Returned vectors satisfy
/// `W^T B W = I`. `None` when `B` is not positive definite.
pub fn smallest_generalized(a: &DMatrix<f64>, b: &DMatrix<f64>, d: usize) -> Result<Option<EigenResult>> {
    check_square_finite(a)?;
    check_square_finite(b)?;
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("pencil shapes differ: {:?} vs {:?}", a.shape(), b.shape())));
    }
    if d == 0 || d > a.nrows() {
        return arg_err(format!("requested {d} eigenvectors of a {0}x{0} pencil", a.nrows()));
    }
    let chol = match symmetrize(b).cholesky() {
        Some(c) => c,
        None => return Ok(None),
    };
    let l = chol.l();
    let linv_a = l
        .solve_lower_triangular(&symmetrize(a))
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let reduced = smallest_eigenvectors(&c, d)?;
    let mut w = l
        .transpose()
        .solve_upper_triangular(&reduced.vectors)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    for mut col in w.column_iter_mut() {
        let mut v = col.clone_owned();
        fix_sign(&mut v);
        col.copy_from(&v);
    }
    Ok(Some(EigenResult {
        values: reduced.values,
        vectors: w,
    }))
}
