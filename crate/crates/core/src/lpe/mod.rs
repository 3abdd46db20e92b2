//! Low-rank preserving embedding of a single view.
//!
//! Given the structure matrix `S = (I - M)^T (I - M)` of a view's
//! reconstruction matrix, three manners of embedding are supported:
//!
//! * direct: `min tr(U S U^T)` s.t. `U U^T = I`;
//! * linear: `U = W^T X`, `min tr(W^T X S X^T W)` s.t. `W^T (X X^T + eps I) W = I`;
//! * kernel: `U = beta^T K`, `min tr(beta^T K S K beta)` s.t. `beta^T (K K + eps I) beta = I`.
//!
//! All three reduce to the `d` smallest eigenpairs of a (generalized)
//! symmetric problem. The same entry point also solves the regularized
//! per-view problems of the multi-view optimizer, which only swap `S` for
//! `S + gamma * w * L`.

pub mod eigen;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::audit;
use crate::error::{arg_err, Error, Result};
use crate::kernels::KernelKind;
use crate::lowrank::ReconstructionMatrix;

pub use eigen::{smallest_eigenvectors, smallest_generalized, symmetric_eigen, EigenResult};

/// `U U^T = I` tolerance (Frobenius) for direct embeddings and centroids.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;
/// Constraint tolerance for the ridge-regularized linear and kernel manners.
pub const RIDGE_CONSTRAINT_TOL: f64 = 1e-6;

const DEFAULT_RIDGE: f64 = 1e-8;
const MAX_RIDGE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Direct,
    Linear,
    Kernel,
}

/// What maps inputs to the embedding, beyond the coordinates themselves.
#[derive(Debug, Clone, PartialEq)]
pub enum Carrier {
    None,
    /// `D x d` projection `W`.
    Projection(DMatrix<f64>),
    /// `N x d` expansion coefficients over the kernel matrix.
    KernelCoefficients { beta: DMatrix<f64>, kernel: Option<KernelKind> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    u: DMatrix<f64>,
    variant: Variant,
    carrier: Carrier,
    eigenvalues: DVector<f64>,
    ridge: f64,
    constraint_residual: f64,
}

impl Embedding {
    fn new(
        u: DMatrix<f64>,
        variant: Variant,
        carrier: Carrier,
        eigenvalues: DVector<f64>,
        ridge: f64,
        constraint_residual: f64,
    ) -> Self {
        let e = Self {
            u,
            variant,
            carrier,
            eigenvalues,
            ridge,
            constraint_residual,
        };
        audit::observe(&format!("{:?} embedding", e.variant), e.constraint_residual, e.constraint_tol());
        e
    }

    /// Rebuilds an embedding from stored parts (model files), re-measuring
    /// `U U^T = I` for the direct manner.
    pub fn from_parts(
        u: DMatrix<f64>,
        variant: Variant,
        carrier: Carrier,
        eigenvalues: DVector<f64>,
        ridge: f64,
        constraint_residual: f64,
    ) -> Self {
        Self {
            u,
            variant,
            carrier,
            eigenvalues,
            ridge,
            constraint_residual,
        }
    }

    /// `d x N` coordinates.
    pub fn coords(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn carrier(&self) -> &Carrier {
        &self.carrier
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Value of the minimized trace: the sum of the selected eigenvalues.
    pub fn objective(&self) -> f64 {
        self.eigenvalues.sum()
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Frobenius residual of this manner's constraint.
    pub fn constraint_residual(&self) -> f64 {
        self.constraint_residual
    }

    pub fn constraint_tol(&self) -> f64 {
        match self.variant {
            Variant::Direct => ORTHONORMALITY_TOL,
            Variant::Linear | Variant::Kernel => RIDGE_CONSTRAINT_TOL,
        }
    }

    pub fn satisfies_constraint(&self) -> bool {
        self.constraint_residual <= self.constraint_tol()
    }

    /// `tr(U S U^T)` evaluated directly on the coordinates.
    pub fn trace_with(&self, structure: &DMatrix<f64>) -> f64 {
        trace_form(&self.u, structure)
    }
}

/// `tr(U A U^T)`.
pub fn trace_form(u: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let au = a * u.transpose();
    u.iter().zip(au.transpose().iter()).map(|(x, y)| x * y).sum()
}

/// `||U U^T - I||_F`.
pub fn orthonormality_residual(u: &DMatrix<f64>) -> f64 {
    let d = u.nrows();
    (u * u.transpose() - DMatrix::<f64>::identity(d, d)).norm()
}

/// The input a view is embedded from.
#[derive(Debug, Clone, Copy)]
pub enum ViewBasis<'a> {
    Direct,
    /// Feature matrix `X` (`D x N`).
    Linear(&'a DMatrix<f64>),
    /// Kernel matrix `K_phi` (`N x N`) and the kernel that produced it.
    Kernel(&'a DMatrix<f64>, Option<KernelKind>),
}

impl ViewBasis<'_> {
    pub fn variant(&self) -> Variant {
        match self {
            ViewBasis::Direct => Variant::Direct,
            ViewBasis::Linear(_) => Variant::Linear,
            ViewBasis::Kernel(..) => Variant::Kernel,
        }
    }
}

/// Scale-aware default ridge: `1e-8 * trace(B0) / dim(B0)`.
fn default_ridge(b0: &DMatrix<f64>) -> f64 {
    DEFAULT_RIDGE * b0.trace() / b0.nrows() as f64
}

/// Solves `A w = lambda (B0 + eps I) w`, escalating `eps` tenfold while
/// `B0 + eps I` is not positive definite, up to `1e-4 * trace(B0) / dim`.
fn ridge_generalized(
    a: &DMatrix<f64>,
    b0: &DMatrix<f64>,
    d: usize,
    eps: Option<f64>,
) -> Result<(EigenResult, DMatrix<f64>, f64)> {
    let dim = b0.nrows();
    let scale = b0.trace() / dim as f64;
    let max_eps = MAX_RIDGE * scale.max(0.0);
    let mut eps = match eps {
        Some(e) if e >= 0.0 && e.is_finite() => e,
        Some(e) => return arg_err(format!("ridge must be >= 0, got {e}")),
        None => default_ridge(b0),
    };
    loop {
        let mut b = b0.clone();
        for i in 0..dim {
            b[(i, i)] += eps;
        }
        if let Some(r) = smallest_generalized(a, &b, d)? {
            return Ok((r, b, eps));
        }
        eps = if eps > 0.0 { eps * 10.0 } else { DEFAULT_RIDGE * scale.max(f64::MIN_POSITIVE) };
        if eps > max_eps {
            return Err(Error::Numeric(format!(
                "constraint matrix not positive definite even with ridge {max_eps:e}"
            )));
        }
    }
}

/// Embeds a view by minimizing `tr(psi S psi^T)` under the manner's
/// constraint, where `S` is any symmetric PSD structure matrix.
pub fn embed_structure(basis: ViewBasis<'_>, structure: &DMatrix<f64>, d: usize, eps: Option<f64>) -> Result<Embedding> {
    let n = structure.nrows();
    if !structure.is_square() {
        return Err(Error::Shape("structure matrix must be square".into()));
    }
    if d == 0 {
        return arg_err("embedding dimension must be >= 1");
    }
    match basis {
        ViewBasis::Direct => {
            if d > n {
                return arg_err(format!("dimension {d} exceeds {n} samples"));
            }
            let r = smallest_eigenvectors(structure, d)?;
            let u = r.vectors.transpose();
            let res = orthonormality_residual(&u);
            Ok(Embedding::new(u, Variant::Direct, Carrier::None, r.values, 0.0, res))
        }
        ViewBasis::Linear(x) => {
            if x.ncols() != n {
                return Err(Error::Shape(format!("features have {} samples, structure has {n}", x.ncols())));
            }
            if d > x.nrows().min(n) {
                return arg_err(format!("dimension {d} exceeds min(D, N) = {}", x.nrows().min(n)));
            }
            let a = x * structure * x.transpose();
            let b0 = x * x.transpose();
            let (r, b, eps) = ridge_generalized(&a, &b0, d, eps)?;
            let w = r.vectors;
            let res = (w.transpose() * &b * &w - DMatrix::<f64>::identity(d, d)).norm();
            let u = w.transpose() * x;
            Ok(Embedding::new(u, Variant::Linear, Carrier::Projection(w), r.values, eps, res))
        }
        ViewBasis::Kernel(k, kind) => {
            if k.shape() != (n, n) {
                return Err(Error::Shape(format!("kernel is {:?}, structure is {n}x{n}", k.shape())));
            }
            if d > n {
                return arg_err(format!("dimension {d} exceeds {n} samples"));
            }
            let a = k * structure * k;
            let b0 = k * k;
            let (r, b, eps) = ridge_generalized(&a, &b0, d, eps)?;
            let beta = r.vectors;
            let res = (beta.transpose() * &b * &beta - DMatrix::<f64>::identity(d, d)).norm();
            let u = beta.transpose() * k;
            Ok(Embedding::new(
                u,
                Variant::Kernel,
                Carrier::KernelCoefficients { beta, kernel: kind },
                r.values,
                eps,
                res,
            ))
        }
    }
}

/// Direct manner: rows are the `d` smallest eigenvectors of `(I-M)^T (I-M)`.
pub fn embed_direct(m: &ReconstructionMatrix, d: usize) -> Result<Embedding> {
    embed_structure(ViewBasis::Direct, &m.structure_matrix(), d, None)
}

/// Linear manner over features `x` (`D x N`).
pub fn embed_linear(x: &DMatrix<f64>, m: &ReconstructionMatrix, d: usize, eps: Option<f64>) -> Result<Embedding> {
    embed_structure(ViewBasis::Linear(x), &m.structure_matrix(), d, eps)
}

/// Kernel manner over a symmetric PSD kernel matrix.
pub fn embed_kernel(kphi: &DMatrix<f64>, m: &ReconstructionMatrix, d: usize, eps: Option<f64>) -> Result<Embedding> {
    embed_structure(ViewBasis::Kernel(kphi, None), &m.structure_matrix(), d, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowrank::{assemble_reconstruction_matrix, knn_neighbors, solve_lowrank_codes, SolverOpts};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(d: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn coded(x: &DMatrix<f64>, k: usize) -> ReconstructionMatrix {
        let nb = knn_neighbors(x, k).unwrap();
        let code = solve_lowrank_codes(x, &nb, 1.0, &SolverOpts::default()).unwrap();
        assemble_reconstruction_matrix(&code, x.ncols()).unwrap()
    }

    #[test]
    fn zero_reconstruction_gives_objective_d() {
        let m = ReconstructionMatrix::zeros(7);
        let e = embed_direct(&m, 3).unwrap();
        assert!((e.objective() - 3.0).abs() < 1e-10);
        assert!(e.satisfies_constraint());
    }

    #[test]
    fn direct_objective_is_eigen_sum() {
        let x = random_points(3, 6, 4);
        let m = coded(&x, 3);
        let e = embed_direct(&m, 2).unwrap();
        let s = m.structure_matrix();
        let all = symmetric_eigen(&s).unwrap();
        assert!((e.trace_with(&s) - (all.values[0] + all.values[1])).abs() < 1e-8);
        assert!((e.objective() - e.trace_with(&s)).abs() < 1e-8);
        assert!(e.objective() >= -1e-10);
    }

    #[test]
    fn perfect_reconstruction_has_zero_mode() {
        // points on a line: every interior point is the average of its two neighbours
        let n = 8;
        let lists: Vec<Vec<usize>> = (0..n)
            .map(|i| match i {
                0 => vec![1, 2],
                i if i == n - 1 => vec![n - 2, n - 3],
                i => vec![i - 1, i + 1],
            })
            .collect();
        let mut m = DMatrix::zeros(n, n);
        for (i, l) in lists.iter().enumerate() {
            if i == 0 {
                m[(1, 0)] = 2.0;
                m[(2, 0)] = -1.0;
            } else if i == n - 1 {
                m[(n - 2, i)] = 2.0;
                m[(n - 3, i)] = -1.0;
            } else {
                m[(l[0], i)] = 0.5;
                m[(l[1], i)] = 0.5;
            }
        }
        let x = DMatrix::from_fn(1, n, |_, j| j as f64 * 0.7 + 1.0);
        assert!((&x * &m - &x).amax() < 1e-12);
        let e = embed_direct(&ReconstructionMatrix::from_dense(m).unwrap(), 1).unwrap();
        assert!(e.eigenvalues()[0].abs() < 1e-8);
    }

    #[test]
    fn linear_with_identity_data_matches_direct() {
        let x = random_points(2, 9, 5);
        let m = coded(&x, 3);
        let direct = embed_direct(&m, 2).unwrap();
        let eye = DMatrix::<f64>::identity(9, 9);
        let lin = embed_linear(&eye, &m, 2, Some(0.0)).unwrap();
        assert!((lin.objective() - direct.objective()).abs() < 1e-8);
        assert!(lin.satisfies_constraint());
    }

    #[test]
    fn linear_rank_deficient_uses_ridge() {
        let base = random_points(3, 12, 6);
        let mut x = DMatrix::zeros(5, 12);
        x.rows_mut(0, 3).copy_from(&base);
        x.row_mut(3).copy_from(&base.row(0));
        x.row_mut(4).copy_from(&base.row(1));
        let m = coded(&base, 4);
        let e = embed_linear(&x, &m, 2, Some(1e-8)).unwrap();
        assert!(e.constraint_residual() <= 1e-6);
    }

    #[test]
    fn kernel_identity_matches_direct() {
        let x = random_points(3, 10, 7);
        let m = coded(&x, 3);
        let direct = embed_direct(&m, 3).unwrap();
        let k = embed_kernel(&DMatrix::identity(10, 10), &m, 3, None).unwrap();
        assert!((k.objective() - direct.objective()).abs() < 1e-8);
    }

    #[test]
    fn kernel_gaussian_constraint() {
        use crate::kernels::{similarity_matrix, KernelKind};
        let x = random_points(3, 10, 8);
        let m = coded(&x, 3);
        let k = similarity_matrix(&x, KernelKind::default()).unwrap();
        let e = embed_kernel(k.values(), &m, 2, None).unwrap();
        assert!(e.constraint_residual() <= 1e-6);
        assert!(e.objective() >= -1e-10);
    }

    #[test]
    fn rejects_oversized_dimension() {
        let m = ReconstructionMatrix::zeros(4);
        assert!(matches!(embed_direct(&m, 5), Err(Error::Argument(_))));
        let x = random_points(2, 4, 1);
        assert!(matches!(embed_linear(&x, &m, 3, None), Err(Error::Argument(_))));
    }

    #[test]
    fn objective_grows_with_dimension() {
        let x = random_points(4, 15, 9);
        let m = coded(&x, 5);
        let mut prev = 0.0;
        for d in 1..6 {
            let e = embed_direct(&m, d).unwrap();
            assert!(e.objective() >= prev - 1e-12);
            // each added eigenvalue is no smaller than the mean of the earlier ones
            if d > 1 {
                assert!(e.eigenvalues()[d - 1] >= prev / (d - 1) as f64 - 1e-12);
            }
            prev = e.objective();
        }
    }
}
