//! Low-rank coding of every sample over its own k-NN dictionary.
//!
//! Solves
//!
//! ```text
//! min ||Z||_* + lambda * sum_i ||x_i - D_i z_i||^2   s.t.  1^T z_i = 1
//! ```
//!
//! where `D_i` holds the `K` nearest neighbours of sample `i` and `z_i` is
//! column `i` of the stacked `K x N` code matrix. The solver is ADMM on the
//! split `Z = J`: singular-value thresholding for `J`, an equality-constrained
//! ridge solve per column for `Z`, then a dual ascent step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::kernels::pairwise_sq_distances;
use crate::par;

/// Per-sample neighbour lists, nearest first, self excluded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborIndex {
    lists: Vec<Vec<usize>>,
    k: usize,
}

impl NeighborIndex {
    /// Validates and wraps explicit lists.
    pub fn from_lists(lists: Vec<Vec<usize>>, k: usize) -> Result<Self> {
        let n = lists.len();
        for (i, list) in lists.iter().enumerate() {
            if list.len() != k {
                return arg_err(format!("sample {i} has {} neighbours, expected {k}", list.len()));
            }
            let mut sorted = list.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != k {
                return arg_err(format!("sample {i} has repeated neighbours"));
            }
            if list.iter().any(|&j| j >= n || j == i) {
                return arg_err(format!("sample {i} has an out-of-range or self neighbour"));
            }
        }
        Ok(Self { lists, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.lists.len()
    }

    pub fn of(&self, i: usize) -> &[usize] {
        &self.lists[i]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }
}

/// Exact Euclidean k-NN over the columns of `x`. Ties in distance go to the
/// lower index.
pub fn knn_neighbors(x: &DMatrix<f64>, k: usize) -> Result<NeighborIndex> {
    let n = x.ncols();
    if k == 0 || k >= n {
        return arg_err(format!("neighbour count must be in [1, {}], got {k}", n.saturating_sub(1)));
    }
    let sq = pairwise_sq_distances(x);
    let lists = par::map_range(n, |i| {
        let mut cand: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let order = |a: &usize, b: &usize| sq[(i, *a)].total_cmp(&sq[(i, *b)]).then(a.cmp(b));
        if k < cand.len() {
            cand.select_nth_unstable_by(k - 1, order);
            cand.truncate(k);
        }
        cand.sort_by(order);
        cand
    });
    Ok(NeighborIndex { lists, k })
}

/// ADMM settings. Defaults: `mu = 1`, `tol = 1e-6`, `max_iters = 500`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOpts {
    pub mu: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self {
            mu: 1.0,
            tol: 1e-6,
            max_iters: 500,
        }
    }
}

impl SolverOpts {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return arg_err(format!("mu must be > 0, got {}", self.mu));
        }
        if !(self.tol > 0.0) {
            return arg_err(format!("tol must be > 0, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return arg_err("max_iters must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LowRankCode {
    /// `K x N`; column `i` codes sample `i` over `neighbors.of(i)`.
    pub z: DMatrix<f64>,
    pub neighbors: NeighborIndex,
    /// `||E||_F` with `E_i = x_i - D_i z_i`.
    pub residual_norm: f64,
    pub solver_iters: usize,
    pub converged: bool,
    /// `||J||_* + lambda ||E||_F^2` after every iteration.
    pub objective_history: Vec<f64>,
}

impl LowRankCode {
    /// Largest `|1^T z_i - 1|` over all columns.
    pub fn max_constraint_violation(&self) -> f64 {
        self.z
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.sum()
}

/// Proximal operator of `tau * ||.||_*`.
pub fn singular_value_threshold(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut svd = m.clone().svd(true, true);
    for s in svd.singular_values.iter_mut() {
        *s = (*s - tau).max(0.0);
    }
    svd.recompose().expect("u and v_t were requested")
}

/// Dictionary for sample `i`: its neighbours as columns.
pub fn dictionary(x: &DMatrix<f64>, neighbors: &NeighborIndex, i: usize) -> DMatrix<f64> {
    x.select_columns(neighbors.of(i))
}

/// `sum_i ||x_i - D_i z_i||^2`.
pub fn reconstruction_error_sq(x: &DMatrix<f64>, neighbors: &NeighborIndex, z: &DMatrix<f64>) -> f64 {
    (0..x.ncols())
        .map(|i| (x.column(i) - dictionary(x, neighbors, i) * z.column(i)).norm_squared())
        .sum()
}

/// `||Z||_* + lambda * sum_i ||x_i - D_i z_i||^2`.
pub fn lowrank_objective(x: &DMatrix<f64>, neighbors: &NeighborIndex, z: &DMatrix<f64>, lambda: f64) -> f64 {
    nuclear_norm(z) + lambda * reconstruction_error_sq(x, neighbors, z)
}

/// Condition number above which the per-column system gets a ridge.
const RIDGE_CONDITION: f64 = 1e12;
const RIDGE_SCALE: f64 = 1e-10;

/// Pre-factored equality-constrained least-squares system for one column.
struct ColumnSystem {
    chol: Cholesky<f64, Dyn>,
    /// `2 lambda D^T x`
    data_rhs: DVector<f64>,
    /// `H^{-1} 1`
    h_inv_ones: DVector<f64>,
    /// `1^T H^{-1} 1`
    ones_h_inv_ones: f64,
}

impl ColumnSystem {
    fn new(x: &DMatrix<f64>, neighbors: &NeighborIndex, i: usize, lambda: f64, mu: f64) -> Result<Self> {
        let k = neighbors.k();
        let d = dictionary(x, neighbors, i);
        let gram = d.transpose() * &d;
        let mut h = &gram * (2.0 * lambda);
        for r in 0..k {
            h[(r, r)] += mu;
        }
        let eig = gram.clone().symmetric_eigenvalues();
        let cond = (2.0 * lambda * eig.max().max(0.0) + mu) / (2.0 * lambda * eig.min().max(0.0) + mu);
        if !(cond <= RIDGE_CONDITION) {
            let ridge = RIDGE_SCALE * h.trace() / k as f64;
            for r in 0..k {
                h[(r, r)] += ridge;
            }
        }
        let chol = Cholesky::new(h).ok_or_else(|| {
            Error::Numeric(format!("sample {i}: coding system is not positive definite"))
        })?;
        let ones = DVector::from_element(k, 1.0);
        let h_inv_ones = chol.solve(&ones);
        let ones_h_inv_ones = h_inv_ones.sum();
        if !(ones_h_inv_ones.is_finite() && ones_h_inv_ones > 0.0) {
            return Err(Error::Numeric(format!("sample {i}: singular coding system")));
        }
        let data_rhs = d.transpose() * x.column(i) * (2.0 * lambda);
        Ok(Self {
            chol,
            data_rhs,
            h_inv_ones,
            ones_h_inv_ones,
        })
    }

    /// argmin lambda||x - Dz||^2 + <y, z> + mu/2 ||z - j||^2  s.t. 1^T z = 1
    fn solve(&self, y: &DVector<f64>, j: &DVector<f64>, mu: f64) -> DVector<f64> {
        let rhs = &self.data_rhs - y + j * mu;
        let h_inv_rhs = self.chol.solve(&rhs);
        let nu = (1.0 - h_inv_rhs.sum()) / self.ones_h_inv_ones;
        h_inv_rhs + &self.h_inv_ones * nu
    }
}

/// Solves the k-NN low-rank coding problem for all samples of `x`.
pub fn solve_lowrank_codes(
    x: &DMatrix<f64>,
    neighbors: &NeighborIndex,
    lambda: f64,
    opts: &SolverOpts,
) -> Result<LowRankCode> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return arg_err(format!("lambda must be > 0, got {lambda}"));
    }
    opts.validate()?;
    let n = x.ncols();
    if neighbors.n() != n {
        return Err(Error::Shape(format!("{} neighbour lists for {n} samples", neighbors.n())));
    }
    let k = neighbors.k();
    let mu = opts.mu;

    let systems = par::try_map_range(n, |i| ColumnSystem::new(x, neighbors, i, lambda, mu))?;

    let mut z = DMatrix::from_element(k, n, 1.0 / k as f64);
    let mut y = DMatrix::<f64>::zeros(k, n);
    let mut j_prev = z.clone();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;

    for it in 0..opts.max_iters {
        iters = it + 1;
        let j = singular_value_threshold(&(&z + &y / mu), 1.0 / mu);

        let cols = par::map_range(n, |i| {
            let yi = y.column(i).into_owned();
            let ji = j.column(i).into_owned();
            systems[i].solve(&yi, &ji, mu)
        });
        for (i, c) in cols.iter().enumerate() {
            z.set_column(i, c);
        }
        let diff = &z - &j;
        y += &diff * mu;

        if z.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "low-rank coding produced non-finite iterate at iteration {iters}; try a smaller mu"
            )));
        }

        let err_sq = reconstruction_error_sq(x, neighbors, &z);
        history.push(nuclear_norm(&j) + lambda * err_sq);

        let scale = z.norm().max(1.0);
        let primal = diff.norm() / scale;
        let dual = mu * (&j - &j_prev).norm() / scale;
        j_prev = j;
        if primal < opts.tol && dual < opts.tol {
            converged = true;
            break;
        }
    }

    let residual_norm = reconstruction_error_sq(x, neighbors, &z).sqrt();
    Ok(LowRankCode {
        z,
        neighbors: neighbors.clone(),
        residual_norm,
        solver_iters: iters,
        converged,
        objective_history: history,
    })
}

/// `N x N` scatter of the codes: `M[nbr_i[k], i] = Z[k, i]`, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionMatrix {
    m: DMatrix<f64>,
}

impl ReconstructionMatrix {
    /// Wraps an arbitrary square matrix without checking the code invariants.
    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!("reconstruction matrix must be square, got {:?}", m.shape())));
        }
        Ok(Self { m })
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: DMatrix::zeros(n, n) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// `(I - M)^T (I - M)`, the structure matrix the embeddings preserve.
    pub fn structure_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let r = DMatrix::<f64>::identity(n, n) - &self.m;
        let a = r.transpose() * r;
        crate::kernels::symmetrize(&a)
    }

    /// Applies a sample permutation: `order[j]` is the old index of new sample `j`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.n();
        Self {
            m: DMatrix::from_fn(n, n, |a, b| self.m[(order[a], order[b])]),
        }
    }
}

pub fn assemble_reconstruction_matrix(code: &LowRankCode, n: usize) -> Result<ReconstructionMatrix> {
    if code.z.ncols() != code.neighbors.n() || code.z.nrows() != code.neighbors.k() {
        return Err(Error::Shape("code matrix does not match its neighbour index".into()));
    }
    if code.z.ncols() != n {
        return arg_err(format!("code has {} columns, expected {n}", code.z.ncols()));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (slot, &j) in code.neighbors.of(i).iter().enumerate() {
            if j >= n {
                return arg_err(format!("neighbour index {j} of sample {i} out of range {n}"));
            }
            m[(j, i)] = code.z[(slot, i)];
        }
    }
    Ok(ReconstructionMatrix { m })
}
