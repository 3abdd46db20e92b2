//! Independent reference computations shared by the integration suites.
//! None of these call into the solver paths they are used to check.

#![allow(dead_code)]

use mvlpe::dataio::{synth_multiview, MultiViewDataset, ViewSpec};
use mvlpe::lowrank::NeighborIndex;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn gaussian_matrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample::<f64, _>(StandardNormal))
}

/// Random orthonormal `n x d` frame (Gaussian matrix, QR).
pub fn random_frame(n: usize, d: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian_matrix(n, d, r).qr().q()
}

/// Smallest `tr(Q^T A Q)` over `frames` random orthonormal `n x d` frames.
pub fn random_frame_minimum(a: &DMatrix<f64>, d: usize, frames: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = a.nrows();
    (0..frames)
        .map(|_| {
            let q = random_frame(n, d, &mut r);
            (q.transpose() * a * &q).trace()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest principal angle (radians) between the row spaces of `a` and `b`.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.transpose().qr().q();
    let qb = b.transpose().qr().q();
    let s = (qa.transpose() * qb).singular_values();
    s.min().clamp(-1.0, 1.0).acos()
}

/// Generalized eigenvalues of `A w = lambda B w` from the explicit product
/// `B^{-1} A`, ascending.
pub fn dense_generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let binv = b.clone().try_inverse().expect("B invertible");
    let prod = binv * a;
    let mut ev: Vec<f64> = prod.complex_eigenvalues().iter().map(|c| c.re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Sum of singular values via the eigenvalues of `Z Z^T`.
pub fn nuclear_norm_via_gram(z: &DMatrix<f64>) -> f64 {
    let g = z * z.transpose();
    g.symmetric_eigenvalues().iter().map(|l: &f64| l.max(0.0).sqrt()).sum()
}

fn dictionary(x: &DMatrix<f64>, nb: &NeighborIndex, i: usize) -> DMatrix<f64> {
    DMatrix::from_columns(&nb.of(i).iter().map(|&j| x.column(j)).collect::<Vec<_>>())
}

/// `||Z||_* + lambda sum_i ||x_i - D_i z_i||^2`, evaluated from scratch.
pub fn coding_objective(x: &DMatrix<f64>, nb: &NeighborIndex, z: &DMatrix<f64>, lambda: f64) -> f64 {
    let err: f64 = (0..x.ncols())
        .map(|i| (x.column(i) - dictionary(x, nb, i) * z.column(i)).norm_squared())
        .sum();
    nuclear_norm_via_gram(z) + lambda * err
}

/// Accelerated projected gradient on the smoothed problem
/// `sum_k sqrt(s_k^2 + delta^2) + lambda sum_i ||x_i - D_i z_i||^2`
/// over `{Z : 1^T z_i = 1}`, with `delta` shrunk in stages. Returns the
/// exact (unsmoothed) objective at the final iterate.
pub fn projected_gradient_coding(x: &DMatrix<f64>, nb: &NeighborIndex, lambda: f64, iters: usize) -> f64 {
    let n = x.ncols();
    let k = nb.k();
    let dicts: Vec<DMatrix<f64>> = (0..n).map(|i| dictionary(x, nb, i)).collect();
    let grams: Vec<DMatrix<f64>> = dicts.iter().map(|d| d.transpose() * d).collect();
    let rhs: Vec<DVector<f64>> = (0..n).map(|i| dicts[i].transpose() * x.column(i)).collect();
    let data_lip = 2.0 * lambda * grams.iter().map(|g| g.symmetric_eigenvalues().max()).fold(0.0, f64::max);

    let project = |z: &mut DMatrix<f64>| {
        for mut c in z.column_iter_mut() {
            let shift = (c.sum() - 1.0) / k as f64;
            c.add_scalar_mut(-shift);
        }
    };
    let grad = |z: &DMatrix<f64>, delta: f64| -> DMatrix<f64> {
        let svd = z.clone().svd(true, true);
        let u = svd.u.as_ref().unwrap();
        let vt = svd.v_t.as_ref().unwrap();
        let scaled = svd.singular_values.map(|s| s / (s * s + delta * delta).sqrt());
        let mut g = u * DMatrix::from_diagonal(&scaled) * vt;
        for i in 0..n {
            let gi = (&grams[i] * z.column(i) - &rhs[i]) * (2.0 * lambda);
            let mut col = g.column_mut(i);
            col += gi;
        }
        g
    };

    let mut z = DMatrix::from_element(k, n, 1.0 / k as f64);
    let stages = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
    let per_stage = iters / stages.len();
    for &delta in &stages {
        let step = 1.0 / (data_lip + 1.0 / delta);
        let mut y = z.clone();
        let mut t = 1.0f64;
        for _ in 0..per_stage {
            let mut next = &y - grad(&y, delta) * step;
            project(&mut next);
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = &next + (&next - &z) * ((t - 1.0) / t_next);
            z = next;
            t = t_next;
        }
    }
    coding_objective(x, nb, &z, lambda)
}

/// Nearest training column by exhaustive search; ties to the lower index.
pub fn brute_force_1nn(e: &DMatrix<f64>, train: &[usize], labels: &[usize], test: &[usize]) -> Vec<usize> {
    let mut sorted: Vec<(usize, usize)> = train.iter().copied().zip(labels.iter().copied()).collect();
    sorted.sort();
    test.iter()
        .map(|&t| {
            let dists: Vec<f64> = sorted
                .iter()
                .map(|&(j, _)| (0..e.nrows()).map(|r| (e[(r, t)] - e[(r, j)]).powi(2)).sum())
                .collect();
            let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
            sorted[dists.iter().position(|&d| d == best).unwrap()].1
        })
        .collect()
}

/// `tr(U A U^T)` by explicit triple loop.
pub fn trace_loop(u: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for r in 0..u.nrows() {
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                s += u[(r, i)] * a[(i, j)] * u[(r, j)];
            }
        }
    }
    s
}

/// 60 samples in 2 classes over three views of rising noise.
pub fn three_view_fixture(seed: u64) -> MultiViewDataset {
    synth_multiview(
        30,
        2,
        &[
            ViewSpec { dim: 10, noise_sigma: 0.0 },
            ViewSpec { dim: 12, noise_sigma: 0.5 },
            ViewSpec { dim: 8, noise_sigma: 1.0 },
        ],
        seed,
    )
    .expect("valid fixture")
}

/// `order[j]` is the old index of new sample `j`.
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    order
}
