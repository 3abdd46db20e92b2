mod common;

use mvlpe::kernels::{laplacian_of, KernelKind};
use mvlpe::lowrank::ReconstructionMatrix;
use mvlpe::lpe::{embed_structure, ViewBasis};
use mvlpe::mvlpe::{
    combined_laplacian, fit, joint_objective, update_centroid, update_view_embedding, weights_from_traces,
    IncreasePolicy, MvLpeConfig, ObjectiveInputs, ViewWeights,
};
use nalgebra::DMatrix;

fn warn_config(p: f64, gamma: f64) -> MvLpeConfig {
    MvLpeConfig {
        d_star: Some(2),
        p,
        gamma,
        max_outer_iters: 15,
        on_objective_increase: IncreasePolicy::Warn,
        ..MvLpeConfig::default()
    }
}

fn laplacian(n: usize, seed: u64) -> DMatrix<f64> {
    let x = common::uniform_matrix(3, n, seed);
    laplacian_of(&x, KernelKind::default()).unwrap()
}

#[test]
fn centroid_step_never_raises_its_own_objective() {
    for seed in 0..3 {
        let ds = common::three_view_fixture(seed);
        for p in [0.5, 1.0, 2.0] {
            let model = fit(&ds, &warn_config(p, 1.0)).unwrap();
            for (i, step) in model.centroid_steps.iter().enumerate() {
                let slack = 1e-9 * step.before.abs().max(1.0);
                assert!(step.after <= step.before + slack, "seed {seed} p {p} iter {i}: {step:?}");
            }
        }
    }
}

#[test]
fn centroid_matches_random_frame_search() {
    let ls = [laplacian(8, 1), laplacian(8, 2)];
    let w = ViewWeights::new(vec![0.3, 0.7]).unwrap();
    let c = update_centroid(&ls, &w, 2).unwrap();
    let combined = &ls[0] * 0.3 + &ls[1] * 0.7;
    let best = common::random_frame_minimum(&combined, 2, 50_000, 11);
    assert!(c.objective() <= best + 1e-10);
    assert!((c.objective() - common::trace_loop(&c.u, &combined)).abs() <= 1e-9);
}

#[test]
fn large_gamma_view_update_follows_the_centroid_laplacian() {
    let n = 10;
    let ls = [laplacian(n, 4), laplacian(n, 5)];
    let w = ViewWeights::uniform(2);
    let l_star = combined_laplacian(&ls, &w).unwrap();
    let psi = update_view_embedding(&ReconstructionMatrix::zeros(n), &l_star, 0.5, 1e6, 3).unwrap();
    let target = embed_structure(ViewBasis::Direct, &l_star, 3, None).unwrap();
    assert!(common::max_principal_angle(psi.coords(), target.coords()) < 1e-3);
}

#[test]
fn without_coupling_the_objective_is_the_sum_of_view_objectives() {
    let n = 9;
    let structures: Vec<DMatrix<f64>> = (0..2)
        .map(|s| {
            let a = common::uniform_matrix(n, n, 30 + s);
            a.transpose() * a
        })
        .collect();
    let ls = vec![laplacian(n, 6), laplacian(n, 7)];
    let views: Vec<_> = structures
        .iter()
        .map(|s| embed_structure(ViewBasis::Direct, s, 2, None).unwrap())
        .collect();
    let w = ViewWeights::uniform(2);
    let c = update_centroid(&ls, &w, 2).unwrap();
    let j = joint_objective(ObjectiveInputs {
        u_star: &c.u,
        views: &views,
        structures: &structures,
        laplacians: &ls,
        weights: &w,
        gamma: 0.0,
    })
    .unwrap();
    let sum: f64 = views.iter().map(|v| v.objective()).sum();
    assert!((j - sum).abs() <= 1e-9 * sum.max(1.0));
}

#[test]
fn disagreement_trace_matches_loop_evaluation() {
    let ds = common::three_view_fixture(2);
    let model = fit(&ds, &warn_config(1.0, 1.0)).unwrap();
    let last = model.disagreement_trace.last().unwrap();
    for (v, got) in last.iter().enumerate() {
        let l = laplacian_of(ds.view(v), KernelKind::default()).unwrap();
        let t = common::trace_loop(&model.u_star, &l);
        assert!((got - t).abs() <= 1e-9 * t.abs().max(1.0), "view {v}: {got} vs {t}");
    }
}

#[test]
fn fit_is_equivariant_to_sample_order() {
    let ds = common::three_view_fixture(4);
    let order = common::random_permutation(ds.n_samples(), 8);
    let a = fit(&ds, &warn_config(1.0, 1.0)).unwrap();
    let b = fit(&ds.permuted(&order).unwrap(), &warn_config(1.0, 1.0)).unwrap();
    assert_eq!(a.objective_trace.len(), b.objective_trace.len());
    for (x, y) in a.objective_trace.iter().zip(&b.objective_trace) {
        assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn powered_disagreement_never_rises() {
    for seed in 0..3 {
        let ds = common::three_view_fixture(10 + seed);
        for p in [0.5, 1.0, 1.5] {
            let model = fit(&ds, &warn_config(p, 1.0)).unwrap();
            let powered: Vec<f64> = model
                .disagreement_trace
                .iter()
                .map(|t| t.iter().map(|x| x.max(0.0).powf(p / 2.0)).sum())
                .collect();
            for w in powered.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "seed {seed} p {p}: {powered:?}");
            }
        }
    }
}

#[test]
fn weight_formula_cases() {
    let u = weights_from_traces(&[0.3, 5.0, 2.0], 2.0).unwrap();
    assert_eq!(u.weights.as_slice(), &[1.0 / 3.0; 3]);
    let w = weights_from_traces(&[1.0, 4.0], 1.0).unwrap();
    assert!((w.weights.as_slice()[0] - 2.0 / 3.0).abs() <= 1e-12);
    assert!((w.weights.as_slice()[1] - 1.0 / 3.0).abs() <= 1e-12);
}

#[test]
fn default_policy_refuses_a_rising_objective() {
    let ds = mvlpe::dataio::standard_noisy_fixture(0);
    let cfg = MvLpeConfig::default();
    match fit(&ds, &cfg) {
        Ok(model) => {
            for w in model.objective_trace.windows(4) {
                let rising = w.windows(2).all(|p| p[1] > p[0] * (1.0 + 1e-8));
                assert!(!rising, "three consecutive increases were accepted");
            }
        }
        Err(e) => assert!(matches!(e.root(), mvlpe::Error::ObjectiveIncrease { .. }), "{e}"),
    }
}
