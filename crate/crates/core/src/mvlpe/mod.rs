//! Multi-view fusion: a centroid embedding `U*` pulled toward every view's
//! low-rank preserving embedding, with view weights learned from how far
//! each view sits from the centroid.
//!
//! The joint objective is
//!
//! ```text
//! gamma * sum_v w_v tr(U* L_v U*^T) + sum_v tr(psi_v S_v psi_v^T)
//! ```
//!
//! with `L_v = D_v - K_v` the Laplacian of view `v`'s similarity, `S_v` its
//! low-rank structure matrix, and `psi_v` its embedding. [`fit`] minimizes it
//! block by block: centroid, then every view, then the weights.

mod model_io;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::audit;
use crate::dataio::MultiViewDataset;
use crate::error::{arg_err, Error, Result};
use crate::kernels::{laplacian_of, similarity_matrix, graph_laplacian, KernelKind};
use crate::lowrank::{assemble_reconstruction_matrix, knn_neighbors, solve_lowrank_codes, ReconstructionMatrix, SolverOpts};
use crate::lpe::{
    embed_structure, orthonormality_residual, smallest_eigenvectors, trace_form, Embedding, Variant, ViewBasis,
    ORTHONORMALITY_TOL,
};
use crate::par;

pub use model_io::{read_model, write_model, model_to_json, ModelFile};

/// Traces below this are clamped before the weight exponent is applied.
pub const TRACE_FLOOR: f64 = 1e-12;
/// Relative slack allowed on objective increases between outer iterations.
pub const MONOTONE_SLACK: f64 = 1e-8;
/// Consecutive increases beyond slack that abort a fit.
pub const MAX_CONSECUTIVE_INCREASES: usize = 3;

/// Where a view's similarity `K_v` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilaritySource {
    /// On the raw features `X_v`, once at initialization.
    #[default]
    Features,
    /// On the view's current embedding `psi_v`, recomputed after every update.
    Embedding,
}

/// What [`fit`] does when the joint objective keeps rising.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncreasePolicy {
    /// Abort after [`MAX_CONSECUTIVE_INCREASES`] consecutive increases.
    #[default]
    Error,
    /// Log the increase and keep iterating.
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvLpeConfig {
    /// Centroid dimension; defaults to the largest per-view dimension, or 10.
    pub d_star: Option<usize>,
    /// Per-view dimensions; default to `d_star`.
    pub d_view: Option<Vec<usize>>,
    pub gamma: f64,
    pub p: f64,
    pub variant: Variant,
    /// Similarity behind each view's Laplacian `D_v - K_v`.
    pub view_kernel: KernelKind,
    pub similarity_source: SimilaritySource,
    /// Similarity behind the centroid Laplacian `D* - K*`.
    pub centroid_kernel: KernelKind,
    /// Kernel `K_phi` used by the kernel manner.
    pub feature_kernel: KernelKind,
    /// Neighbour count; defaults to `min(10, N - 1)`.
    pub k_neighbors: Option<usize>,
    pub lambda: f64,
    pub solver: SolverOpts,
    /// Ridge for the linear/kernel constraint matrices; scale-aware default.
    pub ridge: Option<f64>,
    pub max_outer_iters: usize,
    pub outer_tol: f64,
    pub on_objective_increase: IncreasePolicy,
    /// Recorded with the model; the fit itself draws no random numbers.
    pub seed: u64,
}

impl Default for MvLpeConfig {
    fn default() -> Self {
        Self {
            d_star: None,
            d_view: None,
            gamma: 1.0,
            p: 1.0,
            variant: Variant::Direct,
            view_kernel: KernelKind::default(),
            similarity_source: SimilaritySource::default(),
            centroid_kernel: KernelKind::default(),
            feature_kernel: KernelKind::default(),
            k_neighbors: None,
            lambda: 1.0,
            solver: SolverOpts::default(),
            ridge: None,
            max_outer_iters: 50,
            outer_tol: 1e-6,
            on_objective_increase: IncreasePolicy::Error,
            seed: 0,
        }
    }
}

const DEFAULT_DIM: usize = 10;
const DEFAULT_NEIGHBORS: usize = 10;

impl MvLpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 2.0) {
            return Err(Error::Config(format!("p must lie in (0, 2], got {}", self.p)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.d_star == Some(0) || self.d_view.as_ref().is_some_and(|d| d.contains(&0)) {
            return Err(Error::Config("dimensions must be >= 1".into()));
        }
        if self.k_neighbors == Some(0) {
            return Err(Error::Config("k_neighbors must be >= 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be >= 1".into()));
        }
        if !(self.outer_tol > 0.0) {
            return Err(Error::Config(format!("outer_tol must be > 0, got {}", self.outer_tol)));
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("ridge must be >= 0, got {r}")));
            }
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// `(d_star, d_view)` for `m` views.
    pub fn resolve_dims(&self, m: usize) -> Result<(usize, Vec<usize>)> {
        match (&self.d_star, &self.d_view) {
            (_, Some(dv)) if dv.len() != m => Err(Error::Config(format!(
                "d_view lists {} dimensions for {m} views",
                dv.len()
            ))),
            (Some(ds), Some(dv)) => Ok((*ds, dv.clone())),
            (None, Some(dv)) => Ok((*dv.iter().max().expect("m >= 1"), dv.clone())),
            (Some(ds), None) => Ok((*ds, vec![*ds; m])),
            (None, None) => Ok((DEFAULT_DIM, vec![DEFAULT_DIM; m])),
        }
    }

    pub fn resolve_neighbors(&self, n: usize) -> usize {
        self.k_neighbors.unwrap_or(DEFAULT_NEIGHBORS.min(n.saturating_sub(1)))
    }
}

/// Nonnegative view weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewWeights {
    w: Vec<f64>,
}

impl ViewWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return arg_err("weights need at least one view");
        }
        if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return arg_err(format!("weights must be positive, got {w:?}"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return arg_err(format!("weights must sum to 1, got {sum}"));
        }
        Ok(Self { w })
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            w: vec![1.0 / m as f64; m],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Centroid embedding with the eigenvalues of the combined Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub u: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl Centroid {
    pub fn objective(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// `sum_v w_v L_v`, accumulated in view order.
pub fn combined_laplacian(laplacians: &[DMatrix<f64>], w: &ViewWeights) -> Result<DMatrix<f64>> {
    if laplacians.len() != w.len() || laplacians.is_empty() {
        return arg_err(format!("{} laplacians for {} weights", laplacians.len(), w.len()));
    }
    let n = laplacians[0].nrows();
    let mut acc = DMatrix::zeros(n, n);
    for (l, &wv) in laplacians.iter().zip(w.as_slice()) {
        if l.shape() != (n, n) {
            return Err(Error::Shape("laplacians differ in size".into()));
        }
        acc += l * wv;
    }
    Ok(acc)
}

/// Centroid update: rows are the `d_star` smallest eigenvectors of
/// `sum_v w_v L_v`.
pub fn update_centroid(laplacians: &[DMatrix<f64>], w: &ViewWeights, d_star: usize) -> Result<Centroid> {
    let l_star = combined_laplacian(laplacians, w)?;
    let r = smallest_eigenvectors(&l_star, d_star)?;
    let u = r.vectors.transpose();
    audit::observe("centroid", orthonormality_residual(&u), ORTHONORMALITY_TOL);
    Ok(Centroid {
        u,
        eigenvalues: r.values.iter().copied().collect(),
    })
}

/// Per-view update in the direct manner: the `d_v` smallest eigenvectors of
/// `(I - M)^T (I - M) + gamma * w_v * L_star`.
pub fn update_view_embedding(
    m: &ReconstructionMatrix,
    l_star: &DMatrix<f64>,
    w_v: f64,
    gamma: f64,
    d_v: usize,
) -> Result<Embedding> {
    update_view_embedding_with(ViewBasis::Direct, &m.structure_matrix(), l_star, w_v, gamma, d_v, None)
}

/// Per-view update for any manner, given the view's structure matrix.
pub fn update_view_embedding_with(
    basis: ViewBasis<'_>,
    structure: &DMatrix<f64>,
    l_star: &DMatrix<f64>,
    w_v: f64,
    gamma: f64,
    d_v: usize,
    ridge: Option<f64>,
) -> Result<Embedding> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return arg_err(format!("gamma must be >= 0, got {gamma}"));
    }
    if !(w_v > 0.0 && w_v.is_finite()) {
        return arg_err(format!("view weight must be > 0, got {w_v}"));
    }
    if structure.shape() != l_star.shape() {
        return Err(Error::Shape("structure and centroid Laplacian differ in size".into()));
    }
    let regularized = structure + l_star * (gamma * w_v);
    embed_structure(basis, &regularized, d_v, ridge)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightUpdate {
    pub weights: ViewWeights,
    /// Disagreement traces `tr(U* L_v U*^T)` before clamping.
    pub traces: Vec<f64>,
    /// Every trace was clamped; the weights fell back to uniform.
    pub all_clamped: bool,
}

/// `w_v ∝ t_v^(p/2 - 1)`, normalized, with `t_v` clamped at [`TRACE_FLOOR`].
pub fn weights_from_traces(traces: &[f64], p: f64) -> Result<WeightUpdate> {
    if !(p > 0.0 && p <= 2.0) {
        return arg_err(format!("p must lie in (0, 2], got {p}"));
    }
    if traces.is_empty() {
        return arg_err("no views");
    }
    if traces.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric(format!("non-finite disagreement trace: {traces:?}")));
    }
    let m = traces.len();
    let all_clamped = traces.iter().all(|&t| t < TRACE_FLOOR);
    if all_clamped {
        log::warn!("all views agree with the centroid to within {TRACE_FLOOR:e}; using uniform weights");
        return Ok(WeightUpdate {
            weights: ViewWeights::uniform(m),
            traces: traces.to_vec(),
            all_clamped,
        });
    }
    let exponent = p / 2.0 - 1.0;
    let raw: Vec<f64> = traces.iter().map(|&t| t.max(TRACE_FLOOR).powf(exponent)).collect();
    let sum: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|r| r / sum).collect();
    Ok(WeightUpdate {
        weights: ViewWeights { w },
        traces: traces.to_vec(),
        all_clamped,
    })
}

/// Weight update from the current centroid and view Laplacians.
pub fn update_weights(u_star: &DMatrix<f64>, laplacians: &[DMatrix<f64>], p: f64) -> Result<WeightUpdate> {
    let traces: Vec<f64> = laplacians.iter().map(|l| trace_form(u_star, l)).collect();
    weights_from_traces(&traces, p)
}

/// The two summands of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    /// `gamma * sum_v w_v tr(U* L_v U*^T)`
    pub disagreement: f64,
    /// `sum_v tr(psi_v S_v psi_v^T)`
    pub preservation: f64,
}

impl ObjectiveParts {
    pub fn total(&self) -> f64 {
        self.disagreement + self.preservation
    }
}

/// Everything the joint objective depends on.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveInputs<'a> {
    pub u_star: &'a DMatrix<f64>,
    pub views: &'a [Embedding],
    pub structures: &'a [DMatrix<f64>],
    pub laplacians: &'a [DMatrix<f64>],
    pub weights: &'a ViewWeights,
    pub gamma: f64,
}

pub fn joint_objective_parts(inp: ObjectiveInputs<'_>) -> Result<ObjectiveParts> {
    let m = inp.views.len();
    if m == 0 || inp.structures.len() != m || inp.laplacians.len() != m || inp.weights.len() != m {
        return arg_err("joint objective inputs disagree on the number of views");
    }
    let n = inp.u_star.ncols();
    let res = orthonormality_residual(inp.u_star);
    if !(res <= ORTHONORMALITY_TOL) {
        return arg_err(format!("centroid violates U U^T = I (residual {res:e})"));
    }
    for (v, e) in inp.views.iter().enumerate() {
        if e.coords().ncols() != n || inp.structures[v].shape() != (n, n) || inp.laplacians[v].shape() != (n, n) {
            return arg_err(format!("view {v} is not shaped for {n} samples"));
        }
        if !e.satisfies_constraint() {
            return arg_err(format!(
                "view {v} embedding violates its constraint (residual {:e})",
                e.constraint_residual()
            ));
        }
    }
    let disagreement = inp.gamma
        * inp
            .laplacians
            .iter()
            .zip(inp.weights.as_slice())
            .map(|(l, w)| w * trace_form(inp.u_star, l))
            .sum::<f64>();
    let preservation = inp
        .views
        .iter()
        .zip(inp.structures)
        .map(|(e, s)| trace_form(e.coords(), s))
        .sum();
    Ok(ObjectiveParts {
        disagreement,
        preservation,
    })
}

pub fn joint_objective(inp: ObjectiveInputs<'_>) -> Result<f64> {
    joint_objective_parts(inp).map(|p| p.total())
}

/// Per-view solver diagnostics from initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingDiagnostics {
    pub k_neighbors: usize,
    pub solver_iters: usize,
    pub converged: bool,
    pub residual_norm: f64,
    pub max_constraint_violation: f64,
}

/// Centroid objective with the previous weights, before and after the
/// centroid update of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidStep {
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone)]
pub struct MvLpeModel {
    pub config: MvLpeConfig,
    pub u_star: DMatrix<f64>,
    pub centroid_eigenvalues: Vec<f64>,
    pub view_embeddings: Vec<Embedding>,
    pub weights: ViewWeights,
    /// Joint objective after each outer iteration, current weights.
    pub objective_trace: Vec<f64>,
    /// Same, evaluated with the weights the iteration started from.
    pub objective_trace_prev_weights: Vec<f64>,
    /// `tr(U* L_v U*^T)` per iteration and view.
    pub disagreement_trace: Vec<Vec<f64>>,
    pub centroid_steps: Vec<CentroidStep>,
    pub weight_history: Vec<Vec<f64>>,
    pub coding: Vec<CodingDiagnostics>,
    pub converged: bool,
    pub iters: usize,
    /// Some weight update fell back to uniform weights.
    pub weight_fallback: bool,
}

/// Immutable per-view inputs computed once at initialization.
struct ViewSetup {
    features: DMatrix<f64>,
    kphi: Option<DMatrix<f64>>,
    structure: DMatrix<f64>,
    coding: CodingDiagnostics,
}

impl ViewSetup {
    fn basis(&self, variant: Variant, kernel: KernelKind) -> ViewBasis<'_> {
        match variant {
            Variant::Direct => ViewBasis::Direct,
            Variant::Linear => ViewBasis::Linear(&self.features),
            Variant::Kernel => ViewBasis::Kernel(self.kphi.as_ref().expect("kernel prepared"), Some(kernel)),
        }
    }
}

fn setup_view(x: &DMatrix<f64>, cfg: &MvLpeConfig, k: usize) -> Result<ViewSetup> {
    let neighbors = knn_neighbors(x, k)?;
    let code = solve_lowrank_codes(x, &neighbors, cfg.lambda, &cfg.solver)?;
    if !code.converged {
        log::warn!(
            "low-rank coding stopped after {} iterations without meeting tol {}",
            code.solver_iters,
            cfg.solver.tol
        );
    }
    let m = assemble_reconstruction_matrix(&code, x.ncols())?;
    let kphi = match cfg.variant {
        Variant::Kernel => Some(similarity_matrix(x, cfg.feature_kernel)?.values().clone()),
        _ => None,
    };
    Ok(ViewSetup {
        features: x.clone(),
        kphi,
        structure: m.structure_matrix(),
        coding: CodingDiagnostics {
            k_neighbors: k,
            solver_iters: code.solver_iters,
            converged: code.converged,
            residual_norm: code.residual_norm,
            max_constraint_violation: code.max_constraint_violation(),
        },
    })
}

fn view_laplacian(cfg: &MvLpeConfig, setup: &ViewSetup, psi: &Embedding) -> Result<DMatrix<f64>> {
    match cfg.similarity_source {
        SimilaritySource::Embedding => laplacian_of(psi.coords(), cfg.view_kernel),
        SimilaritySource::Features => laplacian_of(&setup.features, cfg.view_kernel),
    }
}

fn relative_increase(prev: f64, next: f64) -> bool {
    next > prev + MONOTONE_SLACK * prev.abs().max(f64::MIN_POSITIVE)
}

/// Runs the alternating optimization on a dataset.
pub fn fit(dataset: &MultiViewDataset, config: &MvLpeConfig) -> Result<MvLpeModel> {
    config.validate()?;
    let m = dataset.n_views();
    let n = dataset.n_samples();
    let (d_star, d_view) = config.resolve_dims(m)?;
    let k = config.resolve_neighbors(n);
    if k == 0 || n < k + 1 {
        return Err(Error::Config(format!("need N >= K + 1 (N = {n}, K = {k})")));
    }
    if d_star > n {
        return Err(Error::Config(format!("d_star = {d_star} exceeds N = {n}")));
    }

    // per view: k-NN, low-rank codes, structure, initial embedding, Laplacian
    let init = par::try_map_range(m, |v| {
        let setup = setup_view(dataset.view(v), config, k).map_err(|e| e.context(format!("initializing view {v}")))?;
        let psi = embed_structure(
            setup.basis(config.variant, config.feature_kernel),
            &setup.structure,
            d_view[v],
            config.ridge,
        )
        .map_err(|e| e.context(format!("initial embedding of view {v}")))?;
        let lap = view_laplacian(config, &setup, &psi).map_err(|e| e.context(format!("view {v} similarity")))?;
        Ok::<_, Error>((setup, psi, lap))
    })?;
    let mut setups = Vec::with_capacity(m);
    let mut views = Vec::with_capacity(m);
    let mut laplacians = Vec::with_capacity(m);
    for (s, e, l) in init {
        setups.push(s);
        views.push(e);
        laplacians.push(l);
    }
    let structures: Vec<DMatrix<f64>> = setups.iter().map(|s| s.structure.clone()).collect();

    let mut weights = ViewWeights::uniform(m);
    let mut centroid: Option<Centroid> = None;
    let mut objective_trace = Vec::new();
    let mut objective_trace_prev = Vec::new();
    let mut disagreement_trace = Vec::new();
    let mut centroid_steps = Vec::new();
    let mut weight_history = vec![weights.as_slice().to_vec()];
    let mut weight_fallback = false;
    let mut converged = false;
    let mut increases = 0;
    let mut iters = 0;

    for it in 1..=config.max_outer_iters {
        iters = it;
        let ctx = |e: Error, what: &str| e.context(format!("iteration {it}: {what}"));

        let before = centroid.as_ref().map(|c| {
            laplacians
                .iter()
                .zip(weights.as_slice())
                .map(|(l, w)| w * trace_form(&c.u, l))
                .sum::<f64>()
        });
        let next = update_centroid(&laplacians, &weights, d_star).map_err(|e| ctx(e, "centroid update"))?;
        if let Some(before) = before {
            let after = laplacians
                .iter()
                .zip(weights.as_slice())
                .map(|(l, w)| w * trace_form(&next.u, l))
                .sum::<f64>();
            centroid_steps.push(CentroidStep { before, after });
        }

        let k_star = similarity_matrix(&next.u, config.centroid_kernel).map_err(|e| ctx(e, "centroid similarity"))?;
        let l_star = graph_laplacian(&k_star);

        let updated = par::try_map_range(m, |v| {
            let setup = &setups[v];
            let psi = update_view_embedding_with(
                setup.basis(config.variant, config.feature_kernel),
                &setup.structure,
                &l_star,
                weights.as_slice()[v],
                config.gamma,
                d_view[v],
                config.ridge,
            )
            .map_err(|e| ctx(e, &format!("view {v} update")))?;
            let lap = match config.similarity_source {
                SimilaritySource::Embedding => view_laplacian(config, setup, &psi).map_err(|e| ctx(e, &format!("view {v} similarity")))?,
                SimilaritySource::Features => laplacians[v].clone(),
            };
            Ok::<_, Error>((psi, lap))
        })?;
        views.clear();
        laplacians.clear();
        for (psi, lap) in updated {
            views.push(psi);
            laplacians.push(lap);
        }

        let prev_weights = weights.clone();
        let wu = update_weights(&next.u, &laplacians, config.p).map_err(|e| ctx(e, "weight update"))?;
        weight_fallback |= wu.all_clamped;
        weights = wu.weights;
        weight_history.push(weights.as_slice().to_vec());

        let inputs = ObjectiveInputs {
            u_star: &next.u,
            views: &views,
            structures: &structures,
            laplacians: &laplacians,
            weights: &weights,
            gamma: config.gamma,
        };
        let obj = joint_objective(inputs).map_err(|e| ctx(e, "objective"))?;
        let obj_prev = joint_objective(ObjectiveInputs {
            weights: &prev_weights,
            ..inputs
        })
        .map_err(|e| ctx(e, "objective"))?;
        disagreement_trace.push(wu.traces);
        centroid = Some(next);

        let last = objective_trace.last().copied();
        objective_trace.push(obj);
        objective_trace_prev.push(obj_prev);

        if let Some(last) = last {
            if relative_increase(last, obj) {
                increases += 1;
                log::debug!("iteration {it}: objective rose from {last} to {obj}");
                if increases >= MAX_CONSECUTIVE_INCREASES {
                    match config.on_objective_increase {
                        IncreasePolicy::Error => {
                            return Err(Error::ObjectiveIncrease {
                                consecutive: increases,
                                trace: objective_trace,
                            })
                        }
                        IncreasePolicy::Warn if increases == MAX_CONSECUTIVE_INCREASES => {
                            log::warn!("objective rose for {increases} consecutive iterations; continuing")
                        }
                        IncreasePolicy::Warn => {}
                    }
                }
            } else {
                increases = 0;
            }
            if (last - obj).abs() <= config.outer_tol * last.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }

    let centroid = centroid.expect("at least one outer iteration");
    Ok(MvLpeModel {
        config: config.clone(),
        u_star: centroid.u,
        centroid_eigenvalues: centroid.eigenvalues,
        view_embeddings: views,
        weights,
        objective_trace,
        objective_trace_prev_weights: objective_trace_prev,
        disagreement_trace,
        centroid_steps,
        weight_history,
        coding: setups.into_iter().map(|s| s.coding).collect(),
        converged,
        iters,
        weight_fallback,
    })
}
