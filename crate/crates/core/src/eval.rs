//! 1NN evaluation over embeddings and the repeated random-split protocol.
//!
//! Embeddings are transductive: every method embeds all `N` samples once,
//! then each repeat draws a split and classifies the test columns by their
//! nearest training column. Test labels are never read before scoring.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataio::{make_split, MultiViewDataset, SplitPlan};
use crate::error::{arg_err, Error, Result};
use crate::kernels::{graph_laplacian, similarity_matrix, KernelKind};
use crate::lowrank::{assemble_reconstruction_matrix, knn_neighbors, solve_lowrank_codes};
use crate::lpe::{embed_structure, Embedding, ViewBasis};
use crate::mvlpe::{fit, MvLpeConfig, MvLpeModel};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// The fused centroid embedding.
    Mvlpe,
    /// Best single view.
    Ble,
    /// Concatenated views.
    Cle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mvlpe => "mvlpe",
            Method::Ble => "ble",
            Method::Cle => "cle",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mvlpe" => Ok(Method::Mvlpe),
            "ble" => Ok(Method::Ble),
            "cle" => Ok(Method::Cle),
            other => arg_err(format!("unknown method {other:?}; expected mvlpe, ble or cle")),
        }
    }
}

/// Single-view engine behind the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineEngine {
    /// Low-rank preserving embedding, direct manner.
    #[default]
    Lpe,
    /// Laplacian eigenmaps on the view similarity.
    Le,
}

/// Labels each test column with the label of its nearest training column.
/// Equal distances go to the training sample with the lower index.
pub fn one_nn_classify(
    embedding: &DMatrix<f64>,
    train: &[usize],
    train_labels: &[usize],
    test: &[usize],
) -> Result<Vec<usize>> {
    if train.is_empty() {
        return arg_err("1NN needs at least one training sample");
    }
    if train.len() != train_labels.len() {
        return arg_err(format!("{} training samples but {} labels", train.len(), train_labels.len()));
    }
    let n = embedding.ncols();
    if let Some(&bad) = train.iter().chain(test).find(|&&i| i >= n) {
        return arg_err(format!("sample index {bad} out of range for {n} samples"));
    }
    Ok(test
        .iter()
        .map(|&t| {
            let x = embedding.column(t);
            let mut best = (f64::INFINITY, usize::MAX, 0);
            for (&j, &label) in train.iter().zip(train_labels) {
                let d = (x - embedding.column(j)).norm_squared();
                if d < best.0 || (d == best.0 && j < best.1) {
                    best = (d, j, label);
                }
            }
            best.2
        })
        .collect())
}

/// Fraction of `predicted` equal to `truth`.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / predicted.len() as f64
}

/// Leave-one-out 1NN accuracy restricted to the training split.
pub fn leave_one_out_accuracy(embedding: &DMatrix<f64>, train: &[usize], labels: &[usize]) -> Result<f64> {
    if train.len() < 2 {
        return arg_err("leave-one-out needs at least two training samples");
    }
    let mut hits = 0;
    for (k, &i) in train.iter().enumerate() {
        let rest: Vec<usize> = train.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &s)| s).collect();
        let rest_labels: Vec<usize> = rest.iter().map(|&s| labels[s]).collect();
        if one_nn_classify(embedding, &rest, &rest_labels, &[i])?[0] == labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / train.len() as f64)
}

/// Per-view and concatenated single-view embeddings.
#[derive(Debug, Clone)]
pub struct BaselineEmbeddings {
    pub per_view: Vec<Embedding>,
    pub concatenated: Embedding,
}

impl BaselineEmbeddings {
    /// View with the best leave-one-out 1NN accuracy on the training split;
    /// ties go to the lower view index.
    pub fn best_view(&self, split: &SplitPlan, labels: &[usize]) -> Result<usize> {
        let mut best = (f64::NEG_INFINITY, 0);
        for (v, e) in self.per_view.iter().enumerate() {
            let acc = leave_one_out_accuracy(e.coords(), &split.train_indices, labels)?;
            if acc > best.0 {
                best = (acc, v);
            }
        }
        Ok(best.1)
    }
}

fn lpe_embedding(x: &DMatrix<f64>, d: usize, config: &MvLpeConfig) -> Result<Embedding> {
    let k = config.resolve_neighbors(x.ncols());
    let neighbors = knn_neighbors(x, k)?;
    let code = solve_lowrank_codes(x, &neighbors, config.lambda, &config.solver)?;
    let m = assemble_reconstruction_matrix(&code, x.ncols())?;
    embed_structure(ViewBasis::Direct, &m.structure_matrix(), d, None)
}

/// Laplacian eigenmap: the `d` smallest non-trivial eigenvectors of the
/// normalized Laplacian `I - D^{-1/2} K D^{-1/2}`.
fn le_embedding(x: &DMatrix<f64>, d: usize, kernel: KernelKind) -> Result<Embedding> {
    let n = x.ncols();
    if d >= n {
        return arg_err(format!("Laplacian eigenmap dimension {d} needs more than {n} samples"));
    }
    let k = similarity_matrix(x, kernel)?;
    let l = graph_laplacian(&k);
    let deg: Vec<f64> = (0..n).map(|i| l[(i, i)]).collect();
    if deg.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::Numeric("similarity graph has an isolated sample".into()));
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|g| 1.0 / g.sqrt()).collect();
    let mut s = DMatrix::from_fn(n, n, |i, j| l[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    // The trivial direction D^{1/2} 1 has eigenvalue 0; the spectrum lies in
    // [0, 2], so a shift of 3 moves it past every other eigenvector.
    let total: f64 = deg.iter().sum();
    let v0: Vec<f64> = deg.iter().map(|g| (g / total).sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] += 3.0 * v0[i] * v0[j];
        }
    }
    embed_structure(ViewBasis::Direct, &s, d, None)
}

fn single_view_embedding(x: &DMatrix<f64>, d: usize, config: &MvLpeConfig, engine: BaselineEngine) -> Result<Embedding> {
    match engine {
        BaselineEngine::Lpe => lpe_embedding(x, d, config),
        BaselineEngine::Le => le_embedding(x, d, config.view_kernel),
    }
}

/// Embeds every view on its own and the row-concatenation of all views,
/// each in `d` dimensions.
pub fn baseline_embeddings(
    dataset: &MultiViewDataset,
    d: usize,
    config: &MvLpeConfig,
    engine: BaselineEngine,
) -> Result<BaselineEmbeddings> {
    config.validate()?;
    let per_view = par::try_map_range(dataset.n_views(), |v| {
        single_view_embedding(dataset.view(v), d, config, engine).map_err(|e| e.context(format!("baseline view {v}")))
    })?;
    let concatenated = single_view_embedding(&dataset.concatenated(), d, config, engine)
        .map_err(|e| e.context("concatenated baseline"))?;
    Ok(BaselineEmbeddings { per_view, concatenated })
}

/// Protocol knobs for [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOpts {
    pub repeats: usize,
    pub fraction: f64,
    pub base_seed: u64,
    pub engine: BaselineEngine,
}

impl Default for ExperimentOpts {
    fn default() -> Self {
        Self {
            repeats: 20,
            fraction: 0.5,
            base_seed: 0,
            engine: BaselineEngine::Lpe,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    /// `None` when the repeat failed.
    pub accuracy: Option<f64>,
    /// Index of the view BLE picked for this repeat.
    pub selected_view: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method: Method,
    pub dims: usize,
    /// Requested repeats; equals `accuracies.len() + failures.len()`.
    pub repeats: usize,
    /// Accuracies of the successful repeats, in repeat order.
    pub accuracies: Vec<f64>,
    pub mean_acc: f64,
    pub max_acc: f64,
    /// Final view weights of the fused model (MvLPE only).
    pub per_view_weights_summary: Option<Vec<f64>>,
    pub rows: Vec<RepeatResult>,
    /// `(repeat, message)` for every failed repeat.
    pub failures: Vec<(usize, String)>,
    pub wallclock_seconds: f64,
}

impl ExperimentReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// `method,dims,repeat,seed,accuracy`, one row per repeat; failed
    /// repeats leave the accuracy empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,dims,repeat,seed,accuracy\n");
        for r in &self.rows {
            let acc = r.accuracy.map(|a| format!("{a:.4}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", self.method.name(), self.dims, r.repeat, r.seed, acc);
        }
        out
    }
}

enum Fitted {
    Fused(Box<MvLpeModel>),
    Baselines(BaselineEmbeddings),
}

fn seed_for(base_seed: u64, repeat: usize) -> u64 {
    base_seed.wrapping_add(repeat as u64)
}

/// Runs `opts.repeats` random splits with seeds `base_seed + r`. The
/// embedding is computed once over all samples; a failed fit marks every
/// repeat as failed rather than aborting.
pub fn run_experiment(
    dataset: &MultiViewDataset,
    method: Method,
    config: &MvLpeConfig,
    opts: &ExperimentOpts,
) -> Result<ExperimentReport> {
    if opts.repeats == 0 {
        return arg_err("repeats must be >= 1");
    }
    if !(opts.fraction > 0.0 && opts.fraction < 1.0) {
        return arg_err(format!("fraction must lie in (0, 1), got {}", opts.fraction));
    }
    config.validate()?;
    let n = dataset.n_samples();
    let (d_star, _) = config.resolve_dims(dataset.n_views())?;
    // surface split errors before spending time on a fit
    make_split(n, opts.fraction, opts.base_seed)?;

    let start = Instant::now();
    let fitted = match method {
        Method::Mvlpe => fit(dataset, config).map(|m| Fitted::Fused(Box::new(m))),
        Method::Ble | Method::Cle => baseline_embeddings(dataset, d_star, config, opts.engine).map(Fitted::Baselines),
    };
    let labels = dataset.labels();

    let rows: Vec<(RepeatResult, Option<String>)> = match &fitted {
        Err(e) => {
            log::error!("{} fit failed: {e}", method.name());
            (0..opts.repeats)
                .map(|r| {
                    let row = RepeatResult {
                        repeat: r,
                        seed: seed_for(opts.base_seed, r),
                        accuracy: None,
                        selected_view: None,
                    };
                    (row, Some(e.to_string()))
                })
                .collect()
        }
        Ok(fitted) => par::map_range(opts.repeats, |r| {
            let seed = seed_for(opts.base_seed, r);
            let outcome = score_repeat(fitted, method, dataset, labels, opts.fraction, seed);
            match outcome {
                Ok((acc, view)) => (
                    RepeatResult {
                        repeat: r,
                        seed,
                        accuracy: Some(acc),
                        selected_view: view,
                    },
                    None,
                ),
                Err(e) => (
                    RepeatResult {
                        repeat: r,
                        seed,
                        accuracy: None,
                        selected_view: None,
                    },
                    Some(e.to_string()),
                ),
            }
        }),
    };

    let failures: Vec<(usize, String)> = rows
        .iter()
        .filter_map(|(row, err)| err.as_ref().map(|e| (row.repeat, e.clone())))
        .collect();
    let rows: Vec<RepeatResult> = rows.into_iter().map(|(row, _)| row).collect();
    let accuracies: Vec<f64> = rows.iter().filter_map(|r| r.accuracy).collect();
    let (mean_acc, max_acc) = if accuracies.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            accuracies.iter().sum::<f64>() / accuracies.len() as f64,
            accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let per_view_weights_summary = match &fitted {
        Ok(Fitted::Fused(m)) => Some(m.weights.as_slice().to_vec()),
        _ => None,
    };
    Ok(ExperimentReport {
        method,
        dims: d_star,
        repeats: opts.repeats,
        accuracies,
        mean_acc,
        max_acc,
        per_view_weights_summary,
        rows,
        failures,
        wallclock_seconds: start.elapsed().as_secs_f64(),
    })
}

fn score_repeat(
    fitted: &Fitted,
    method: Method,
    dataset: &MultiViewDataset,
    labels: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<(f64, Option<usize>)> {
    let split = make_split(dataset.n_samples(), fraction, seed)?;
    let train_labels: Vec<usize> = split.train_indices.iter().map(|&i| labels[i]).collect();
    let (coords, view) = match (fitted, method) {
        (Fitted::Fused(m), _) => (&m.u_star, None),
        (Fitted::Baselines(b), Method::Ble) => {
            let v = b.best_view(&split, labels)?;
            (b.per_view[v].coords(), Some(v))
        }
        (Fitted::Baselines(b), _) => (b.concatenated.coords(), None),
    };
    let predicted = one_nn_classify(coords, &split.train_indices, &train_labels, &split.test_indices)?;
    let truth: Vec<usize> = split.test_indices.iter().map(|&i| labels[i]).collect();
    Ok((accuracy(&predicted, &truth), view))
}
