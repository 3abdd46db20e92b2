//! Multi-view dataset model, on-disk format, seeded splits and synthetic
//! fixtures.
//!
//! Samples are matrix columns: view `v` is a `dim_v x n` matrix. On disk each
//! view is a headerless CSV with one sample per row; the loader transposes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<DMatrix<f64>>,
    labels: Vec<usize>,
    view_names: Vec<String>,
    /// Original label text for each dense class id.
    class_names: Vec<String>,
}

impl MultiViewDataset {
    /// Builds a dataset from dense labels in `[0, C)`.
    pub fn new(views: Vec<DMatrix<f64>>, labels: Vec<usize>, view_names: Vec<String>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |&c| c + 1);
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_class_names(views, labels, view_names, class_names)
    }

    pub fn with_class_names(
        views: Vec<DMatrix<f64>>,
        labels: Vec<usize>,
        view_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Shape("dataset needs at least one view".into()));
        }
        if view_names.len() != views.len() {
            return Err(Error::Shape(format!(
                "{} view names for {} views",
                view_names.len(),
                views.len()
            )));
        }
        let n = views[0].ncols();
        for (v, x) in views.iter().enumerate() {
            if x.ncols() != n {
                return Err(Error::Shape(format!(
                    "view {v} has {} samples, view 0 has {n}",
                    x.ncols()
                )));
            }
            if x.nrows() == 0 {
                return Err(Error::Shape(format!("view {v} has zero features")));
            }
            check_finite(x, v)?;
        }
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} samples", labels.len())));
        }
        let mut seen = vec![false; class_names.len()];
        for &l in &labels {
            match seen.get_mut(l) {
                Some(s) => *s = true,
                None => return Err(Error::Data(format!("label {l} outside [0, {})", class_names.len()))),
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::Data(format!("class {c} has no samples")));
        }
        Ok(Self {
            views,
            labels,
            view_names,
            class_names,
        })
    }

    pub fn views(&self) -> &[DMatrix<f64>] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &DMatrix<f64> {
        &self.views[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// All views stacked along the feature axis.
    pub fn concatenated(&self) -> DMatrix<f64> {
        let total: usize = self.views.iter().map(|x| x.nrows()).sum();
        let mut out = DMatrix::zeros(total, self.n_samples());
        let mut row = 0;
        for x in &self.views {
            out.rows_mut(row, x.nrows()).copy_from(x);
            row += x.nrows();
        }
        out
    }

    /// Same samples in a new order: sample `j` of the result is sample
    /// `order[j]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_samples();
        let mut hit = vec![false; n];
        if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut hit[i], true)) {
            return arg_err("order must be a permutation of the sample indices");
        }
        let views = self.views.iter().map(|x| x.select_columns(order)).collect();
        let labels = order.iter().map(|&i| self.labels[i]).collect();
        Self::with_class_names(views, labels, self.view_names.clone(), self.class_names.clone())
    }
}

fn check_finite(x: &DMatrix<f64>, view: usize) -> Result<()> {
    for col in 0..x.ncols() {
        for row in 0..x.nrows() {
            if !x[(row, col)].is_finite() {
                return Err(Error::NonFinite { view, row, col });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewMeta {
    pub name: String,
    pub file: String,
    pub dim: usize,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub views: Vec<ViewMeta>,
    pub n_samples: usize,
    pub labels: String,
}

fn load_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Load {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| load_err(path, e.to_string()))
}

/// Loads a dataset directory (`meta.json`, one CSV per view, `labels.csv`).
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<MultiViewDataset> {
    let dir = dir.as_ref();
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta =
        serde_json::from_str(&read_text(&meta_path)?).map_err(|e| load_err(&meta_path, e.to_string()))?;
    if meta.views.is_empty() {
        return Err(load_err(&meta_path, "no views listed"));
    }

    let mut views = Vec::with_capacity(meta.views.len());
    for (v, vm) in meta.views.iter().enumerate() {
        let x = read_view_csv(&dir.join(&vm.file), v, vm.dim, meta.n_samples)?;
        views.push(x);
    }

    let labels_path = dir.join(&meta.labels);
    let (labels, class_names) = read_labels(&labels_path, meta.n_samples)?;
    let names = meta.views.iter().map(|v| v.name.clone()).collect();
    MultiViewDataset::with_class_names(views, labels, names, class_names)
}

fn read_view_csv(path: &Path, view: usize, dim: usize, n: usize) -> Result<DMatrix<f64>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut x = DMatrix::zeros(dim, n);
    let mut count = 0;
    for (sample, record) in reader.records().enumerate() {
        let record = record.map_err(|e| load_err(path, e.to_string()))?;
        if sample >= n {
            return Err(Error::Shape(format!(
                "{}: more than {n} samples (meta n_samples)",
                path.display()
            )));
        }
        if record.len() != dim {
            return Err(Error::Shape(format!(
                "{}: sample {sample} has {} features, meta says {dim}",
                path.display(),
                record.len()
            )));
        }
        for (feature, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                Error::Data(format!(
                    "{}: unparseable value {field:?} at sample {sample}, feature {feature}",
                    path.display()
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    view,
                    row: feature,
                    col: sample,
                });
            }
            x[(feature, sample)] = value;
        }
        count += 1;
    }
    if count != n {
        return Err(Error::Shape(format!(
            "{}: {count} samples, meta says {n}",
            path.display()
        )));
    }
    Ok(x)
}

fn read_labels(path: &Path, n: usize) -> Result<(Vec<usize>, Vec<String>)> {
    let text = read_text(path)?;
    let mut raw = Vec::with_capacity(n);
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: i64 = line.parse().map_err(|_| {
            Error::Data(format!(
                "{}: line {} is not an integer label: {line:?}",
                path.display(),
                line_no + 1
            ))
        })?;
        raw.push(value);
    }
    if raw.len() != n {
        return Err(Error::Shape(format!(
            "{}: {} labels, meta says {n}",
            path.display(),
            raw.len()
        )));
    }
    let dense: BTreeMap<i64, usize> = {
        let mut uniq = raw.clone();
        uniq.sort_unstable();
        uniq.dedup();
        uniq.into_iter().enumerate().map(|(i, l)| (l, i)).collect()
    };
    let class_names = dense.keys().map(|l| l.to_string()).collect();
    let labels = raw.iter().map(|l| dense[l]).collect();
    Ok((labels, class_names))
}

/// Writes `ds` in the directory format read by [`load_dataset`]. Values use
/// the shortest decimal text that parses back to the same `f64`.
pub fn write_dataset(ds: &MultiViewDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut views = Vec::with_capacity(ds.n_views());
    for (v, x) in ds.views().iter().enumerate() {
        let file = format!("view_{v}.csv");
        let mut text = String::new();
        for sample in 0..x.ncols() {
            let row: Vec<String> = x.column(sample).iter().map(|val| val.to_string()).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(dir.join(&file), text)?;
        views.push(ViewMeta {
            name: ds.view_names()[v].clone(),
            file,
            dim: x.nrows(),
        });
    }
    let labels: String = ds
        .labels()
        .iter()
        .map(|&l| format!("{}\n", ds.class_names()[l]))
        .collect();
    fs::write(dir.join("labels.csv"), labels)?;
    let meta = DatasetMeta {
        views,
        n_samples: ds.n_samples(),
        labels: "labels.csv".into(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Data(e.to_string()))?;
    fs::write(dir.join("meta.json"), json + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub fraction: f64,
}

/// Seeded random train/test partition with `round(fraction * n)` training
/// samples. Both index lists are returned sorted.
pub fn make_split(n: usize, fraction: f64, seed: u64) -> Result<SplitPlan> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return arg_err(format!("split fraction must lie in (0, 1), got {fraction}"));
    }
    if n < 2 {
        return arg_err(format!("need at least 2 samples to split, got {n}"));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return arg_err(format!(
            "fraction {fraction} of {n} samples leaves an empty train or test side"
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        test_indices: test,
        seed,
        fraction,
    })
}

/// One synthetic view: output dimension and additive Gaussian noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewSpec {
    pub dim: usize,
    pub noise_sigma: f64,
}

/// Serialized form of a [`synth_multiview`] call (used by `mvlpe synth`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_per_class: usize,
    pub n_classes: usize,
    pub views: Vec<ViewSpec>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn generate(&self) -> Result<MultiViewDataset> {
        synth_multiview(self.n_per_class, self.n_classes, &self.views, self.seed)
    }
}

/// Spread of class centroids in the latent space.
const CENTROID_SCALE: f64 = 3.0;
/// Within-class spread around each centroid.
const LATENT_SPREAD: f64 = 0.5;

/// Draws class centroids in a shared latent space, scatters samples around
/// them, and maps the latent points into every view through a seeded random
/// linear map plus Gaussian noise. Samples are ordered class by class.
pub fn synth_multiview(
    n_per_class: usize,
    n_classes: usize,
    view_specs: &[ViewSpec],
    seed: u64,
) -> Result<MultiViewDataset> {
    if n_classes < 2 {
        return arg_err("synthetic data needs at least 2 classes");
    }
    if n_per_class < 1 {
        return arg_err("synthetic data needs at least 1 sample per class");
    }
    if view_specs.is_empty() {
        return arg_err("synthetic data needs at least one view");
    }
    for (v, s) in view_specs.iter().enumerate() {
        if s.dim < 2 {
            return arg_err(format!("view {v}: dim must be >= 2"));
        }
        if !(s.noise_sigma >= 0.0 && s.noise_sigma.is_finite()) {
            return arg_err(format!("view {v}: noise_sigma must be finite and >= 0"));
        }
    }

    let latent_dim = n_classes.max(2);
    let n = n_per_class * n_classes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let centroids = DMatrix::from_fn(latent_dim, n_classes, |_, _| CENTROID_SCALE * std_normal.sample(&mut rng));
    let mut latent = DMatrix::zeros(latent_dim, n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..n_classes {
        for k in 0..n_per_class {
            let j = c * n_per_class + k;
            for r in 0..latent_dim {
                latent[(r, j)] = centroids[(r, c)] + LATENT_SPREAD * std_normal.sample(&mut rng);
            }
            labels.push(c);
        }
    }

    let map_scale = 1.0 / (latent_dim as f64).sqrt();
    let mut views = Vec::with_capacity(view_specs.len());
    for spec in view_specs {
        let map = DMatrix::from_fn(spec.dim, latent_dim, |_, _| map_scale * std_normal.sample(&mut rng));
        let mut x = &map * &latent;
        if spec.noise_sigma > 0.0 {
            for val in x.iter_mut() {
                *val += spec.noise_sigma * std_normal.sample(&mut rng);
            }
        }
        views.push(x);
    }
    let names = (0..view_specs.len()).map(|v| format!("view{v}")).collect();
    MultiViewDataset::new(views, labels, names)
}

/// Noise level of the two corrupted views in [`standard_noisy_fixture`].
pub const STANDARD_FIXTURE_NOISE: f64 = 1.5;

/// Three views over 120 samples in 3 classes: one clean view and two noisy
/// ones. The reference workload for comparing fused and single-view
/// embeddings.
pub fn standard_noisy_fixture(seed: u64) -> MultiViewDataset {
    let spec = standard_noisy_spec(seed);
    spec.generate().expect("fixture spec is valid")
}

pub fn standard_noisy_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        n_per_class: 40,
        n_classes: 3,
        views: vec![
            ViewSpec { dim: 10, noise_sigma: 0.0 },
            ViewSpec { dim: 12, noise_sigma: STANDARD_FIXTURE_NOISE },
            ViewSpec { dim: 8, noise_sigma: STANDARD_FIXTURE_NOISE },
        ],
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_view_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path();
        fs::write(
            p.join("meta.json"),
            r#"{ "views": [{"name": "a", "file": "a.csv", "dim": 3},
                           {"name": "b", "file": "b.csv", "dim": 4}],
                 "n_samples": 5, "labels": "labels.csv" }"#,
        )
        .unwrap();
        let a: String = (0..5).map(|i| format!("{i},{}.5,-{i}\n", i + 1)).collect();
        let b: String = (0..5).map(|i| format!("{i},0,1e-3,{}\n", 2 * i)).collect();
        fs::write(p.join("a.csv"), a).unwrap();
        fs::write(p.join("b.csv"), b).unwrap();
        fs::write(p.join("labels.csv"), "7\n-1\n7\n3\n-1\n").unwrap();
        dir
    }

    #[test]
    fn loads_two_views() {
        let dir = two_view_dir();
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.n_views(), 2);
        assert_eq!(ds.n_samples(), 5);
        assert_eq!(ds.view(0).shape(), (3, 5));
        assert_eq!(ds.view(1).shape(), (4, 5));
        assert_eq!(ds.view(0)[(1, 2)], 3.5);
        // -1 -> 0, 3 -> 1, 7 -> 2
        assert_eq!(ds.labels(), &[2, 0, 2, 1, 0]);
        assert_eq!(ds.class_names(), &["-1", "3", "7"]);
    }

    #[test]
    fn truncated_view_is_shape_error() {
        let dir = two_view_dir();
        let a: String = (0..4).map(|i| format!("{i},1,2\n")).collect();
        fs::write(dir.path().join("a.csv"), a).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Shape(_))));
    }

    #[test]
    fn nan_label_is_data_error() {
        let dir = two_view_dir();
        fs::write(dir.path().join("labels.csv"), "1\n2\nNaN\n1\n2\n").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::Data(_))));
    }

    #[test]
    fn nan_feature_reports_location() {
        let dir = two_view_dir();
        fs::write(dir.path().join("b.csv"), "0,0,0,0\n0,0,0,0\n0,0,NaN,0\n0,0,0,0\n0,0,0,0\n").unwrap();
        match load_dataset(dir.path()) {
            Err(Error::NonFinite { view, row, col }) => assert_eq!((view, row, col), (1, 2, 2)),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_names_it() {
        let dir = two_view_dir();
        fs::remove_file(dir.path().join("b.csv")).unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Load { path, .. }) => assert!(path.ends_with("b.csv")),
            other => panic!("expected Load error, got {other:?}"),
        }
    }

    #[test]
    fn write_then_load_round_trips() {
        let ds = synth_multiview(4, 3, &[ViewSpec { dim: 3, noise_sigma: 0.2 }, ViewSpec { dim: 2, noise_sigma: 0.0 }], 11)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);

        let dir2 = tempfile::tempdir().unwrap();
        write_dataset(&back, dir2.path()).unwrap();
        for f in ["meta.json", "labels.csv", "view_0.csv", "view_1.csv"] {
            assert_eq!(
                fs::read_to_string(dir.path().join(f)).unwrap(),
                fs::read_to_string(dir2.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn split_cardinality_and_determinism() {
        let a = make_split(4, 0.5, 7).unwrap();
        assert_eq!(a.train_indices.len(), 2);
        assert_eq!(a.test_indices.len(), 2);
        assert!(a.train_indices.iter().all(|i| !a.test_indices.contains(i)));
        assert_eq!(a, make_split(4, 0.5, 7).unwrap());
    }

    #[test]
    fn split_seeds_differ() {
        let a = make_split(100, 0.5, 1).unwrap();
        let b = make_split(100, 0.5, 2).unwrap();
        assert_ne!(a.train_indices, b.train_indices);
    }

    #[test]
    fn split_rejects_bad_fraction() {
        for f in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            assert!(matches!(make_split(10, f, 0), Err(Error::Argument(_))));
        }
    }

    #[test]
    fn synth_noiseless_and_deterministic() {
        let specs = [ViewSpec { dim: 5, noise_sigma: 0.0 }, ViewSpec { dim: 7, noise_sigma: 0.0 }];
        let a = synth_multiview(10, 2, &specs, 3).unwrap();
        let b = synth_multiview(10, 2, &specs, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_samples(), 20);
        assert_eq!(a.view(0).nrows(), 5);
        assert_eq!(a.view(1).nrows(), 7);
        // noiseless views are exact linear images of a 2-d latent: rank 2
        let sv = a.view(1).clone().svd(false, false).singular_values;
        assert!(sv[2] < 1e-10 * sv[0]);
    }

    #[test]
    fn synth_rejects_bad_specs() {
        assert!(synth_multiview(3, 1, &[ViewSpec { dim: 3, noise_sigma: 0.0 }], 0).is_err());
        assert!(synth_multiview(3, 2, &[ViewSpec { dim: 1, noise_sigma: 0.0 }], 0).is_err());
        assert!(synth_multiview(3, 2, &[ViewSpec { dim: 3, noise_sigma: -1.0 }], 0).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition(n in 2usize..200, fraction in 0.05f64..0.95, seed in any::<u64>()) {
            if let Ok(plan) = make_split(n, fraction, seed) {
                let mut all: Vec<usize> = plan.train_indices.iter().chain(&plan.test_indices).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(plan.train_indices.len(), (fraction * n as f64).round() as usize);
            }
        }
    }
}
