//! Similarity matrices, degree vectors and graph Laplacians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::par;

/// Gaussian bandwidth: fixed, or the median pairwise distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

impl Bandwidth {
    pub const AUTO: Bandwidth = Bandwidth::Auto(AutoTag::Auto);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelKind {
    Gaussian { sigma: Bandwidth },
    Linear,
    Polynomial { degree: u32, offset: f64 },
}

impl Default for KernelKind {
    fn default() -> Self {
        KernelKind::Gaussian { sigma: Bandwidth::AUTO }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: DMatrix<f64>,
    kind: KernelKind,
    /// Bandwidth actually used (Gaussian only).
    sigma: Option<f64>,
}

impl SimilarityMatrix {
    /// Wraps an externally built similarity, symmetrising it as `(K + K^T)/2`.
    pub fn from_values(values: DMatrix<f64>, kind: KernelKind) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::Shape(format!("similarity must be square, got {:?}", values.shape())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite similarity entry".into()));
        }
        let values = symmetrize(&values);
        Ok(Self { values, kind, sigma: None })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| if i == j { a[(i, i)] } else { 0.5 * (a[(i, j)] + a[(j, i)]) })
}

/// Squared Euclidean distances between the columns of `points`.
///
/// Every entry is computed independently with a fixed summation order, so
/// the result is exactly symmetric and independent of the thread schedule.
pub fn pairwise_sq_distances(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.ncols();
    let rows = par::map_range(n, |i| {
        let xi = points.column(i);
        (0..n)
            .map(|j| {
                let xj = points.column(j);
                xi.iter().zip(xj.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .collect::<Vec<f64>>()
    });
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Lower median of all `n(n-1)/2` pairwise Euclidean distances, or 1 when
/// that median is zero.
pub fn median_bandwidth(sq_dist: &DMatrix<f64>) -> f64 {
    let n = sq_dist.nrows();
    let mut d: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in 1..n {
        for i in 0..j {
            d.push(sq_dist[(i, j)].sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let median = d[(d.len() - 1) / 2];
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

fn check_points(points: &DMatrix<f64>) -> Result<()> {
    if points.ncols() < 2 {
        return arg_err(format!("need at least 2 points, got {}", points.ncols()));
    }
    if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
        let (row, col) = (pos % points.nrows(), pos / points.nrows());
        return Err(Error::Data(format!("non-finite coordinate at ({row}, {col})")));
    }
    Ok(())
}

/// Similarity between the columns of `points`.
pub fn similarity_matrix(points: &DMatrix<f64>, kind: KernelKind) -> Result<SimilarityMatrix> {
    check_points(points)?;
    let n = points.ncols();
    match kind {
        KernelKind::Gaussian { sigma } => {
            let sq = pairwise_sq_distances(points);
            let sigma = match sigma {
                Bandwidth::Fixed(s) if s > 0.0 && s.is_finite() => s,
                Bandwidth::Fixed(s) => return arg_err(format!("gaussian bandwidth must be > 0, got {s}")),
                Bandwidth::Auto(_) => median_bandwidth(&sq),
            };
            let scale = 1.0 / (2.0 * sigma * sigma);
            let values = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.0
                } else {
                    // entries stay strictly positive even when exp underflows
                    (-sq[(i, j)] * scale).exp().max(f64::MIN_POSITIVE)
                }
            });
            Ok(SimilarityMatrix {
                values,
                kind,
                sigma: Some(sigma),
            })
        }
        KernelKind::Linear => {
            let values = symmetrize(&(points.transpose() * points));
            Ok(SimilarityMatrix { values, kind, sigma: None })
        }
        KernelKind::Polynomial { degree, offset } => {
            if degree == 0 || !offset.is_finite() {
                return arg_err("polynomial kernel needs degree >= 1 and a finite offset");
            }
            let gram = points.transpose() * points;
            let values = symmetrize(&gram.map(|g| (g + offset).powi(degree as i32)));
            Ok(SimilarityMatrix { values, kind, sigma: None })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeMatrix {
    diag: DVector<f64>,
}

impl DegreeMatrix {
    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }
}

pub fn degree_matrix(k: &SimilarityMatrix) -> DegreeMatrix {
    let v = k.values();
    let n = v.nrows();
    let diag = DVector::from_fn(n, |i, _| (0..n).map(|j| v[(i, j)]).sum::<f64>());
    DegreeMatrix { diag }
}

/// `D - K`, the form used in `tr(U (D - K) U^T)`.
pub fn graph_laplacian(k: &SimilarityMatrix) -> DMatrix<f64> {
    let deg = degree_matrix(k);
    let mut l = -k.values().clone();
    for i in 0..l.nrows() {
        l[(i, i)] += deg.diag[i];
    }
    l
}

/// Laplacian of the Gaussian-or-other similarity built directly from points.
pub fn laplacian_of(points: &DMatrix<f64>, kind: KernelKind) -> Result<DMatrix<f64>> {
    Ok(graph_laplacian(&similarity_matrix(points, kind)?))
}
