//! JSON model files.
//!
//! Matrices are row-major nested arrays. Every number is written with 17
//! significant digits so the file reads back bit-identical.

use std::fs;
use std::io;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, Serializer};

use super::{MvLpeConfig, MvLpeModel};
use crate::error::{Error, Result};
use crate::lpe::{Carrier, Embedding, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub variant: Variant,
    pub coords: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub ridge: f64,
    pub constraint_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub config: MvLpeConfig,
    pub weights: Vec<f64>,
    pub u_star: Vec<Vec<f64>>,
    pub view_embeddings: Vec<EmbeddingFile>,
    pub objective_trace: Vec<f64>,
    pub objective_trace_prev_weights: Vec<f64>,
    pub disagreement_trace: Vec<Vec<f64>>,
    pub centroid_eigenvalues: Vec<f64>,
    pub converged: bool,
    pub iters: usize,
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Data("ragged matrix in model file".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl EmbeddingFile {
    fn from_embedding(e: &Embedding) -> Self {
        let (projection, beta) = match e.carrier() {
            Carrier::None => (None, None),
            Carrier::Projection(w) => (Some(rows_of(w)), None),
            Carrier::KernelCoefficients { beta, .. } => (None, Some(rows_of(beta))),
        };
        Self {
            variant: e.variant(),
            coords: rows_of(e.coords()),
            eigenvalues: e.eigenvalues().iter().copied().collect(),
            ridge: e.ridge(),
            constraint_residual: e.constraint_residual(),
            projection,
            beta,
        }
    }

    pub fn to_embedding(&self) -> Result<Embedding> {
        let carrier = match (&self.projection, &self.beta) {
            (Some(w), _) => Carrier::Projection(matrix_from_rows(w)?),
            (None, Some(b)) => Carrier::KernelCoefficients {
                beta: matrix_from_rows(b)?,
                kernel: None,
            },
            (None, None) => Carrier::None,
        };
        Ok(Embedding::from_parts(
            matrix_from_rows(&self.coords)?,
            self.variant,
            carrier,
            DVector::from_vec(self.eigenvalues.clone()),
            self.ridge,
            self.constraint_residual,
        ))
    }
}

impl ModelFile {
    pub fn from_model(model: &MvLpeModel) -> Self {
        Self {
            config: model.config.clone(),
            weights: model.weights.as_slice().to_vec(),
            u_star: rows_of(&model.u_star),
            view_embeddings: model.view_embeddings.iter().map(EmbeddingFile::from_embedding).collect(),
            objective_trace: model.objective_trace.clone(),
            objective_trace_prev_weights: model.objective_trace_prev_weights.clone(),
            disagreement_trace: model.disagreement_trace.clone(),
            centroid_eigenvalues: model.centroid_eigenvalues.clone(),
            converged: model.converged,
            iters: model.iters,
        }
    }

    pub fn u_star(&self) -> Result<DMatrix<f64>> {
        matrix_from_rows(&self.u_star)
    }

    pub fn n_views(&self) -> usize {
        self.weights.len()
    }
}

/// Writes floats as `d.dddddddddddddddde±x` (17 significant digits).
struct FullPrecision;

impl Formatter for FullPrecision {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }
}

pub fn model_to_json(model: &MvLpeModel) -> Result<String> {
    to_full_precision_json(&ModelFile::from_model(model))
}

pub(crate) fn to_full_precision_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, FullPrecision);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Data(format!("serializing model: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_model(model: &MvLpeModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
