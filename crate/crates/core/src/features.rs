//! PCA feature extraction on CSI magnitude vectors.
//!
//! One basis is fitted jointly over all categories. Inputs are mean-centred
//! but not variance-standardized: every dimension is a channel magnitude in
//! the same units.

mod eigen;

pub use eigen::{symmetric_eigen, SymmetricEigen};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CsiDataset, Provenance};

/// Default number of retained principal components.
pub const DEFAULT_K: usize = 3;
/// Relative off-diagonal threshold at which the eigen-solver stops.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("need at least 2 rows to fit PCA, got {0}")]
    TooFewRows(usize),
    #[error("k = {k} outside 1..={max}")]
    InvalidK { k: usize, max: usize },
    #[error("degenerate covariance (zero variance)")]
    DegenerateCovariance,
    #[error("eigen-solver did not converge")]
    NoConvergence,
    #[error("vector length {got} does not match model dimensionality {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cannot normalize an empty score set")]
    EmptyScores,
    #[error("degenerate score range: max equals min ({0})")]
    DegenerateScores(f64),
}

/// Min-max mapping of first-component scores onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pc1Normalization {
    pub min: f64,
    pub max: f64,
}

impl Pc1Normalization {
    /// Map a future score with the stored range, clamped to `[0, 1]`.
    pub fn apply(&self, score: f64) -> f64 {
        ((score - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// Normalize first-component scores; returns the scaled values and the
/// calibration to reuse on future samples.
pub fn normalize_pc1(scores: &[f64]) -> Result<(Vec<f64>, Pc1Normalization), FeatureError> {
    if scores.is_empty() {
        return Err(FeatureError::EmptyScores);
    }
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(FeatureError::DegenerateScores(min));
    }
    let cal = Pc1Normalization { min, max };
    Ok((scores.iter().map(|&s| cal.apply(s)).collect(), cal))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub scores: Vec<f64>,
    #[serde(default)]
    pub label: Option<u8>,
}

/// Mean, top-`k` orthonormal components and their eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaModel {
    pub d: usize,
    pub k: usize,
    pub mean: Vec<f64>,
    /// Row-major `k x d`; row `i` is component `i`.
    pub components: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    #[serde(default)]
    pub normalization: Option<Pc1Normalization>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

impl PcaModel {
    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.d..(i + 1) * self.d]
    }

    /// `components^T (v - mean)`.
    pub fn project(&self, v: &[f64]) -> Result<FeatureVector, FeatureError> {
        if v.len() != self.d {
            return Err(FeatureError::LengthMismatch { expected: self.d, got: v.len() });
        }
        let scores = (0..self.k)
            .map(|i| self.component(i).iter().zip(v).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect();
        Ok(FeatureVector { scores, label: None })
    }

    /// Project every row, carrying the dataset labels along.
    pub fn project_dataset(&self, ds: &CsiDataset) -> Result<Vec<FeatureVector>, FeatureError> {
        (0..ds.len())
            .map(|i| {
                let mut f = self.project(ds.row(i))?;
                f.label = Some(ds.label(i));
                Ok(f)
            })
            .collect()
    }

    /// Sum of squared residuals after reconstructing each row from its scores.
    pub fn reconstruction_error(&self, ds: &CsiDataset) -> Result<f64, FeatureError> {
        let mut total = 0.0;
        for row in ds.rows() {
            let f = self.project(row)?;
            for (j, (x, m)) in row.iter().zip(&self.mean).enumerate() {
                let recon: f64 = (0..self.k).map(|i| self.component(i)[j] * f.scores[i]).sum();
                total += (x - m - recon).powi(2);
            }
        }
        Ok(total)
    }
}

/// Fit PCA on every row of `train`.
pub fn fit_pca(train: &CsiDataset, k: usize) -> Result<PcaModel, FeatureError> {
    let mut model = fit_pca_matrix(train.values(), train.dim(), k)?;
    model.provenance = Some(train.provenance.clone());
    Ok(model)
}

/// Fit PCA on a row-major matrix with `d` columns.
pub fn fit_pca_matrix(values: &[f64], d: usize, k: usize) -> Result<PcaModel, FeatureError> {
    let rows = values.len().checked_div(d).unwrap_or(0);
    if rows < 2 {
        return Err(FeatureError::TooFewRows(rows));
    }
    let max_k = d.min(rows - 1);
    if k < 1 || k > max_k {
        return Err(FeatureError::InvalidK { k, max: max_k });
    }

    let mut mean = vec![0.0; d];
    for row in values.chunks_exact(d) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);

    let cov = covariance(values, d, &mean);
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let scale = 1.0 + mean.iter().map(|m| m * m).sum::<f64>();
    if !(trace > 1e-24 * scale) {
        return Err(FeatureError::DegenerateCovariance);
    }

    let eig = symmetric_eigen(&cov, d, EIGEN_TOLERANCE).ok_or(FeatureError::NoConvergence)?;
    let mut components = Vec::with_capacity(k * d);
    for v in eig.vectors.iter().take(k) {
        let mut v = v.clone();
        let mut lead = 0;
        for (j, x) in v.iter().enumerate() {
            if x.abs() > v[lead].abs() {
                lead = j;
            }
        }
        if v[lead] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.extend(v);
    }
    let eigenvalues = eig.values.iter().take(k).map(|&l| l.max(0.0)).collect();
    Ok(PcaModel { d, k, mean, components, eigenvalues, normalization: None, provenance: None })
}

/// Sample covariance (divisor `rows - 1`) of the centred matrix.
fn covariance(values: &[f64], d: usize, mean: &[f64]) -> Vec<f64> {
    let rows = values.len() / d;
    let mut cov = vec![0.0; d * d];
    let mut centred = vec![0.0; d];
    for row in values.chunks_exact(d) {
        for ((c, x), m) in centred.iter_mut().zip(row).zip(mean) {
            *c = x - m;
        }
        for i in 0..d {
            let ci = centred[i];
            let out = &mut cov[i * d..(i + 1) * d];
            for j in i..d {
                out[j] += ci * centred[j];
            }
        }
    }
    let denom = (rows - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    cov
}
