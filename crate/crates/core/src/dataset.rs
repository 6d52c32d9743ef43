//! Labeled collections of CSI vectors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lte_phy::CsiVector;
use crate::scenario_sim::Motion;

/// Highest category label (categories are numbered from 1).
pub const MAX_CATEGORY: u8 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("row {row}: length {len} does not match dimensionality {d}")]
    LengthMismatch { row: usize, len: usize, d: usize },
    #[error("row {row}: non-finite value at column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row {row}: label {label} outside 1..={MAX_CATEGORY}")]
    BadLabel { row: usize, label: u8 },
    #[error("dataset dimensionality must be positive")]
    ZeroDimension,
}

/// Where a dataset came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub source: String,
    #[serde(default)]
    pub day_id: Option<u32>,
    #[serde(default)]
    pub motion: Option<Motion>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

/// Row-major matrix of CSI magnitudes with one category label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiDataset {
    d: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
    pub provenance: Provenance,
}

impl CsiDataset {
    pub fn new(d: usize) -> Result<Self, DatasetError> {
        if d == 0 {
            return Err(DatasetError::ZeroDimension);
        }
        Ok(Self { d, values: Vec::new(), labels: Vec::new(), provenance: Provenance::default() })
    }

    pub fn from_rows(d: usize, rows: impl IntoIterator<Item = (Vec<f64>, u8)>) -> Result<Self, DatasetError> {
        let mut ds = Self::new(d)?;
        for (row, label) in rows {
            ds.push(&row, label)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, row: &[f64], label: u8) -> Result<(), DatasetError> {
        let index = self.labels.len();
        if row.len() != self.d {
            return Err(DatasetError::LengthMismatch { row: index, len: row.len(), d: self.d });
        }
        if let Some(col) = row.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { row: index, col });
        }
        if label == 0 || label > MAX_CATEGORY {
            return Err(DatasetError::BadLabel { row: index, label });
        }
        self.values.extend_from_slice(row);
        self.labels.push(label);
        Ok(())
    }

    pub fn push_vector(&mut self, v: &CsiVector, label: u8) -> Result<(), DatasetError> {
        self.push(&v.values, label)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices carrying `label`, in dataset order.
    pub fn indices_of(&self, label: u8) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == label).map(|(i, _)| i).collect()
    }

    /// Row count per label `1..=8` (index 0 is category 1).
    pub fn category_counts(&self) -> [usize; MAX_CATEGORY as usize] {
        let mut counts = [0; MAX_CATEGORY as usize];
        for &l in &self.labels {
            counts[l as usize - 1] += 1;
        }
        counts
    }

    /// New dataset holding the given rows in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self { d: self.d, values, labels, provenance: self.provenance.clone() }
    }
}
