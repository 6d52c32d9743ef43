//! Crowd-size classification with a nearest-neighbour rule on PCA scores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::CsiDataset;
use crate::features::{fit_pca, FeatureError, FeatureVector};

pub const N_CATEGORIES: usize = 8;

/// Per-category (train, test) counts in the order they are reported.
pub const PAPER_SPLITS: [Split; 6] = [
    Split { train: 200, test: 250 },
    Split { train: 300, test: 350 },
    Split { train: 400, test: 500 },
    Split { train: 500, test: 700 },
    Split { train: 600, test: 800 },
    Split { train: 750, test: 1000 },
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("category {category} has {available} samples, {needed} required")]
    InsufficientSamples { category: u8, needed: usize, available: usize },
    #[error("split {train}/{test} needs {needed} samples in category {category}, only {available} available")]
    SplitTooLarge { train: usize, test: usize, category: u8, needed: usize, available: usize },
    #[error("feature dimensionality {got} does not match model ({expected})")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("category {0} outside 1..=8")]
    BadCategory(u8),
    #[error("feature vector {0} has no label")]
    MissingLabel(usize),
    #[error("model has no exemplars")]
    Empty,
    #[error("k_neighbors must be at least 1")]
    BadNeighbors,
    #[error("confusion matrix is empty")]
    ZeroTotal,
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Category index (1-based) to person count.
pub struct CategoryMap;

impl CategoryMap {
    pub fn persons(category: u8) -> Result<u32, EstimatorError> {
        match category {
            1 => Ok(0),
            2..=8 => Ok(3 * (category as u32 - 2) + 1),
            _ => Err(EstimatorError::BadCategory(category)),
        }
    }

    pub fn category(persons: u32) -> Option<u8> {
        (1..=N_CATEGORIES as u8).find(|&c| Self::persons(c) == Ok(persons))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: usize,
    pub test: usize,
}

/// Flat exemplar store searched by linear scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    dim: usize,
    exemplars: Vec<f64>,
    labels: Vec<u8>,
    k_neighbors: usize,
}

impl KnnModel {
    pub fn new(dim: usize, exemplars: Vec<f64>, labels: Vec<u8>) -> Result<Self, EstimatorError> {
        if labels.is_empty() || dim == 0 {
            return Err(EstimatorError::Empty);
        }
        if exemplars.len() != dim * labels.len() {
            return Err(EstimatorError::DimensionMismatch { expected: dim * labels.len(), got: exemplars.len() });
        }
        if let Some(&c) = labels.iter().find(|&&c| !(1..=N_CATEGORIES as u8).contains(&c)) {
            return Err(EstimatorError::BadCategory(c));
        }
        Ok(KnnModel { dim, exemplars, labels, k_neighbors: 1 })
    }

    /// Use a `k`-neighbour majority vote instead of the single nearest.
    pub fn with_neighbors(mut self, k: usize) -> Result<Self, EstimatorError> {
        if k == 0 {
            return Err(EstimatorError::BadNeighbors);
        }
        self.k_neighbors = k;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn exemplar(&self, i: usize) -> &[f64] {
        &self.exemplars[i * self.dim..(i + 1) * self.dim]
    }

    pub fn k_neighbors(&self) -> usize {
        self.k_neighbors
    }

    /// Predicted category for one query.
    ///
    /// Candidates are ordered by (squared distance, category, index), so
    /// equal distances resolve to the lowest category, then the earliest
    /// exemplar. With `k > 1` the most frequent category among the first
    /// `k` wins, ties again going to the lowest category.
    pub fn classify(&self, query: &[f64]) -> Result<u8, EstimatorError> {
        if query.len() != self.dim {
            return Err(EstimatorError::DimensionMismatch { expected: self.dim, got: query.len() });
        }
        let dist = |i: usize| -> f64 { self.exemplar(i).iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum() };
        let key_less = |a: (f64, u8, usize), b: (f64, u8, usize)| a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2));

        if self.k_neighbors == 1 {
            let mut best = (dist(0), self.labels[0], 0);
            for i in 1..self.len() {
                let cand = (dist(i), self.labels[i], i);
                if key_less(cand, best) {
                    best = cand;
                }
            }
            return Ok(best.1);
        }

        let mut all: Vec<(f64, u8, usize)> = (0..self.len()).map(|i| (dist(i), self.labels[i], i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut votes = [0usize; N_CATEGORIES];
        for &(_, c, _) in all.iter().take(self.k_neighbors) {
            votes[c as usize - 1] += 1;
        }
        let mut best = 0;
        for c in 1..N_CATEGORIES {
            if votes[c] > votes[best] {
                best = c;
            }
        }
        Ok(best as u8 + 1)
    }

    /// Classify many queries in parallel; output order follows input order.
    pub fn classify_all(&self, queries: &[FeatureVector]) -> Result<Vec<u8>, EstimatorError> {
        queries.par_iter().map(|f| self.classify(&f.scores)).collect()
    }
}

fn labelled(features: &[FeatureVector]) -> Result<Vec<u8>, EstimatorError> {
    features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let c = f.label.ok_or(EstimatorError::MissingLabel(i))?;
            if (1..=N_CATEGORIES as u8).contains(&c) {
                Ok(c)
            } else {
                Err(EstimatorError::BadCategory(c))
            }
        })
        .collect()
}

/// Keep the first `per_category` vectors of each category, in input order.
pub fn train_knn(features: &[FeatureVector], per_category: usize) -> Result<KnnModel, EstimatorError> {
    let labels = labelled(features)?;
    let dim = features.first().map_or(0, |f| f.scores.len());
    let mut taken = [0usize; N_CATEGORIES];
    let mut exemplars = Vec::new();
    let mut kept = Vec::new();
    for (f, &c) in features.iter().zip(&labels) {
        if f.scores.len() != dim {
            return Err(EstimatorError::DimensionMismatch { expected: dim, got: f.scores.len() });
        }
        let slot = &mut taken[c as usize - 1];
        if *slot < per_category {
            *slot += 1;
            exemplars.extend_from_slice(&f.scores);
            kept.push(c);
        }
    }
    for (i, &n) in taken.iter().enumerate() {
        if n < per_category {
            return Err(EstimatorError::InsufficientSamples {
                category: i as u8 + 1,
                needed: per_category,
                available: n,
            });
        }
    }
    KnnModel::new(dim, exemplars, kept)
}

/// Rows are true categories, columns predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; N_CATEGORIES]; N_CATEGORIES],
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        ConfusionMatrix { counts: [[0; N_CATEGORIES]; N_CATEGORIES] }
    }
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; N_CATEGORIES]; N_CATEGORIES]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn record(&mut self, truth: u8, predicted: u8) {
        self.counts[truth as usize - 1][predicted as usize - 1] += 1;
    }

    pub fn trace(&self) -> u64 {
        (0..N_CATEGORIES).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [u64; N_CATEGORIES] {
        self.counts.map(|r| r.iter().sum())
    }

    /// Eight comma-separated lines, one per true category.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.counts {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn evaluate(model: &KnnModel, test: &[FeatureVector]) -> Result<ConfusionMatrix, EstimatorError> {
    let truth = labelled(test)?;
    let predicted = model.classify_all(test)?;
    let mut m = ConfusionMatrix::default();
    for (t, p) in truth.into_iter().zip(predicted) {
        m.record(t, p);
    }
    Ok(m)
}

/// Trace over total.
pub fn accuracy(m: &ConfusionMatrix) -> Result<f64, EstimatorError> {
    match m.total() {
        0 => Err(EstimatorError::ZeroTotal),
        n => Ok(m.trace() as f64 / n as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub split: Split,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Row indices of the training and test portions of one split: per
/// category, the first `train` rows and then the next `test` rows.
pub fn split_indices(ds: &CsiDataset, split: Split) -> Result<(Vec<usize>, Vec<usize>), EstimatorError> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 1..=N_CATEGORIES as u8 {
        let idx = ds.indices_of(c);
        let needed = split.train + split.test;
        if idx.len() < needed {
            return Err(EstimatorError::SplitTooLarge {
                train: split.train,
                test: split.test,
                category: c,
                needed,
                available: idx.len(),
            });
        }
        train.extend_from_slice(&idx[..split.train]);
        test.extend_from_slice(&idx[split.train..needed]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Accuracy for each split. PCA is refitted on the training rows of every
/// split so test rows never influence the basis.
pub fn accuracy_grid(
    ds: &CsiDataset,
    splits: &[Split],
    pca_k: usize,
    k_neighbors: usize,
) -> Result<Vec<GridRow>, EstimatorError> {
    // Validate every split up front so the error names the first bad one.
    let parts = splits.iter().map(|&s| split_indices(ds, s)).collect::<Result<Vec<_>, _>>()?;
    splits
        .iter()
        .zip(parts)
        .map(|(&split, (train_idx, test_idx))| {
            let train = ds.subset(&train_idx);
            let test = ds.subset(&test_idx);
            let pca = fit_pca(&train, pca_k)?;
            let model = train_knn(&pca.project_dataset(&train)?, split.train)?.with_neighbors(k_neighbors)?;
            let confusion = evaluate(&model, &pca.project_dataset(&test)?)?;
            Ok(GridRow { split, accuracy: accuracy(&confusion)?, confusion })
        })
        .collect()
}
