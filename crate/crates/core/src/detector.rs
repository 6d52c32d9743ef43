//! Empty-vs-occupied detection by thresholding the normalized first
//! principal-component score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default threshold grid resolution.
pub const DEFAULT_GRID_STEP: f64 = 0.01;
/// Default allowed day-to-day difference of minimum error, percentage points.
pub const DEFAULT_CONSISTENCY_BOUND_PP: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("single-class input: both empty and occupied samples are required")]
    SingleClass,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("score {value} at index {index} outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f64 },
    #[error("threshold grid must be nonempty, strictly increasing and inside [0, 1]")]
    BadGrid,
    #[error("grid step {0} outside (0, 1]")]
    BadStep(f64),
}

/// Which side of the threshold the empty class lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    EmptyBelow,
    EmptyAbove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupancy {
    Empty,
    Occupied,
}

/// Decision rule shared by the sweep and [`detect`]. A score equal to the
/// threshold is reported as occupied in both orientations.
pub fn classify(score: f64, threshold: f64, orientation: Orientation) -> Occupancy {
    let empty = match orientation {
        Orientation::EmptyBelow => score < threshold,
        Orientation::EmptyAbove => score > threshold,
    };
    if empty {
        Occupancy::Empty
    } else {
        Occupancy::Occupied
    }
}

/// `true` for every category other than 1 (the empty environment).
pub fn occupancy_labels(categories: &[u8]) -> Vec<bool> {
    categories.iter().map(|&c| c != 1).collect()
}

/// Grid `0, step, 2 step, ..., 1`, computed as `i / n` to avoid drift.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>, DetectorError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(DetectorError::BadStep(step));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Percentage of samples misclassified at one threshold.
pub fn error_percent_at(scores: &[f64], occupied: &[bool], threshold: f64, orientation: Orientation) -> f64 {
    let wrong = scores
        .iter()
        .zip(occupied)
        .filter(|(&s, &occ)| (classify(s, threshold, orientation) == Occupancy::Occupied) != occ)
        .count();
    100.0 * wrong as f64 / scores.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweep {
    pub thresholds: Vec<f64>,
    pub error_percent: Vec<f64>,
    pub orientation: Orientation,
}

impl ThresholdSweep {
    pub fn min_error(&self) -> f64 {
        self.error_percent.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Error curve over `grid` for the orientation with the lower minimum
/// (empty-below wins ties).
pub fn sweep_threshold(scores: &[f64], occupied: &[bool], grid: &[f64]) -> Result<ThresholdSweep, DetectorError> {
    if scores.len() != occupied.len() {
        return Err(DetectorError::LengthMismatch { scores: scores.len(), labels: occupied.len() });
    }
    if !occupied.iter().any(|&o| o) || !occupied.iter().any(|&o| !o) {
        return Err(DetectorError::SingleClass);
    }
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
        return Err(DetectorError::ScoreOutOfRange { index, value });
    }
    if grid.is_empty()
        || grid.windows(2).any(|w| !(w[0] < w[1]))
        || !(0.0..=1.0).contains(&grid[0])
        || !(0.0..=1.0).contains(&grid[grid.len() - 1])
    {
        return Err(DetectorError::BadGrid);
    }

    let curve =
        |o: Orientation| -> Vec<f64> { grid.iter().map(|&t| error_percent_at(scores, occupied, t, o)).collect() };
    let below = curve(Orientation::EmptyBelow);
    let above = curve(Orientation::EmptyAbove);
    let min = |c: &[f64]| c.iter().cloned().fold(f64::INFINITY, f64::min);
    let (orientation, error_percent) =
        if min(&above) < min(&below) { (Orientation::EmptyAbove, above) } else { (Orientation::EmptyBelow, below) };
    Ok(ThresholdSweep { thresholds: grid.to_vec(), error_percent, orientation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorCalibration {
    pub threshold: f64,
    pub orientation: Orientation,
    pub min_error_percent: f64,
    #[serde(default)]
    pub day_id: Option<u32>,
}

/// Lowest-error threshold; ties go to the smallest threshold.
pub fn calibrate(sweep: &ThresholdSweep, day_id: Option<u32>) -> DetectorCalibration {
    let mut best = 0;
    for (i, &e) in sweep.error_percent.iter().enumerate() {
        if e < sweep.error_percent[best] {
            best = i;
        }
    }
    DetectorCalibration {
        threshold: sweep.thresholds[best],
        orientation: sweep.orientation,
        min_error_percent: sweep.error_percent[best],
        day_id,
    }
}

pub fn detect(cal: &DetectorCalibration, score: f64) -> Occupancy {
    classify(score, cal.threshold, cal.orientation)
}

/// Side-by-side comparison of two days' calibrations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub day1: DetectorCalibration,
    pub day2: DetectorCalibration,
    pub delta_min_error_pp: f64,
    pub delta_threshold: f64,
    pub bound_pp: f64,
    pub consistent: bool,
}

pub fn consistency_report(day1: &DetectorCalibration, day2: &DetectorCalibration, bound_pp: f64) -> ConsistencyReport {
    let delta_min_error_pp = (day1.min_error_percent - day2.min_error_percent).abs();
    ConsistencyReport {
        day1: day1.clone(),
        day2: day2.clone(),
        delta_min_error_pp,
        delta_threshold: (day1.threshold - day2.threshold).abs(),
        bound_pp,
        consistent: delta_min_error_pp <= bound_pp,
    }
}
