//! Normalized landmark error, cumulative error distribution and failure rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::{BoundingBox, Shape};

pub const DEFAULT_FAILURE_THRESHOLD: f64 = 0.10;
pub const CED_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNormalization {
    /// `sqrt(width × height)` of the ground-truth tight box.
    FaceSize,
    /// Distance between two ground-truth landmarks (zero-based indices).
    InterOcular(usize, usize),
}

pub fn normalized_error(
    pred: &Shape,
    gt: &Shape,
    norm: ErrorNormalization,
    gt_box: &BoundingBox,
) -> Result<f64> {
    let l = gt.num_landmarks();
    if pred.num_landmarks() != l {
        return Err(Error::DimensionMismatch {
            context: "predicted shape",
            expected: l,
            actual: pred.num_landmarks(),
        });
    }
    let scale = match norm {
        ErrorNormalization::FaceSize => (gt_box.width() * gt_box.height()).sqrt(),
        ErrorNormalization::InterOcular(a, b) => {
            if a >= l || b >= l {
                return Err(Error::InvalidConfig(format!(
                    "inter-ocular indices ({a}, {b}) out of range for {l} landmarks"
                )));
            }
            let (p, q) = (gt.point(a), gt.point(b));
            (p.0 - q.0).hypot(p.1 - q.1)
        }
    };
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("error normalizer is zero".into()));
    }
    let total: f64 = pred
        .iter_points()
        .zip(gt.iter_points())
        .map(|(p, q)| (p.0 - q.0).hypot(p.1 - q.1))
        .sum();
    Ok(total / l as f64 / scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub failure_threshold: f64,
    pub failure_rate: f64,
    /// `(threshold, fraction of errors ≤ threshold)`.
    pub ced: Vec<(f64, f64)>,
}

impl EvalReport {
    /// Fraction of errors at or below `t`.
    pub fn ced_at(&self, t: f64) -> f64 {
        fraction_at_most(&self.sorted_errors(), t)
    }

    pub fn sorted_errors(&self) -> Vec<f64> {
        let mut e = self.errors.clone();
        e.sort_by(f64::total_cmp);
        e
    }
}

fn fraction_at_most(sorted: &[f64], t: f64) -> f64 {
    sorted.partition_point(|&e| e <= t) as f64 / sorted.len() as f64
}

pub fn ced_and_failure(errors: &[f64], failure_threshold: f64) -> Result<EvalReport> {
    if errors.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, actual: 0 });
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("error value"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let failures = sorted.len() - sorted.partition_point(|&e| e <= failure_threshold);
    let ced = (0..CED_POINTS)
        .map(|i| {
            let t = DEFAULT_FAILURE_THRESHOLD * i as f64 / (CED_POINTS - 1) as f64;
            (t, fraction_at_most(&sorted, t))
        })
        .collect();
    Ok(EvalReport {
        errors: errors.to_vec(),
        mean_error: errors.iter().sum::<f64>() / errors.len() as f64,
        failure_threshold,
        failure_rate: failures as f64 / sorted.len() as f64,
        ced,
    })
}
