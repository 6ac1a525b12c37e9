//! Registration quality metrics: relative repeatability, matching success
//! rate, and misalignment against ground truth.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Point3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::matching::CorrespondenceSet;
use crate::search::SpatialIndex;
use crate::transform::SimilarityTransform;

/// Number of thresholds in a standard repeatability curve.
pub const CURVE_THRESHOLD_COUNT: usize = 30;
/// Largest threshold of a standard repeatability curve (m).
pub const CURVE_THRESHOLD_SPAN: f64 = 0.03;
/// Default success-rate epsilon, as a multiple of cloud resolution.
pub const SUCCESS_EPSILON_RESOLUTION_FACTOR: f64 = 2.0;

/// Repeatability sampled over increasing distance thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatabilityCurve {
    thresholds: Vec<f64>,
    values: Vec<f64>,
}

impl RepeatabilityCurve {
    pub fn new(thresholds: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if thresholds.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} thresholds against {} values",
                thresholds.len(),
                values.len()
            )));
        }
        for (i, &t) in thresholds.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidInput(format!("threshold {i} is {t}")));
            }
        }
        for pair in thresholds.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidInput(String::from(
                    "thresholds must be strictly increasing",
                )));
            }
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "value {i} is {v}, outside [0, 1]"
                )));
            }
            if i > 0 && v < values[i - 1] {
                return Err(Error::InvalidInput(String::from(
                    "values must be non-decreasing in threshold",
                )));
            }
        }
        Ok(Self { thresholds, values })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Trapezoidal area under the curve, normalized by the threshold span
    /// so a constant-1 curve scores 1. Curves with fewer than two samples
    /// score 0.
    pub fn area(&self) -> f64 {
        let span = match (self.thresholds.first(), self.thresholds.last()) {
            (Some(first), Some(last)) if last > first => last - first,
            _ => return 0.0,
        };
        let mut area = 0.0;
        for i in 1..self.len() {
            let width = self.thresholds[i] - self.thresholds[i - 1];
            area += 0.5 * (self.values[i] + self.values[i - 1]) * width;
        }
        area / span
    }
}

/// Inverse-maps each target keypoint through `gt` into the source frame.
/// Empty input maps to an empty list.
fn mapped_targets(target_kp: &[Point3<f64>], gt: &SimilarityTransform) -> Vec<Point3<f64>> {
    let inverse = gt.invert();
    target_kp.iter().map(|p| inverse.apply_point(p)).collect()
}

/// Distance from each source keypoint to the nearest inverse-mapped target
/// keypoint; `None` when either list is empty.
fn nearest_mapped_distances(
    source_kp: &[Point3<f64>],
    target_kp: &[Point3<f64>],
    gt: &SimilarityTransform,
) -> Option<Vec<f64>> {
    if source_kp.is_empty() || target_kp.is_empty() {
        return None;
    }
    let mapped = PointCloud::new(mapped_targets(target_kp, gt)).ok()?;
    let index = SpatialIndex::build(&mapped).ok()?;
    let mut distances = Vec::with_capacity(source_kp.len());
    for p in source_kp {
        let hood = index.knn(p, 1).ok()?;
        distances.push(hood.distances[0]);
    }
    Some(distances)
}

/// Relative repeatability: the fraction of source keypoints with some
/// target keypoint — mapped back through the inverse of the ground-truth
/// transform — within `threshold`. Returns 0 when either keypoint list is
/// empty.
pub fn repeatability(
    source_kp: &[Point3<f64>],
    target_kp: &[Point3<f64>],
    gt: &SimilarityTransform,
    threshold: f64,
) -> f64 {
    let Some(distances) = nearest_mapped_distances(source_kp, target_kp, gt) else {
        return 0.0;
    };
    let repeatable = distances.iter().filter(|&&d| d <= threshold).count();
    repeatable as f64 / source_kp.len() as f64
}

/// Repeatability over 30 equidistant thresholds spanning [0, 3] cm.
pub fn repeatability_curve(
    source_kp: &[Point3<f64>],
    target_kp: &[Point3<f64>],
    gt: &SimilarityTransform,
) -> RepeatabilityCurve {
    let thresholds: Vec<f64> = (0..CURVE_THRESHOLD_COUNT)
        .map(|i| CURVE_THRESHOLD_SPAN * i as f64 / (CURVE_THRESHOLD_COUNT - 1) as f64)
        .collect();
    let distances = nearest_mapped_distances(source_kp, target_kp, gt);
    let values: Vec<f64> = thresholds
        .iter()
        .map(|&t| match &distances {
            Some(d) => d.iter().filter(|&&x| x <= t).count() as f64 / source_kp.len() as f64,
            None => 0.0,
        })
        .collect();
    RepeatabilityCurve::new(thresholds, values)
        .expect("curve thresholds and counting are monotone by construction")
}

/// Success rate of a correspondence set; `empty` flags the degenerate
/// no-correspondences case that rates 0 by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessRate {
    pub value: f64,
    pub empty: bool,
}

/// Fraction of correspondences (i, j) whose target keypoint j, mapped back
/// through the inverse of `gt`, lies within `epsilon` of source keypoint i.
/// The conventional `epsilon` is twice the cloud resolution.
pub fn success_rate(
    correspondences: &CorrespondenceSet,
    source_kp: &[Point3<f64>],
    target_kp: &[Point3<f64>],
    gt: &SimilarityTransform,
    epsilon: f64,
) -> Result<SuccessRate> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidInput(format!(
            "epsilon must be finite and non-negative, got {epsilon}"
        )));
    }
    if correspondences.is_empty() {
        return Ok(SuccessRate {
            value: 0.0,
            empty: true,
        });
    }
    let inverse = gt.invert();
    let mut correct = 0usize;
    for pair in correspondences.pairs() {
        let (Some(source), Some(target)) =
            (source_kp.get(pair.source), target_kp.get(pair.target))
        else {
            return Err(Error::InvalidInput(format!(
                "pair ({}, {}) indexes outside the keypoint lists ({}, {})",
                pair.source,
                pair.target,
                source_kp.len(),
                target_kp.len()
            )));
        };
        if (inverse.apply_point(target) - source).norm() <= epsilon {
            correct += 1;
        }
    }
    Ok(SuccessRate {
        value: correct as f64 / correspondences.len() as f64,
        empty: false,
    })
}

/// Mean squared and root-mean-square distance between a cloud placed by
/// the estimated transform and by the ground-truth transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Misalignment {
    pub mse: f64,
    pub rms: f64,
}

pub fn misalignment(
    source: &PointCloud,
    estimated: &SimilarityTransform,
    gt: &SimilarityTransform,
) -> Result<Misalignment> {
    if source.is_empty() {
        return Err(Error::InvalidInput(String::from(
            "misalignment needs a non-empty cloud",
        )));
    }
    let mut squared = 0.0;
    for p in source.points() {
        squared += (estimated.apply_point(p) - gt.apply_point(p)).norm_squared();
    }
    let mse = squared / source.len() as f64;
    Ok(Misalignment {
        mse,
        rms: mse.sqrt(),
    })
}
