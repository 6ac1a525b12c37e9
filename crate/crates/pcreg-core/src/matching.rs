//! Descriptor matching and coarse rigid alignment.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Point3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::describe::{compute_fpfh, compute_shot, DescriptorKind, DescriptorSet};
use crate::detect::Detector;
use crate::error::{AlignmentDiagnostics, Error, Result};
use crate::normals::estimate_normals;
use crate::transform::SimilarityTransform;

/// Support of a fitted rotation is rank deficient (coincident or collinear
/// points) when the middle eigenvalue of the source scatter falls below this
/// fraction of the largest.
const COLLINEAR_EPSILON: f64 = 1e-12;
/// Consensus inlier gate, as a multiple of the mean cloud resolution.
const INLIER_RESOLUTION_FACTOR: f64 = 3.0;
/// Normal-estimation support, as a multiple of cloud resolution. The whole
/// pipeline shares this convention so normals computed for detection,
/// description, and refinement agree.
pub const NORMAL_RADIUS_FACTOR: f64 = 4.0;
/// Minimal sample size that determines a rigid transform.
const MINIMAL_SAMPLE: usize = 3;

/// One descriptor correspondence: row indices into the source and target
/// descriptor sets plus their L2 descriptor distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorMatch {
    pub source: usize,
    pub target: usize,
    pub distance: f64,
}

/// Correspondences from descriptor matching, ordered by ascending source
/// row. With `reciprocal` set the pairing is one-to-one (only mutual
/// nearest neighbors survive).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    pairs: Vec<DescriptorMatch>,
    reciprocal: bool,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<DescriptorMatch>, reciprocal: bool) -> Self {
        Self { pairs, reciprocal }
    }

    pub fn pairs(&self) -> &[DescriptorMatch] {
        &self.pairs
    }

    pub fn reciprocal(&self) -> bool {
        self.reciprocal
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Result of coarse alignment: the fitted rigid transform, the consensus
/// inliers it was re-estimated from, and their root-mean-square residual.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseAlignment {
    pub transform: SimilarityTransform,
    pub inliers: CorrespondenceSet,
    pub rms_residual: f64,
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Nearest active row to `query` by L2 distance; ties resolve to the lowest
/// row index (`active` is ascending).
fn nearest_active(query: &[f64], rows: &[Vec<f64>], active: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &j in active {
        let d = l2_distance(query, &rows[j]);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best
}

fn match_active(
    source: &[Vec<f64>],
    target: &[Vec<f64>],
    source_active: &[usize],
    target_active: &[usize],
    reciprocal: bool,
) -> Vec<DescriptorMatch> {
    let mut pairs = Vec::new();
    for &i in source_active {
        let Some((j, d)) = nearest_active(&source[i], target, target_active) else {
            continue;
        };
        if reciprocal {
            let back = nearest_active(&target[j], source, source_active);
            if back.map(|(i2, _)| i2) != Some(i) {
                continue;
            }
        }
        pairs.push(DescriptorMatch {
            source: i,
            target: j,
            distance: d,
        });
    }
    pairs
}

/// Matching over raw rows with every row active; a seam for testing the
/// nearest-neighbor semantics on hand-sized vectors.
#[cfg(test)]
fn match_rows(source: &[Vec<f64>], target: &[Vec<f64>], reciprocal: bool) -> Vec<DescriptorMatch> {
    let source_active: Vec<usize> = (0..source.len()).collect();
    let target_active: Vec<usize> = (0..target.len()).collect();
    match_active(source, target, &source_active, &target_active, reciprocal)
}

/// Pairs each source descriptor with its nearest target descriptor by L2
/// distance. All-zero rows (degenerate supports) never match in either
/// direction. With `reciprocal` set, only mutual nearest pairs survive,
/// which makes the pairing one-to-one.
pub fn match_descriptors(
    source: &DescriptorSet,
    target: &DescriptorSet,
    reciprocal: bool,
) -> Result<CorrespondenceSet> {
    if source.kind() != target.kind() {
        return Err(Error::InvalidInput(format!(
            "descriptor kinds differ: {} vs {}",
            source.kind().name(),
            target.kind().name()
        )));
    }
    if source.is_empty() || target.is_empty() {
        return Err(Error::InvalidInput(String::from(
            "descriptor sets must be non-empty",
        )));
    }
    let source_active: Vec<usize> = (0..source.len())
        .filter(|&i| !source.is_zero_row(i))
        .collect();
    let target_active: Vec<usize> = (0..target.len())
        .filter(|&j| !target.is_zero_row(j))
        .collect();
    Ok(CorrespondenceSet {
        pairs: match_active(
            source.vectors(),
            target.vectors(),
            &source_active,
            &target_active,
            reciprocal,
        ),
        reciprocal,
    })
}

/// Least-squares rigid transform minimizing Σ wᵢ ‖R pᵢ + t − qᵢ‖², via the
/// closed-form cross-covariance factorization with the reflection corrected
/// so det(R) = +1. Needs at least three pairs whose source points span a
/// plane; fewer, coincident, or collinear configurations leave the rotation
/// underdetermined.
pub fn estimate_rigid_transform(
    source_points: &[Point3<f64>],
    target_points: &[Point3<f64>],
    weights: Option<&[f64]>,
) -> Result<SimilarityTransform> {
    let n = source_points.len();
    if target_points.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} source points vs {} target points",
            target_points.len()
        )));
    }
    if n < MINIMAL_SAMPLE {
        return Err(Error::DegenerateGeometry(format!(
            "{n} pairs cannot determine a rigid transform, need {MINIMAL_SAMPLE}"
        )));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} weights for {n} pairs",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(String::from(
                "weights must be finite and non-negative",
            )));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidInput(String::from(
                "weights must not all be zero",
            )));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..n).map(weight).sum();

    let mut source_centroid = Vector3::zeros();
    let mut target_centroid = Vector3::zeros();
    for i in 0..n {
        source_centroid += weight(i) * source_points[i].coords;
        target_centroid += weight(i) * target_points[i].coords;
    }
    source_centroid /= total;
    target_centroid /= total;

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    for i in 0..n {
        let p = source_points[i].coords - source_centroid;
        let q = target_points[i].coords - target_centroid;
        cross += weight(i) * p * q.transpose();
        scatter += weight(i) * p * p.transpose();
    }

    let (values, _) = crate::eigen::eigen_ascending(&scatter);
    if values[2] <= 0.0 || values[1] <= values[2] * COLLINEAR_EPSILON {
        return Err(Error::DegenerateGeometry(String::from(
            "source points are coincident or collinear; rotation is underdetermined",
        )));
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd of a finite 3x3 matrix");
    let v_t = svd.v_t.expect("svd of a finite 3x3 matrix");
    let v = v_t.transpose();
    let orientation = (v * u.transpose()).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, orientation));
    let rotation = v * correction * u.transpose();
    let translation = target_centroid - rotation * source_centroid;
    SimilarityTransform::rigid(rotation, translation)
}

/// Knobs for [`coarse_align`]. `descriptor_radius` defaults to 4 cm, the
/// best-performing support size for indoor-scale data; the viewpoints
/// orient the estimated normals, one per cloud, expressed in each cloud's
/// own frame (they matter when the clouds live in very different frames,
/// e.g. a camera-local view against a world-frame model).
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseParams {
    pub seed: u64,
    pub trials: usize,
    pub descriptor_radius: f64,
    pub source_viewpoint: Point3<f64>,
    pub target_viewpoint: Point3<f64>,
}

impl Default for CoarseParams {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 1000,
            descriptor_radius: 0.04,
            source_viewpoint: Point3::origin(),
            target_viewpoint: Point3::origin(),
        }
    }
}

impl CoarseParams {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput(String::from(
                "consensus needs at least one trial",
            )));
        }
        if !self.descriptor_radius.is_finite() || self.descriptor_radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "descriptor radius must be positive, got {}",
                self.descriptor_radius
            )));
        }
        let coordinates = self
            .source_viewpoint
            .coords
            .iter()
            .chain(self.target_viewpoint.coords.iter());
        for v in coordinates {
            if !v.is_finite() {
                return Err(Error::InvalidInput(String::from(
                    "viewpoint has a non-finite coordinate",
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-trial generator seed; decorrelated so trial results are independent
/// of evaluation order.
fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial.wrapping_add(1)))
}

fn detect_and_describe(
    cloud: &PointCloud,
    detector: Detector,
    descriptor: DescriptorKind,
    params: &CoarseParams,
    viewpoint: &Point3<f64>,
) -> Result<(f64, Vec<Point3<f64>>, DescriptorSet)> {
    let resolution = cloud.resolution()?;
    let with_normals = estimate_normals(cloud, NORMAL_RADIUS_FACTOR * resolution, viewpoint)?;
    let keypoints = detector.detect_with_defaults(&with_normals, resolution)?;
    let positions = keypoints.positions(&with_normals)?;
    let descriptors = match descriptor {
        DescriptorKind::Shot => compute_shot(&with_normals, &keypoints, params.descriptor_radius)?,
        DescriptorKind::Fpfh => compute_fpfh(&with_normals, &keypoints, params.descriptor_radius)?,
    };
    Ok((resolution, positions, descriptors))
}

/// Coarse registration: detect keypoints on both clouds, describe them,
/// match reciprocally, then fit a rigid transform by seeded sample
/// consensus over 3-correspondence minimal sets (inlier gate 3× the mean
/// cloud resolution) and re-estimate it on the winning trial's inliers.
///
/// Deterministic for a fixed seed. Fails with alignment diagnostics when
/// fewer than three correspondences (or consensus inliers) exist.
pub fn coarse_align(
    source_cloud: &PointCloud,
    target_cloud: &PointCloud,
    detector: Detector,
    descriptor: DescriptorKind,
    params: &CoarseParams,
) -> Result<CoarseAlignment> {
    params.validate()?;
    let (source_resolution, source_positions, source_descriptors) =
        detect_and_describe(source_cloud, detector, descriptor, params, &params.source_viewpoint)?;
    let (target_resolution, target_positions, target_descriptors) =
        detect_and_describe(target_cloud, detector, descriptor, params, &params.target_viewpoint)?;

    let diagnostics = |matches: usize, best_inliers: usize| {
        Error::AlignmentFailed(AlignmentDiagnostics {
            source_keypoints: source_positions.len(),
            target_keypoints: target_positions.len(),
            matches,
            best_inliers,
        })
    };

    if source_descriptors.is_empty() || target_descriptors.is_empty() {
        return Err(diagnostics(0, 0));
    }
    let matches = match_descriptors(&source_descriptors, &target_descriptors, true)?;
    if matches.len() < MINIMAL_SAMPLE {
        return Err(diagnostics(matches.len(), 0));
    }

    let pair_positions: Vec<(Point3<f64>, Point3<f64>)> = matches
        .pairs()
        .iter()
        .map(|m| (source_positions[m.source], target_positions[m.target]))
        .collect();
    let threshold =
        INLIER_RESOLUTION_FACTOR * (source_resolution + target_resolution) / 2.0;

    let inliers_of = |t: &SimilarityTransform| -> Vec<usize> {
        pair_positions
            .iter()
            .enumerate()
            .filter(|(_, (p, q))| (t.apply_point(p) - q).norm() <= threshold)
            .map(|(k, _)| k)
            .collect()
    };

    let mut best: Option<(usize, SimilarityTransform)> = None;
    for trial in 0..params.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(params.seed, trial as u64));
        let mut picks = [0usize; MINIMAL_SAMPLE];
        let mut chosen = 0;
        while chosen < MINIMAL_SAMPLE {
            let candidate = rng.random_range(0..pair_positions.len());
            if !picks[..chosen].contains(&candidate) {
                picks[chosen] = candidate;
                chosen += 1;
            }
        }
        let sample_source: Vec<Point3<f64>> =
            picks.iter().map(|&k| pair_positions[k].0).collect();
        let sample_target: Vec<Point3<f64>> =
            picks.iter().map(|&k| pair_positions[k].1).collect();
        let candidate = match estimate_rigid_transform(&sample_source, &sample_target, None) {
            Ok(t) => t,
            Err(Error::DegenerateGeometry(_)) => continue,
            Err(other) => return Err(other),
        };
        let count = inliers_of(&candidate).len();
        if best.as_ref().is_none_or(|(best_count, _)| count > *best_count) {
            best = Some((count, candidate));
        }
    }

    let Some((best_count, best_transform)) = best else {
        return Err(diagnostics(matches.len(), 0));
    };
    if best_count < MINIMAL_SAMPLE {
        return Err(diagnostics(matches.len(), best_count));
    }

    let inlier_ids = inliers_of(&best_transform);
    let inlier_source: Vec<Point3<f64>> =
        inlier_ids.iter().map(|&k| pair_positions[k].0).collect();
    let inlier_target: Vec<Point3<f64>> =
        inlier_ids.iter().map(|&k| pair_positions[k].1).collect();
    let transform = estimate_rigid_transform(&inlier_source, &inlier_target, None)?;

    let mut squared = 0.0;
    for (&k, _) in inlier_ids.iter().zip(&inlier_source) {
        let (p, q) = &pair_positions[k];
        squared += (transform.apply_point(p) - q).norm_squared();
    }
    let rms_residual = (squared / inlier_ids.len() as f64).sqrt();

    let inliers = CorrespondenceSet {
        pairs: inlier_ids
            .iter()
            .map(|&k| matches.pairs()[k])
            .collect(),
        reciprocal: true,
    };
    Ok(CoarseAlignment {
        transform,
        inliers,
        rms_residual,
    })
}
