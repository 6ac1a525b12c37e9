//! Harris corner response built from surface normals.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Matrix3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::detect::{non_max_suppress, require_normals, Detector, KeypointSet};
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct HarrisParams {
    /// Neighborhood radius for the normal covariance (m).
    pub radius: f64,
    /// Corner response coefficient; sensible values sit in (0, 0.25).
    pub k: f64,
    /// Minimum response for a candidate keypoint.
    pub threshold: f64,
    /// Non-maximum suppression radius (m).
    pub nms_radius: f64,
}

impl HarrisParams {
    /// Defaults relative to the cloud resolution.
    pub fn defaults(resolution: f64) -> Self {
        Self {
            radius: 6.0 * resolution,
            k: 0.04,
            threshold: 1e-6,
            nms_radius: 6.0 * resolution,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.radius.is_finite() || self.radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "harris radius must be positive, got {}",
                self.radius
            )));
        }
        if !self.nms_radius.is_finite() || self.nms_radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "harris nms radius must be positive, got {}",
                self.nms_radius
            )));
        }
        if !self.k.is_finite() || self.k <= 0.0 || self.k >= 0.25 {
            return Err(Error::InvalidInput(format!(
                "harris k must lie in (0, 0.25), got {}",
                self.k
            )));
        }
        if !self.threshold.is_finite() {
            return Err(Error::InvalidInput(format!(
                "harris threshold must be finite, got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

fn harris_response(c: &Matrix3<f64>, k: f64) -> f64 {
    c.determinant() - k * c.trace() * c.trace()
}

/// Detects corners as maxima of `det(C) - k·tr(C)²`, where `C` is the
/// Gaussian-weighted (σ = radius/2) sum of neighbor-normal outer products.
///
/// A flat region has all normals parallel, so `C` is rank one, `det(C) = 0`
/// and the response is negative; only neighborhoods whose normals spread in
/// all three directions respond positively. Candidates need at least three
/// valid-normal neighbors (the point itself counts).
pub fn detect_harris3d(cloud: &PointCloud, params: &HarrisParams) -> Result<KeypointSet> {
    params.validate()?;
    if cloud.len() < 2 {
        return Ok(KeypointSet::empty(Detector::Harris3d, cloud.len()));
    }
    let normals = require_normals(cloud, "harris3d")?;
    let index = SpatialIndex::build(cloud)?;
    let sigma = params.radius / 2.0;
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);

    let mut candidates = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let hood = index.radius(p, params.radius)?;
        let mut c = Matrix3::zeros();
        let mut valid = 0usize;
        for (&j, &d) in hood.indices.iter().zip(&hood.distances) {
            if let Some(n) = normals[j] {
                let w = (-(d * d) * inv_two_sigma_sq).exp();
                c += w * (n * n.transpose());
                valid += 1;
            }
        }
        if valid < 3 {
            continue;
        }
        let r = harris_response(&c, params.k);
        if r > params.threshold {
            candidates.push((i, r));
        }
    }

    let kept = non_max_suppress(cloud.points(), &candidates, params.nms_radius)?;
    KeypointSet::new(Detector::Harris3d, cloud.len(), kept)
}
