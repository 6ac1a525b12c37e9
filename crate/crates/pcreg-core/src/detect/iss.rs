//! Intrinsic shape signatures: eigenvalue-ratio saliency.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Matrix3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::detect::{non_max_suppress, Detector, KeypointSet};
use crate::eigen::eigen_ascending;
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct IssParams {
    /// Covariance support radius (m).
    pub salient_radius: f64,
    /// Non-maximum suppression radius (m).
    pub nms_radius: f64,
    /// Upper bound on λ2/λ1 (eigenvalues in descending order).
    pub gamma21: f64,
    /// Upper bound on λ3/λ2.
    pub gamma32: f64,
    /// Minimum support size; the point itself counts.
    pub min_neighbors: usize,
}

impl IssParams {
    /// Defaults relative to the cloud resolution.
    pub fn defaults(resolution: f64) -> Self {
        Self {
            salient_radius: 6.0 * resolution,
            nms_radius: 4.0 * resolution,
            gamma21: 0.975,
            gamma32: 0.975,
            min_neighbors: 5,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.salient_radius.is_finite() || self.salient_radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "iss salient radius must be positive, got {}",
                self.salient_radius
            )));
        }
        if !self.nms_radius.is_finite() || self.nms_radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "iss nms radius must be positive, got {}",
                self.nms_radius
            )));
        }
        for (name, g) in [("gamma21", self.gamma21), ("gamma32", self.gamma32)] {
            if !g.is_finite() || g <= 0.0 || g >= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "iss {name} must lie in (0, 1), got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// Distance-weighted covariance about `p` (weight = salient_radius − d),
/// eigenvalues λ1 ≥ λ2 ≥ λ3. The weighting mirrors the descriptor reference
/// frame so both stages share one notion of "local shape".
fn weighted_covariance(
    cloud: &PointCloud,
    p: &nalgebra::Point3<f64>,
    indices: &[usize],
    distances: &[f64],
    radius: f64,
) -> Matrix3<f64> {
    let mut cov = Matrix3::zeros();
    let mut weight_sum = 0.0;
    for (&j, &d) in indices.iter().zip(distances) {
        let w = radius - d;
        let offset = cloud.point(j) - p;
        cov += w * (offset * offset.transpose());
        weight_sum += w;
    }
    cov / weight_sum
}

/// Keeps points whose weighted-covariance eigenvalues drop steeply
/// (λ2/λ1 < γ21 and λ3/λ2 < γ32) with positive response λ3, then suppresses
/// non-maxima. Flat isotropic neighborhoods fail the first ratio; sticks and
/// planes fail the second or respond with λ3 = 0.
pub fn detect_iss3d(cloud: &PointCloud, params: &IssParams) -> Result<KeypointSet> {
    params.validate()?;
    if cloud.len() < 2 {
        return Ok(KeypointSet::empty(Detector::Iss3d, cloud.len()));
    }
    let index = SpatialIndex::build(cloud)?;

    let mut candidates = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let hood = index.radius(p, params.salient_radius)?;
        if hood.len() < params.min_neighbors {
            continue;
        }
        let cov = weighted_covariance(
            cloud,
            p,
            &hood.indices,
            &hood.distances,
            params.salient_radius,
        );
        let (values, _) = eigen_ascending(&cov);
        let (l1, l2, l3) = (values[2], values[1], values[0]);
        if l1 <= 0.0 || l2 <= 0.0 {
            continue;
        }
        if l2 / l1 < params.gamma21 && l3 / l2 < params.gamma32 && l3 > 0.0 {
            candidates.push((i, l3));
        }
    }

    let kept = non_max_suppress(cloud.points(), &candidates, params.nms_radius)?;
    KeypointSet::new(Detector::Iss3d, cloud.len(), kept)
}
