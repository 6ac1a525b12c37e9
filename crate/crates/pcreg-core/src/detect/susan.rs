//! SUSAN keypoints: small "similar neighborhood" area marks a corner.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::detect::{require_normals, Detector, KeypointSet};
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

/// USAN area threshold: a nucleus is corner-like when less than half of its
/// neighborhood is similar to it.
const GEOMETRIC_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SusanParams {
    /// Neighborhood radius (m).
    pub radius: f64,
    /// Neighbors whose normal is within this angle of the nucleus normal
    /// count as similar (radians).
    pub angular_threshold: f64,
    /// Minimum distance between nucleus and USAN centroid (m); rejects
    /// responses whose similar region still surrounds the nucleus.
    pub distance_threshold: f64,
    /// When intensities exist, similarity additionally requires |ΔI| below
    /// this (intensities live in [0, 1]).
    pub intensity_threshold: f64,
}

impl SusanParams {
    /// Defaults relative to the cloud resolution. The intensity threshold
    /// follows the common 7/255 default of image-domain SUSAN.
    pub fn defaults(resolution: f64) -> Self {
        Self {
            radius: 6.0 * resolution,
            angular_threshold: 0.1745,
            distance_threshold: resolution,
            intensity_threshold: 7.0 / 255.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.radius.is_finite() || self.radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "susan radius must be positive, got {}",
                self.radius
            )));
        }
        if !self.angular_threshold.is_finite()
            || self.angular_threshold <= 0.0
            || self.angular_threshold > core::f64::consts::PI
        {
            return Err(Error::InvalidInput(format!(
                "susan angular threshold must lie in (0, pi], got {}",
                self.angular_threshold
            )));
        }
        if !self.distance_threshold.is_finite() || self.distance_threshold < 0.0 {
            return Err(Error::InvalidInput(format!(
                "susan distance threshold must be non-negative, got {}",
                self.distance_threshold
            )));
        }
        if !self.intensity_threshold.is_finite()
            || self.intensity_threshold < 0.0
            || self.intensity_threshold > 1.0
        {
            return Err(Error::InvalidInput(format!(
                "susan intensity threshold must lie in [0, 1], got {}",
                self.intensity_threshold
            )));
        }
        Ok(())
    }
}

/// Per nucleus, neighbors within `radius` are split into similar/dissimilar
/// by normal angle (and intensity difference when colors exist). Keypoints
/// are nuclei whose similar fraction (USAN area) stays below 0.5 and whose
/// USAN centroid is displaced from the nucleus by more than
/// `distance_threshold`; the response is `0.5 - area`.
///
/// Nuclei or neighbors without a valid normal are skipped. A nucleus with
/// no usable neighbors, or with an empty similar set, is not a keypoint.
pub fn detect_susan(cloud: &PointCloud, params: &SusanParams) -> Result<KeypointSet> {
    params.validate()?;
    if cloud.len() < 2 {
        return Ok(KeypointSet::empty(Detector::Susan, cloud.len()));
    }
    let normals = require_normals(cloud, "susan")?;
    let intensities = cloud.intensities();
    let index = SpatialIndex::build(cloud)?;
    let cos_threshold = params.angular_threshold.cos();

    let mut candidates = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        let Some(nucleus_normal) = normals[i] else {
            continue;
        };
        let hood = index.radius(p, params.radius)?;
        let mut total = 0usize;
        let mut similar = 0usize;
        let mut centroid = Vector3::zeros();
        for &j in &hood.indices {
            if j == i {
                continue;
            }
            let Some(n) = normals[j] else {
                continue;
            };
            total += 1;
            // angle < threshold  <=>  cos(angle) > cos(threshold)
            let mut is_similar = nucleus_normal.dot(&n) > cos_threshold;
            if let Some(ints) = intensities {
                is_similar = is_similar && (ints[i] - ints[j]).abs() < params.intensity_threshold;
            }
            if is_similar {
                similar += 1;
                centroid += cloud.point(j).coords;
            }
        }
        if total == 0 || similar == 0 {
            continue;
        }
        let area = similar as f64 / total as f64;
        if area >= GEOMETRIC_THRESHOLD {
            continue;
        }
        centroid /= similar as f64;
        if (centroid - p.coords).norm() > params.distance_threshold {
            candidates.push((i, GEOMETRIC_THRESHOLD - area));
        }
    }
    KeypointSet::new(Detector::Susan, cloud.len(), candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normals::estimate_normals;
    use alloc::vec;
    use nalgebra::Point3;

    fn plane(n: usize, spacing: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        estimate_normals(&cloud, 2.5 * spacing, &Point3::new(0.0, 0.0, 1.0)).unwrap()
    }

    #[test]
    fn plane_interior_is_not_a_keypoint() {
        let kp = detect_susan(&plane(25, 0.01), &SusanParams::defaults(0.01)).unwrap();
        assert!(kp.is_empty());
    }

    #[test]
    fn missing_normals_is_rejected() {
        let cloud = PointCloud::new(vec![Point3::origin(), Point3::new(0.01, 0.0, 0.0)]).unwrap();
        assert!(detect_susan(&cloud, &SusanParams::defaults(0.01)).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let cloud = plane(3, 0.01);
        for params in [
            SusanParams {
                radius: -0.01,
                ..SusanParams::defaults(0.01)
            },
            SusanParams {
                angular_threshold: 0.0,
                ..SusanParams::defaults(0.01)
            },
            SusanParams {
                intensity_threshold: 1.5,
                ..SusanParams::defaults(0.01)
            },
        ] {
            assert!(detect_susan(&cloud, &params).is_err());
        }
    }

    /// Direct area/centroid computation for every nucleus, no spatial index.
    fn brute_force_susan(cloud: &PointCloud, params: &SusanParams) -> Vec<(usize, f64)> {
        let normals = cloud.normals().unwrap();
        let intensities = cloud.intensities();
        let pts = cloud.points();
        let cos_threshold = params.angular_threshold.cos();
        let mut out = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            let Some(nn) = normals[i] else { continue };
            let mut total = 0usize;
            let mut similar = 0usize;
            let mut centroid = Vector3::zeros();
            for (j, q) in pts.iter().enumerate() {
                if j == i {
                    continue;
                }
                let dx = q.x - p.x;
                let dy = q.y - p.y;
                let dz = q.z - p.z;
                if (dx * dx + dy * dy + dz * dz).sqrt() > params.radius {
                    continue;
                }
                let Some(n) = normals[j] else { continue };
                total += 1;
                let mut is_similar = nn.dot(&n) > cos_threshold;
                if let Some(ints) = intensities {
                    is_similar =
                        is_similar && (ints[i] - ints[j]).abs() < params.intensity_threshold;
                }
                if is_similar {
                    similar += 1;
                    centroid += q.coords;
                }
            }
            if total == 0 || similar == 0 {
                continue;
            }
            let area = similar as f64 / total as f64;
            if area < GEOMETRIC_THRESHOLD
                && ((centroid / similar as f64) - p.coords).norm() > params.distance_threshold
            {
                out.push((i, GEOMETRIC_THRESHOLD - area));
            }
        }
        out
    }

    #[test]
    fn cone_apex_matches_direct_area_computation() {
        // Open cone, apex up: half-angle ~30°, so flank normals sit ~60° from
        // the apex normal — far outside the angular threshold.
        let mut pts = Vec::new();
        let apex = Point3::new(0.0, 0.0, 0.3);
        pts.push(apex);
        let spacing = 0.01;
        for ring in 1..=20 {
            let rho = ring as f64 * spacing * 0.5;
            let z = apex.z - rho * 3.0f64.sqrt();
            let count = (ring * 6).max(6);
            for a in 0..count {
                let phi = core::f64::consts::TAU * a as f64 / count as f64;
                pts.push(Point3::new(rho * phi.cos(), rho * phi.sin(), z));
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let resolution = cloud.resolution().unwrap();
        let cloud = estimate_normals(&cloud, 4.0 * resolution, &Point3::new(0.0, 0.0, 5.0))
            .unwrap();
        // Estimated normals near the apex are blends of apex and flank: the
        // first ring sits ~39° off the axis, the second ~46°. A 40° cut makes
        // the apex USAN exactly the innermost ring out of the four rings the
        // radius covers — small area, centroid displaced down the axis.
        let params = SusanParams {
            radius: 0.042,
            angular_threshold: 0.7,
            distance_threshold: resolution,
            intensity_threshold: 7.0 / 255.0,
        };

        let kp = detect_susan(&cloud, &params).unwrap();
        let apex_pos = kp.indices().iter().position(|&i| i == 0);
        assert!(
            apex_pos.is_some(),
            "cone apex not detected; found {:?}",
            kp.indices()
        );
        // The apex USAN is small: well under half the neighborhood.
        assert!(kp.responses()[apex_pos.unwrap()] >= 0.15);

        let expect = brute_force_susan(&cloud, &params);
        let got: Vec<(usize, f64)> = kp
            .indices()
            .iter()
            .copied()
            .zip(kp.responses().iter().copied())
            .collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn intensity_corner_on_flat_plane_is_detected() {
        // Flat geometry, so normals are all similar; similarity is decided by
        // the color quadrant. The inner corner of the dark quadrant sees only
        // ~25% similar neighbors, displaced into the quadrant.
        let n = 25;
        let spacing = 0.01;
        let mut pts = Vec::new();
        let mut colors = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
                let dark = i >= 12 && j >= 12;
                colors.push(if dark { [20, 20, 20] } else { [230, 230, 230] });
            }
        }
        let cloud = PointCloud::new(pts)
            .unwrap()
            .with_colors(colors)
            .unwrap();
        let cloud = estimate_normals(&cloud, 2.5 * spacing, &Point3::new(0.0, 0.0, 1.0)).unwrap();
        let params = SusanParams::defaults(spacing);
        let kp = detect_susan(&cloud, &params).unwrap();

        let corner = 12 * n + 12;
        assert!(
            kp.indices().contains(&corner),
            "expected the quadrant corner {corner} in {:?}",
            kp.indices()
        );
        // Deep interior points of either color region must not fire.
        assert!(!kp.indices().contains(&(5 * n + 5)));
        assert!(!kp.indices().contains(&(20 * n + 20)));

        let expect = brute_force_susan(&cloud, &params);
        let got: Vec<(usize, f64)> = kp
            .indices()
            .iter()
            .copied()
            .zip(kp.responses().iter().copied())
            .collect();
        assert_eq!(got, expect);
    }
}
