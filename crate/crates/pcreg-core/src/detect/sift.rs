//! SIFT keypoints on point clouds: difference-of-Gaussians extrema of a
//! per-point scalar field across a geometric scale ladder.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::detect::{Detector, KeypointSet};
use crate::eigen::eigen_ascending;
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

/// Gaussian support truncation, in multiples of sigma.
const SUPPORT_SIGMAS: f64 = 3.0;
/// The ladder ratio is pinned to sqrt(2); other ratios are rejected.
const SCALE_FACTOR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SiftParams {
    /// Smallest smoothing sigma of the ladder (m).
    pub min_scale: f64,
    /// Number of octaves; together with `scales_per_octave` this sets the
    /// total ladder length `octaves * scales_per_octave`.
    pub octaves: usize,
    /// Scale levels per octave.
    pub scales_per_octave: usize,
    /// Ratio between consecutive sigmas; must equal sqrt(2).
    pub scale_factor: f64,
    /// Minimum |difference-of-Gaussians| for a candidate.
    pub min_contrast: f64,
}

impl SiftParams {
    /// Defaults relative to the cloud resolution.
    pub fn defaults(resolution: f64) -> Self {
        Self {
            min_scale: 2.0 * resolution,
            octaves: 4,
            scales_per_octave: 4,
            scale_factor: core::f64::consts::SQRT_2,
            min_contrast: 1e-4,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.min_scale.is_finite() || self.min_scale <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "sift min scale must be positive, got {}",
                self.min_scale
            )));
        }
        if self.octaves == 0 || self.scales_per_octave == 0 {
            return Err(Error::InvalidInput(
                "sift octaves and scales per octave must be at least 1".into(),
            ));
        }
        if self.octaves * self.scales_per_octave < 3 {
            return Err(Error::InvalidInput(format!(
                "sift ladder needs at least 3 scales, got {}",
                self.octaves * self.scales_per_octave
            )));
        }
        let ratio_error = (self.scale_factor - core::f64::consts::SQRT_2).abs();
        if ratio_error.is_nan() || ratio_error > SCALE_FACTOR_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "sift scale factor must equal sqrt(2), got {}",
                self.scale_factor
            )));
        }
        if !self.min_contrast.is_finite() || self.min_contrast < 0.0 {
            return Err(Error::InvalidInput(format!(
                "sift min contrast must be non-negative, got {}",
                self.min_contrast
            )));
        }
        Ok(())
    }
}

/// Surface variation per point: smallest eigenvalue of the centered
/// neighborhood covariance over the eigenvalue sum. Points with fewer than
/// three neighbors in `radius` get 0.
fn curvature_field(cloud: &PointCloud, index: &SpatialIndex, radius: f64) -> Result<Vec<f64>> {
    let mut field = Vec::with_capacity(cloud.len());
    for p in cloud.points() {
        let hood = index.radius(p, radius)?;
        if hood.len() < 3 {
            field.push(0.0);
            continue;
        }
        let mut mean = nalgebra::Vector3::zeros();
        for &j in &hood.indices {
            mean += cloud.point(j).coords;
        }
        mean /= hood.len() as f64;
        let mut cov = nalgebra::Matrix3::zeros();
        for &j in &hood.indices {
            let d = cloud.point(j).coords - mean;
            cov += d * d.transpose();
        }
        cov /= hood.len() as f64;
        let (values, _) = eigen_ascending(&cov);
        let sum = values[0] + values[1] + values[2];
        field.push(if sum > 0.0 { (values[0] / sum).max(0.0) } else { 0.0 });
    }
    Ok(field)
}

/// Normalized Gaussian smoothing of `field`, truncated at three sigmas.
fn smoothed(
    cloud: &PointCloud,
    index: &SpatialIndex,
    field: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    let inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    let mut out = Vec::with_capacity(cloud.len());
    for p in cloud.points() {
        let hood = index.radius(p, SUPPORT_SIGMAS * sigma)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (&j, &dist) in hood.indices.iter().zip(&hood.distances) {
            let w = (-dist * dist * inv_two_sigma_sq).exp();
            num += w * field[j];
            den += w;
        }
        out.push(num / den);
    }
    Ok(out)
}

/// The scalar field is the intensity channel when present, otherwise surface
/// variation. It is smoothed at sigmas `min_scale * sqrt(2)^j` for
/// `octaves * scales_per_octave` levels; consecutive levels are subtracted
/// into difference-of-Gaussians (DoG) bands. A point is a keypoint when some
/// band value exceeds `min_contrast` in magnitude and is a strict extremum
/// against all spatial neighbors within that band's sigma, in the band
/// itself and in whichever adjacent bands exist. Points detected at several
/// scales keep the largest |DoG| (ties prefer the smaller scale); the
/// response is that |DoG|.
pub fn detect_sift3d(cloud: &PointCloud, params: &SiftParams) -> Result<KeypointSet> {
    params.validate()?;
    if cloud.len() < 2 {
        return Ok(KeypointSet::empty(Detector::Sift3d, cloud.len()));
    }
    let index = SpatialIndex::build(cloud)?;
    let field = match cloud.intensities() {
        Some(intensities) => intensities.to_vec(),
        None => curvature_field(cloud, &index, params.min_scale)?,
    };

    let levels = params.octaves * params.scales_per_octave;
    let mut sigmas = Vec::with_capacity(levels);
    let mut sigma = params.min_scale;
    for _ in 0..levels {
        sigmas.push(sigma);
        sigma *= params.scale_factor;
    }
    let mut gaussians = Vec::with_capacity(levels);
    for &s in &sigmas {
        gaussians.push(smoothed(cloud, &index, &field, s)?);
    }
    let dog: Vec<Vec<f64>> = (0..levels - 1)
        .map(|j| {
            (0..cloud.len())
                .map(|i| gaussians[j + 1][i] - gaussians[j][i])
                .collect()
        })
        .collect();

    // Best response per point across scales: larger |DoG| wins, ties keep
    // the smaller scale (scales are visited in ascending order).
    let mut best: Vec<Option<f64>> = alloc::vec![None; cloud.len()];
    for (j, band) in dog.iter().enumerate() {
        for (i, p) in cloud.points().iter().enumerate() {
            let d = band[i];
            if d.abs() <= params.min_contrast || d.is_nan() {
                continue;
            }
            let hood = index.radius(p, sigmas[j])?;
            let mut is_max = true;
            let mut is_min = true;
            'hood: for &q in &hood.indices {
                if q != i {
                    let v = band[q];
                    if v >= d {
                        is_max = false;
                    }
                    if v <= d {
                        is_min = false;
                    }
                    if !is_max && !is_min {
                        break 'hood;
                    }
                }
                if j > 0 {
                    let v = dog[j - 1][q];
                    if v >= d {
                        is_max = false;
                    }
                    if v <= d {
                        is_min = false;
                    }
                    if !is_max && !is_min {
                        break 'hood;
                    }
                }
                if j + 1 < dog.len() {
                    let v = dog[j + 1][q];
                    if v >= d {
                        is_max = false;
                    }
                    if v <= d {
                        is_min = false;
                    }
                    if !is_max && !is_min {
                        break 'hood;
                    }
                }
            }
            if (is_max || is_min) && best[i].is_none_or(|b| d.abs() > b) {
                best[i] = Some(d.abs());
            }
        }
    }

    let candidates: Vec<(usize, f64)> = best
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.map(|r| (i, r)))
        .collect();
    KeypointSet::new(Detector::Sift3d, cloud.len(), candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use nalgebra::Point3;

    fn colored_plane(n: usize, spacing: f64, color_at: impl Fn(usize, usize) -> [u8; 3]) -> PointCloud {
        let mut pts = Vec::new();
        let mut colors = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
                colors.push(color_at(i, j));
            }
        }
        PointCloud::new(pts).unwrap().with_colors(colors).unwrap()
    }

    #[test]
    fn constant_intensity_yields_nothing() {
        let cloud = colored_plane(15, 0.01, |_, _| [128, 128, 128]);
        let kp = detect_sift3d(&cloud, &SiftParams::defaults(0.01)).unwrap();
        assert!(kp.is_empty());
    }

    #[test]
    fn flat_colorless_plane_yields_nothing() {
        let cloud = colored_plane(15, 0.01, |_, _| [0, 0, 0]);
        let cloud = PointCloud::new(cloud.points().to_vec()).unwrap();
        let kp = detect_sift3d(&cloud, &SiftParams::defaults(0.01)).unwrap();
        assert!(kp.is_empty());
    }

    #[test]
    fn rejects_bad_parameters() {
        let cloud = colored_plane(4, 0.01, |_, _| [0, 0, 0]);
        for params in [
            SiftParams {
                octaves: 1,
                scales_per_octave: 2,
                ..SiftParams::defaults(0.01)
            },
            SiftParams {
                scale_factor: 1.5,
                ..SiftParams::defaults(0.01)
            },
            SiftParams {
                min_scale: 0.0,
                ..SiftParams::defaults(0.01)
            },
            SiftParams {
                min_contrast: f64::NAN,
                ..SiftParams::defaults(0.01)
            },
        ] {
            assert!(detect_sift3d(&cloud, &params).is_err());
        }
    }

    /// Full recomputation of the scale space and extremum tests without a
    /// spatial index. Neighborhoods are accumulated in (distance, index)
    /// order so sums match the detector bitwise.
    fn brute_force_sift(cloud: &PointCloud, params: &SiftParams) -> Vec<(usize, f64)> {
        let pts = cloud.points();
        let field: Vec<f64> = cloud.intensities().unwrap().to_vec();
        let hood_of = |i: usize, radius: f64| -> Vec<(f64, usize)> {
            let p = pts[i];
            let mut h: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .filter_map(|(j, q)| {
                    let dx = q.x - p.x;
                    let dy = q.y - p.y;
                    let dz = q.z - p.z;
                    let d = (dx * dx + dy * dy + dz * dz).sqrt();
                    (d <= radius).then_some((d, j))
                })
                .collect();
            h.sort_by(|a, b| a.partial_cmp(b).unwrap());
            h
        };

        let levels = params.octaves * params.scales_per_octave;
        let mut sigmas = Vec::new();
        let mut s = params.min_scale;
        for _ in 0..levels {
            sigmas.push(s);
            s *= params.scale_factor;
        }
        let gaussians: Vec<Vec<f64>> = sigmas
            .iter()
            .map(|&sigma| {
                let inv = 1.0 / (2.0 * sigma * sigma);
                (0..pts.len())
                    .map(|i| {
                        let mut num = 0.0;
                        let mut den = 0.0;
                        for (d, j) in hood_of(i, SUPPORT_SIGMAS * sigma) {
                            let w = (-d * d * inv).exp();
                            num += w * field[j];
                            den += w;
                        }
                        num / den
                    })
                    .collect()
            })
            .collect();
        let dog: Vec<Vec<f64>> = (0..levels - 1)
            .map(|j| {
                (0..pts.len())
                    .map(|i| gaussians[j + 1][i] - gaussians[j][i])
                    .collect()
            })
            .collect();

        let mut best: Vec<Option<f64>> = vec![None; pts.len()];
        for j in 0..dog.len() {
            for i in 0..pts.len() {
                let d = dog[j][i];
                if d.abs() <= params.min_contrast || d.is_nan() {
                    continue;
                }
                let mut above = 0usize;
                let mut below = 0usize;
                let mut total = 0usize;
                for (_, q) in hood_of(i, sigmas[j]) {
                    let mut check = |v: f64| {
                        total += 1;
                        if v < d {
                            above += 1;
                        }
                        if v > d {
                            below += 1;
                        }
                    };
                    if q != i {
                        check(dog[j][q]);
                    }
                    if j > 0 {
                        check(dog[j - 1][q]);
                    }
                    if j + 1 < dog.len() {
                        check(dog[j + 1][q]);
                    }
                }
                if (above == total || below == total)
                    && best[i].is_none_or(|b| d.abs() > b)
                {
                    best[i] = Some(d.abs());
                }
            }
        }
        best.iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|r| (i, r)))
            .collect()
    }

    #[test]
    fn bright_point_detected_and_matches_direct_evaluation() {
        // One white point among black ones on a plane; the spike must come
        // out as a difference-of-Gaussians minimum at the finest band.
        let n = 15;
        let center = (n / 2) * n + n / 2;
        let cloud = colored_plane(n, 0.01, |i, j| {
            if i == n / 2 && j == n / 2 {
                [255, 255, 255]
            } else {
                [0, 0, 0]
            }
        });
        let params = SiftParams {
            min_scale: 0.02,
            octaves: 1,
            scales_per_octave: 4,
            scale_factor: core::f64::consts::SQRT_2,
            min_contrast: 1e-4,
        };
        let kp = detect_sift3d(&cloud, &params).unwrap();
        assert!(
            kp.indices().contains(&center),
            "bright point {center} missing from {:?}",
            kp.indices()
        );

        let expect = brute_force_sift(&cloud, &params);
        let got: Vec<(usize, f64)> = kp
            .indices()
            .iter()
            .copied()
            .zip(kp.responses().iter().copied())
            .collect();
        assert_eq!(got, expect);

        // The winning response is the finest band's value at the spike:
        // later bands only shrink in magnitude there.
        let finest = {
            let sigma0 = params.min_scale;
            let sigma1 = sigma0 * params.scale_factor;
            let g = |sigma: f64| {
                let inv = 1.0 / (2.0 * sigma * sigma);
                let p = cloud.point(center);
                let mut pairs: Vec<(f64, usize)> = cloud
                    .points()
                    .iter()
                    .enumerate()
                    .filter_map(|(j, q)| {
                        let d = ((q.x - p.x).powi(2) + (q.y - p.y).powi(2) + (q.z - p.z).powi(2))
                            .sqrt();
                        (d <= SUPPORT_SIGMAS * sigma).then_some((d, j))
                    })
                    .collect();
                pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let (mut num, mut den) = (0.0, 0.0);
                for (d, j) in pairs {
                    let w = (-d * d * inv).exp();
                    let intensity = cloud.intensities().unwrap()[j];
                    num += w * intensity;
                    den += w;
                }
                num / den
            };
            (g(sigma1) - g(sigma0)).abs()
        };
        let response = kp.responses()[kp.indices().iter().position(|&i| i == center).unwrap()];
        assert!((response - finest).abs() <= 1e-12 * finest.max(1.0));
    }

    #[test]
    fn colorless_detection_is_deterministic() {
        // Plane with a pyramid bump: the curvature fallback must behave
        // identically across runs.
        let mut pts = Vec::new();
        let n = 21;
        for i in 0..n {
            for j in 0..n {
                let x = i as f64 * 0.01;
                let y = j as f64 * 0.01;
                let cx = (i as f64 - 10.0).abs();
                let cy = (j as f64 - 10.0).abs();
                let z = (0.03 - 0.01 * cx.max(cy)).max(0.0);
                pts.push(Point3::new(x, y, z));
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let params = SiftParams::defaults(0.01);
        let a = detect_sift3d(&cloud, &params).unwrap();
        let b = detect_sift3d(&cloud, &params).unwrap();
        assert_eq!(a.indices(), b.indices());
        assert_eq!(a.responses(), b.responses());
    }
}
