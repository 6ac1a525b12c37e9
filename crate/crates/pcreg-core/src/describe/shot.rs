//! Signature of histograms of orientations over a partitioned spherical
//! support.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::describe::lrf::compute_lrf_indexed;
use crate::describe::{check_keypoints, require_normals_channel, DescriptorKind, DescriptorSet};
use crate::detect::KeypointSet;
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

const AZIMUTH_BINS: usize = 8;
const ELEVATION_BINS: usize = 2;
const RADIAL_BINS: usize = 2;
const COSINE_BINS: usize = 11;
const DIMENSION: usize = AZIMUTH_BINS * ELEVATION_BINS * RADIAL_BINS * COSINE_BINS;

/// One dimension's pair of soft-binning contributions: `(bin, weight)` for
/// the two bins bracketing the continuous coordinate.
type Split = [(usize, f64); 2];

/// Splits a coordinate mapped to `u ∈ [-0.5, bins - 0.5]` between its two
/// bracketing bins. `wrap` folds out-of-range bins around (azimuth); without
/// it they clamp onto the edge bin so no mass is lost.
fn soft_split(u: f64, bins: usize, wrap: bool) -> Split {
    let lower = u.floor();
    let frac = u - lower;
    let lo = lower as i64;
    let hi = lo + 1;
    let fold = |b: i64| -> usize {
        if wrap {
            b.rem_euclid(bins as i64) as usize
        } else {
            b.clamp(0, bins as i64 - 1) as usize
        }
    };
    [(fold(lo), 1.0 - frac), (fold(hi), frac)]
}

/// Maps `v` from `[lo, hi]` to the continuous bin coordinate.
fn bin_coordinate(v: f64, lo: f64, hi: f64, bins: usize) -> f64 {
    (v - lo) / (hi - lo) * bins as f64 - 0.5
}

fn flat_index(az: usize, el: usize, rad: usize, cos: usize) -> usize {
    ((az * ELEVATION_BINS + el) * RADIAL_BINS + rad) * COSINE_BINS + cos
}

/// Computes one 352-vector per keypoint: the support sphere is carved into
/// 8 azimuth × 2 elevation × 2 radial sectors in the keypoint's local frame
/// and each sector holds an 11-bin histogram of `cos` angles between the
/// keypoint normal and neighbor normals. Mass is shared quadrilinearly
/// between adjacent sectors/bins and the vector is L2-normalized.
///
/// Keypoints whose normal is invalid or whose local frame is degenerate
/// keep an all-zero row so output rows stay aligned with the keypoint set.
pub fn compute_shot(
    cloud: &PointCloud,
    keypoints: &KeypointSet,
    radius: f64,
) -> Result<DescriptorSet> {
    require_normals_channel(cloud, "shot descriptors")?;
    check_keypoints(cloud, keypoints)?;
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidInput(alloc::format!(
            "descriptor radius must be positive, got {radius}"
        )));
    }
    let index = SpatialIndex::build(cloud)?;
    let mut vectors = Vec::with_capacity(keypoints.len());
    for &kp in keypoints.indices() {
        vectors.push(describe_one(cloud, &index, kp, radius)?);
    }
    DescriptorSet::new(keypoints.clone(), vectors, DescriptorKind::Shot, radius)
}

fn describe_one(
    cloud: &PointCloud,
    index: &SpatialIndex,
    kp: usize,
    radius: f64,
) -> Result<Vec<f64>> {
    let zeros = || vec![0.0; DIMENSION];
    let Some(kp_normal) = cloud.normal(kp) else {
        return Ok(zeros());
    };
    let lrf = match compute_lrf_indexed(cloud, index, kp, radius) {
        Ok(frame) => frame,
        Err(Error::DegenerateFrame(_)) => return Ok(zeros()),
        Err(other) => return Err(other),
    };

    let p = cloud.point(kp);
    let hood = index.radius(&p, radius)?;
    let mut histogram = vec![0.0; DIMENSION];
    for (&j, &d) in hood.indices.iter().zip(&hood.distances) {
        if d == 0.0 {
            continue;
        }
        let Some(n_j) = cloud.normal(j) else {
            continue;
        };
        let local = lrf.to_local(&cloud.point(j));

        let azimuth = local.y.atan2(local.x);
        let elevation = (local.z / d).clamp(-1.0, 1.0);
        let cosine = kp_normal.dot(&n_j).clamp(-1.0, 1.0);

        let az = soft_split(
            bin_coordinate(azimuth, -core::f64::consts::PI, core::f64::consts::PI, AZIMUTH_BINS),
            AZIMUTH_BINS,
            true,
        );
        let el = soft_split(
            bin_coordinate(elevation, -1.0, 1.0, ELEVATION_BINS),
            ELEVATION_BINS,
            false,
        );
        let rad = soft_split(
            bin_coordinate(d / radius, 0.0, 1.0, RADIAL_BINS),
            RADIAL_BINS,
            false,
        );
        let cos = soft_split(
            bin_coordinate(cosine, -1.0, 1.0, COSINE_BINS),
            COSINE_BINS,
            false,
        );

        for &(ia, wa) in &az {
            for &(ie, we) in &el {
                for &(ir, wr) in &rad {
                    for &(ic, wc) in &cos {
                        histogram[flat_index(ia, ie, ir, ic)] += wa * we * wr * wc;
                    }
                }
            }
        }
    }

    let norm = histogram.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut histogram {
            *v /= norm;
        }
    }
    Ok(histogram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::describe::compute_lrf;
    use crate::detect::Detector;
    use crate::transform::SimilarityTransform;
    use nalgebra::{Point3, Vector3};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn keypoints_of(cloud: &PointCloud, indices: &[usize]) -> KeypointSet {
        let entries: Vec<(usize, f64)> = indices.iter().map(|&i| (i, 1.0)).collect();
        KeypointSet::new(Detector::Harris3d, cloud.len(), entries).unwrap()
    }

    fn plane_with_up_normals(n: usize, spacing: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
            }
        }
        let count = pts.len();
        PointCloud::new(pts)
            .unwrap()
            .with_normals(vec![Some(Vector3::z()); count])
            .unwrap()
    }

    fn random_blob(seed: u64, count: usize) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = vec![Point3::new(0.0, 0.0, 0.0)];
        for _ in 1..count {
            pts.push(Point3::new(
                (rng.random::<f64>() - 0.5) * 0.1,
                (rng.random::<f64>() - 0.5) * 0.1,
                (rng.random::<f64>() - 0.5) * 0.1,
            ));
        }
        let normals: Vec<Option<Vector3<f64>>> = (0..count)
            .map(|_| {
                let v = Vector3::new(
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                    rng.random::<f64>() - 0.5,
                );
                Some(v.normalize())
            })
            .collect();
        PointCloud::new(pts).unwrap().with_normals(normals).unwrap()
    }

    #[test]
    fn aligned_plane_normals_fill_the_top_cosine_bin() {
        let cloud = plane_with_up_normals(15, 0.01);
        let center = 7 * 15 + 7;
        let set = compute_shot(&cloud, &keypoints_of(&cloud, &[center]), 0.05).unwrap();
        let row = &set.vectors()[0];
        let top: f64 = (0..DIMENSION)
            .filter(|i| i % COSINE_BINS == COSINE_BINS - 1)
            .map(|i| row[i])
            .sum();
        let total: f64 = row.iter().sum();
        assert!(total > 0.0);
        assert!(
            top / total >= 0.999,
            "top cosine bins hold {} of the mass",
            top / total
        );
    }

    #[test]
    fn descriptors_are_rigid_invariant() {
        let cloud = random_blob(11, 80);
        let kps = keypoints_of(&cloud, &[0, 5, 33]);
        let t = SimilarityTransform::rigid(
            *SimilarityTransform::from_axis_angle(Vector3::new(1.0, 0.4, -0.2), 0.9)
                .unwrap()
                .rotation(),
            Vector3::new(-0.3, 1.2, 0.05),
        )
        .unwrap();
        let moved = cloud.apply(&t);

        let a = compute_shot(&cloud, &kps, 0.06).unwrap();
        let b = compute_shot(&moved, &keypoints_of(&moved, &[0, 5, 33]), 0.06).unwrap();
        for (ra, rb) in a.vectors().iter().zip(b.vectors()) {
            let diff: f64 = ra
                .iter()
                .zip(rb)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            assert!(diff <= 1e-6, "descriptor moved by {diff}");
        }
    }

    /// Independent single-loop re-computation: same binning formulas written
    /// as straight-line code over brute-force neighbors.
    fn naive_shot(cloud: &PointCloud, kp: usize, radius: f64) -> Vec<f64> {
        let p = cloud.point(kp);
        let mut neighbors: Vec<(f64, usize)> = (0..cloud.len())
            .map(|j| ((cloud.point(j) - p).norm(), j))
            .filter(|&(d, _)| d <= radius)
            .collect();
        neighbors.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let lrf = compute_lrf(cloud, kp, radius).unwrap();
        let n_kp = cloud.normal(kp).unwrap();
        let mut hist = vec![0.0; 352];
        for &(d, j) in &neighbors {
            if d == 0.0 {
                continue;
            }
            let Some(n_j) = cloud.normal(j) else { continue };
            let local = lrf.to_local(&cloud.point(j));
            let dims = [
                (
                    (local.y.atan2(local.x) + core::f64::consts::PI)
                        / core::f64::consts::TAU
                        * 8.0
                        - 0.5,
                    8usize,
                    true,
                ),
                (((local.z / d).clamp(-1.0, 1.0) + 1.0) / 2.0 * 2.0 - 0.5, 2, false),
                (d / radius * 2.0 - 0.5, 2, false),
                (
                    (n_kp.dot(&n_j).clamp(-1.0, 1.0) + 1.0) / 2.0 * 11.0 - 0.5,
                    11,
                    false,
                ),
            ];
            let splits: Vec<[(usize, f64); 2]> = dims
                .iter()
                .map(|&(u, bins, wrap)| {
                    let f = u.floor();
                    let frac = u - f;
                    let place = |b: i64| -> usize {
                        if wrap {
                            b.rem_euclid(bins as i64) as usize
                        } else {
                            b.clamp(0, bins as i64 - 1) as usize
                        }
                    };
                    [(place(f as i64), 1.0 - frac), (place(f as i64 + 1), frac)]
                })
                .collect();
            for &(a, wa) in &splits[0] {
                for &(e, we) in &splits[1] {
                    for &(r, wr) in &splits[2] {
                        for &(c, wc) in &splits[3] {
                            hist[((a * 2 + e) * 2 + r) * 11 + c] += wa * we * wr * wc;
                        }
                    }
                }
            }
        }
        let norm = hist.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut hist {
                *v /= norm;
            }
        }
        hist
    }

    #[test]
    fn matches_naive_recomputation_bin_for_bin() {
        let cloud = random_blob(23, 50);
        let set = compute_shot(&cloud, &keypoints_of(&cloud, &[0]), 0.09).unwrap();
        let expected = naive_shot(&cloud, 0, 0.09);
        for (i, (got, want)) in set.vectors()[0].iter().zip(&expected).enumerate() {
            assert!(
                (got - want).abs() <= 1e-9,
                "bin {i}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn descriptor_rows_are_unit_length_or_zero() {
        let cloud = random_blob(5, 60);
        let set = compute_shot(&cloud, &keypoints_of(&cloud, &[0, 10, 59]), 0.07).unwrap();
        for row in set.vectors() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-9, "norm {norm}");
        }
    }

    #[test]
    fn degenerate_support_keeps_a_zero_row() {
        // A far-away straggler has too few neighbors for a frame; its row
        // must stay, all zeros, alongside the healthy row.
        let mut pts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.01, 0.0, 0.0),
            Point3::new(0.0, 0.01, 0.0),
            Point3::new(0.01, 0.01, 0.002),
            Point3::new(0.005, 0.005, -0.003),
            Point3::new(0.002, 0.007, 0.001),
        ];
        pts.push(Point3::new(5.0, 5.0, 5.0));
        let count = pts.len();
        let cloud = PointCloud::new(pts)
            .unwrap()
            .with_normals(vec![Some(Vector3::z()); count])
            .unwrap();
        let set = compute_shot(&cloud, &keypoints_of(&cloud, &[0, 6]), 0.05).unwrap();
        assert!(!set.is_zero_row(0));
        assert!(set.is_zero_row(1));
        assert_eq!(set.vectors()[1], vec![0.0; DIMENSION]);
    }

    #[test]
    fn missing_normals_channel_is_rejected() {
        let cloud = plane_with_up_normals(6, 0.01);
        let bare = PointCloud::new(cloud.points().to_vec()).unwrap();
        let err = compute_shot(&bare, &keypoints_of(&bare, &[0]), 0.05).unwrap_err();
        assert_eq!(err.class(), "invalid-input");
    }
}
