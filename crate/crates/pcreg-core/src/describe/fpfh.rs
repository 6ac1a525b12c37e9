//! Point feature histograms: per-point simplified histograms (SPFH) and
//! their neighbor-weighted combination (FPFH).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::describe::{check_keypoints, require_normals_channel, DescriptorKind, DescriptorSet};
use crate::detect::KeypointSet;
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

const BINS_PER_FEATURE: usize = 11;
pub(crate) const SPFH_DIMENSION: usize = 3 * BINS_PER_FEATURE;

/// Hard-assigns `v` from `[lo, hi]` into one of the 11 bins, clamping
/// boundary overshoot onto the edge bins.
fn hard_bin(v: f64, lo: f64, hi: f64) -> usize {
    let u = ((v - lo) / (hi - lo) * BINS_PER_FEATURE as f64).floor() as i64;
    u.clamp(0, BINS_PER_FEATURE as i64 - 1) as usize
}

/// Simplified point feature histogram of the point at `point_index`: three
/// concatenated 11-bin blocks over the Darboux angles (α, φ, θ) of every
/// (point, neighbor) pair inside `radius`, scaled so each block sums to 100.
/// Points with no valid pair (missing normals, no neighbors) yield all
/// zeros.
pub fn compute_spfh(cloud: &PointCloud, point_index: usize, radius: f64) -> Result<[f64; SPFH_DIMENSION]> {
    require_normals_channel(cloud, "point feature histograms")?;
    if point_index >= cloud.len() {
        return Err(Error::InvalidInput(format!(
            "point index {point_index} out of bounds for {} points",
            cloud.len()
        )));
    }
    check_radius(radius)?;
    let index = SpatialIndex::build(cloud)?;
    Ok(spfh_indexed(cloud, &index, point_index, radius))
}

fn check_radius(radius: f64) -> Result<()> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "descriptor radius must be positive, got {radius}"
        )));
    }
    Ok(())
}

pub(crate) fn spfh_indexed(
    cloud: &PointCloud,
    index: &SpatialIndex,
    point_index: usize,
    radius: f64,
) -> [f64; SPFH_DIMENSION] {
    let mut histogram = [0.0; SPFH_DIMENSION];
    let Some(n_center) = cloud.normal(point_index) else {
        return histogram;
    };
    let p = cloud.point(point_index);
    let hood = index
        .radius(&p, radius)
        .expect("query point comes from the indexed cloud");

    let mut pairs = 0usize;
    for (&j, &d) in hood.indices.iter().zip(&hood.distances) {
        if d == 0.0 {
            continue;
        }
        let Some(n_j) = cloud.normal(j) else {
            continue;
        };
        let (alpha, phi, theta) = darboux_angles(&n_center, &n_j, &((cloud.point(j) - p) / d));
        histogram[hard_bin(alpha, -1.0, 1.0)] += 1.0;
        histogram[BINS_PER_FEATURE + hard_bin(phi, -1.0, 1.0)] += 1.0;
        histogram[2 * BINS_PER_FEATURE
            + hard_bin(theta, -core::f64::consts::PI, core::f64::consts::PI)] += 1.0;
        pairs += 1;
    }
    if pairs == 0 {
        return histogram;
    }
    let scale = 100.0 / pairs as f64;
    for v in &mut histogram {
        *v *= scale;
    }
    histogram
}

/// Darboux angles of a pair. `direction` points from the center to the
/// neighbor and has unit length; the source of the frame is whichever end's
/// normal makes the smaller angle with the connecting line (ties keep the
/// center as source).
fn darboux_angles(
    n_center: &Vector3<f64>,
    n_neighbor: &Vector3<f64>,
    direction: &Vector3<f64>,
) -> (f64, f64, f64) {
    let center_alignment = n_center.dot(direction).abs();
    let neighbor_alignment = n_neighbor.dot(direction).abs();
    let (n_source, n_target, line) = if neighbor_alignment > center_alignment {
        (n_neighbor, n_center, -direction)
    } else {
        (n_center, n_neighbor, *direction)
    };
    let u = *n_source;
    let v = u.cross(&line);
    let w = u.cross(&v);
    let alpha = v.dot(n_target);
    let phi = u.dot(&line);
    let theta = w.dot(n_target).atan2(u.dot(n_target));
    (alpha, phi, theta)
}

/// Fast point feature histograms at the keypoints: each row is the
/// keypoint's own SPFH plus the distance-weighted mean of its neighbors'
/// SPFHs, with every 11-bin block rescaled to sum to 100 (all-zero blocks
/// stay zero). Keypoints with no in-radius neighbor and no pairs of their
/// own keep an all-zero row.
pub fn compute_fpfh(
    cloud: &PointCloud,
    keypoints: &KeypointSet,
    radius: f64,
) -> Result<DescriptorSet> {
    require_normals_channel(cloud, "fpfh descriptors")?;
    check_keypoints(cloud, keypoints)?;
    check_radius(radius)?;
    let index = SpatialIndex::build(cloud)?;

    let mut cache: BTreeMap<usize, [f64; SPFH_DIMENSION]> = BTreeMap::new();
    let spfh_of = |i: usize, cache: &mut BTreeMap<usize, [f64; SPFH_DIMENSION]>| {
        *cache
            .entry(i)
            .or_insert_with(|| spfh_indexed(cloud, &index, i, radius))
    };

    let mut vectors = Vec::with_capacity(keypoints.len());
    for &kp in keypoints.indices() {
        let mut row = spfh_of(kp, &mut cache);
        let hood = index.radius(&cloud.point(kp), radius)?;
        let neighbors: Vec<(usize, f64)> = hood
            .indices
            .iter()
            .zip(&hood.distances)
            .filter(|&(_, &d)| d > 0.0)
            .map(|(&j, &d)| (j, d))
            .collect();
        if !neighbors.is_empty() {
            let inv_count = 1.0 / neighbors.len() as f64;
            for &(j, d) in &neighbors {
                let contribution = spfh_of(j, &mut cache);
                let weight = inv_count / d;
                for (acc, v) in row.iter_mut().zip(&contribution) {
                    *acc += weight * v;
                }
            }
        }
        for block in row.chunks_mut(BINS_PER_FEATURE) {
            let sum: f64 = block.iter().sum();
            if sum > 0.0 {
                let scale = 100.0 / sum;
                for v in block {
                    *v *= scale;
                }
            }
        }
        vectors.push(row.to_vec());
    }
    DescriptorSet::new(keypoints.clone(), vectors, DescriptorKind::Fpfh, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Detector;
    use crate::transform::SimilarityTransform;
    use nalgebra::Point3;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn keypoints_of(cloud: &PointCloud, indices: &[usize]) -> KeypointSet {
        let entries: Vec<(usize, f64)> = indices.iter().map(|&i| (i, 1.0)).collect();
        KeypointSet::new(Detector::Iss3d, cloud.len(), entries).unwrap()
    }

    #[test]
    fn coplanar_pair_lands_in_the_central_bins() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
        ])
        .unwrap()
        .with_normals(vec![Some(Vector3::z()), Some(Vector3::z())])
        .unwrap();
        let hist = compute_spfh(&cloud, 0, 2.0).unwrap();
        for (i, v) in hist.iter().enumerate() {
            let expected = if i == 5 || i == 16 || i == 27 { 100.0 } else { 0.0 };
            assert_eq!(*v, expected, "bin {i}");
        }
    }

    #[test]
    fn flat_plane_concentrates_every_block_centrally() {
        let mut pts = Vec::new();
        for i in 0..9 {
            for j in 0..9 {
                pts.push(Point3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        let count = pts.len();
        let cloud = PointCloud::new(pts)
            .unwrap()
            .with_normals(vec![Some(Vector3::z()); count])
            .unwrap();
        let center = 4 * 9 + 4;
        let hist = compute_spfh(&cloud, center, 0.03).unwrap();
        for offset in [0, 11, 22] {
            assert!(
                (hist[offset + 5] - 100.0).abs() <= 1e-9,
                "block at {offset} not concentrated: {:?}",
                &hist[offset..offset + 11]
            );
        }
    }

    #[test]
    fn point_without_pairs_gets_zeros() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
        ])
        .unwrap()
        .with_normals(vec![Some(Vector3::z()), Some(Vector3::z())])
        .unwrap();
        let hist = compute_spfh(&cloud, 0, 0.5).unwrap();
        assert!(hist.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isolated_keypoint_keeps_a_zero_fpfh_row() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(10.01, 0.0, 0.0),
            Point3::new(10.0, 0.01, 0.0),
        ])
        .unwrap()
        .with_normals(vec![Some(Vector3::z()); 4])
        .unwrap();
        let set = compute_fpfh(&cloud, &keypoints_of(&cloud, &[0, 1]), 0.05).unwrap();
        assert!(set.is_zero_row(0), "isolated keypoint must stay zero");
        assert!(!set.is_zero_row(1));
    }

    fn random_cloud(seed: u64, count: usize) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point3<f64>> = (0..count)
            .map(|_| {
                Point3::new(
                    rng.random::<f64>() * 0.08,
                    rng.random::<f64>() * 0.08,
                    rng.random::<f64>() * 0.08,
                )
            })
            .collect();
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

    /// Independent two-pass recomputation with brute-force neighborhoods.
    fn naive_fpfh(cloud: &PointCloud, kp: usize, radius: f64) -> Vec<f64> {
        let spfh = |i: usize| -> Vec<f64> {
            let p = cloud.point(i);
            let n_i = cloud.normal(i).unwrap();
            let mut hood: Vec<(f64, usize)> = (0..cloud.len())
                .map(|j| ((cloud.point(j) - p).norm(), j))
                .filter(|&(d, _)| d <= radius && d > 0.0)
                .collect();
            hood.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut h = vec![0.0; 33];
            for &(d, j) in &hood {
                let n_j = cloud.normal(j).unwrap();
                let line = (cloud.point(j) - p) / d;
                let (ns, nt, dir) = if n_j.dot(&line).abs() > n_i.dot(&line).abs() {
                    (n_j, n_i, -line)
                } else {
                    (n_i, n_j, line)
                };
                let v = ns.cross(&dir);
                let w = ns.cross(&v);
                let feats = [
                    (v.dot(&nt), -1.0, 1.0),
                    (ns.dot(&dir), -1.0, 1.0),
                    (
                        w.dot(&nt).atan2(ns.dot(&nt)),
                        -core::f64::consts::PI,
                        core::f64::consts::PI,
                    ),
                ];
                for (block, &(val, lo, hi)) in feats.iter().enumerate() {
                    let b = (((val - lo) / (hi - lo) * 11.0).floor() as i64).clamp(0, 10) as usize;
                    h[block * 11 + b] += 1.0;
                }
            }
            if !hood.is_empty() {
                for v in &mut h {
                    *v *= 100.0 / hood.len() as f64;
                }
            }
            h
        };

        let p = cloud.point(kp);
        let mut hood: Vec<(f64, usize)> = (0..cloud.len())
            .map(|j| ((cloud.point(j) - p).norm(), j))
            .filter(|&(d, _)| d <= radius && d > 0.0)
            .collect();
        hood.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = spfh(kp);
        if !hood.is_empty() {
            let k = hood.len() as f64;
            for &(d, j) in &hood {
                let contribution = spfh(j);
                for (a, c) in acc.iter_mut().zip(&contribution) {
                    *a += c / (k * d);
                }
            }
        }
        for block in acc.chunks_mut(11) {
            let sum: f64 = block.iter().sum();
            if sum > 0.0 {
                for v in block {
                    *v *= 100.0 / sum;
                }
            }
        }
        acc
    }

    #[test]
    fn matches_naive_two_pass_recomputation() {
        let cloud = random_cloud(31, 60);
        let set = compute_fpfh(&cloud, &keypoints_of(&cloud, &[0, 17, 42]), 0.04).unwrap();
        for (row, &kp) in set.vectors().iter().zip(set.keypoints().indices()) {
            let expected = naive_fpfh(&cloud, kp, 0.04);
            for (i, (got, want)) in row.iter().zip(&expected).enumerate() {
                assert!(
                    (got - want).abs() <= 1e-9,
                    "keypoint {kp} bin {i}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn block_sums_are_zero_or_one_hundred() {
        let cloud = random_cloud(8, 70);
        let set = compute_fpfh(&cloud, &keypoints_of(&cloud, &[3, 20, 55]), 0.05).unwrap();
        for row in set.vectors() {
            for block in row.chunks(11) {
                let sum: f64 = block.iter().sum();
                assert!(
                    sum == 0.0 || (sum - 100.0).abs() <= 1e-6,
                    "block sum {sum}"
                );
            }
        }
    }

    #[test]
    fn rigid_motion_preserves_descriptors_but_rescaling_does_not() {
        let cloud = random_cloud(19, 60);
        let kps = keypoints_of(&cloud, &[0, 25, 50]);
        let radius = 0.05;

        let rigid = SimilarityTransform::rigid(
            *SimilarityTransform::from_axis_angle(Vector3::new(0.2, 1.0, -0.5), 0.75)
                .unwrap()
                .rotation(),
            Vector3::new(1.0, -0.4, 0.3),
        )
        .unwrap();
        let moved = cloud.apply(&rigid);
        let a = compute_fpfh(&cloud, &kps, radius).unwrap();
        let b = compute_fpfh(&moved, &keypoints_of(&moved, &[0, 25, 50]), radius).unwrap();
        for (ra, rb) in a.vectors().iter().zip(b.vectors()) {
            let diff: f64 = ra
                .iter()
                .zip(rb)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            assert!(diff <= 1e-6, "rigid motion changed a descriptor by {diff}");
        }

        // Same metric radius on a doubled cloud sees different supports, so
        // at least one descriptor must change.
        let doubled = cloud.apply(&SimilarityTransform::from_scale(2.0).unwrap());
        let c = compute_fpfh(&doubled, &keypoints_of(&doubled, &[0, 25, 50]), radius).unwrap();
        let moved_any = a
            .vectors()
            .iter()
            .zip(c.vectors())
            .any(|(ra, rc)| {
                ra.iter()
                    .zip(rc)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
                    > 1e-6
            });
        assert!(moved_any, "rescaling left every descriptor unchanged");
    }

    #[test]
    fn point_order_does_not_change_descriptors() {
        let cloud = random_cloud(77, 50);
        let n = cloud.len();
        let reversed_points: Vec<Point3<f64>> =
            (0..n).rev().map(|i| cloud.point(i)).collect();
        let reversed_normals: Vec<Option<Vector3<f64>>> =
            (0..n).rev().map(|i| cloud.normal(i)).collect();
        let reversed = PointCloud::new(reversed_points)
            .unwrap()
            .with_normals(reversed_normals)
            .unwrap();

        let picks = [2usize, 14, 39];
        let a = compute_fpfh(&cloud, &keypoints_of(&cloud, &picks), 0.05).unwrap();
        let remapped: Vec<usize> = picks.iter().map(|&i| n - 1 - i).collect();
        let b = compute_fpfh(&reversed, &keypoints_of(&reversed, &remapped), 0.05).unwrap();

        for (&kp, row) in a.keypoints().indices().iter().zip(a.vectors()) {
            let twin = n - 1 - kp;
            let pos = b
                .keypoints()
                .indices()
                .iter()
                .position(|&j| j == twin)
                .unwrap();
            assert_eq!(row, &b.vectors()[pos], "keypoint {kp} vs reversed {twin}");
        }
    }
}
