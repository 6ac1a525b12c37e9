//! Point cloud storage: positions plus optional color and normal channels.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Point3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::search::SpatialIndex;
use crate::transform::SimilarityTransform;

/// Stored normals must be unit length within this tolerance.
pub const NORMAL_TOLERANCE: f64 = 1e-6;

/// A 3D point cloud with optional per-point colors and normals.
///
/// Optional channels always have the same length as `points`. A normal slot
/// holds `None` where estimation failed (too few neighbors or a degenerate
/// neighborhood); consumers skip such points. Intensities are derived from
/// colors on attachment and live in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    colors: Option<Vec<[u8; 3]>>,
    normals: Option<Vec<Option<Vector3<f64>>>>,
    intensities: Option<Vec<f64>>,
}

/// Rec. 601 luma of an RGB triple, scaled to `[0, 1]`.
pub fn luma(rgb: [u8; 3]) -> f64 {
    (0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64) / 255.0
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.coords.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        Ok(Self {
            points,
            colors: None,
            normals: None,
            intensities: None,
        })
    }

    pub fn with_colors(mut self, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "color channel length {} does not match point count {}",
                colors.len(),
                self.points.len()
            )));
        }
        self.intensities = Some(colors.iter().map(|&c| luma(c)).collect());
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn with_normals(mut self, normals: Vec<Option<Vector3<f64>>>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::InvalidInput(format!(
                "normal channel length {} does not match point count {}",
                normals.len(),
                self.points.len()
            )));
        }
        for (i, n) in normals.iter().enumerate() {
            if let Some(n) = n {
                if !n.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "normal {i} has a non-finite component"
                    )));
                }
                if (n.norm() - 1.0).abs() > NORMAL_TOLERANCE {
                    return Err(Error::InvalidInput(format!(
                        "normal {i} is not unit length (|n| = {})",
                        n.norm()
                    )));
                }
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point3<f64> {
        self.points[i]
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    /// Per-point luma values, present iff colors are.
    pub fn intensities(&self) -> Option<&[f64]> {
        self.intensities.as_deref()
    }

    pub fn normals(&self) -> Option<&[Option<Vector3<f64>>]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    /// Normal of point `i`, `None` if the channel is absent or estimation
    /// failed there.
    pub fn normal(&self, i: usize) -> Option<Vector3<f64>> {
        self.normals.as_ref().and_then(|ns| ns[i])
    }

    /// Transforms every point, rotates valid normals, and keeps colors.
    pub fn apply(&self, t: &SimilarityTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply_point(p)).collect(),
            colors: self.colors.clone(),
            normals: self.normals.as_ref().map(|ns| {
                ns.iter()
                    .map(|n| n.as_ref().map(|n| t.apply_normal(n)))
                    .collect()
            }),
            intensities: self.intensities.clone(),
        }
    }

    /// Mean distance from each point to its nearest neighbor at a different
    /// index. Duplicated positions contribute zero. Errors on clouds with
    /// fewer than two points.
    pub fn resolution(&self) -> Result<f64> {
        if self.points.len() < 2 {
            return Err(Error::InvalidInput(String::from(
                "resolution needs at least two points",
            )));
        }
        let index = SpatialIndex::build(self)?;
        let mut sum = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            let knn = index.knn(p, 2)?;
            let nearest = knn
                .indices
                .iter()
                .zip(&knn.distances)
                .find(|(&j, _)| j != i)
                .map(|(_, &d)| d)
                .expect("two results always include a distinct index");
            sum += nearest;
        }
        Ok(sum / self.points.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn grid(nx: usize, ny: usize, nz: usize, spacing: f64) -> Vec<Point3<f64>> {
        let mut pts = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    pts.push(Point3::new(
                        i as f64 * spacing,
                        j as f64 * spacing,
                        k as f64 * spacing,
                    ));
                }
            }
        }
        pts
    }

    #[test]
    fn rejects_non_finite_points() {
        let pts = alloc::vec![Point3::new(0.0, f64::NAN, 0.0)];
        assert!(PointCloud::new(pts).is_err());
    }

    #[test]
    fn rejects_mismatched_channel_lengths() {
        let cloud = PointCloud::new(grid(2, 2, 1, 1.0)).unwrap();
        assert!(cloud.clone().with_colors(alloc::vec![[0, 0, 0]]).is_err());
        assert!(cloud.with_normals(alloc::vec![None]).is_err());
    }

    #[test]
    fn rejects_non_unit_normals() {
        let cloud = PointCloud::new(grid(2, 1, 1, 1.0)).unwrap();
        let bad = alloc::vec![Some(Vector3::new(0.0, 0.0, 1.1)), None];
        assert!(cloud.with_normals(bad).is_err());
    }

    #[test]
    fn luma_matches_reference_values() {
        assert_relative_eq!(luma([255, 255, 255]), 1.0, epsilon = 1e-15);
        assert_relative_eq!(luma([0, 0, 0]), 0.0);
        assert_relative_eq!(luma([255, 0, 0]), 0.299, epsilon = 1e-15);
        assert_relative_eq!(luma([0, 255, 0]), 0.587, epsilon = 1e-15);
        assert_relative_eq!(luma([0, 0, 255]), 0.114, epsilon = 1e-15);
    }

    #[test]
    fn intensities_follow_colors() {
        let cloud = PointCloud::new(grid(2, 1, 1, 1.0))
            .unwrap()
            .with_colors(alloc::vec![[255, 0, 0], [10, 20, 30]])
            .unwrap();
        let ints = cloud.intensities().unwrap();
        assert_eq!(ints.len(), 2);
        assert_relative_eq!(ints[0], 0.299, epsilon = 1e-15);
        assert_relative_eq!(ints[1], luma([10, 20, 30]));
    }

    #[test]
    fn resolution_matches_brute_force() {
        // Irregular-ish cloud: grid plus a detached pair and one duplicate.
        let mut pts = grid(4, 3, 2, 0.25);
        pts.push(Point3::new(10.0, 0.0, 0.0));
        pts.push(Point3::new(10.0, 0.4, 0.0));
        pts.push(pts[3]);
        let cloud = PointCloud::new(pts.clone()).unwrap();

        let mut expect = 0.0;
        for (i, p) in pts.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (j, q) in pts.iter().enumerate() {
                if i == j {
                    continue;
                }
                let dx = p.x - q.x;
                let dy = p.y - q.y;
                let dz = p.z - q.z;
                let d = (dx * dx + dy * dy + dz * dz).sqrt();
                if d < best {
                    best = d;
                }
            }
            expect += best;
        }
        expect /= pts.len() as f64;

        assert_eq!(cloud.resolution().unwrap(), expect);
    }

    #[test]
    fn resolution_on_uniform_grid_equals_spacing() {
        let cloud = PointCloud::new(grid(5, 5, 3, 0.1)).unwrap();
        assert_relative_eq!(cloud.resolution().unwrap(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn resolution_needs_two_points() {
        let cloud = PointCloud::new(alloc::vec![Point3::origin()]).unwrap();
        assert!(cloud.resolution().is_err());
    }

    #[test]
    fn apply_moves_points_and_rotates_normals() {
        let rot = SimilarityTransform::from_axis_angle(Vector3::z(), core::f64::consts::FRAC_PI_2)
            .unwrap();
        let t = rot
            .compose(&SimilarityTransform::from_translation(Vector3::new(0.0, 0.0, 2.0)).unwrap());
        let cloud = PointCloud::new(alloc::vec![Point3::new(1.0, 0.0, 0.0)])
            .unwrap()
            .with_colors(alloc::vec![[9, 8, 7]])
            .unwrap()
            .with_normals(alloc::vec![Some(Vector3::x())])
            .unwrap();
        let moved = cloud.apply(&t);
        assert_relative_eq!(
            moved.point(0),
            Point3::new(0.0, 1.0, 2.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            moved.normal(0).unwrap(),
            Vector3::new(0.0, 1.0, 0.0),
            epsilon = 1e-15
        );
        assert_eq!(moved.colors().unwrap()[0], [9, 8, 7]);
        assert_eq!(moved.intensities().unwrap(), cloud.intensities().unwrap());
    }
}
