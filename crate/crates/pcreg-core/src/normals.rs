//! Surface normal estimation from local covariance.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Point3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::eigen::eigen_ascending;
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

/// A neighborhood is treated as rank deficient (collinear or coincident)
/// when its middle eigenvalue falls below this fraction of the largest.
const RANK_EPSILON: f64 = 1e-12;

/// Estimates a normal per point from the eigenvector of the smallest
/// eigenvalue of the neighborhood covariance within `radius`.
///
/// Each normal is oriented to face `viewpoint`: the sign is flipped when
/// `n · (viewpoint - p) < 0`. Points with fewer than three neighbors
/// (the point itself counts) or a degenerate neighborhood get `None`.
/// Returns a copy of the cloud with the normal channel replaced.
pub fn estimate_normals(
    cloud: &PointCloud,
    radius: f64,
    viewpoint: &Point3<f64>,
) -> Result<PointCloud> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "normal estimation radius must be positive, got {radius}"
        )));
    }
    if cloud.is_empty() {
        return cloud.clone().with_normals(Vec::new());
    }

    let index = SpatialIndex::build(cloud)?;
    let mut normals: Vec<Option<Vector3<f64>>> = Vec::with_capacity(cloud.len());
    for p in cloud.points() {
        let hood = index.radius(p, radius)?;
        normals.push(normal_from_neighborhood(cloud, &hood.indices, p, viewpoint));
    }
    cloud.clone().with_normals(normals)
}

fn normal_from_neighborhood(
    cloud: &PointCloud,
    neighbors: &[usize],
    p: &Point3<f64>,
    viewpoint: &Point3<f64>,
) -> Option<Vector3<f64>> {
    if neighbors.len() < 3 {
        return None;
    }
    let mut centroid = Vector3::zeros();
    for &j in neighbors {
        centroid += cloud.point(j).coords;
    }
    centroid /= neighbors.len() as f64;

    let mut cov = Matrix3::zeros();
    for &j in neighbors {
        let d = cloud.point(j).coords - centroid;
        cov += d * d.transpose();
    }
    cov /= neighbors.len() as f64;

    let (values, vectors) = eigen_ascending(&cov);
    if values[2] <= 0.0 || values[1] <= values[2] * RANK_EPSILON {
        return None;
    }
    let dir = vectors[0];
    let norm = dir.norm();
    if norm == 0.0 {
        return None;
    }
    let mut n = dir / norm;
    if n.dot(&(viewpoint - p)) < 0.0 {
        n = -n;
    }
    Some(n)
}
