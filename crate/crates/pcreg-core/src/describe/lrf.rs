//! Repeatable local reference frames for descriptor supports.

use alloc::format;
use alloc::string::String;

use nalgebra::{Matrix3, Point3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::eigen::eigen_ascending;
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

/// Orthonormality/determinant tolerance for a valid frame.
const FRAME_TOLERANCE: f64 = 1e-9;
/// Relative eigenvalue floor below which the support is treated as
/// collinear (the in-plane axes would be arbitrary).
const COLLINEAR_EPSILON: f64 = 1e-12;
/// Minimum support size (the keypoint itself counts).
const MIN_NEIGHBORS: usize = 5;

/// A right-handed orthonormal frame anchored at a keypoint. Rows of `axes`
/// are the x, y, z directions expressed in world coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalReferenceFrame {
    origin: Point3<f64>,
    axes: Matrix3<f64>,
}

impl LocalReferenceFrame {
    pub fn new(origin: Point3<f64>, axes: Matrix3<f64>) -> Result<Self> {
        let gram = axes * axes.transpose();
        let drift = (gram - Matrix3::identity()).abs().max();
        if !drift.is_finite() || drift > FRAME_TOLERANCE {
            return Err(Error::DegenerateFrame(format!(
                "axes are not orthonormal (drift {drift:e})"
            )));
        }
        let det = axes.determinant();
        if (det - 1.0).abs() > FRAME_TOLERANCE {
            return Err(Error::DegenerateFrame(format!(
                "axes are not right-handed (det {det})"
            )));
        }
        Ok(Self { origin, axes })
    }

    pub fn origin(&self) -> &Point3<f64> {
        &self.origin
    }

    pub fn axes(&self) -> &Matrix3<f64> {
        &self.axes
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.axes.row(0).transpose()
    }

    pub fn y_axis(&self) -> Vector3<f64> {
        self.axes.row(1).transpose()
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.axes.row(2).transpose()
    }

    /// Coordinates of `p` in this frame.
    pub fn to_local(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.axes * (p - self.origin)
    }
}

/// Frame from the distance-weighted covariance of the support: neighbors
/// within `radius` are weighted by `radius - d` and their spread about the
/// keypoint is eigen-decomposed. Axes are eigenvectors by descending
/// eigenvalue; x and z are flipped toward the majority of neighbors (ties
/// keep the eigenvector as computed) and y = z × x closes the right-handed
/// frame.
pub fn compute_lrf(
    cloud: &PointCloud,
    keypoint_index: usize,
    radius: f64,
) -> Result<LocalReferenceFrame> {
    let index = SpatialIndex::build(cloud)?;
    compute_lrf_indexed(cloud, &index, keypoint_index, radius)
}

pub(crate) fn compute_lrf_indexed(
    cloud: &PointCloud,
    index: &SpatialIndex,
    keypoint_index: usize,
    radius: f64,
) -> Result<LocalReferenceFrame> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "frame radius must be positive, got {radius}"
        )));
    }
    if keypoint_index >= cloud.len() {
        return Err(Error::InvalidInput(format!(
            "keypoint index {keypoint_index} out of bounds for {} points",
            cloud.len()
        )));
    }
    let p = cloud.point(keypoint_index);
    let hood = index.radius(&p, radius)?;
    if hood.len() < MIN_NEIGHBORS {
        return Err(Error::DegenerateFrame(format!(
            "{} neighbors in radius, need {MIN_NEIGHBORS}",
            hood.len()
        )));
    }

    let mut cov = Matrix3::zeros();
    let mut weight_sum = 0.0;
    for (&j, &d) in hood.indices.iter().zip(&hood.distances) {
        let w = radius - d;
        let offset = cloud.point(j) - p;
        cov += w * offset * offset.transpose();
        weight_sum += w;
    }
    cov /= weight_sum;

    let (values, vectors) = eigen_ascending(&cov);
    if values[2] <= 0.0 {
        return Err(Error::DegenerateFrame(String::from(
            "support carries no spatial extent",
        )));
    }
    if values[1] <= values[2] * COLLINEAR_EPSILON {
        return Err(Error::DegenerateFrame(String::from(
            "support is collinear",
        )));
    }

    let mut x = vectors[2];
    let mut z = vectors[0];
    for axis in [&mut x, &mut z] {
        let mut toward = 0usize;
        let mut away = 0usize;
        for &j in &hood.indices {
            let side = (cloud.point(j) - p).dot(axis);
            if side > 0.0 {
                toward += 1;
            } else if side < 0.0 {
                away += 1;
            }
        }
        if away > toward {
            *axis = -*axis;
        }
    }
    let y = z.cross(&x);
    let axes = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    LocalReferenceFrame::new(p, axes)
}
