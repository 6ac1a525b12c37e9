//! Similarity transforms: uniform scale, rotation, translation.

use alloc::format;
use alloc::string::String;

use nalgebra::{Matrix3, Point3, Unit, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Construction accepts a rotation matrix when `|R^T R - I|` and `|det R - 1|`
/// stay below this, element-wise.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// `p -> scale * R * p + t`, with `R` a proper rotation and `scale > 0`.
///
/// Rigid transforms are the `scale == 1` case; composition and inversion
/// preserve rigidity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

fn check_rotation(rotation: &Matrix3<f64>) -> core::result::Result<(), String> {
    for v in rotation.iter() {
        if !v.is_finite() {
            return Err(String::from("rotation matrix has a non-finite entry"));
        }
    }
    let gram = rotation.transpose() * rotation;
    let drift = (gram - Matrix3::identity()).abs().max();
    if drift > ROTATION_TOLERANCE {
        return Err(format!(
            "rotation matrix is not orthonormal (max |R^T R - I| = {drift:.3e})"
        ));
    }
    let det = rotation.determinant();
    if (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(format!("rotation matrix determinant is {det}, expected +1"));
    }
    Ok(())
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "scale must be finite and positive, got {scale}"
            )));
        }
        check_rotation(&rotation).map_err(Error::InvalidInput)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(String::from(
                "translation has a non-finite entry",
            )));
        }
        Ok(Self {
            scale,
            rotation,
            translation,
        })
    }

    /// Rigid transform (`scale == 1`).
    pub fn rigid(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::new(1.0, rotation, translation)
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Result<Self> {
        Self::rigid(Matrix3::identity(), translation)
    }

    pub fn from_scale(scale: f64) -> Result<Self> {
        Self::new(scale, Matrix3::identity(), Vector3::zeros())
    }

    /// Rotation about `axis` (need not be unit length) by `angle` radians.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        if !angle.is_finite() || axis.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(String::from(
                "axis-angle rotation has a non-finite component",
            )));
        }
        let norm = axis.norm();
        if norm == 0.0 {
            return Err(Error::InvalidInput(String::from(
                "rotation axis must be non-zero",
            )));
        }
        let unit = Unit::new_unchecked(axis / norm);
        let rot = nalgebra::Rotation3::from_axis_angle(&unit, angle);
        Self::rigid(rot.into_inner(), Vector3::zeros())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn is_rigid(&self) -> bool {
        self.scale == 1.0
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    /// Directions only rotate; scale and translation do not apply.
    pub fn apply_normal(&self, n: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * n
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let transform = Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        };
        debug_assert!(check_rotation(&transform.rotation).is_ok());
        transform
    }

    pub fn invert(&self) -> Self {
        let rotation = self.rotation.transpose();
        let transform = Self {
            scale: 1.0 / self.scale,
            rotation,
            translation: -(rotation * self.translation) / self.scale,
        };
        debug_assert!(check_rotation(&transform.rotation).is_ok());
        transform
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn rotation_angle(&self) -> f64 {
        let c = (self.rotation.trace() - 1.0) / 2.0;
        c.clamp(-1.0, 1.0).acos()
    }
}
