//! Keypoint descriptors: SHOT and FPFH, plus the local reference frame and
//! the SPFH building block.

mod fpfh;
mod lrf;
mod shot;

pub use fpfh::{compute_fpfh, compute_spfh};
pub use lrf::{compute_lrf, LocalReferenceFrame};
pub use shot::compute_shot;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::detect::KeypointSet;
use crate::error::{Error, Result};

/// Descriptor families produced by this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescriptorKind {
    Shot,
    Fpfh,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 2] = [DescriptorKind::Shot, DescriptorKind::Fpfh];

    /// Length of a descriptor vector of this kind.
    pub fn dimension(self) -> usize {
        match self {
            DescriptorKind::Shot => 352,
            DescriptorKind::Fpfh => 33,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Shot => "shot",
            DescriptorKind::Fpfh => "fpfh",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "shot" => Some(DescriptorKind::Shot),
            "fpfh" => Some(DescriptorKind::Fpfh),
            _ => None,
        }
    }
}

/// Descriptor vectors for a keypoint set, one row per keypoint (row order
/// matches the keypoint order). Keypoints whose support was degenerate get
/// all-zero rows; they stay in place so rows keep lining up with keypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    keypoints: KeypointSet,
    vectors: Vec<Vec<f64>>,
    kind: DescriptorKind,
    radius: f64,
}

impl DescriptorSet {
    pub fn new(
        keypoints: KeypointSet,
        vectors: Vec<Vec<f64>>,
        kind: DescriptorKind,
        radius: f64,
    ) -> Result<Self> {
        if vectors.len() != keypoints.len() {
            return Err(Error::InvalidInput(format!(
                "{} descriptor rows for {} keypoints",
                vectors.len(),
                keypoints.len()
            )));
        }
        for (row, v) in vectors.iter().enumerate() {
            if v.len() != kind.dimension() {
                return Err(Error::InvalidInput(format!(
                    "descriptor row {row} has length {}, expected {}",
                    v.len(),
                    kind.dimension()
                )));
            }
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "descriptor row {row} has a negative or non-finite entry"
                )));
            }
        }
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "descriptor radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            keypoints,
            vectors,
            kind,
            radius,
        })
    }

    pub fn keypoints(&self) -> &KeypointSet {
        &self.keypoints
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// True when the row is all-zero (degenerate support); such rows are
    /// skipped by descriptor matching.
    pub fn is_zero_row(&self, row: usize) -> bool {
        self.vectors[row].iter().all(|&x| x == 0.0)
    }
}

/// Shared precondition check: the cloud must carry a normals channel.
pub(crate) fn require_normals_channel(cloud: &PointCloud, what: &str) -> Result<()> {
    if !cloud.has_normals() {
        return Err(Error::InvalidInput(String::from(what) + " requires normals"));
    }
    Ok(())
}

/// Shared precondition check: keypoints must refer to this cloud.
pub(crate) fn check_keypoints(cloud: &PointCloud, keypoints: &KeypointSet) -> Result<()> {
    if keypoints.cloud_len() != cloud.len() {
        return Err(Error::InvalidInput(format!(
            "keypoint set was built on a cloud of {} points, got {}",
            keypoints.cloud_len(),
            cloud.len()
        )));
    }
    Ok(())
}
