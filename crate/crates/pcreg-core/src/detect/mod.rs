//! Keypoint detectors: Harris3D, SIFT3D, ISS3D, SUSAN.
//!
//! All four share the same output shape ([`KeypointSet`]) and the same
//! determinism contract: identical input produces identical output, and
//! exact rigid copies of a cloud (points and normals transformed together)
//! produce keypoints at corresponding positions.

mod harris;
mod iss;
mod sift;
mod susan;

pub use harris::{detect_harris3d, HarrisParams};
pub use iss::{detect_iss3d, IssParams};
pub use sift::{detect_sift3d, SiftParams};
pub use susan::{detect_susan, SusanParams};

use alloc::format;
use alloc::vec::Vec;

use nalgebra::Point3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::search::SpatialIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    Harris3d,
    Sift3d,
    Iss3d,
    Susan,
}

impl Detector {
    pub const ALL: [Detector; 4] = [
        Detector::Harris3d,
        Detector::Sift3d,
        Detector::Iss3d,
        Detector::Susan,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Detector::Harris3d => "harris3d",
            Detector::Sift3d => "sift3d",
            Detector::Iss3d => "iss3d",
            Detector::Susan => "susan",
        }
    }

    pub fn parse(name: &str) -> Option<Detector> {
        Detector::ALL.iter().copied().find(|d| d.name() == name)
    }

    /// Runs this detector with its default parameters derived from the
    /// given cloud resolution.
    pub fn detect_with_defaults(
        self,
        cloud: &PointCloud,
        resolution: f64,
    ) -> Result<KeypointSet> {
        match self {
            Detector::Harris3d => {
                harris::detect_harris3d(cloud, &harris::HarrisParams::defaults(resolution))
            }
            Detector::Sift3d => {
                sift::detect_sift3d(cloud, &sift::SiftParams::defaults(resolution))
            }
            Detector::Iss3d => iss::detect_iss3d(cloud, &iss::IssParams::defaults(resolution)),
            Detector::Susan => {
                susan::detect_susan(cloud, &susan::SusanParams::defaults(resolution))
            }
        }
    }
}

/// Keypoints of one detector run: point indices into the source cloud with
/// their response scores, sorted by ascending index.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    detector: Detector,
    /// Point count of the cloud the set was detected on; later stages verify
    /// it to catch cloud/keypoint pairing mistakes.
    cloud_len: usize,
    indices: Vec<usize>,
    responses: Vec<f64>,
}

impl KeypointSet {
    pub fn new(
        detector: Detector,
        cloud_len: usize,
        mut entries: Vec<(usize, f64)>,
    ) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidInput(format!(
                    "duplicate keypoint index {}",
                    pair[0].0
                )));
            }
        }
        for &(i, r) in &entries {
            if i >= cloud_len {
                return Err(Error::InvalidInput(format!(
                    "keypoint index {i} out of bounds for cloud of {cloud_len} points"
                )));
            }
            if !r.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "keypoint {i} has a non-finite response"
                )));
            }
        }
        Ok(Self {
            detector,
            cloud_len,
            indices: entries.iter().map(|e| e.0).collect(),
            responses: entries.iter().map(|e| e.1).collect(),
        })
    }

    pub fn empty(detector: Detector, cloud_len: usize) -> Self {
        Self {
            detector,
            cloud_len,
            indices: Vec::new(),
            responses: Vec::new(),
        }
    }

    pub fn detector(&self) -> Detector {
        self.detector
    }

    pub fn cloud_len(&self) -> usize {
        self.cloud_len
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Keypoint positions looked up in the cloud the set was detected on.
    pub fn positions(&self, cloud: &PointCloud) -> Result<Vec<Point3<f64>>> {
        if cloud.len() != self.cloud_len {
            return Err(Error::InvalidInput(format!(
                "keypoint set was detected on a cloud of {} points, got {}",
                self.cloud_len,
                cloud.len()
            )));
        }
        Ok(self.indices.iter().map(|&i| cloud.point(i)).collect())
    }
}

/// Keeps a candidate unless a strictly stronger one sits within `radius`;
/// equal responses are won by the lower point index. Candidates must carry
/// unique indices.
pub(crate) fn non_max_suppress(
    positions: &[Point3<f64>],
    candidates: &[(usize, f64)],
    radius: f64,
) -> Result<Vec<(usize, f64)>> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let sub = PointCloud::new(candidates.iter().map(|&(i, _)| positions[i]).collect())?;
    let index = SpatialIndex::build(&sub)?;
    let mut kept = Vec::new();
    for (ci, &(point_index, response)) in candidates.iter().enumerate() {
        let near = index.radius(&sub.point(ci), radius)?;
        let suppressed = near.indices.iter().any(|&cj| {
            let (other_index, other_response) = candidates[cj];
            other_response > response
                || (other_response == response && other_index < point_index)
        });
        if !suppressed {
            kept.push((point_index, response));
        }
    }
    Ok(kept)
}

pub(crate) fn require_normals<'a>(
    cloud: &'a PointCloud,
    detector: &str,
) -> Result<&'a [Option<nalgebra::Vector3<f64>>]> {
    cloud.normals().ok_or_else(|| {
        Error::InvalidInput(format!("{detector} requires a cloud with estimated normals"))
    })
}
