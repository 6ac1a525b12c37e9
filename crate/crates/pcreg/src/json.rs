//! JSON interchange files.
//!
//! Every file is an object carrying `schema_version` (currently 1) and a
//! `kind` discriminator, so tools can reject files from future revisions and
//! mismatched pipeline stages with a clear message. Files produced by seeded
//! operations also carry the seed that generated them.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use pcreg_core::SimilarityTransform;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version stamped into (and required of) every interchange file.
pub const SCHEMA_VERSION: u32 = 1;

/// Serialized form of a similarity transform: `rotation` is row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformBody {
    pub scale: f64,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl TransformBody {
    pub fn from_transform(t: &SimilarityTransform) -> Self {
        let r = t.rotation();
        TransformBody {
            scale: t.scale(),
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [t.translation().x, t.translation().y, t.translation().z],
        }
    }

    /// Validates orthonormality and scale positivity on the way in.
    pub fn to_transform(&self) -> Result<SimilarityTransform> {
        let r = self.rotation;
        let rotation = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        let translation = Vector3::new(self.translation[0], self.translation[1], self.translation[2]);
        Ok(SimilarityTransform::new(self.scale, rotation, translation)?)
    }
}

/// One detected keypoint.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KeypointEntry {
    /// Index into the cloud the detector ran on.
    pub index: usize,
    /// Detector response at that point (larger is stronger).
    pub response: f64,
}

/// Output of `pcreg detect`.
#[derive(Debug, Serialize, Deserialize)]
pub struct KeypointsFile {
    pub schema_version: u32,
    pub kind: String,
    pub detector: String,
    /// Size of the cloud the indices refer to.
    pub cloud_points: usize,
    pub keypoints: Vec<KeypointEntry>,
}

pub const KIND_KEYPOINTS: &str = "keypoints";

/// Output of `pcreg describe`. Carries the keypoint set it was computed on
/// so `pcreg match` can rebuild both sides without the original clouds.
#[derive(Debug, Serialize, Deserialize)]
pub struct DescriptorsFile {
    pub schema_version: u32,
    pub kind: String,
    pub detector: String,
    /// Size of the cloud the keypoint indices refer to.
    pub cloud_points: usize,
    pub descriptor: String,
    pub radius: f64,
    pub dimension: usize,
    /// Described keypoints, row-aligned with `rows`.
    pub keypoints: Vec<KeypointEntry>,
    pub rows: Vec<Vec<f64>>,
}

pub const KIND_DESCRIPTORS: &str = "descriptors";

/// One descriptor correspondence.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MatchEntry {
    /// Index into the source cloud of the matched source keypoint.
    pub source: usize,
    /// Index into the target cloud of the matched target keypoint.
    pub target: usize,
    /// Euclidean distance between the descriptor vectors.
    pub distance: f64,
}

/// Output of `pcreg match`.
#[derive(Debug, Serialize, Deserialize)]
pub struct MatchesFile {
    pub schema_version: u32,
    pub kind: String,
    pub descriptor: String,
    pub reciprocal: bool,
    pub pairs: Vec<MatchEntry>,
}

pub const KIND_MATCHES: &str = "matches";

/// How a transform estimate was produced, with its quality counters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum TransformMethod {
    /// Keypoint/descriptor consensus alignment.
    Coarse {
        detector: String,
        descriptor: String,
        matches: usize,
        inliers: usize,
        trials: usize,
    },
    /// Iterative closest point refinement.
    Icp {
        variant: String,
        iterations: usize,
        converged: bool,
        final_mse: f64,
    },
}

/// Output of `pcreg coarse` / `pcreg refine`; input to `pcreg refine --init`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TransformFile {
    pub schema_version: u32,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub transform: TransformBody,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub provenance: Option<TransformMethod>,
}

pub const KIND_TRANSFORM: &str = "transform";

/// One named case of a transform battery.
#[derive(Debug, Serialize, Deserialize)]
pub struct BatteryCaseEntry {
    pub name: String,
    pub transform: TransformBody,
}

/// Output of `pcreg battery`.
#[derive(Debug, Serialize, Deserialize)]
pub struct BatteryFile {
    pub schema_version: u32,
    pub kind: String,
    pub battery: String,
    pub seed: u64,
    pub cases: Vec<BatteryCaseEntry>,
}

pub const KIND_BATTERY: &str = "battery";

/// One synthesized view and where it was written.
#[derive(Debug, Serialize, Deserialize)]
pub struct ViewEntry {
    pub index: usize,
    /// File name of the view cloud, relative to the poses file.
    pub file: String,
    /// Camera-to-world pose; view clouds are in camera-local coordinates.
    pub pose: TransformBody,
    pub points: usize,
}

/// Output of `pcreg synth --views`: ground-truth poses for a view circuit.
#[derive(Debug, Serialize, Deserialize)]
pub struct PosesFile {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub views: Vec<ViewEntry>,
}

pub const KIND_POSES: &str = "poses";

/// Serialize any interchange value to `path`, pretty-printed with a trailing
/// newline so files diff cleanly.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path, 0, format!("could not serialize: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Read an interchange value, mapping syntax errors to parse errors with the
/// offending line.
pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))
}

/// Reject files from other schema revisions or pipeline stages up front.
pub fn check_header(path: &Path, schema_version: u32, kind: &str, expected_kind: &str) -> Result<()> {
    if schema_version != SCHEMA_VERSION {
        return Err(Error::parse(
            path,
            0,
            format!("unsupported schema version {schema_version}; this build reads version {SCHEMA_VERSION}"),
        ));
    }
    if kind != expected_kind {
        return Err(Error::parse(
            path,
            0,
            format!("expected a '{expected_kind}' file, found kind '{kind}'"),
        ));
    }
    Ok(())
}
