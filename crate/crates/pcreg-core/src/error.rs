//! Error types shared across the crate.

use alloc::string::String;
use alloc::vec::Vec;

use crate::icp::Dof;
use crate::transform::SimilarityTransform;

pub type Result<T> = core::result::Result<T, Error>;

/// Counters describing how far a coarse alignment got before failing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentDiagnostics {
    pub source_keypoints: usize,
    pub target_keypoints: usize,
    pub matches: usize,
    pub best_inliers: usize,
}

impl core::fmt::Display for AlignmentDiagnostics {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{} source keypoints, {} target keypoints, {} matches, best trial had {} inliers",
            self.source_keypoints, self.target_keypoints, self.matches, self.best_inliers
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument violated a precondition (empty cloud, negative radius,
    /// missing normals, descriptor kind mismatch, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A local reference frame could not be established (degenerate support).
    #[error("degenerate local reference frame: {0}")]
    DegenerateFrame(String),

    /// Point configuration does not constrain a unique transform.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// The point-to-plane normal equations are rank deficient. The listed
    /// degrees of freedom are unconstrained by the correspondences; the
    /// carried transform is the minimum-norm solution over the constrained
    /// subspace. (Boxed so `Result` stays small on frequent call paths.)
    #[error("degenerate geometry: unconstrained degrees of freedom {unconstrained:?}")]
    RankDeficient {
        unconstrained: Vec<Dof>,
        minimum_norm: alloc::boxed::Box<SimilarityTransform>,
    },

    /// Coarse alignment could not produce a transform.
    #[error("alignment failed: {0}")]
    AlignmentFailed(AlignmentDiagnostics),
}

impl Error {
    /// Stable machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::DegenerateFrame(_) => "degenerate-frame",
            Error::DegenerateGeometry(_) | Error::RankDeficient { .. } => "degenerate-geometry",
            Error::AlignmentFailed(_) => "alignment-failed",
        }
    }
}
