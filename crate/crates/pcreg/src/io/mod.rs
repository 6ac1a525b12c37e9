//! Cloud file IO: PCD and PLY, dispatched on file extension.
//!
//! Both readers share the same hygiene rules:
//!
//! * Points with non-finite coordinates are dropped (and counted) by default;
//!   under [`ReadOptions::strict`] they are errors.
//! * Unknown fields or properties are skipped with a warning by default;
//!   under strict mode they are errors. Skipped data cannot survive a round
//!   trip through [`PointCloud`], which stores only positions, colors, and
//!   normals.
//! * Stored normals are renormalized to unit length (file formats routinely
//!   truncate them); non-finite or zero normals become missing slots rather
//!   than errors, matching the in-memory convention for failed estimates.
//!
//! Files written by this crate store coordinates and normals as 64-bit
//! floats, so a write/read round trip reproduces every channel bitwise.

pub mod pcd;
pub mod ply;

use std::fmt;
use std::path::Path;

use nalgebra::Vector3;
use pcreg_core::PointCloud;

use crate::error::{Error, Result};

/// How to react to files that are readable but lossy or out of contract.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Turn recoverable defects (unknown fields, non-finite points, trailing
    /// bytes) into hard errors instead of warnings.
    pub strict: bool,
}

/// Payload encoding for formats that support more than one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataLayout {
    /// Human-readable text rows.
    #[default]
    Ascii,
    /// Little-endian packed binary (PCD only).
    Binary,
}

/// Options for [`write_cloud`].
#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Payload layout. PLY output is always ASCII; requesting binary PLY is
    /// a usage error.
    pub layout: DataLayout,
}

/// A parsed cloud plus everything the reader had to gloss over.
#[derive(Debug)]
pub struct CloudRead {
    pub cloud: PointCloud,
    /// Points discarded because a coordinate was NaN or infinite.
    pub dropped_points: usize,
    /// Human-readable notes about skipped fields, dropped points, and other
    /// recoverable defects. Empty for files this crate wrote itself.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Pcd,
    Ply,
}

fn format_of(path: &Path) -> Result<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("pcd") => Ok(Format::Pcd),
        Some("ply") => Ok(Format::Ply),
        _ => Err(Error::Usage(format!(
            "unsupported cloud format for '{}': use a .pcd or .ply path",
            path.display()
        ))),
    }
}

/// Read a cloud from a `.pcd` or `.ply` file.
pub fn read_cloud(path: impl AsRef<Path>, options: &ReadOptions) -> Result<CloudRead> {
    let path = path.as_ref();
    match format_of(path)? {
        Format::Pcd => pcd::read_pcd(path, options),
        Format::Ply => ply::read_ply(path, options),
    }
}

/// Write a cloud to a `.pcd` or `.ply` file, inferring the format from the
/// extension.
pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>, options: &WriteOptions) -> Result<()> {
    let path = path.as_ref();
    match format_of(path)? {
        Format::Pcd => pcd::write_pcd(cloud, path, options.layout),
        Format::Ply => {
            if options.layout == DataLayout::Binary {
                return Err(Error::Usage(
                    "PLY output is ASCII only; use a .pcd path for binary data".into(),
                ));
            }
            ply::write_ply(cloud, path)
        }
    }
}

/// Clamp a freshly parsed normal to the in-memory convention: unit length,
/// with non-finite or zero vectors mapped to "missing".
pub(crate) fn sanitize_normal(
    v: Vector3<f64>,
    point_index: usize,
    warnings: &mut Vec<String>,
) -> Option<Vector3<f64>> {
    if !v.iter().all(|c| c.is_finite()) {
        return None;
    }
    let norm = v.norm();
    if norm < 1e-12 {
        warnings.push(format!(
            "point {point_index}: zero-length normal treated as missing"
        ));
        return None;
    }
    Some(v / norm)
}

/// Assemble a cloud from parsed channels. Channel lengths are equal by
/// construction and points have been filtered to finite values, so failures
/// here indicate a reader bug rather than a bad file.
pub(crate) fn finish_cloud(
    points: Vec<nalgebra::Point3<f64>>,
    colors: Option<Vec<[u8; 3]>>,
    normals: Option<Vec<Option<Vector3<f64>>>>,
) -> Result<PointCloud> {
    let mut cloud = PointCloud::new(points)?;
    if let Some(colors) = colors {
        cloud = cloud.with_colors(colors)?;
    }
    if let Some(normals) = normals {
        cloud = cloud.with_normals(normals)?;
    }
    Ok(cloud)
}

/// `f64` formatter producing the shortest text that parses back to the same
/// bits, with NaN spelled `nan` for interoperability.
pub(crate) struct F64(pub f64);

impl fmt::Display for F64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_nan() {
            f.write_str("nan")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// `f32` counterpart of [`F64`].
pub(crate) struct F32(pub f32);

impl fmt::Display for F32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_nan() {
            f.write_str("nan")
        } else {
            write!(f, "{}", self.0)
        }
    }
}
