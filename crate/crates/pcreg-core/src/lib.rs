//! Coarse-to-dense registration of 3D point clouds.
//!
//! The pipeline goes: estimate normals, detect keypoints, describe them,
//! match descriptors, fit a rigid transform with RANSAC, then refine the
//! result with ICP. Each stage is usable on its own; [`matching::coarse_align`]
//! and [`icp::icp`] are the two entry points most callers want.
//!
//! The crate is `no_std` + `alloc` compatible (disable the `std` feature).
//! All randomized routines take an explicit seed and produce identical
//! results across runs and platforms.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod cloud;
pub mod describe;
pub mod detect;
mod eigen;
pub mod error;
pub mod eval;
pub mod icp;
pub mod matching;
pub mod normals;
pub mod search;
pub mod transform;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use search::{NeighborQueryResult, SpatialIndex};
pub use transform::SimilarityTransform;
