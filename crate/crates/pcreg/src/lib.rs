//! Std companion to [`pcreg_core`]: point-cloud file formats, JSON interchange,
//! synthetic scene generation, CSV reporting, and the pipeline configuration
//! consumed by the `pcreg` command-line tool.
//!
//! The core crate owns the geometry and registration algorithms; this crate
//! owns everything that touches the filesystem or an operating system. All
//! distances are metres throughout.

pub mod config;
pub mod csvout;
pub mod error;
pub mod io;
pub mod json;
pub mod synth;

pub use error::{Error, Result};
