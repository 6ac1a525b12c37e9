//! Pipeline configuration: a JSON file of defaults that command-line flags
//! override field by field.

use std::path::{Path, PathBuf};

use pcreg_core::describe::DescriptorKind;
use pcreg_core::detect::Detector;
use pcreg_core::icp::{IcpParams, IcpVariant};
use pcreg_core::matching::{CoarseParams, NORMAL_RADIUS_FACTOR};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::read_json;

/// Parse a detector name, listing the valid values on failure.
pub fn parse_detector(name: &str) -> Result<Detector> {
    Detector::parse(name).ok_or_else(|| {
        let valid: Vec<&str> = Detector::ALL.iter().map(|d| d.name()).collect();
        Error::Usage(format!(
            "unknown detector '{name}'; valid detectors: {}",
            valid.join(", ")
        ))
    })
}

/// Parse a descriptor name, listing the valid values on failure.
pub fn parse_descriptor(name: &str) -> Result<DescriptorKind> {
    DescriptorKind::parse(name).ok_or_else(|| {
        let valid: Vec<&str> = DescriptorKind::ALL.iter().map(|d| d.name()).collect();
        Error::Usage(format!(
            "unknown descriptor '{name}'; valid descriptors: {}",
            valid.join(", ")
        ))
    })
}

/// Parse an ICP variant name, listing the valid values on failure.
pub fn parse_icp_variant(name: &str) -> Result<IcpVariant> {
    IcpVariant::parse(name).ok_or_else(|| {
        Error::Usage(format!(
            "unknown icp variant '{name}'; valid variants: {}, {}",
            IcpVariant::PointToPoint.name(),
            IcpVariant::PointToPlane.name()
        ))
    })
}

/// Coarse-alignment defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoarseConfig {
    pub enabled: bool,
    pub seed: u64,
    pub trials: usize,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        CoarseConfig {
            enabled: true,
            seed: 0,
            trials: 1000,
        }
    }
}

/// ICP defaults. The correspondence gate scales with cloud resolution so
/// one configuration serves clouds of different densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpConfig {
    pub variant: String,
    pub max_iterations: usize,
    pub gate_resolution_factor: f64,
    pub transform_epsilon: f64,
    pub mse_epsilon: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            variant: IcpVariant::PointToPlane.name().to_string(),
            max_iterations: 50,
            gate_resolution_factor: 10.0,
            transform_epsilon: 1e-8,
            mse_epsilon: 1e-6,
        }
    }
}

/// Default input/output paths; positional command-line arguments take
/// precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub input: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Everything a pipeline run needs beyond its input clouds. All lengths are
/// metres (`units` is an informational note pinned to "m").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detector: String,
    pub descriptor: String,
    /// Descriptor support radius, metres.
    pub descriptor_radius: f64,
    /// Normal-estimation support as a multiple of cloud resolution.
    pub normal_radius_factor: f64,
    /// Viewpoint toward which estimated normals are oriented.
    pub viewpoint: [f64; 3],
    pub coarse: CoarseConfig,
    pub icp: IcpConfig,
    pub io: IoConfig,
    pub units: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            detector: "iss3d".to_string(),
            descriptor: "shot".to_string(),
            descriptor_radius: 0.04,
            normal_radius_factor: NORMAL_RADIUS_FACTOR,
            viewpoint: [0.0, 0.0, 0.0],
            coarse: CoarseConfig::default(),
            icp: IcpConfig::default(),
            io: IoConfig::default(),
            units: "m".to_string(),
        }
    }
}

impl PipelineConfig {
    /// Load and validate a JSON configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let config: PipelineConfig = read_json(path)?;
        config.validate()?;
        Ok(config)
    }

    /// Check every statically checkable invariant; file existence is
    /// enforced when a command opens its inputs.
    pub fn validate(&self) -> Result<()> {
        self.detector()?;
        self.descriptor()?;
        self.icp_variant()?;
        for (what, value) in [
            ("descriptor_radius", self.descriptor_radius),
            ("normal_radius_factor", self.normal_radius_factor),
            ("icp.gate_resolution_factor", self.icp.gate_resolution_factor),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::Usage(format!("{what} must be positive, got {value}")));
            }
        }
        for (what, value) in [
            ("icp.transform_epsilon", self.icp.transform_epsilon),
            ("icp.mse_epsilon", self.icp.mse_epsilon),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Usage(format!("{what} must be non-negative, got {value}")));
            }
        }
        if !self.viewpoint.iter().all(|v| v.is_finite()) {
            return Err(Error::Usage("viewpoint has a non-finite coordinate".into()));
        }
        if self.coarse.trials == 0 {
            return Err(Error::Usage("coarse.trials must be at least 1".into()));
        }
        if self.icp.max_iterations == 0 {
            return Err(Error::Usage("icp.max_iterations must be at least 1".into()));
        }
        if self.units != "m" {
            return Err(Error::Usage(format!(
                "unsupported units '{}'; all distances are meters (\"m\")",
                self.units
            )));
        }
        Ok(())
    }

    pub fn detector(&self) -> Result<Detector> {
        parse_detector(&self.detector)
    }

    pub fn descriptor(&self) -> Result<DescriptorKind> {
        parse_descriptor(&self.descriptor)
    }

    pub fn icp_variant(&self) -> Result<IcpVariant> {
        parse_icp_variant(&self.icp.variant)
    }

    pub fn viewpoint(&self) -> nalgebra::Point3<f64> {
        nalgebra::Point3::new(self.viewpoint[0], self.viewpoint[1], self.viewpoint[2])
    }

    /// Coarse parameters with the configured trials/radius and the given
    /// effective seed.
    pub fn coarse_params(&self, seed: u64) -> CoarseParams {
        CoarseParams {
            seed,
            trials: self.coarse.trials,
            descriptor_radius: self.descriptor_radius,
            source_viewpoint: self.viewpoint(),
            target_viewpoint: self.viewpoint(),
        }
    }

    /// ICP parameters for a target cloud of the given resolution.
    pub fn icp_params(&self, variant: IcpVariant, resolution: f64) -> IcpParams {
        IcpParams {
            variant,
            max_iterations: self.icp.max_iterations,
            max_correspondence_distance: self.icp.gate_resolution_factor * resolution,
            transform_epsilon: self.icp.transform_epsilon,
            mse_epsilon: self.icp.mse_epsilon,
        }
    }
}
