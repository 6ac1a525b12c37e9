//! Multi-view registration chains: register each view onto the growing
//! model and track the drift of the chained pose estimates.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::Point3;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::describe::DescriptorKind;
use crate::detect::Detector;
use crate::error::{Error, Result};
use crate::eval::metrics::misalignment;
use crate::icp::{icp, IcpParams, IcpVariant};
use crate::matching::{coarse_align, CoarseParams, NORMAL_RADIUS_FACTOR};
use crate::normals::estimate_normals;
use crate::search::SpatialIndex;
use crate::transform::SimilarityTransform;

/// Appended view points closer than this fraction of the anchor view's
/// resolution to an existing model point are dropped, keeping overlapping
/// views from flooding the model with duplicates.
const MODEL_DEDUPE_FACTOR: f64 = 0.5;

/// Coarse-alignment stage of a registration pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseStage {
    pub detector: Detector,
    pub descriptor: DescriptorKind,
    pub params: CoarseParams,
}

/// A pairwise registration recipe: optional coarse alignment followed by
/// optional ICP refinement (ICP parameters derive from the model's
/// resolution at each step). With both stages disabled the estimate is the
/// identity. `model_viewpoint` orients normals estimated on the growing
/// model for point-to-plane refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub coarse: Option<CoarseStage>,
    pub refine: Option<IcpVariant>,
    pub model_viewpoint: Point3<f64>,
}

/// Record of the pairwise registration that ended a chain early.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFailure {
    pub view_index: usize,
    pub class: &'static str,
    pub message: String,
}

/// Accumulated error per view. A truncated trace carries the failure that
/// stopped it; the error entries then cover only the views registered
/// before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeTrace {
    errors: Vec<(usize, f64)>,
    failure: Option<TraceFailure>,
}

impl CumulativeTrace {
    pub fn errors(&self) -> &[(usize, f64)] {
        &self.errors
    }

    pub fn failure(&self) -> Option<&TraceFailure> {
        self.failure.as_ref()
    }

    pub fn is_truncated(&self) -> bool {
        self.failure.is_some()
    }

    /// Error of the last registered view.
    pub fn final_error(&self) -> Option<f64> {
        self.errors.last().map(|&(_, e)| e)
    }
}

/// One pairwise registration of `source` onto `model` per the pipeline.
fn register(
    source: &PointCloud,
    model: &PointCloud,
    pipeline: &Pipeline,
) -> Result<SimilarityTransform> {
    let mut estimate = SimilarityTransform::identity();
    if let Some(stage) = &pipeline.coarse {
        estimate = coarse_align(source, model, stage.detector, stage.descriptor, &stage.params)?
            .transform;
    }
    if let Some(variant) = pipeline.refine {
        let resolution = model.resolution()?;
        let params = IcpParams::defaults(variant, resolution);
        estimate = match variant {
            IcpVariant::PointToPoint => icp(source, model, &estimate, &params)?.transform,
            IcpVariant::PointToPlane => {
                let oriented = estimate_normals(
                    model,
                    NORMAL_RADIUS_FACTOR * resolution,
                    &pipeline.model_viewpoint,
                )?;
                icp(source, &oriented, &estimate, &params)?.transform
            }
        };
    }
    Ok(estimate)
}

/// Chains pairwise registrations across an ordered view sequence and
/// reports the accumulated error per view.
///
/// Each view comes in its own frame with a ground-truth pose mapping it
/// into the common world frame. View 0 anchors the model at its ground
/// truth; every later view is registered onto the growing model (all
/// previously registered views, placed by their estimates) and its error
/// is the RMS distance between its ground-truth and estimated placements.
/// A failed pairwise registration truncates the trace with a failure
/// record instead of erroring out.
pub fn cumulative_error(
    views: &[PointCloud],
    poses: &[SimilarityTransform],
    pipeline: &Pipeline,
) -> Result<CumulativeTrace> {
    if views.is_empty() {
        return Err(Error::InvalidInput(String::from(
            "cumulative error needs at least one view",
        )));
    }
    if views.len() != poses.len() {
        return Err(Error::InvalidInput(format!(
            "{} views against {} poses",
            views.len(),
            poses.len()
        )));
    }
    for (k, (view, pose)) in views.iter().zip(poses).enumerate() {
        if view.is_empty() {
            return Err(Error::InvalidInput(format!("view {k} is empty")));
        }
        if !pose.is_rigid() {
            return Err(Error::InvalidInput(format!(
                "ground-truth pose {k} is not rigid (scale {})",
                pose.scale()
            )));
        }
    }

    let mut model_points: Vec<Point3<f64>> = views[0]
        .points()
        .iter()
        .map(|p| poses[0].apply_point(p))
        .collect();
    let dedupe_radius = if views.len() > 1 {
        MODEL_DEDUPE_FACTOR * PointCloud::new(model_points.clone())?.resolution()?
    } else {
        0.0
    };
    let mut errors = Vec::with_capacity(views.len());
    errors.push((0, 0.0));

    for k in 1..views.len() {
        let model = PointCloud::new(model_points.clone())?;
        match register(&views[k], &model, pipeline) {
            Ok(estimate) => {
                let drift = misalignment(&views[k], &estimate, &poses[k])?;
                errors.push((k, drift.rms));
                let occupancy = SpatialIndex::build(&model)?;
                for p in views[k].points() {
                    let placed = estimate.apply_point(p);
                    if occupancy.knn(&placed, 1)?.distances[0] > dedupe_radius {
                        model_points.push(placed);
                    }
                }
            }
            Err(failure) => {
                return Ok(CumulativeTrace {
                    errors,
                    failure: Some(TraceFailure {
                        view_index: k,
                        class: failure.class(),
                        message: failure.to_string(),
                    }),
                });
            }
        }
    }
    Ok(CumulativeTrace {
        errors,
        failure: None,
    })
}
