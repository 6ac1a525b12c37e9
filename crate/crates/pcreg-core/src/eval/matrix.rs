//! The full benchmark matrix: every detector × descriptor × battery case ×
//! support radius, yielding repeatability, success-rate, and misalignment
//! data plus a record of any cells that failed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::Point3;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

use crate::cloud::PointCloud;
use crate::describe::{compute_fpfh, compute_shot, DescriptorKind, DescriptorSet};
use crate::detect::{Detector, KeypointSet};
use crate::error::{Error, Result};
use crate::eval::battery::TransformBattery;
use crate::eval::metrics::{
    misalignment, repeatability_curve, success_rate, RepeatabilityCurve,
    SUCCESS_EPSILON_RESOLUTION_FACTOR,
};
use crate::matching::{
    coarse_align, match_descriptors, splitmix64, CoarseParams, NORMAL_RADIUS_FACTOR,
};
use crate::normals::estimate_normals;
use crate::transform::SimilarityTransform;

/// Default descriptor-radius sweep: (0, 5] cm in steps of 0.005 cm.
pub fn default_radius_sweep() -> Vec<f64> {
    (1..=1000).map(|i| i as f64 * 5e-5).collect()
}

/// Configuration of a benchmark run. `resample_sigma` jitters every target
/// cloud (a stand-in for sensor resampling); `coarse_trials` bounds the
/// consensus effort of the misalignment cells and `coarse_cells` turns
/// those cells off entirely when only repeatability and success rates are
/// wanted; `viewpoint` orients estimated normals in the source frame
/// (targets use it mapped through each case's transform).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixConfig {
    pub seed: u64,
    pub radii: Vec<f64>,
    pub resample_sigma: f64,
    pub coarse_trials: usize,
    pub coarse_cells: bool,
    pub reciprocal: bool,
    pub viewpoint: Point3<f64>,
}

impl MatrixConfig {
    /// Full-sweep defaults: the (0, 5] cm radius ladder, 2 mm resampling
    /// noise, 1000 consensus trials.
    pub fn defaults(seed: u64) -> Self {
        Self {
            seed,
            radii: default_radius_sweep(),
            resample_sigma: 0.002,
            coarse_trials: 1000,
            coarse_cells: true,
            reciprocal: false,
            viewpoint: Point3::origin(),
        }
    }

    fn validate(&self) -> Result<()> {
        for (i, &radius) in self.radii.iter().enumerate() {
            if !radius.is_finite() || radius <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "radius {i} must be positive, got {radius}"
                )));
            }
        }
        if !self.resample_sigma.is_finite() || self.resample_sigma < 0.0 {
            return Err(Error::InvalidInput(format!(
                "resample sigma must be finite and non-negative, got {}",
                self.resample_sigma
            )));
        }
        if self.coarse_trials == 0 {
            return Err(Error::InvalidInput(String::from(
                "consensus needs at least one trial",
            )));
        }
        if self.viewpoint.coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(String::from(
                "viewpoint has a non-finite coordinate",
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatabilityRecord {
    pub detector: Detector,
    pub case: String,
    pub curve: RepeatabilityCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessRecord {
    pub detector: Detector,
    pub descriptor: DescriptorKind,
    pub case: String,
    pub radius: f64,
    pub rate: f64,
    pub empty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MisalignmentRecord {
    pub detector: Detector,
    pub descriptor: DescriptorKind,
    pub case: String,
    pub radius: f64,
    pub mse: f64,
    pub rms: f64,
}

/// A cell that could not be evaluated; the run records it and moves on.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub detector: Option<Detector>,
    pub descriptor: Option<DescriptorKind>,
    pub case: String,
    pub radius: Option<f64>,
    pub class: &'static str,
    pub message: String,
}

/// All benchmark outputs of one matrix run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub seed: u64,
    pub repeatability: Vec<RepeatabilityRecord>,
    pub success: Vec<SuccessRecord>,
    pub misalignment: Vec<MisalignmentRecord>,
    pub failures: Vec<CellFailure>,
}

impl EvaluationReport {
    /// Every numeric entry must be finite and non-negative.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Error::InvalidInput(format!("report holds a non-finite or negative {what}: {v}"))
        };
        for record in &self.success {
            if !record.rate.is_finite() || record.rate < 0.0 {
                return Err(bad("success rate", record.rate));
            }
        }
        for record in &self.misalignment {
            if !record.mse.is_finite() || record.mse < 0.0 {
                return Err(bad("misalignment", record.mse));
            }
        }
        Ok(())
    }
}

fn fold_bytes(mut h: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h)
}

/// Seed for one cell, derived from the global seed and the cell's
/// coordinates so results do not depend on evaluation order.
fn cell_seed(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = splitmix64(seed);
    for part in parts {
        h = fold_bytes(h, part);
    }
    h
}

/// The case's target cloud: the scene moved by the case transform, then
/// jittered by seeded depth-style noise as a resampling stand-in — each
/// point is displaced by a 1-D Gaussian amount along a random direction,
/// so the displacement magnitude is |N(0, sigma)| like a range-sensor
/// depth error rather than a 3-D isotropic (chi-distributed) one. Colors
/// ride along; normals are re-estimated downstream.
pub fn resample(
    scene: &PointCloud,
    case: &SimilarityTransform,
    sigma: f64,
    seed: u64,
) -> Result<PointCloud> {
    let moved = scene.apply(case);
    if sigma == 0.0 {
        return Ok(moved);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma is validated non-negative");
    let points: Vec<Point3<f64>> = moved
        .points()
        .iter()
        .map(|p| {
            let depth: f64 = noise.sample(&mut rng);
            let direction: [f64; 3] = UnitSphere.sample(&mut rng);
            Point3::new(
                p.x + depth * direction[0],
                p.y + depth * direction[1],
                p.z + depth * direction[2],
            )
        })
        .collect();
    let jittered = PointCloud::new(points)?;
    match moved.colors() {
        Some(colors) => jittered.with_colors(colors.to_vec()),
        None => Ok(jittered),
    }
}

fn describe(
    cloud: &PointCloud,
    keypoints: &KeypointSet,
    descriptor: DescriptorKind,
    radius: f64,
) -> Result<DescriptorSet> {
    match descriptor {
        DescriptorKind::Shot => compute_shot(cloud, keypoints, radius),
        DescriptorKind::Fpfh => compute_fpfh(cloud, keypoints, radius),
    }
}

/// Runs the full cartesian product of detectors × descriptors × battery
/// cases × support radii on `scene`. Repeatability is measured once per
/// detector and case; success rates and coarse-alignment misalignment are
/// measured per descriptor and radius. Any failing cell is recorded in the
/// report and the run continues.
pub fn run_matrix(
    scene: &PointCloud,
    detectors: &[Detector],
    descriptors: &[DescriptorKind],
    batteries: &[TransformBattery],
    config: &MatrixConfig,
) -> Result<EvaluationReport> {
    config.validate()?;
    let source_resolution = scene.resolution()?;
    let source_oriented = estimate_normals(
        scene,
        NORMAL_RADIUS_FACTOR * source_resolution,
        &config.viewpoint,
    )?;
    let epsilon = SUCCESS_EPSILON_RESOLUTION_FACTOR * source_resolution;

    let mut report = EvaluationReport {
        seed: config.seed,
        repeatability: Vec::new(),
        success: Vec::new(),
        misalignment: Vec::new(),
        failures: Vec::new(),
    };

    // Source-side detections and descriptions do not depend on the battery
    // case, so they are computed once and reused.
    let mut source_keypoints: BTreeMap<&'static str, (Vec<Point3<f64>>, KeypointSet)> =
        BTreeMap::new();
    let mut source_descriptors: BTreeMap<(&'static str, &'static str, u64), DescriptorSet> =
        BTreeMap::new();

    for battery in batteries {
        for (case, transform) in battery.cases() {
            let case_seed = cell_seed(config.seed, &[case.as_bytes()]);
            let target = match resample(scene, transform, config.resample_sigma, case_seed) {
                Ok(cloud) => cloud,
                Err(e) => {
                    report.failures.push(CellFailure {
                        detector: None,
                        descriptor: None,
                        case: case.clone(),
                        radius: None,
                        class: e.class(),
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let target_side = (|| -> Result<(f64, PointCloud)> {
                let resolution = target.resolution()?;
                let oriented = estimate_normals(
                    &target,
                    NORMAL_RADIUS_FACTOR * resolution,
                    &transform.apply_point(&config.viewpoint),
                )?;
                Ok((resolution, oriented))
            })();
            let (target_resolution, target_oriented) = match target_side {
                Ok(pair) => pair,
                Err(e) => {
                    report.failures.push(CellFailure {
                        detector: None,
                        descriptor: None,
                        case: case.clone(),
                        radius: None,
                        class: e.class(),
                        message: e.to_string(),
                    });
                    continue;
                }
            };

            for &detector in detectors {
                let fail = |descriptor: Option<DescriptorKind>,
                                radius: Option<f64>,
                                e: &Error,
                                failures: &mut Vec<CellFailure>| {
                    failures.push(CellFailure {
                        detector: Some(detector),
                        descriptor,
                        case: case.clone(),
                        radius,
                        class: e.class(),
                        message: e.to_string(),
                    });
                };

                if !source_keypoints.contains_key(detector.name()) {
                    let detected = (|| -> Result<(Vec<Point3<f64>>, KeypointSet)> {
                        let keypoints =
                            detector.detect_with_defaults(&source_oriented, source_resolution)?;
                        let positions = keypoints.positions(&source_oriented)?;
                        Ok((positions, keypoints))
                    })();
                    match detected {
                        Ok(entry) => {
                            source_keypoints.insert(detector.name(), entry);
                        }
                        Err(e) => {
                            fail(None, None, &e, &mut report.failures);
                            continue;
                        }
                    }
                }
                let (source_positions, source_set) = &source_keypoints[detector.name()];

                let target_detected = (|| -> Result<(Vec<Point3<f64>>, KeypointSet)> {
                    let keypoints =
                        detector.detect_with_defaults(&target_oriented, target_resolution)?;
                    let positions = keypoints.positions(&target_oriented)?;
                    Ok((positions, keypoints))
                })();
                let (target_positions, target_set) = match target_detected {
                    Ok(pair) => pair,
                    Err(e) => {
                        fail(None, None, &e, &mut report.failures);
                        continue;
                    }
                };

                report.repeatability.push(RepeatabilityRecord {
                    detector,
                    case: case.clone(),
                    curve: repeatability_curve(source_positions, &target_positions, transform),
                });

                for &descriptor in descriptors {
                    for &radius in &config.radii {
                        let key = (detector.name(), descriptor.name(), radius.to_bits());
                        if let alloc::collections::btree_map::Entry::Vacant(slot) =
                            source_descriptors.entry(key)
                        {
                            match describe(&source_oriented, source_set, descriptor, radius) {
                                Ok(set) => {
                                    slot.insert(set);
                                }
                                Err(e) => {
                                    fail(Some(descriptor), Some(radius), &e, &mut report.failures);
                                    continue;
                                }
                            }
                        }
                        let source_described = &source_descriptors[&key];

                        let cell = (|| -> Result<(f64, bool)> {
                            let target_described = describe(
                                &target_oriented,
                                &target_set,
                                descriptor,
                                radius * transform.scale(),
                            )?;
                            let matches = match_descriptors(
                                source_described,
                                &target_described,
                                config.reciprocal,
                            )?;
                            let rate = success_rate(
                                &matches,
                                source_positions,
                                &target_positions,
                                transform,
                                epsilon,
                            )?;
                            Ok((rate.value, rate.empty))
                        })();
                        match cell {
                            Ok((rate, empty)) => report.success.push(SuccessRecord {
                                detector,
                                descriptor,
                                case: case.clone(),
                                radius,
                                rate,
                                empty,
                            }),
                            Err(e) => {
                                fail(Some(descriptor), Some(radius), &e, &mut report.failures);
                                continue;
                            }
                        }

                        if !config.coarse_cells {
                            continue;
                        }
                        let params = CoarseParams {
                            seed: cell_seed(
                                config.seed,
                                &[
                                    detector.name().as_bytes(),
                                    descriptor.name().as_bytes(),
                                    case.as_bytes(),
                                    &radius.to_bits().to_le_bytes(),
                                ],
                            ),
                            trials: config.coarse_trials,
                            descriptor_radius: radius,
                            source_viewpoint: config.viewpoint,
                            target_viewpoint: transform.apply_point(&config.viewpoint),
                        };
                        match coarse_align(scene, &target, detector, descriptor, &params) {
                            Ok(alignment) => {
                                let drift = misalignment(scene, &alignment.transform, transform)?;
                                report.misalignment.push(MisalignmentRecord {
                                    detector,
                                    descriptor,
                                    case: case.clone(),
                                    radius,
                                    mse: drift.mse,
                                    rms: drift.rms,
                                });
                            }
                            Err(e) => fail(Some(descriptor), Some(radius), &e, &mut report.failures),
                        }
                    }
                }
            }
        }
    }

    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::battery::{make_battery, BatteryKind};
    use crate::eval::test_scene;
    use alloc::vec;

    fn small_config() -> MatrixConfig {
        MatrixConfig {
            seed: 7,
            radii: vec![0.08],
            resample_sigma: 0.0,
            coarse_trials: 200,
            coarse_cells: true,
            reciprocal: false,
            viewpoint: Point3::new(0.27, 0.27, 8.0),
        }
    }

    fn identity_battery() -> TransformBattery {
        TransformBattery::new(
            vec![(String::from("identity"), SimilarityTransform::identity())],
            0,
        )
        .unwrap()
    }

    #[test]
    fn a_single_identity_cell_scores_perfectly() {
        let scene = test_scene();
        let report = run_matrix(
            &scene,
            &[Detector::Iss3d],
            &[DescriptorKind::Shot],
            &[identity_battery()],
            &small_config(),
        )
        .unwrap();
        assert_eq!(report.seed, 7);
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);

        assert_eq!(report.repeatability.len(), 1);
        let curve = &report.repeatability[0].curve;
        assert!(curve.values().iter().all(|&v| v == 1.0), "{curve:?}");

        assert_eq!(report.success.len(), 1);
        assert_eq!(report.success[0].rate, 1.0);
        assert!(!report.success[0].empty);

        assert_eq!(report.misalignment.len(), 1);
        assert!(report.misalignment[0].rms <= 1e-6);
    }

    #[test]
    fn switching_coarse_cells_off_skips_only_the_misalignment_records() {
        let scene = test_scene();
        let mut config = small_config();
        config.coarse_cells = false;
        let report = run_matrix(
            &scene,
            &[Detector::Iss3d],
            &[DescriptorKind::Shot],
            &[identity_battery()],
            &config,
        )
        .unwrap();
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);
        assert_eq!(report.repeatability.len(), 1);
        assert_eq!(report.success.len(), 1);
        assert_eq!(report.success[0].rate, 1.0);
        assert!(report.misalignment.is_empty());
    }

    #[test]
    fn cells_are_independent_of_matrix_ordering() {
        let scene = test_scene();
        let battery = TransformBattery::new(
            vec![(
                String::from("five-degrees-z"),
                SimilarityTransform::from_axis_angle(nalgebra::Vector3::z(), 5.0f64.to_radians())
                    .unwrap(),
            )],
            0,
        )
        .unwrap();
        let mut config = small_config();
        config.resample_sigma = 0.001;
        config.coarse_trials = 50;

        let forward = run_matrix(
            &scene,
            &[Detector::Iss3d, Detector::Harris3d],
            &[DescriptorKind::Fpfh],
            core::slice::from_ref(&battery),
            &config,
        )
        .unwrap();
        let reversed = run_matrix(
            &scene,
            &[Detector::Harris3d, Detector::Iss3d],
            &[DescriptorKind::Fpfh],
            core::slice::from_ref(&battery),
            &config,
        )
        .unwrap();
        let repeat = run_matrix(
            &scene,
            &[Detector::Iss3d, Detector::Harris3d],
            &[DescriptorKind::Fpfh],
            &[battery],
            &config,
        )
        .unwrap();
        assert_eq!(forward, repeat);

        for detector in [Detector::Iss3d, Detector::Harris3d] {
            let pick = |report: &EvaluationReport| {
                (
                    report
                        .repeatability
                        .iter()
                        .find(|r| r.detector == detector)
                        .cloned(),
                    report
                        .success
                        .iter()
                        .find(|r| r.detector == detector)
                        .cloned(),
                    report
                        .misalignment
                        .iter()
                        .find(|r| r.detector == detector)
                        .cloned(),
                )
            };
            assert_eq!(pick(&forward), pick(&reversed));
        }
    }

    #[test]
    fn failing_cells_are_recorded_while_the_run_continues() {
        let scene = test_scene();
        // A support radius far below the cloud resolution leaves every
        // descriptor degenerate (all-zero), so nothing matches and the
        // coarse stage cannot assemble a minimal sample: those cells fail
        // with a recorded reason while the workable radius completes.
        let mut config = small_config();
        config.radii = vec![1e-5, 0.08];
        let report = run_matrix(
            &scene,
            &[Detector::Iss3d],
            &[DescriptorKind::Shot],
            &[identity_battery()],
            &config,
        )
        .unwrap();
        assert_eq!(report.failures.len(), 1);
        let failure = &report.failures[0];
        assert_eq!(failure.detector, Some(Detector::Iss3d));
        assert_eq!(failure.descriptor, Some(DescriptorKind::Shot));
        assert_eq!(failure.radius, Some(1e-5));
        assert_eq!(failure.class, "alignment-failed");
        assert!(!failure.message.is_empty());
        // The starved radius still yields a success record, flagged empty;
        // the workable radius fills in the rest of its row.
        assert_eq!(report.repeatability.len(), 1);
        assert_eq!(report.success.len(), 2);
        let starved = report.success.iter().find(|r| r.radius == 1e-5).unwrap();
        assert!(starved.empty);
        assert_eq!(starved.rate, 0.0);
        let healthy = report.success.iter().find(|r| r.radius == 0.08).unwrap();
        assert!(!healthy.empty);
        assert_eq!(report.misalignment.len(), 1);
        assert_eq!(report.misalignment[0].radius, 0.08);
    }

    #[test]
    fn scaling_cases_stay_perfectly_repeatable_with_scaled_radii() {
        let scene = test_scene();
        let mut config = small_config();
        config.radii = Vec::new();
        let report = run_matrix(
            &scene,
            &[Detector::Iss3d],
            &[],
            &[make_battery(BatteryKind::Scaling, 0)],
            &config,
        )
        .unwrap();
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);
        assert_eq!(report.repeatability.len(), 2);
        for record in &report.repeatability {
            assert!(
                record.curve.values().iter().all(|&v| v == 1.0),
                "{}: {:?}",
                record.case,
                record.curve.values()
            );
        }
    }

    #[test]
    fn config_validation_rejects_bad_knobs() {
        let mut bad = MatrixConfig::defaults(0);
        bad.radii = vec![0.0];
        assert_eq!(bad.validate().unwrap_err().class(), "invalid-input");
        let mut bad = MatrixConfig::defaults(0);
        bad.resample_sigma = -0.1;
        assert_eq!(bad.validate().unwrap_err().class(), "invalid-input");
        let mut bad = MatrixConfig::defaults(0);
        bad.coarse_trials = 0;
        assert_eq!(bad.validate().unwrap_err().class(), "invalid-input");

        let sweep = default_radius_sweep();
        assert_eq!(sweep.len(), 1000);
        assert!((sweep[0] - 5e-5).abs() <= 1e-20);
        assert!((sweep[999] - 0.05).abs() <= 1e-15);
        assert!(MatrixConfig::defaults(3).validate().is_ok());
    }
}
