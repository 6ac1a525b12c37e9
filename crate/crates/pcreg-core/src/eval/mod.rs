//! Registration quality metrics and evaluation drivers: transformation
//! batteries, repeatability, matching success rate, misalignment, and
//! cumulative multi-view error, plus the full benchmark matrix.

pub mod battery;
pub mod chain;
pub mod matrix;
pub mod metrics;

pub use battery::{
    make_battery, BatteryKind, TransformBattery, LARGE_ROTATION_DEGREES, SCALING_FACTORS,
    SMALL_ROTATION_DEGREES, TRANSLATION_RANGE,
};
pub use chain::{cumulative_error, CoarseStage, CumulativeTrace, Pipeline, TraceFailure};
pub use matrix::{
    default_radius_sweep, resample, run_matrix, CellFailure, EvaluationReport, MatrixConfig,
    MisalignmentRecord, RepeatabilityRecord, SuccessRecord,
};
pub use metrics::{
    misalignment, repeatability, repeatability_curve, success_rate, Misalignment,
    RepeatabilityCurve, SuccessRate, CURVE_THRESHOLD_COUNT, CURVE_THRESHOLD_SPAN,
    SUCCESS_EPSILON_RESOLUTION_FACTOR,
};

/// A plane with five distinct spherical bumps and seeded jitter: the shared
/// structured scene for evaluation tests (2 cm spacing, 28×28 samples).
#[cfg(test)]
pub(crate) fn test_scene() -> crate::cloud::PointCloud {
    use alloc::vec::Vec;
    use nalgebra::Point3;
    #[allow(unused_imports)]
    use num_traits::Float;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut pts = Vec::new();
    let n = 28;
    for i in 0..n {
        for j in 0..n {
            let x = i as f64 * 0.02;
            let y = j as f64 * 0.02;
            let mut z = 0.0;
            for (cx, cy, r) in [
                (0.12, 0.12, 0.09),
                (0.36, 0.14, 0.06),
                (0.14, 0.38, 0.07),
                (0.40, 0.40, 0.08),
                (0.26, 0.26, 0.05),
            ] {
                let d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                if d2 < r * r {
                    z = f64::max(z, (r * r - d2).sqrt());
                }
            }
            z += (rng.random::<f64>() - 0.5) * 0.004;
            pts.push(Point3::new(x, y, z));
        }
    }
    crate::cloud::PointCloud::new(pts).expect("finite synthetic points")
}
