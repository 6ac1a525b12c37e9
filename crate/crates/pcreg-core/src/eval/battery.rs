//! Transformation batteries: named sets of rigid and scaling transforms
//! applied to a scene to probe detector and descriptor stability.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::transform::SimilarityTransform;

/// Largest absolute translation component sampled by the translation
/// battery (m).
pub const TRANSLATION_RANGE: f64 = 1.5;
/// Rotation magnitude of the small-rotation battery.
pub const SMALL_ROTATION_DEGREES: f64 = 5.0;
/// Rotation magnitude of the large-rotation battery.
pub const LARGE_ROTATION_DEGREES: f64 = 40.0;
/// Uniform scales exercised by the scaling battery.
pub const SCALING_FACTORS: [f64; 2] = [0.5, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatteryKind {
    RotationSmall,
    RotationLarge,
    Translation,
    Scaling,
}

impl BatteryKind {
    pub const ALL: [BatteryKind; 4] = [
        BatteryKind::RotationSmall,
        BatteryKind::RotationLarge,
        BatteryKind::Translation,
        BatteryKind::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BatteryKind::RotationSmall => "rotation-small",
            BatteryKind::RotationLarge => "rotation-large",
            BatteryKind::Translation => "translation",
            BatteryKind::Scaling => "scaling",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|kind| kind.name() == name)
    }
}

/// A named list of transform cases plus the seed that generated any random
/// ones. Every case is either rigid or a pure rescaling (identity rotation).
#[derive(Debug, Clone, PartialEq)]
pub struct TransformBattery {
    cases: Vec<(String, SimilarityTransform)>,
    seed: u64,
}

impl TransformBattery {
    pub fn new(cases: Vec<(String, SimilarityTransform)>, seed: u64) -> Result<Self> {
        for (i, (name, transform)) in cases.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::InvalidInput(format!("case {i} has an empty name")));
            }
            if cases[..i].iter().any(|(other, _)| other == name) {
                return Err(Error::InvalidInput(format!(
                    "duplicate case name {name:?}"
                )));
            }
            if !transform.is_rigid()
                && (transform.rotation() - Matrix3::identity()).abs().max() > 1e-12
            {
                return Err(Error::InvalidInput(format!(
                    "scaling case {name:?} must keep an identity rotation"
                )));
            }
        }
        Ok(Self { cases, seed })
    }

    pub fn cases(&self) -> &[(String, SimilarityTransform)] {
        &self.cases
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Builds the battery for `kind`: 5-degree or 40-degree rotations about
/// each axis, three seeded-random translations with components in
/// [-1.5, 1.5] m moved along all three axes at once, or uniform scalings
/// by 0.5 and 2.0.
pub fn make_battery(kind: BatteryKind, seed: u64) -> TransformBattery {
    let axes = [
        ("x", Vector3::x()),
        ("y", Vector3::y()),
        ("z", Vector3::z()),
    ];
    let cases: Vec<(String, SimilarityTransform)> = match kind {
        BatteryKind::RotationSmall | BatteryKind::RotationLarge => {
            let degrees = if kind == BatteryKind::RotationSmall {
                SMALL_ROTATION_DEGREES
            } else {
                LARGE_ROTATION_DEGREES
            };
            axes.iter()
                .map(|(label, axis)| {
                    let transform =
                        SimilarityTransform::from_axis_angle(*axis, degrees.to_radians())
                            .expect("unit axis and finite angle");
                    (format!("{}-{label}", kind.name()), transform)
                })
                .collect()
        }
        BatteryKind::Translation => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (1..=3)
                .map(|i| {
                    let shift = Vector3::new(
                        rng.random_range(-TRANSLATION_RANGE..=TRANSLATION_RANGE),
                        rng.random_range(-TRANSLATION_RANGE..=TRANSLATION_RANGE),
                        rng.random_range(-TRANSLATION_RANGE..=TRANSLATION_RANGE),
                    );
                    let transform = SimilarityTransform::from_translation(shift)
                        .expect("finite translation");
                    (format!("translation-{i}"), transform)
                })
                .collect()
        }
        BatteryKind::Scaling => SCALING_FACTORS
            .iter()
            .map(|&scale| {
                let transform = SimilarityTransform::from_scale(scale)
                    .expect("positive finite scale");
                (format!("scaling-{scale}"), transform)
            })
            .collect(),
    };
    TransformBattery::new(cases, seed).expect("generated cases are valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use nalgebra::Point3;

    #[test]
    fn rotation_batteries_have_exact_angles_about_each_axis() {
        for (kind, degrees) in [
            (BatteryKind::RotationSmall, 5.0f64),
            (BatteryKind::RotationLarge, 40.0f64),
        ] {
            let battery = make_battery(kind, 0);
            assert_eq!(battery.cases().len(), 3);
            for (name, transform) in battery.cases() {
                assert!(name.starts_with(kind.name()));
                assert!(transform.is_rigid());
                assert!(
                    (transform.rotation_angle() - degrees.to_radians()).abs() <= 1e-12,
                    "{name} angle {}",
                    transform.rotation_angle()
                );
            }
        }
    }

    #[test]
    fn translations_are_seeded_in_range_and_reproducible() {
        let battery = make_battery(BatteryKind::Translation, 9);
        assert_eq!(battery.cases().len(), 3);
        assert_eq!(battery.seed(), 9);
        for (_, transform) in battery.cases() {
            assert!(transform.is_rigid());
            assert!(transform.rotation_angle() <= 1e-15);
            for component in transform.translation().iter() {
                assert!(component.abs() <= TRANSLATION_RANGE);
            }
        }
        assert_eq!(battery, make_battery(BatteryKind::Translation, 9));
        assert_ne!(
            battery.cases()[0].1,
            make_battery(BatteryKind::Translation, 10).cases()[0].1
        );
    }

    #[test]
    fn scaling_cases_round_trip_through_their_inverse() {
        let battery = make_battery(BatteryKind::Scaling, 0);
        assert_eq!(battery.cases().len(), 2);
        let probe = Point3::new(0.3, -1.2, 2.5);
        for (_, transform) in battery.cases() {
            assert_ne!(transform.scale(), 1.0);
            let round_trip = transform.invert().apply_point(&transform.apply_point(&probe));
            assert!((round_trip - probe).norm() <= 1e-12);
        }
    }

    #[test]
    fn battery_validation_rejects_bad_case_lists() {
        let twisted_scaling = SimilarityTransform::new(
            2.0,
            *SimilarityTransform::from_axis_angle(Vector3::z(), 0.3)
                .unwrap()
                .rotation(),
            Vector3::zeros(),
        )
        .unwrap();
        let err = TransformBattery::new(vec![(String::from("bad"), twisted_scaling)], 0)
            .unwrap_err();
        assert_eq!(err.class(), "invalid-input");

        let identity = SimilarityTransform::identity();
        let err = TransformBattery::new(
            vec![
                (String::from("same"), identity.clone()),
                (String::from("same"), identity.clone()),
            ],
            0,
        )
        .unwrap_err();
        assert_eq!(err.class(), "invalid-input");

        let err = TransformBattery::new(vec![(String::new(), identity)], 0).unwrap_err();
        assert_eq!(err.class(), "invalid-input");
    }
}
