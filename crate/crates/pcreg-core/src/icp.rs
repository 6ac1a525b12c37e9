//! Iterative closest point refinement: point-to-point and point-to-plane
//! variants sharing one iteration loop.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix6, Point3, Vector3, Vector6};
#[allow(unused_imports)]
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::matching::estimate_rigid_transform;
use crate::search::SpatialIndex;
use crate::transform::SimilarityTransform;

/// One rigid degree of freedom; used to report unconstrained directions of a
/// rank-deficient point-to-plane system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dof {
    TranslationX,
    TranslationY,
    TranslationZ,
    RotationX,
    RotationY,
    RotationZ,
}

/// Degrees of freedom in the order of the linearized parameter vector
/// (α, β, γ, tx, ty, tz).
const PARAMETER_DOFS: [Dof; 6] = [
    Dof::RotationX,
    Dof::RotationY,
    Dof::RotationZ,
    Dof::TranslationX,
    Dof::TranslationY,
    Dof::TranslationZ,
];

/// An eigenvalue of the 6×6 normal equations below this fraction of the
/// largest marks a rank deficiency.
const RANK_EPSILON: f64 = 1e-9;
/// A null-space eigenvector names a degree of freedom as unconstrained when
/// its component there exceeds this magnitude.
const DOF_NAMING_THRESHOLD: f64 = 0.5;
/// Distance gate default, as a multiple of cloud resolution.
const GATE_RESOLUTION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcpVariant {
    PointToPoint,
    PointToPlane,
}

impl IcpVariant {
    pub fn name(self) -> &'static str {
        match self {
            IcpVariant::PointToPoint => "point-to-point",
            IcpVariant::PointToPlane => "point-to-plane",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "point-to-point" => Some(IcpVariant::PointToPoint),
            "point-to-plane" => Some(IcpVariant::PointToPlane),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpParams {
    pub variant: IcpVariant,
    pub max_iterations: usize,
    pub max_correspondence_distance: f64,
    /// Convergence threshold on the parameter change of one step (rotation
    /// angle plus translation norm of the increment).
    pub transform_epsilon: f64,
    /// Convergence threshold on the relative change of the mean squared
    /// correspondence error between consecutive iterations.
    pub mse_epsilon: f64,
}

impl IcpParams {
    /// Defaults: 50 iterations, distance gate 10× resolution, transform
    /// epsilon 1e-8, relative MSE epsilon 1e-6.
    pub fn defaults(variant: IcpVariant, resolution: f64) -> Self {
        Self {
            variant,
            max_iterations: 50,
            max_correspondence_distance: GATE_RESOLUTION_FACTOR * resolution,
            transform_epsilon: 1e-8,
            mse_epsilon: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput(String::from(
                "max_iterations must be at least 1",
            )));
        }
        if !self.max_correspondence_distance.is_finite() || self.max_correspondence_distance <= 0.0
        {
            return Err(Error::InvalidInput(format!(
                "correspondence distance gate must be positive, got {}",
                self.max_correspondence_distance
            )));
        }
        for (label, value) in [
            ("transform_epsilon", self.transform_epsilon),
            ("mse_epsilon", self.mse_epsilon),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{label} must be finite and non-negative, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of an ICP run. `transform` maps the original source cloud into
/// the target frame. `per_iteration_mse` holds the mean squared
/// correspondence distance measured at the start of each iteration;
/// `final_mse` is re-measured under the returned transform (infinite when
/// no correspondence survives the gate).
#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub transform: SimilarityTransform,
    pub iterations_run: usize,
    pub final_mse: f64,
    pub converged: bool,
    pub per_iteration_mse: Vec<f64>,
}

/// Least-squares rigid fit of matched point pairs; same contract as
/// [`estimate_rigid_transform`].
pub fn solve_point_to_point(
    pairs: &[(Point3<f64>, Point3<f64>)],
) -> Result<SimilarityTransform> {
    let source: Vec<Point3<f64>> = pairs.iter().map(|&(p, _)| p).collect();
    let target: Vec<Point3<f64>> = pairs.iter().map(|&(_, q)| q).collect();
    estimate_rigid_transform(&source, &target, None)
}

/// Minimizes Σ ((R pᵢ + t − qᵢ) · nᵢ)² under the small-angle linearization
/// R ≈ (1, −γ, β; γ, 1, −α; −β, α, 1) by solving the 6×6 normal equations,
/// then re-orthonormalizes the rotation to the nearest proper rotation.
///
/// When the system is rank deficient (too few pairs, or normals that leave
/// whole directions unobserved) the error names the unconstrained degrees
/// of freedom and carries the minimum-norm solution, which callers may use
/// to keep iterating.
pub fn solve_point_to_plane(
    pairs: &[(Point3<f64>, Point3<f64>, Vector3<f64>)],
) -> Result<SimilarityTransform> {
    for (k, (p, q, n)) in pairs.iter().enumerate() {
        let finite = p.coords.iter().chain(q.coords.iter()).chain(n.iter());
        if finite.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "pair {k} has a non-finite component"
            )));
        }
    }

    let mut system = Matrix6::zeros();
    let mut rhs = Vector6::zeros();
    for (p, q, n) in pairs {
        let jacobian = Vector6::new(
            p.coords.cross(n).x,
            p.coords.cross(n).y,
            p.coords.cross(n).z,
            n.x,
            n.y,
            n.z,
        );
        let residual = (q - p).dot(n);
        system += jacobian * jacobian.transpose();
        rhs += jacobian * residual;
    }

    let eigen = system.symmetric_eigen();
    let largest = eigen.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let threshold = largest * RANK_EPSILON;

    let mut unconstrained: Vec<Dof> = Vec::new();
    let mut solution = Vector6::zeros();
    let mut deficient = false;
    for k in 0..6 {
        let value = eigen.eigenvalues[k];
        let vector = eigen.eigenvectors.column(k);
        if value <= threshold {
            deficient = true;
            for (component, &dof) in PARAMETER_DOFS.iter().enumerate() {
                if vector[component].abs() > DOF_NAMING_THRESHOLD
                    && !unconstrained.contains(&dof)
                {
                    unconstrained.push(dof);
                }
            }
        } else {
            let vector = vector.into_owned();
            solution += vector * (vector.dot(&rhs) / value);
        }
    }

    let transform = linearized_transform(&solution)?;
    if deficient {
        return Err(Error::RankDeficient {
            unconstrained,
            minimum_norm: Box::new(transform),
        });
    }
    Ok(transform)
}

/// Builds the rigid transform for linearized parameters
/// (α, β, γ, tx, ty, tz), re-orthonormalizing the small-angle rotation to
/// the nearest proper rotation by polar decomposition.
fn linearized_transform(x: &Vector6<f64>) -> Result<SimilarityTransform> {
    let (alpha, beta, gamma) = (x[0], x[1], x[2]);
    let linear = Matrix3::new(
        1.0, -gamma, beta, //
        gamma, 1.0, -alpha, //
        -beta, alpha, 1.0,
    );
    let svd = linear.svd(true, true);
    let u = svd.u.expect("svd of a finite 3x3 matrix");
    let v_t = svd.v_t.expect("svd of a finite 3x3 matrix");
    let orientation = (u * v_t).determinant().signum();
    let correction = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, orientation));
    let rotation = u * correction * v_t;
    SimilarityTransform::rigid(rotation, Vector3::new(x[3], x[4], x[5]))
}

struct Correspondences {
    source: Vec<Point3<f64>>,
    target: Vec<Point3<f64>>,
    normals: Vec<Vector3<f64>>,
    mse: f64,
}

/// Correspondences of the transformed source against the target under the
/// distance gate. For point-to-plane, pairs whose target point carries no
/// valid normal are discarded along with the gated ones.
fn gather(
    source: &PointCloud,
    target: &PointCloud,
    index: &SpatialIndex,
    current: &SimilarityTransform,
    params: &IcpParams,
) -> Result<Correspondences> {
    let mut pairs = Correspondences {
        source: Vec::new(),
        target: Vec::new(),
        normals: Vec::new(),
        mse: 0.0,
    };
    let mut squared = 0.0;
    for p in source.points() {
        let moved = current.apply_point(p);
        let hood = index.knn(&moved, 1)?;
        let (j, d) = (hood.indices[0], hood.distances[0]);
        if d > params.max_correspondence_distance {
            continue;
        }
        let normal = match params.variant {
            IcpVariant::PointToPoint => Vector3::zeros(),
            IcpVariant::PointToPlane => match target.normal(j) {
                Some(n) => n,
                None => continue,
            },
        };
        pairs.source.push(moved);
        pairs.target.push(target.point(j));
        pairs.normals.push(normal);
        squared += d * d;
    }
    if !pairs.source.is_empty() {
        pairs.mse = squared / pairs.source.len() as f64;
    }
    Ok(pairs)
}

/// Refines `init` so that it maps `source` into the `target` frame.
///
/// Each iteration transforms the source by the current estimate, pairs every
/// source point with its nearest target point within the distance gate,
/// solves the variant's minimization for an increment, composes it, and
/// tests convergence: increment parameter change < `transform_epsilon`, or
/// relative MSE change < `mse_epsilon`, or an exact zero MSE.
///
/// A rank-deficient point-to-plane step continues with the minimum-norm
/// increment. When no correspondence survives the gate the run stops with
/// `converged = false` and the best (lowest-MSE) transform seen so far.
pub fn icp(
    source: &PointCloud,
    target: &PointCloud,
    init: &SimilarityTransform,
    params: &IcpParams,
) -> Result<IcpResult> {
    params.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::InvalidInput(String::from(
            "icp needs non-empty source and target clouds",
        )));
    }
    if !init.is_rigid() {
        return Err(Error::InvalidInput(format!(
            "initial transform must be rigid, got scale {}",
            init.scale()
        )));
    }
    if params.variant == IcpVariant::PointToPlane && !target.has_normals() {
        return Err(Error::InvalidInput(String::from(
            "point-to-plane icp requires target normals",
        )));
    }

    let index = SpatialIndex::build(target)?;
    let mut current = init.clone();
    let mut best: (f64, SimilarityTransform) = (f64::INFINITY, current.clone());
    let mut per_iteration_mse = Vec::new();
    let mut previous_mse: Option<f64> = None;
    let mut converged = false;
    let mut iterations_run = 0;

    for _ in 0..params.max_iterations {
        iterations_run += 1;
        let pairs = gather(source, target, &index, &current, params)?;
        if pairs.source.is_empty() {
            let final_mse = measure(source, &index, &best.1, params);
            return Ok(IcpResult {
                transform: best.1,
                iterations_run,
                final_mse,
                converged: false,
                per_iteration_mse,
            });
        }
        per_iteration_mse.push(pairs.mse);
        if pairs.mse < best.0 {
            best = (pairs.mse, current.clone());
        }
        if pairs.mse == 0.0 {
            converged = true;
            break;
        }

        let increment = match params.variant {
            IcpVariant::PointToPoint => {
                estimate_rigid_transform(&pairs.source, &pairs.target, None)?
            }
            IcpVariant::PointToPlane => {
                let triples: Vec<(Point3<f64>, Point3<f64>, Vector3<f64>)> = pairs
                    .source
                    .iter()
                    .zip(&pairs.target)
                    .zip(&pairs.normals)
                    .map(|((&p, &q), &n)| (p, q, n))
                    .collect();
                match solve_point_to_plane(&triples) {
                    Ok(t) => t,
                    Err(Error::RankDeficient { minimum_norm, .. }) => *minimum_norm,
                    Err(other) => return Err(other),
                }
            }
        };
        current = increment.compose(&current);

        let parameter_change = increment.rotation_angle() + increment.translation().norm();
        let relative_change = previous_mse
            .filter(|&prev| prev > 0.0)
            .map(|prev| (prev - pairs.mse).abs() / prev);
        previous_mse = Some(pairs.mse);
        if parameter_change < params.transform_epsilon
            || relative_change.is_some_and(|c| c < params.mse_epsilon)
        {
            converged = true;
            break;
        }
    }

    let final_mse = measure(source, &index, &current, params);
    Ok(IcpResult {
        transform: current,
        iterations_run,
        final_mse,
        converged,
        per_iteration_mse,
    })
}

/// Mean squared gated-correspondence distance under `transform`; infinite
/// when nothing passes the gate.
fn measure(
    source: &PointCloud,
    index: &SpatialIndex,
    transform: &SimilarityTransform,
    params: &IcpParams,
) -> f64 {
    let mut squared = 0.0;
    let mut count = 0usize;
    for p in source.points() {
        let moved = transform.apply_point(p);
        let Ok(hood) = index.knn(&moved, 1) else {
            return f64::INFINITY;
        };
        let d = hood.distances[0];
        if d <= params.max_correspondence_distance {
            squared += d * d;
            count += 1;
        }
    }
    if count == 0 {
        f64::INFINITY
    } else {
        squared / count as f64
    }
}
