//! Synthetic scene generation.
//!
//! Scenes are built by sampling geometric primitives on regular grids at a
//! requested spacing, coloring the samples with a deterministic pattern, and
//! optionally displacing each sample along its analytic surface normal by a
//! seeded 1-D Gaussian — the way a range sensor's depth noise perturbs
//! points, rather than an isotropic 3-D blur. Everything is deterministic
//! given the spec and seed.
//!
//! [`synthesize_views`] clips a scene to a circular camera circuit and
//! returns the clipped clouds in camera-local coordinates together with
//! exact camera-to-world poses, which is what a registration pipeline is
//! asked to reconstruct.

use nalgebra::{Matrix3, Point3, Vector3};
use pcreg_core::{PointCloud, SimilarityTransform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-point color assignment for synthetic scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColorPattern {
    /// No color channel.
    None,
    /// 3-D checkerboard with cells of five sample spacings, coherent across
    /// primitives.
    #[default]
    Checker,
    /// Grayscale ramp along the scene's x extent.
    Gradient,
}

/// A sampled surface. Poses are expressed directly: planes carry two edge
/// vectors, boxes a yaw about the vertical, cylinders an arbitrary axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum Primitive {
    /// Parallelogram patch: `origin` plus edge vectors `u` and `v`.
    Plane {
        origin: [f64; 3],
        u: [f64; 3],
        v: [f64; 3],
    },
    /// Cuboid with the given half extents, rotated by `yaw` about z.
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
        yaw: f64,
    },
    Sphere { center: [f64; 3], radius: f64 },
    /// Right cylinder (lateral surface plus both caps) along `axis`.
    Cylinder {
        center: [f64; 3],
        axis: [f64; 3],
        radius: f64,
        half_height: f64,
    },
}

/// Full description of a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    /// Grid spacing between surface samples, metres.
    pub spacing: f64,
    /// Standard deviation of the along-normal depth noise, metres.
    pub sigma: f64,
    pub color: ColorPattern,
    pub seed: u64,
}

fn invalid(message: impl Into<String>) -> Error {
    pcreg_core::Error::InvalidInput(message.into()).into()
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn point3(a: [f64; 3]) -> Point3<f64> {
    Point3::new(a[0], a[1], a[2])
}

/// Number of grid intervals covering `len` at the requested spacing.
fn steps(len: f64, spacing: f64) -> usize {
    ((len / spacing).round() as usize).max(1)
}

/// A surface sample: position plus outward analytic normal.
type Sample = (Point3<f64>, Vector3<f64>);

fn sample_plane(origin: [f64; 3], u: [f64; 3], v: [f64; 3], spacing: f64, out: &mut Vec<Sample>) -> Result<()> {
    let (origin, u, v) = (point3(origin), vec3(u), vec3(v));
    let normal = u.cross(&v);
    if normal.norm() < 1e-12 {
        return Err(invalid("zero-area plane: edge vectors are parallel or zero"));
    }
    let normal = normal.normalize();
    let (nu, nv) = (steps(u.norm(), spacing), steps(v.norm(), spacing));
    for i in 0..=nu {
        for j in 0..=nv {
            let p = origin + u * (i as f64 / nu as f64) + v * (j as f64 / nv as f64);
            out.push((p, normal));
        }
    }
    Ok(())
}

fn sample_box(center: [f64; 3], half: [f64; 3], yaw: f64, spacing: f64, out: &mut Vec<Sample>) -> Result<()> {
    if half.iter().any(|&h| h <= 0.0) {
        return Err(invalid("zero-area box: half extents must be positive"));
    }
    let center = point3(center);
    let ex = Vector3::new(yaw.cos(), yaw.sin(), 0.0);
    let ey = Vector3::new(-yaw.sin(), yaw.cos(), 0.0);
    let ez = Vector3::z();
    let (hx, hy, hz) = (half[0], half[1], half[2]);
    let (nx, ny, nz) = (steps(2.0 * hx, spacing), steps(2.0 * hy, spacing), steps(2.0 * hz, spacing));
    let coord = |n: usize, i: usize, h: f64| -> f64 { -h + 2.0 * h * (i as f64) / (n as f64) };
    // Top and bottom faces carry their full grids; the four side faces skip
    // the rows already covered by a neighboring face so no edge is sampled
    // twice.
    for (side, nrm) in [(hz, ez), (-hz, -ez)] {
        for i in 0..=nx {
            for j in 0..=ny {
                let p = center + ex * coord(nx, i, hx) + ey * coord(ny, j, hy) + ez * side;
                out.push((p, nrm));
            }
        }
    }
    for (side, nrm) in [(hx, ex), (-hx, -ex)] {
        for j in 0..=ny {
            for k in 1..nz {
                let p = center + ex * side + ey * coord(ny, j, hy) + ez * coord(nz, k, hz);
                out.push((p, nrm));
            }
        }
    }
    for (side, nrm) in [(hy, ey), (-hy, -ey)] {
        for i in 1..nx {
            for k in 1..nz {
                let p = center + ex * coord(nx, i, hx) + ey * side + ez * coord(nz, k, hz);
                out.push((p, nrm));
            }
        }
    }
    Ok(())
}

fn sample_sphere(center: [f64; 3], radius: f64, spacing: f64, out: &mut Vec<Sample>) -> Result<()> {
    if radius <= 0.0 {
        return Err(invalid("zero-area sphere: radius must be positive"));
    }
    let center = point3(center);
    let n_lat = steps(core::f64::consts::PI * radius, spacing);
    for k in 0..=n_lat {
        let theta = core::f64::consts::PI * (k as f64) / (n_lat as f64);
        let ring_r = radius * theta.sin();
        let m = ((2.0 * core::f64::consts::PI * ring_r / spacing).round() as usize).max(1);
        for j in 0..m {
            let phi = 2.0 * core::f64::consts::PI * (j as f64) / (m as f64);
            let normal = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            out.push((center + normal * radius, normal));
        }
    }
    Ok(())
}

fn sample_cylinder(
    center: [f64; 3],
    axis: [f64; 3],
    radius: f64,
    half_height: f64,
    spacing: f64,
    out: &mut Vec<Sample>,
) -> Result<()> {
    if radius <= 0.0 || half_height <= 0.0 {
        return Err(invalid("zero-area cylinder: radius and half height must be positive"));
    }
    let axis = vec3(axis);
    if axis.norm() < 1e-12 {
        return Err(invalid("zero-area cylinder: axis must be nonzero"));
    }
    let center = point3(center);
    let a = axis.normalize();
    let seed_dir = if a.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = a.cross(&seed_dir).normalize();
    let e2 = a.cross(&e1);
    // Lateral surface: rings from bottom to top, including both rims.
    let nz = steps(2.0 * half_height, spacing);
    let m = ((2.0 * core::f64::consts::PI * radius / spacing).round() as usize).max(3);
    for k in 0..=nz {
        let h = -half_height + 2.0 * half_height * (k as f64) / (nz as f64);
        for j in 0..m {
            let phi = 2.0 * core::f64::consts::PI * (j as f64) / (m as f64);
            let radial = e1 * phi.cos() + e2 * phi.sin();
            out.push((center + a * h + radial * radius, radial));
        }
    }
    // Caps: concentric rings strictly inside the rim (the lateral rings own
    // the boundary circles), plus the center point.
    for (side, nrm) in [(half_height, a), (-half_height, -a)] {
        let cap_center = center + a * side;
        let mut ring_r = radius - spacing;
        while ring_r > 0.5 * spacing {
            let mj = ((2.0 * core::f64::consts::PI * ring_r / spacing).round() as usize).max(1);
            for j in 0..mj {
                let phi = 2.0 * core::f64::consts::PI * (j as f64) / (mj as f64);
                out.push((cap_center + (e1 * phi.cos() + e2 * phi.sin()) * ring_r, nrm));
            }
            ring_r -= spacing;
        }
        out.push((cap_center, nrm));
    }
    Ok(())
}

fn colorize(samples: &[Sample], pattern: ColorPattern, spacing: f64) -> Option<Vec<[u8; 3]>> {
    match pattern {
        ColorPattern::None => None,
        ColorPattern::Checker => {
            let cell = 5.0 * spacing;
            Some(
                samples
                    .iter()
                    .map(|(p, _)| {
                        let parity = (p.x / cell).floor() + (p.y / cell).floor() + (p.z / cell).floor();
                        if (parity as i64) % 2 == 0 {
                            [230, 230, 230]
                        } else {
                            [30, 30, 30]
                        }
                    })
                    .collect(),
            )
        }
        ColorPattern::Gradient => {
            let min_x = samples.iter().map(|(p, _)| p.x).fold(f64::INFINITY, f64::min);
            let max_x = samples.iter().map(|(p, _)| p.x).fold(f64::NEG_INFINITY, f64::max);
            let extent = max_x - min_x;
            Some(
                samples
                    .iter()
                    .map(|(p, _)| {
                        let t = if extent > 0.0 { (p.x - min_x) / extent } else { 0.5 };
                        let g = (40.0 + 175.0 * t).round() as u8;
                        [g, g, g]
                    })
                    .collect(),
            )
        }
    }
}

/// Sample every primitive of `spec` onto a grid, color the samples, and
/// apply the seeded along-normal depth noise.
pub fn synthesize_scene(spec: &SceneSpec) -> Result<PointCloud> {
    if !(spec.spacing.is_finite() && spec.spacing > 0.0) {
        return Err(invalid(format!("sample spacing must be positive, got {}", spec.spacing)));
    }
    if !(spec.sigma.is_finite() && spec.sigma >= 0.0) {
        return Err(invalid(format!("noise sigma must be non-negative, got {}", spec.sigma)));
    }
    if spec.primitives.is_empty() {
        return Err(invalid("scene has no primitives"));
    }
    let mut samples: Vec<Sample> = Vec::new();
    for primitive in &spec.primitives {
        match *primitive {
            Primitive::Plane { origin, u, v } => sample_plane(origin, u, v, spec.spacing, &mut samples)?,
            Primitive::Box { center, half_extents, yaw } => {
                sample_box(center, half_extents, yaw, spec.spacing, &mut samples)?
            }
            Primitive::Sphere { center, radius } => sample_sphere(center, radius, spec.spacing, &mut samples)?,
            Primitive::Cylinder { center, axis, radius, half_height } => {
                sample_cylinder(center, axis, radius, half_height, spec.spacing, &mut samples)?
            }
        }
    }
    // Colors come from the clean geometry so the pattern is noise-free.
    let colors = colorize(&samples, spec.color, spec.spacing);
    let points: Vec<Point3<f64>> = if spec.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let depth = Normal::new(0.0, spec.sigma).expect("sigma validated finite and non-negative");
        samples
            .iter()
            .map(|(p, n)| p + n * depth.sample(&mut rng))
            .collect()
    } else {
        samples.iter().map(|(p, _)| *p).collect()
    };
    let cloud = PointCloud::new(points)?;
    match colors {
        Some(colors) => Ok(cloud.with_colors(colors)?),
        None => Ok(cloud),
    }
}

/// Camera circuit description for [`synthesize_views`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    /// Number of cameras, evenly spaced on the orbit circle.
    pub count: usize,
    /// Full apex angle of the conical view frustum, degrees.
    pub fov_degrees: f64,
    /// Orbit radius around the scene's bounding-box center, metres.
    pub orbit_radius: f64,
    /// Camera height (world z), metres.
    pub height: f64,
    /// World z of the point every camera looks at.
    pub look_at_height: f64,
    /// Near and far clip depths along the view axis, metres.
    pub near: f64,
    pub far: f64,
}

/// One clipped view: the cloud in camera-local coordinates, its exact
/// camera-to-world pose, and the scene indices it kept.
#[derive(Debug, Clone)]
pub struct SceneView {
    pub cloud: PointCloud,
    pub pose: SimilarityTransform,
    pub indices: Vec<usize>,
}

/// Clip `scene` against a circular camera circuit. Views come back in
/// camera-local coordinates; `pose` maps them into the scene frame.
pub fn synthesize_views(scene: &PointCloud, spec: &ViewSpec) -> Result<Vec<SceneView>> {
    if scene.is_empty() {
        return Err(invalid("cannot synthesize views of an empty scene"));
    }
    if spec.count < 2 {
        return Err(invalid("a view circuit needs at least two cameras"));
    }
    if !(spec.fov_degrees > 0.0 && spec.fov_degrees < 180.0) {
        return Err(invalid(format!(
            "field of view must lie in (0, 180) degrees, got {}",
            spec.fov_degrees
        )));
    }
    if !(spec.near > 0.0 && spec.far > spec.near) {
        return Err(invalid("clip depths must satisfy 0 < near < far"));
    }
    if !(spec.orbit_radius > 0.0) {
        return Err(invalid("orbit radius must be positive"));
    }
    let points = scene.points();
    let min = points.iter().fold(Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY), |a, p| {
        Point3::new(a.x.min(p.x), a.y.min(p.y), a.z.min(p.z))
    });
    let max = points
        .iter()
        .fold(Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
            Point3::new(a.x.max(p.x), a.y.max(p.y), a.z.max(p.z))
        });
    let center = Point3::new(0.5 * (min.x + max.x), 0.5 * (min.y + max.y), spec.look_at_height);
    let cos_half_fov = (spec.fov_degrees.to_radians() / 2.0).cos();

    let mut views = Vec::with_capacity(spec.count);
    for k in 0..spec.count {
        let theta = 2.0 * core::f64::consts::PI * (k as f64) / (spec.count as f64);
        let eye = Point3::new(
            center.x + spec.orbit_radius * theta.cos(),
            center.y + spec.orbit_radius * theta.sin(),
            spec.height,
        );
        let forward = (center - eye).normalize();
        let horizontal = forward.cross(&Vector3::z());
        if horizontal.norm() < 1e-9 {
            return Err(invalid("camera looks straight along the vertical; adjust heights"));
        }
        let right = horizontal.normalize();
        let down = forward.cross(&right);
        // Camera basis as world columns: x right, y down, z forward
        // (right-handed, determinant +1).
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        let pose = SimilarityTransform::rigid(rotation, eye.coords)?;
        let world_to_cam = pose.invert();

        let mut indices = Vec::new();
        let mut local = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let d = p - eye;
            let depth = d.dot(&forward);
            if depth < spec.near || depth > spec.far {
                continue;
            }
            if depth < d.norm() * cos_half_fov {
                continue;
            }
            indices.push(i);
            local.push(world_to_cam.apply_point(p));
        }
        if indices.is_empty() {
            return Err(invalid(format!("view {k} sees no points; adjust the camera circuit")));
        }
        let mut cloud = PointCloud::new(local)?;
        if let Some(colors) = scene.colors() {
            cloud = cloud.with_colors(indices.iter().map(|&i| colors[i]).collect())?;
        }
        views.push(SceneView { cloud, pose, indices });
    }
    Ok(views)
}

/// Grid spacing used by the bundled room preset.
pub const ROOM_SPACING: f64 = 0.02;

/// Default depth-noise sigma for synthetic scenes, metres.
pub const DEFAULT_SIGMA: f64 = 0.002;

/// The bundled indoor test scene: a floor patch, two walls, and three
/// desk-scale objects (box, sphere, cylinder) clustered near the middle so
/// every orbiting camera sees structure.
pub fn room_spec(seed: u64, sigma: f64) -> SceneSpec {
    SceneSpec {
        primitives: vec![
            Primitive::Plane {
                origin: [0.0, 0.0, 0.0],
                u: [0.56, 0.0, 0.0],
                v: [0.0, 0.56, 0.0],
            },
            Primitive::Plane {
                origin: [0.0, 0.0, 0.02],
                u: [0.56, 0.0, 0.0],
                v: [0.0, 0.0, 0.30],
            },
            Primitive::Plane {
                origin: [0.0, 0.02, 0.02],
                u: [0.0, 0.54, 0.0],
                v: [0.0, 0.0, 0.30],
            },
            Primitive::Box {
                center: [0.335, 0.27, 0.07],
                half_extents: [0.06, 0.06, 0.06],
                yaw: 0.3,
            },
            Primitive::Sphere {
                center: [0.20, 0.38, 0.08],
                radius: 0.06,
            },
            Primitive::Cylinder {
                center: [0.40, 0.42, 0.075],
                axis: [0.0, 0.0, 1.0],
                radius: 0.045,
                half_height: 0.065,
            },
        ],
        spacing: ROOM_SPACING,
        sigma,
        color: ColorPattern::Checker,
        seed,
    }
}

/// Camera circuit matched to [`room_spec`]: eight cameras, 90° cones, about
/// 50% overlap between consecutive views.
pub fn room_view_spec() -> ViewSpec {
    ViewSpec {
        count: 8,
        fov_degrees: 90.0,
        orbit_radius: 0.33,
        height: 0.42,
        look_at_height: 0.08,
        near: 0.05,
        far: 10.0,
    }
}

/// Resolve a `synth:<name>` scene preset.
pub fn preset(name: &str, seed: u64, sigma: f64) -> Result<SceneSpec> {
    match name {
        "room" => Ok(room_spec(seed, sigma)),
        other => Err(Error::Usage(format!(
            "unknown scene preset '{other}'; valid presets: room"
        ))),
    }
}
