//! Platform geometry, constraint resolution and kinematics.
//!
//! The mechanism is a 3-RPS parallel platform: each linear actuator is
//! hinged at the base so that it swings in the vertical plane through the
//! base anchor and the base center, and is attached to the moving platform
//! through a spherical joint. Those three plane constraints leave three
//! degrees of freedom.
//!
//! Orientation uses z-y-z Euler angles, `R = Rz(alpha) Ry(beta) Rz(gamma)`.
//! On the constraint manifold `gamma = -alpha`, so the platform is tilted by
//! `beta` about the horizontal axis `(-sin alpha, cos alpha, 0)` with no
//! torsion. `alpha` is therefore a tilt azimuth and is undefined at zero
//! tilt; the solver works internally in the platform-normal coordinates
//! [`TiltCoordinates`] which are regular everywhere on the workspace.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

pub type Vec3 = Vector3<f64>;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Below this tilt (sin of the tilt angle) the azimuth is taken from the guess.
const AZIMUTH_EPS: f64 = 1e-13;

/// Ankle range of motion, in radians. Defaults are the human ankle limits the
/// platform was designed around.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnkleRom {
    pub dorsiflexion: f64,
    pub plantar_flexion: f64,
    pub inversion: f64,
    pub eversion: f64,
}

impl Default for AnkleRom {
    fn default() -> Self {
        Self {
            dorsiflexion: 20f64.to_radians(),
            plantar_flexion: 50f64.to_radians(),
            inversion: 35f64.to_radians(),
            eversion: 20f64.to_radians(),
        }
    }
}

/// Fixed geometry of the base, the moving platform and the actuators.
/// All lengths in meters, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformGeometry {
    pub base_radius: f64,
    pub platform_radius: f64,
    /// Nominal actuator inclination to the base plane.
    pub mount_angle: f64,
    pub stroke_max: f64,
    /// Largest allowed platform tilt.
    pub joint_limit: f64,
    pub actuator_min_length: f64,
    pub ankle_rom: AnkleRom,
}

impl Default for PlatformGeometry {
    fn default() -> Self {
        Self {
            base_radius: 0.30,
            platform_radius: 0.25,
            mount_angle: 70f64.to_radians(),
            stroke_max: 0.20,
            joint_limit: 18f64.to_radians(),
            actuator_min_length: 0.15,
            ankle_rom: AnkleRom::default(),
        }
    }
}

impl PlatformGeometry {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [
            self.base_radius,
            self.platform_radius,
            self.mount_angle,
            self.stroke_max,
            self.joint_limit,
            self.actuator_min_length,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::InvalidGeometry("non-finite parameter".into()));
        }
        if self.base_radius <= 0.0 || self.platform_radius <= 0.0 {
            return Err(GeometryError::InvalidGeometry("radii must be positive".into()));
        }
        if !(self.mount_angle > 0.0 && self.mount_angle < FRAC_PI_2) {
            return Err(GeometryError::InvalidGeometry(
                "mount angle must lie in (0, 90) degrees".into(),
            ));
        }
        if self.stroke_max <= 0.0 || self.actuator_min_length <= 0.0 {
            return Err(GeometryError::InvalidGeometry(
                "stroke and minimum actuator length must be positive".into(),
            ));
        }
        if !(self.joint_limit > 0.0 && self.joint_limit < FRAC_PI_2) {
            return Err(GeometryError::InvalidGeometry(
                "joint limit must lie in (0, 90) degrees".into(),
            ));
        }
        Ok(())
    }

    pub fn actuator_max_length(&self) -> f64 {
        self.actuator_min_length + self.stroke_max
    }

    /// Height of the level platform at which every actuator is at half stroke.
    pub fn home_height(&self) -> f64 {
        let l = self.actuator_min_length + 0.5 * self.stroke_max;
        let d = self.base_radius - self.platform_radius;
        (l * l - d * d).sqrt()
    }

    pub fn home_pose(&self) -> Pose {
        Pose::level(self.home_height())
    }
}

/// Platform center in the base frame and z-y-z Euler angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Pose {
    pub fn level(z: f64) -> Self {
        Self { x: 0.0, y: 0.0, z, alpha: 0.0, beta: 0.0, gamma: 0.0 }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_zyz(self.alpha, self.beta, self.gamma)
    }

    /// Unit normal of the platform plane in the base frame.
    pub fn normal(&self) -> Vec3 {
        self.rotation().column(2).into_owned()
    }

    pub fn tilt_coordinates(&self) -> TiltCoordinates {
        let n = self.normal();
        TiltCoordinates { nx: n.x, ny: n.y, z: self.z }
    }
}

/// Regular coordinates of the constrained manifold: the horizontal components
/// of the platform normal and the platform height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltCoordinates {
    pub nx: f64,
    pub ny: f64,
    pub z: f64,
}

impl TiltCoordinates {
    pub fn nz(&self) -> f64 {
        (1.0 - self.nx * self.nx - self.ny * self.ny).max(0.0).sqrt()
    }

    /// Minimal rotation carrying the base z axis onto the platform normal.
    pub fn rotation(&self) -> Matrix3<f64> {
        let v = Vec3::new(-self.ny, self.nx, 0.0);
        let s = skew(&v);
        Matrix3::identity() + s + s * s / (1.0 + self.nz())
    }

    /// Platform center implied by the plane constraints.
    pub fn center(&self, geom: &PlatformGeometry) -> Vec3 {
        let r = geom.platform_radius;
        let d = 1.0 + self.nz();
        Vec3::new(
            -r * (self.nx * self.nx - self.ny * self.ny) / (2.0 * d),
            r * self.nx * self.ny / d,
            self.z,
        )
    }

    /// Converts back to Euler angles; the azimuth branch `(alpha, beta)` vs
    /// `(alpha + pi, -beta)` is the one whose alpha is nearest `alpha_hint`.
    pub fn to_pose(&self, geom: &PlatformGeometry, alpha_hint: f64) -> Pose {
        let c = self.center(geom);
        let s = self.nx.hypot(self.ny);
        let (alpha, beta) = if s < AZIMUTH_EPS {
            (alpha_hint, s.min(1.0).asin())
        } else {
            let tilt = s.min(1.0).asin();
            let a0 = self.ny.atan2(self.nx);
            let a1 = wrap_angle(a0 + PI);
            if wrap_angle(a0 - alpha_hint).abs() <= wrap_angle(a1 - alpha_hint).abs() {
                (a0, tilt)
            } else {
                (a1, -tilt)
            }
        };
        Pose { x: c.x, y: c.y, z: self.z, alpha, beta, gamma: -alpha }
    }
}

/// Actuator lengths, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegLengths(pub [f64; 3]);

impl LegLengths {
    pub fn max_abs_diff(&self, other: &LegLengths) -> f64 {
        (0..3).map(|i| (self.0[i] - other.0[i]).abs()).fold(0.0, f64::max)
    }

    pub fn check_stroke(&self, geom: &PlatformGeometry) -> Result<(), GeometryError> {
        let (lo, hi) = (geom.actuator_min_length, geom.actuator_max_length());
        for (leg, &length) in self.0.iter().enumerate() {
            if !(lo..=hi).contains(&length) {
                return Err(GeometryError::StrokeLimit { leg: leg + 1, length, min: lo, max: hi });
            }
        }
        Ok(())
    }
}

/// Base anchors, platform anchors in the platform frame and in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSet {
    pub base: [Vec3; 3],
    pub platform_local: [Vec3; 3],
    pub platform_world: [Vec3; 3],
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn triangle(radius: f64) -> [Vec3; 3] {
    [
        Vec3::new(radius, 0.0, 0.0),
        Vec3::new(-0.5 * radius, 0.5 * SQRT3 * radius, 0.0),
        Vec3::new(-0.5 * radius, -0.5 * SQRT3 * radius, 0.0),
    ]
}

pub fn base_anchors(geom: &PlatformGeometry) -> [Vec3; 3] {
    triangle(geom.base_radius)
}

pub fn platform_anchors_local(geom: &PlatformGeometry) -> [Vec3; 3] {
    triangle(geom.platform_radius)
}

pub fn rotation_zyz(alpha: f64, beta: f64, gamma: f64) -> Matrix3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    Matrix3::new(
        ca * cb * cg - sa * sg,
        -ca * cb * sg - sa * cg,
        ca * sb,
        sa * cb * cg + ca * sg,
        -sa * cb * sg + ca * cg,
        sa * sb,
        -sb * cg,
        sb * sg,
        cb,
    )
}

/// Homogeneous transform of the platform frame in the base frame.
pub fn pose_transform(pose: &Pose) -> Matrix4<f64> {
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&pose.rotation());
    t[(0, 3)] = pose.x;
    t[(1, 3)] = pose.y;
    t[(2, 3)] = pose.z;
    t
}

/// Platform anchors in the base frame, written out component-wise.
pub fn platform_anchors_world(pose: &Pose, geom: &PlatformGeometry) -> [Vec3; 3] {
    let r = geom.platform_radius;
    let (sa, ca) = pose.alpha.sin_cos();
    let (sb, cb) = pose.beta.sin_cos();
    let (sg, cg) = pose.gamma.sin_cos();
    // first and second columns of the z-y-z rotation
    let (u_x, u_y, u_z) = (ca * cb * cg - sa * sg, sa * cb * cg + ca * sg, -sb * cg);
    let (v_x, v_y, v_z) = (-ca * cb * sg - sa * cg, -sa * cb * sg + ca * cg, sb * sg);
    let b1 = Vec3::new(r * u_x + pose.x, r * u_y + pose.y, r * u_z + pose.z);
    let b2 = Vec3::new(
        (-r * u_x + SQRT3 * r * v_x) / 2.0 + pose.x,
        (-r * u_y + SQRT3 * r * v_y) / 2.0 + pose.y,
        (-r * u_z + SQRT3 * r * v_z) / 2.0 + pose.z,
    );
    let b3 = Vec3::new(
        (-r * u_x - SQRT3 * r * v_x) / 2.0 + pose.x,
        (-r * u_y - SQRT3 * r * v_y) / 2.0 + pose.y,
        (-r * u_z - SQRT3 * r * v_z) / 2.0 + pose.z,
    );
    [b1, b2, b3]
}

pub fn anchor_set(pose: &Pose, geom: &PlatformGeometry) -> AnchorSet {
    AnchorSet {
        base: base_anchors(geom),
        platform_local: platform_anchors_local(geom),
        platform_world: platform_anchors_world(pose, geom),
    }
}

/// Completes a pose from the three independent coordinates.
pub fn resolve_constraints(
    alpha: f64,
    beta: f64,
    z: f64,
    geom: &PlatformGeometry,
) -> Result<Pose, GeometryError> {
    if !(alpha.is_finite() && beta.is_finite() && z.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    if beta.abs() > geom.joint_limit {
        return Err(GeometryError::TiltLimit { tilt: beta.abs(), limit: geom.joint_limit });
    }
    if z <= 0.0 {
        return Err(GeometryError::BelowBase { z });
    }
    Ok(constrained_pose(alpha, beta, z, geom))
}

/// Same as [`resolve_constraints`] without limit checks.
pub fn constrained_pose(alpha: f64, beta: f64, z: f64, geom: &PlatformGeometry) -> Pose {
    let k = 0.5 * geom.platform_radius * (1.0 - beta.cos());
    let (s2a, c2a) = (2.0 * alpha).sin_cos();
    Pose { x: -k * c2a, y: k * s2a, z, alpha, beta, gamma: -alpha }
}

/// Signed distance of each platform anchor from its actuator plane.
pub fn plane_residuals(pose: &Pose, geom: &PlatformGeometry) -> [f64; 3] {
    let b = platform_anchors_world(pose, geom);
    let normals = [
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(SQRT3 / 2.0, 0.5, 0.0),
        Vec3::new(-SQRT3 / 2.0, 0.5, 0.0),
    ];
    [normals[0].dot(&b[0]), normals[1].dot(&b[1]), normals[2].dot(&b[2])]
}

/// Actuator lengths `|B_i - A_i|` without stroke checks.
pub fn leg_lengths(pose: &Pose, geom: &PlatformGeometry) -> LegLengths {
    let a = base_anchors(geom);
    let b = platform_anchors_world(pose, geom);
    LegLengths([(b[0] - a[0]).norm(), (b[1] - a[1]).norm(), (b[2] - a[2]).norm()])
}

/// Leg lengths for a platform given directly by position and rotation.
pub fn leg_lengths_from_frame(
    position: &Vec3,
    rotation: &Matrix3<f64>,
    geom: &PlatformGeometry,
) -> LegLengths {
    let a = base_anchors(geom);
    let b = platform_anchors_local(geom);
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = (position + rotation * b[i] - a[i]).norm();
    }
    LegLengths(out)
}

/// Inverse kinematics with stroke limits enforced.
pub fn inverse_kinematics(pose: &Pose, geom: &PlatformGeometry) -> Result<LegLengths, GeometryError> {
    let lengths = leg_lengths(pose, geom);
    lengths.check_stroke(geom)?;
    Ok(lengths)
}

fn tilt_lengths(q: &TiltCoordinates, geom: &PlatformGeometry) -> LegLengths {
    leg_lengths_from_frame(&q.center(geom), &q.rotation(), geom)
}

/// Analytic Jacobian of the leg lengths with respect to `(nx, ny, z)`.
pub fn length_jacobian_tilt(q: &TiltCoordinates, geom: &PlatformGeometry) -> Matrix3<f64> {
    let r = geom.platform_radius;
    let (nx, ny) = (q.nx, q.ny);
    let nz = q.nz();
    let d = 1.0 + nz;
    let dnz = [-nx / nz, -ny / nz];

    // platform center
    let u = nx * nx - ny * ny;
    let du = [2.0 * nx, -2.0 * ny];
    let w = nx * ny;
    let dw = [ny, nx];
    let mut dcenter = [Vec3::zeros(); 2];
    for k in 0..2 {
        dcenter[k] = Vec3::new(
            -r * (du[k] * d - u * dnz[k]) / (2.0 * d * d),
            r * (dw[k] * d - w * dnz[k]) / (d * d),
            0.0,
        );
    }

    // rotation
    let v = Vec3::new(-ny, nx, 0.0);
    let sv = skew(&v);
    let sv2 = sv * sv;
    let dv = [Vec3::new(0.0, 1.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)];
    let mut drot = [Matrix3::zeros(); 2];
    for k in 0..2 {
        let sd = skew(&dv[k]);
        drot[k] = sd + (sd * sv + sv * sd) / d - sv2 * dnz[k] / (d * d);
    }

    let a = base_anchors(geom);
    let b = platform_anchors_local(geom);
    let rot = q.rotation();
    let center = q.center(geom);
    let mut jac = Matrix3::zeros();
    for i in 0..3 {
        let diff = center + rot * b[i] - a[i];
        let unit = diff / diff.norm();
        for k in 0..2 {
            jac[(i, k)] = unit.dot(&(dcenter[k] + drot[k] * b[i]));
        }
        jac[(i, 2)] = unit.z;
    }
    jac
}

/// Jacobian of the leg lengths with respect to `(alpha, beta, z)` on the
/// constraint manifold. Column 0 vanishes at zero tilt.
pub fn length_jacobian(pose: &Pose, geom: &PlatformGeometry) -> Matrix3<f64> {
    let (sa, ca) = pose.alpha.sin_cos();
    let (sb, cb) = pose.beta.sin_cos();
    let q = TiltCoordinates { nx: ca * sb, ny: sa * sb, z: pose.z };
    let chain = Matrix3::new(-sa * sb, ca * cb, 0.0, ca * sb, sa * cb, 0.0, 0.0, 0.0, 1.0);
    length_jacobian_tilt(&q, geom) * chain
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Step halvings tried before the iteration is declared divergent.
    pub max_halvings: usize,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_iterations: 50, max_halvings: 40 }
    }
}

/// Numerical forward kinematics (damped Newton on the tilt coordinates).
pub fn forward_kinematics(
    lengths: &LegLengths,
    geom: &PlatformGeometry,
    initial_guess: &Pose,
) -> Result<Pose, GeometryError> {
    forward_kinematics_with(lengths, geom, initial_guess, &FkOptions::default())
}

pub fn forward_kinematics_with(
    lengths: &LegLengths,
    geom: &PlatformGeometry,
    initial_guess: &Pose,
    opts: &FkOptions,
) -> Result<Pose, GeometryError> {
    if lengths.0.iter().any(|l| !l.is_finite() || *l <= 0.0) {
        return Err(GeometryError::NonFinite);
    }
    let target = Vec3::from(lengths.0);
    let residual = |q: &TiltCoordinates| Vec3::from(tilt_lengths(q, geom).0) - target;

    let mut q = initial_guess.tilt_coordinates();
    if !(q.z > 0.0) || q.nx.hypot(q.ny) >= 0.95 {
        q = geom.home_pose().tilt_coordinates();
    }
    let mut res = residual(&q);
    let mut norm = res.amax();
    for _ in 0..opts.max_iterations {
        if norm < opts.tolerance {
            return Ok(q.to_pose(geom, initial_guess.alpha));
        }
        let jac = length_jacobian_tilt(&q, geom);
        let step = jac.lu().solve(&res).ok_or(GeometryError::Convergence {
            iterations: 0,
            residual: norm,
        })?;
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_halvings {
            let cand = TiltCoordinates {
                nx: q.nx - damping * step.x,
                ny: q.ny - damping * step.y,
                z: q.z - damping * step.z,
            };
            if cand.z > 0.0 && cand.nx.hypot(cand.ny) < 0.99 {
                let cand_res = residual(&cand);
                let cand_norm = cand_res.amax();
                if cand_norm < norm {
                    q = cand;
                    res = cand_res;
                    norm = cand_norm;
                    accepted = true;
                    break;
                }
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if norm < opts.tolerance {
        return Ok(q.to_pose(geom, initial_guess.alpha));
    }
    Err(GeometryError::Convergence { iterations: opts.max_iterations, residual: norm })
}

/// Actuator tip positions assuming every actuator keeps the inclination
/// `mount_angles[i]`, and their mean as the platform center. This is the
/// fixed-inclination estimate; the exact center is `Pose::position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipEstimate {
    pub tips: [Vec3; 3],
    pub center: Vec3,
}

pub fn actuator_tip_and_center(
    lengths: &LegLengths,
    mount_angles: [f64; 3],
    geom: &PlatformGeometry,
) -> TipEstimate {
    let big_r = geom.base_radius;
    let [l1, l2, l3] = lengths.0;
    let (s1, c1) = mount_angles[0].sin_cos();
    let (s2, c2) = mount_angles[1].sin_cos();
    let (s3, c3) = mount_angles[2].sin_cos();
    let tips = [
        Vec3::new(big_r - l1 * c1, 0.0, l1 * s1),
        Vec3::new((-big_r + l2 * c2) / 2.0, SQRT3 * (big_r - l2 * c2) / 2.0, l2 * s2),
        Vec3::new((-big_r + l3 * c3) / 2.0, SQRT3 * (-big_r + l3 * c3) / 2.0, l3 * s3),
    ];
    let center = (tips[0] + tips[1] + tips[2]) / 3.0;
    TipEstimate { tips, center }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TiltLimit { tilt: f64, limit: f64 },
    Stroke { leg: usize, length: f64, min: f64, max: f64 },
    AnkleRom { motion: &'static str, angle: f64, limit: f64 },
}

/// Platform tilt split into the two ankle planes. The foot points along +x,
/// positive sagittal angle is plantar flexion, positive frontal is inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnkleAngles {
    pub sagittal: f64,
    pub frontal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkspaceReport {
    pub tilt: f64,
    pub tilt_limit: f64,
    pub lengths: [f64; 3],
    /// Fraction of the stroke in use, 0 at minimum length.
    pub stroke_usage: [f64; 3],
    /// Angle between each actuator axis and the platform normal.
    pub joint_angles: [f64; 3],
    /// Change of `joint_angles` from the level pose at the same height.
    pub joint_deviations: [f64; 3],
    pub ankle: AnkleAngles,
    pub violations: Vec<Violation>,
}

impl WorkspaceReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

fn joint_angles(position: &Vec3, rotation: &Matrix3<f64>, geom: &PlatformGeometry) -> [f64; 3] {
    let a = base_anchors(geom);
    let b = platform_anchors_local(geom);
    let normal = rotation.column(2).into_owned();
    let mut out = [0.0; 3];
    for i in 0..3 {
        let axis = (position + rotation * b[i] - a[i]).normalize();
        out[i] = axis.dot(&normal).clamp(-1.0, 1.0).acos();
    }
    out
}

pub fn workspace_check(pose: &Pose, geom: &PlatformGeometry) -> WorkspaceReport {
    let rot = pose.rotation();
    let n = rot.column(2).into_owned();
    let tilt = n.z.clamp(-1.0, 1.0).acos();
    let lengths = leg_lengths(pose, geom).0;
    let mut violations = Vec::new();

    if tilt > geom.joint_limit {
        violations.push(Violation::TiltLimit { tilt, limit: geom.joint_limit });
    }
    let (lo, hi) = (geom.actuator_min_length, geom.actuator_max_length());
    let mut stroke_usage = [0.0; 3];
    for (i, &l) in lengths.iter().enumerate() {
        stroke_usage[i] = (l - lo) / geom.stroke_max;
        if !(lo..=hi).contains(&l) {
            violations.push(Violation::Stroke { leg: i + 1, length: l, min: lo, max: hi });
        }
    }

    let joints = joint_angles(&pose.position(), &rot, geom);
    let level = joint_angles(&Vec3::new(0.0, 0.0, pose.z), &Matrix3::identity(), geom);
    let joint_deviations = [joints[0] - level[0], joints[1] - level[1], joints[2] - level[2]];

    let ankle = AnkleAngles { sagittal: n.x.atan2(n.z), frontal: (-n.y).atan2(n.z) };
    let rom = &geom.ankle_rom;
    let checks = [
        ("plantar_flexion", ankle.sagittal, rom.plantar_flexion),
        ("dorsiflexion", -ankle.sagittal, rom.dorsiflexion),
        ("inversion", ankle.frontal, rom.inversion),
        ("eversion", -ankle.frontal, rom.eversion),
    ];
    for (motion, angle, limit) in checks {
        if angle > limit {
            violations.push(Violation::AnkleRom { motion, angle, limit });
        }
    }

    WorkspaceReport {
        tilt,
        tilt_limit: geom.joint_limit,
        lengths,
        stroke_usage,
        joint_angles: joints,
        joint_deviations,
        ankle,
        violations,
    }
}
