//! Rigid-body model of the platform and its three actuators in task space.
//!
//! The task state is `X = [x, y, z, roll, pitch, yaw]` with the platform
//! rotation `R = Rz(yaw) Ry(pitch) Rx(roll)`. Each actuator is modelled as a
//! piston (fixed length, pivoting at the base anchor) and a stroke (sliding
//! along the piston axis) whose motion is fully determined by the platform
//! attachment point `x_i`. Actuator terms are derived in `x_i` coordinates and
//! mapped to task space with the leg Jacobians, giving
//!
//! ```text
//! M_all(X) Xdd + C_all(X, Xd) Xd + G_all(X) = F
//! ```

use nalgebra::{Matrix3, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::DynamicsError;
use crate::geometry::{
    base_anchors, platform_anchors_local, skew, PlatformGeometry, Pose, Vec3,
};

pub type Vec6 = SVector<f64, 6>;
pub type Mat6 = SMatrix<f64, 6, 6>;
pub type Mat3x6 = SMatrix<f64, 3, 6>;

pub const STANDARD_GRAVITY: f64 = 9.8;

const SINGULAR_COS_PITCH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorParams {
    pub piston_mass: f64,
    pub piston_half_length: f64,
    pub stroke_mass: f64,
    pub stroke_half_length: f64,
    pub piston_inertia: Matrix3<f64>,
    pub stroke_inertia: Matrix3<f64>,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        let rod = |m: f64, half: f64| Matrix3::identity() * (m * (2.0 * half).powi(2) / 12.0);
        Self {
            piston_mass: 1.2,
            piston_half_length: 0.12,
            stroke_mass: 0.6,
            stroke_half_length: 0.08,
            piston_inertia: rod(1.2, 0.12),
            stroke_inertia: rod(0.6, 0.08),
        }
    }
}

impl ActuatorParams {
    pub fn massless() -> Self {
        Self {
            piston_mass: 0.0,
            piston_half_length: 0.12,
            stroke_mass: 0.0,
            stroke_half_length: 0.08,
            piston_inertia: Matrix3::zeros(),
            stroke_inertia: Matrix3::zeros(),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.piston_mass < 0.0 || self.stroke_mass < 0.0 {
            return Err(DynamicsError::InvalidParameters("actuator masses must be >= 0".into()));
        }
        if self.piston_half_length < 0.0 || self.stroke_half_length < 0.0 {
            return Err(DynamicsError::InvalidParameters("half lengths must be >= 0".into()));
        }
        for (name, i) in [("piston", &self.piston_inertia), ("stroke", &self.stroke_inertia)] {
            check_inertia(name, i, false)?;
        }
        Ok(())
    }

    fn scaled(&self, k: f64) -> Self {
        Self {
            piston_mass: self.piston_mass * k,
            stroke_mass: self.stroke_mass * k,
            piston_inertia: self.piston_inertia * k,
            stroke_inertia: self.stroke_inertia * k,
            ..*self
        }
    }
}

fn check_inertia(name: &str, i: &Matrix3<f64>, definite: bool) -> Result<(), DynamicsError> {
    if (i - i.transpose()).amax() > 1e-12 * i.amax().max(1.0) {
        return Err(DynamicsError::InvalidParameters(format!("{name} inertia is not symmetric")));
    }
    let min_eig = i.symmetric_eigenvalues().min();
    let ok = if definite { min_eig > 0.0 } else { min_eig >= -1e-12 };
    if !ok {
        let kind = if definite { "positive definite" } else { "positive semidefinite" };
        return Err(DynamicsError::InvalidParameters(format!("{name} inertia is not {kind}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformBody {
    pub mass: f64,
    /// Inertia about the platform center, platform frame.
    pub inertia: Matrix3<f64>,
    /// Gravitational acceleration, base frame.
    pub gravity: Vec3,
}

impl Default for PlatformBody {
    fn default() -> Self {
        Self {
            mass: 8.0,
            inertia: Matrix3::from_diagonal(&Vec3::new(0.15, 0.15, 0.3)),
            gravity: Vec3::new(0.0, 0.0, -STANDARD_GRAVITY),
        }
    }
}

impl PlatformBody {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.mass > 0.0) {
            return Err(DynamicsError::InvalidParameters("platform mass must be > 0".into()));
        }
        check_inertia("platform", &self.inertia, true)
    }
}

/// Which Coriolis/centrifugal assembly to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoriolisForm {
    /// `C_p + sum(J^T M J_dot + J^T C J)` with `C_p = T^T I T_dot + T^T S(w) I T`;
    /// consistent with the Lagrangian, so power balance holds.
    #[default]
    Lagrangian,
    /// `C_p + sum(J^T M J + J^T C J)` with `C_p = T_dot^T I T + T^T S(w) I T`,
    /// the published form. Does not satisfy the power balance.
    AsPublished,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsModel {
    pub geometry: PlatformGeometry,
    pub actuators: [ActuatorParams; 3],
    pub body: PlatformBody,
    pub coriolis: CoriolisForm,
}

impl Default for DynamicsModel {
    fn default() -> Self {
        Self {
            geometry: PlatformGeometry::default(),
            actuators: [ActuatorParams::default(); 3],
            body: PlatformBody::default(),
            coriolis: CoriolisForm::Lagrangian,
        }
    }
}

impl DynamicsModel {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        self.body.validate()?;
        for a in &self.actuators {
            a.validate()?;
        }
        Ok(())
    }

    /// Copy with every mass and inertia multiplied by `k`.
    pub fn with_mass_scale(&self, k: f64) -> Self {
        let mut out = *self;
        out.body.mass *= k;
        out.body.inertia *= k;
        for a in out.actuators.iter_mut() {
            *a = a.scaled(k);
        }
        out
    }
}

/// Position, velocity and acceleration in task coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub position: Vec6,
    pub velocity: Vec6,
    pub acceleration: Vec6,
}

impl TaskState {
    pub fn at_rest(position: Vec6) -> Self {
        Self { position, velocity: Vec6::zeros(), acceleration: Vec6::zeros() }
    }

    pub fn from_pose(pose: &Pose) -> Self {
        let rpy = rpy_from_rotation(&pose.rotation());
        Self::at_rest(Vec6::new(pose.x, pose.y, pose.z, rpy[0], rpy[1], rpy[2]))
    }

    pub fn center(&self) -> Vec3 {
        self.position.fixed_rows::<3>(0).into_owned()
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.position[3], self.position[4], self.position[5]]
    }

    pub fn angle_rates(&self) -> Vec3 {
        self.velocity.fixed_rows::<3>(3).into_owned()
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        let [r, p, y] = self.angles();
        rotation_rpy(r, p, y)
    }
}

/// `Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn rotation_rpy(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    let (sa, ca) = yaw.sin_cos();
    let (sb, cb) = pitch.sin_cos();
    let (sg, cg) = roll.sin_cos();
    Matrix3::new(
        ca * cb,
        ca * sb * sg - sa * cg,
        ca * sb * cg + sa * sg,
        sa * cb,
        sa * sb * sg + ca * cg,
        sa * sb * cg - ca * sg,
        -sb,
        cb * sg,
        cb * cg,
    )
}

/// Inverse of [`rotation_rpy`], returning `[roll, pitch, yaw]`.
pub fn rpy_from_rotation(r: &Matrix3<f64>) -> [f64; 3] {
    let pitch = (-r[(2, 0)]).atan2(r[(0, 0)].hypot(r[(1, 0)]));
    let yaw = r[(1, 0)].atan2(r[(0, 0)]);
    let roll = r[(2, 1)].atan2(r[(2, 2)]);
    [roll, pitch, yaw]
}

fn check_pitch(pitch: f64) -> Result<(), DynamicsError> {
    if pitch.cos().abs() < SINGULAR_COS_PITCH {
        Err(DynamicsError::RepresentationSingularity { pitch })
    } else {
        Ok(())
    }
}

/// Maps `[roll, pitch, yaw]` rates to the body-frame angular velocity.
pub fn t_reverse(angles: [f64; 3]) -> Result<Matrix3<f64>, DynamicsError> {
    check_pitch(angles[1])?;
    Ok(t_reverse_unchecked(angles))
}

fn t_reverse_unchecked(angles: [f64; 3]) -> Matrix3<f64> {
    let (sr, cr) = angles[0].sin_cos();
    let (sp, cp) = angles[1].sin_cos();
    Matrix3::new(1.0, 0.0, -sp, 0.0, cr, sr * cp, 0.0, -sr, cr * cp)
}

/// Time derivative of [`t_reverse`] along `rates`.
pub fn t_reverse_dot(angles: [f64; 3], rates: &Vec3) -> Matrix3<f64> {
    let (sr, cr) = angles[0].sin_cos();
    let (sp, cp) = angles[1].sin_cos();
    let (dr, dp) = (rates[0], rates[1]);
    Matrix3::new(
        0.0,
        0.0,
        -cp * dp,
        0.0,
        -sr * dr,
        cr * cp * dr - sr * sp * dp,
        0.0,
        -cr * dr,
        -sr * cp * dr - cr * sp * dp,
    )
}

/// Maps `[roll, pitch, yaw]` rates to the base-frame angular velocity,
/// `R * t_reverse`.
pub fn world_rate_map(angles: [f64; 3]) -> Matrix3<f64> {
    let (sp, cp) = angles[1].sin_cos();
    let (sy, cy) = angles[2].sin_cos();
    Matrix3::new(cy * cp, -sy, 0.0, sy * cp, cy, 0.0, -sp, 0.0, 1.0)
}

pub fn world_rate_map_dot(angles: [f64; 3], rates: &Vec3) -> Matrix3<f64> {
    let (sp, cp) = angles[1].sin_cos();
    let (sy, cy) = angles[2].sin_cos();
    let (dp, dy) = (rates[1], rates[2]);
    Matrix3::new(
        -sy * cp * dy - cy * sp * dp,
        -cy * dy,
        0.0,
        cy * cp * dy - sy * sp * dp,
        -sy * dy,
        0.0,
        -cp * dp,
        0.0,
        0.0,
    )
}

/// Kinematic quantities of one actuator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegKinematics {
    /// Platform anchor offset `R b_i` in the base frame.
    pub offset: Vec3,
    /// Attachment point `x_i = X_c + R b_i`.
    pub attachment: Vec3,
    pub attachment_velocity: Vec3,
    pub unit: Vec3,
    pub length: f64,
    pub length_rate: f64,
    pub angular_velocity: Vec3,
}

pub fn leg_kinematics(
    state: &TaskState,
    geom: &PlatformGeometry,
    leg: usize,
) -> Result<LegKinematics, DynamicsError> {
    let base = base_anchors(geom)[leg];
    let offset = state.rotation() * platform_anchors_local(geom)[leg];
    let attachment = state.center() + offset;
    let diff = attachment - base;
    let length = diff.norm();
    if !(length > 1e-12) {
        return Err(DynamicsError::ZeroLengthLeg { leg: leg + 1 });
    }
    let unit = diff / length;
    let omega = world_rate_map(state.angles()) * state.angle_rates();
    let attachment_velocity = state.velocity.fixed_rows::<3>(0).into_owned() + omega.cross(&offset);
    let length_rate = attachment_velocity.dot(&unit);
    let angular_velocity = unit.cross(&attachment_velocity) / length;
    Ok(LegKinematics {
        offset,
        attachment,
        attachment_velocity,
        unit,
        length,
        length_rate,
        angular_velocity,
    })
}

/// Actuator model in attachment-point coordinates:
/// `M_i xdd_i + C_i xd_i + G_i = F_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorMatrices {
    pub mass: Matrix3<f64>,
    pub coriolis: Matrix3<f64>,
    pub gravity: Vec3,
}

pub fn actuator_matrices(
    kin: &LegKinematics,
    params: &ActuatorParams,
    gravity: &Vec3,
) -> ActuatorMatrices {
    let u = kin.unit;
    let l = kin.length;
    let v = kin.attachment_velocity;
    let (m1, c1) = (params.piston_mass, params.piston_half_length);
    let (m2, c2) = (params.stroke_mass, params.stroke_half_length);
    let inertia = params.piston_inertia + params.stroke_inertia;

    let eye = Matrix3::identity();
    let perp = eye - u * u.transpose();
    let u_dot = perp * v / l;
    let l_dot = kin.length_rate;

    // velocity Jacobians of the two part centers
    let a1 = perp * (c1 / l);
    let a2 = eye - perp * (c2 / l);
    let q_dot = -(u_dot * u.transpose() + u * u_dot.transpose()) / l - perp * (l_dot / (l * l));
    let a1_dot = q_dot * c1;
    let a2_dot = -q_dot * c2;

    // angular velocity map w = B v and its derivatives
    let su = skew(&u);
    let b = su / l;
    let b_dot = skew(&u_dot) / l - su * (l_dot / (l * l));
    let d = -(skew(&v) * perp) / (l * l) - (u.cross(&v) * u.transpose()) / (l * l);

    let mass = m1 * a1.transpose() * a1 + m2 * a2.transpose() * a2 + b.transpose() * inertia * b;
    let coriolis = m1 * a1.transpose() * a1_dot
        + m2 * a2.transpose() * a2_dot
        + b_dot.transpose() * inertia * b
        + b.transpose() * inertia * b_dot
        - d.transpose() * inertia * b;
    let gravity_force = -(m1 * a1.transpose() + m2 * a2.transpose()) * gravity;

    ActuatorMatrices { mass, coriolis, gravity: gravity_force }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformMatrices {
    pub mass: Mat6,
    pub coriolis: Mat6,
    pub gravity: Vec6,
}

pub fn platform_matrices(
    state: &TaskState,
    body: &PlatformBody,
    form: CoriolisForm,
) -> Result<PlatformMatrices, DynamicsError> {
    let angles = state.angles();
    let rates = state.angle_rates();
    let t = t_reverse(angles)?;
    let t_dot = t_reverse_dot(angles, &rates);
    let omega_body = t * rates;
    let i_p = body.inertia;

    let mut mass = Mat6::zeros();
    mass.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * body.mass));
    mass.fixed_view_mut::<3, 3>(3, 3).copy_from(&(t.transpose() * i_p * t));

    let gyro = t.transpose() * skew(&omega_body) * i_p * t;
    let rot_c = match form {
        CoriolisForm::Lagrangian => t.transpose() * i_p * t_dot + gyro,
        CoriolisForm::AsPublished => t_dot.transpose() * i_p * t + gyro,
    };
    let mut coriolis = Mat6::zeros();
    coriolis.fixed_view_mut::<3, 3>(3, 3).copy_from(&rot_c);

    let mut gravity = Vec6::zeros();
    gravity.fixed_rows_mut::<3>(0).copy_from(&(-body.mass * body.gravity));
    Ok(PlatformMatrices { mass, coriolis, gravity })
}

/// `xd_i = J_i Xd` with `J_i = [I | -S(R b_i) R T_reverse]`.
pub fn leg_jacobian(state: &TaskState, geom: &PlatformGeometry, leg: usize) -> Mat3x6 {
    let offset = state.rotation() * platform_anchors_local(geom)[leg];
    jacobian_from_offset(&offset, &world_rate_map(state.angles()))
}

fn jacobian_from_offset(offset: &Vec3, rate_map: &Matrix3<f64>) -> Mat3x6 {
    let mut j = Mat3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(offset) * rate_map));
    j
}

pub fn leg_jacobian_dot(state: &TaskState, geom: &PlatformGeometry, leg: usize) -> Mat3x6 {
    let angles = state.angles();
    let rates = state.angle_rates();
    let e = world_rate_map(angles);
    let e_dot = world_rate_map_dot(angles, &rates);
    let offset = state.rotation() * platform_anchors_local(geom)[leg];
    let offset_dot = (e * rates).cross(&offset);
    let mut j = Mat3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(-skew(&offset_dot) * e - skew(&offset) * e_dot));
    j
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsMatrices {
    pub mass: Mat6,
    pub coriolis: Mat6,
    pub gravity: Vec6,
}

impl DynamicsMatrices {
    /// Ratio of extreme eigenvalues of the symmetric part of the mass matrix;
    /// infinite when it is not positive definite.
    pub fn condition_estimate(&self) -> f64 {
        let sym = (self.mass + self.mass.transpose()) * 0.5;
        let eig = sym.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Set when the mass matrix is close to singular.
    pub fn conditioning_warning(&self) -> Option<String> {
        let c = self.condition_estimate();
        (c > 1e10).then(|| format!("mass matrix condition estimate {c:.3e}"))
    }
}

pub fn assemble(model: &DynamicsModel, state: &TaskState) -> Result<DynamicsMatrices, DynamicsError> {
    let p = platform_matrices(state, &model.body, model.coriolis)?;
    let mut mass = p.mass;
    let mut coriolis = p.coriolis;
    let mut gravity = p.gravity;

    let angles = state.angles();
    let rates = state.angle_rates();
    let e = world_rate_map(angles);
    let e_dot = world_rate_map_dot(angles, &rates);
    let omega = e * rates;

    for leg in 0..3 {
        let kin = leg_kinematics(state, &model.geometry, leg)?;
        let act = actuator_matrices(&kin, &model.actuators[leg], &model.body.gravity);
        let j = jacobian_from_offset(&kin.offset, &e);
        let jt = j.transpose();
        let jt_m = jt * act.mass;
        mass += jt_m * j;
        let first = match model.coriolis {
            CoriolisForm::Lagrangian => {
                let offset_dot = omega.cross(&kin.offset);
                let mut j_dot = Mat3x6::zeros();
                j_dot
                    .fixed_view_mut::<3, 3>(0, 3)
                    .copy_from(&(-skew(&offset_dot) * e - skew(&kin.offset) * e_dot));
                jt_m * j_dot
            }
            CoriolisForm::AsPublished => jt_m * j,
        };
        coriolis += first + jt * act.coriolis * j;
        gravity += jt * act.gravity;
    }
    Ok(DynamicsMatrices { mass, coriolis, gravity })
}

/// `F = M Xdd + C Xd + G`.
pub fn inverse_dynamics(model: &DynamicsModel, state: &TaskState) -> Result<Vec6, DynamicsError> {
    let m = assemble(model, state)?;
    Ok(m.mass * state.acceleration + m.coriolis * state.velocity + m.gravity)
}

/// Solves `M Xdd = F - C Xd - G` for the task acceleration.
pub fn forward_dynamics(
    model: &DynamicsModel,
    position: &Vec6,
    velocity: &Vec6,
    force: &Vec6,
) -> Result<Vec6, DynamicsError> {
    let state = TaskState { position: *position, velocity: *velocity, acceleration: Vec6::zeros() };
    let m = assemble(model, &state)?;
    let rhs = force - m.coriolis * velocity - m.gravity;
    let sym = (m.mass + m.mass.transpose()) * 0.5;
    match sym.cholesky() {
        Some(chol) => Ok(chol.solve(&rhs)),
        None => Err(DynamicsError::SingularMass { condition: m.condition_estimate() }),
    }
}

/// Forces transmitted by the three actuators: `axial` along each actuator,
/// `lateral` along its base hinge axis (reacted by the hinge, not the motor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActuatorLoads {
    pub axial: [f64; 3],
    pub lateral: [f64; 3],
}

/// Splits a task-space generalized force into actuator loads.
pub fn actuator_loads(
    geom: &PlatformGeometry,
    position: &Vec6,
    force: &Vec6,
) -> Result<ActuatorLoads, DynamicsError> {
    let state = TaskState::at_rest(*position);
    let e = world_rate_map(state.angles());
    let base = base_anchors(geom);
    let mut map = Mat6::zeros();
    for leg in 0..3 {
        let kin = leg_kinematics(&state, geom, leg)?;
        let jt = jacobian_from_offset(&kin.offset, &e).transpose();
        let dir = base[leg] / base[leg].norm();
        let hinge = Vec3::new(-dir.y, dir.x, 0.0);
        map.set_column(leg, &(jt * kin.unit));
        map.set_column(leg + 3, &(jt * hinge));
    }
    let sol = map.lu().solve(force).ok_or(DynamicsError::SingularMass { condition: f64::INFINITY })?;
    Ok(ActuatorLoads { axial: [sol[0], sol[1], sol[2]], lateral: [sol[3], sol[4], sol[5]] })
}

/// Reduced coordinates `(alpha, beta, z)` with their first and second
/// derivatives, on the constraint manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedMotion {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

/// Task state (roll/pitch/yaw coordinates) of a constrained motion.
pub fn constrained_task_state(
    motion: &ReducedMotion,
    geom: &PlatformGeometry,
) -> Result<TaskState, DynamicsError> {
    let [a, b, z] = [motion.position.x, motion.position.y, motion.position.z];
    let [da, db, dz] = [motion.velocity.x, motion.velocity.y, motion.velocity.z];
    let [dda, ddb, ddz] = [motion.acceleration.x, motion.acceleration.y, motion.acceleration.z];
    let r = geom.platform_radius;

    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let (s2, c2) = (2.0 * a).sin_cos();

    // center: x = -k cos 2a, y = k sin 2a, k = r (1 - cos b) / 2
    let k = 0.5 * r * (1.0 - cb);
    let k1 = 0.5 * r * sb;
    let k2 = 0.5 * r * cb;
    let kd = k1 * db;
    let kdd = k2 * db * db + k1 * ddb;
    let pos = Vec3::new(-k * c2, k * s2, z);
    let vel = Vec3::new(-kd * c2 + 2.0 * k * da * s2, kd * s2 + 2.0 * k * da * c2, dz);
    let acc = Vec3::new(
        -kdd * c2 + 4.0 * kd * da * s2 + 2.0 * k * dda * s2 + 4.0 * k * da * da * c2,
        kdd * s2 + 4.0 * kd * da * c2 + 2.0 * k * dda * c2 - 4.0 * k * da * da * s2,
        ddz,
    );

    // world angular velocity of Rz(a) Ry(b) Rz(-a)
    let w1 = Vec3::new(-ca * sb, -sa * sb, 1.0 - cb);
    let w2 = Vec3::new(-sa, ca, 0.0);
    let w1_dot = Vec3::new(sa * sb, -ca * sb, 0.0) * da + Vec3::new(-ca * cb, -sa * cb, sb) * db;
    let w2_dot = Vec3::new(-ca, -sa, 0.0) * da;
    let omega = w1 * da + w2 * db;
    let omega_dot = w1 * dda + w1_dot * da + w2 * ddb + w2_dot * db;

    let rot = crate::geometry::rotation_zyz(a, b, -a);
    let angles = rpy_from_rotation(&rot);
    check_pitch(angles[1])?;
    let e = world_rate_map(angles);
    let e_lu = e.lu();
    let rates = e_lu
        .solve(&omega)
        .ok_or(DynamicsError::RepresentationSingularity { pitch: angles[1] })?;
    let e_dot = world_rate_map_dot(angles, &rates);
    let accels = e_lu
        .solve(&(omega_dot - e_dot * rates))
        .ok_or(DynamicsError::RepresentationSingularity { pitch: angles[1] })?;

    let mut out = TaskState {
        position: Vec6::zeros(),
        velocity: Vec6::zeros(),
        acceleration: Vec6::zeros(),
    };
    out.position.fixed_rows_mut::<3>(0).copy_from(&pos);
    out.position.fixed_rows_mut::<3>(3).copy_from(&Vec3::from(angles));
    out.velocity.fixed_rows_mut::<3>(0).copy_from(&vel);
    out.velocity.fixed_rows_mut::<3>(3).copy_from(&rates);
    out.acceleration.fixed_rows_mut::<3>(0).copy_from(&acc);
    out.acceleration.fixed_rows_mut::<3>(3).copy_from(&accels);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn home_state(model: &DynamicsModel) -> TaskState {
        TaskState::from_pose(&model.geometry.home_pose())
    }

    #[test]
    fn skew_identity_cases() {
        let s = skew(&Vec3::x());
        assert_eq!(s * Vec3::y(), Vec3::z());
        assert_eq!(skew(&Vec3::zeros()), Matrix3::zeros());
        assert_eq!(s.transpose(), -s);
    }

    #[test]
    fn t_reverse_identity_at_zero() {
        assert_eq!(t_reverse([0.0; 3]).unwrap(), Matrix3::identity());
        assert!(matches!(
            t_reverse([0.0, std::f64::consts::FRAC_PI_2, 0.0]),
            Err(DynamicsError::RepresentationSingularity { .. })
        ));
    }

    #[test]
    fn world_map_is_rotated_body_map() {
        let a = [0.2, -0.3, 0.7];
        let lhs = world_rate_map(a);
        let rhs = rotation_rpy(a[0], a[1], a[2]) * t_reverse(a).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-14);
    }

    #[test]
    fn rpy_roundtrip() {
        let r = rotation_rpy(0.1, -0.2, 0.3);
        let a = rpy_from_rotation(&r);
        assert_relative_eq!(a[0], 0.1, epsilon = 1e-15);
        assert_relative_eq!(a[1], -0.2, epsilon = 1e-15);
        assert_relative_eq!(a[2], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn static_leg_has_no_rates() {
        let model = DynamicsModel::default();
        let k = leg_kinematics(&home_state(&model), &model.geometry, 0).unwrap();
        assert_eq!(k.length_rate, 0.0);
        assert_eq!(k.angular_velocity, Vec3::zeros());
    }

    #[test]
    fn vertical_motion_equal_leg_rates() {
        let model = DynamicsModel::default();
        let mut s = home_state(&model);
        s.velocity[2] = 0.1;
        let rates: Vec<f64> = (0..3)
            .map(|i| leg_kinematics(&s, &model.geometry, i).unwrap().length_rate)
            .collect();
        let k = leg_kinematics(&s, &model.geometry, 0).unwrap();
        assert_relative_eq!(rates[0], 0.1 * k.unit.z, epsilon = 1e-15);
        assert_relative_eq!(rates[1], rates[0], epsilon = 1e-15);
        assert_relative_eq!(rates[2], rates[0], epsilon = 1e-15);
    }

    #[test]
    fn zero_velocity_no_coriolis_force() {
        let model = DynamicsModel::default();
        let s = home_state(&model);
        let k = leg_kinematics(&s, &model.geometry, 1).unwrap();
        let a = actuator_matrices(&k, &model.actuators[1], &model.body.gravity);
        assert_eq!(a.coriolis * k.attachment_velocity, Vec3::zeros());
    }

    #[test]
    fn platform_gravity_and_zero_angle_inertia() {
        let body = PlatformBody { mass: 10.0, ..PlatformBody::default() };
        let s = TaskState::at_rest(Vec6::new(0.0, 0.0, 0.25, 0.0, 0.0, 0.0));
        let p = platform_matrices(&s, &body, CoriolisForm::Lagrangian).unwrap();
        assert_relative_eq!(p.gravity[2], 98.0, epsilon = 1e-12);
        assert_eq!(p.gravity[0], 0.0);
        assert_eq!(p.mass.fixed_view::<3, 3>(3, 3).into_owned(), body.inertia);
    }

    #[test]
    fn pure_translation_moves_attachments_equally() {
        let model = DynamicsModel::default();
        let s = TaskState::at_rest(Vec6::new(0.01, -0.02, 0.25, 0.05, -0.04, 0.1));
        let xd = Vec6::new(0.3, -0.1, 0.2, 0.0, 0.0, 0.0);
        for leg in 0..3 {
            let v = leg_jacobian(&s, &model.geometry, leg) * xd;
            assert_relative_eq!(v, Vec3::new(0.3, -0.1, 0.2), epsilon = 1e-15);
        }
    }

    #[test]
    fn yaw_rate_on_level_pose_is_tangential() {
        let model = DynamicsModel::default();
        let s = home_state(&model);
        let xd = Vec6::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.7);
        let b = platform_anchors_local(&model.geometry);
        for leg in 0..3 {
            let v = leg_jacobian(&s, &model.geometry, leg) * xd;
            assert_relative_eq!(v.norm(), model.geometry.platform_radius * 0.7, epsilon = 1e-14);
            assert!(v.dot(&b[leg]).abs() < 1e-15);
        }
    }

    #[test]
    fn massless_legs_leave_platform_mass() {
        let model = DynamicsModel { actuators: [ActuatorParams::massless(); 3], ..Default::default() };
        let s = TaskState::at_rest(Vec6::new(0.0, 0.0, 0.24, 0.1, 0.05, -0.02));
        let all = assemble(&model, &s).unwrap();
        let p = platform_matrices(&s, &model.body, model.coriolis).unwrap();
        assert_eq!(all.mass, p.mass);
    }

    #[test]
    fn gravity_compensation_is_equilibrium() {
        let model = DynamicsModel::default();
        let s = home_state(&model);
        let g = assemble(&model, &s).unwrap().gravity;
        let acc = forward_dynamics(&model, &s.position, &s.velocity, &g).unwrap();
        assert!(acc.amax() < 1e-12);
        let fall = forward_dynamics(&model, &s.position, &s.velocity, &Vec6::zeros()).unwrap();
        assert!(fall[2] < 0.0);
    }

    #[test]
    fn doubling_masses_doubles_static_force() {
        let model = DynamicsModel::default();
        let heavy = model.with_mass_scale(2.0);
        let s = TaskState::at_rest(Vec6::new(0.01, 0.0, 0.25, 0.02, 0.03, 0.0));
        let f1 = inverse_dynamics(&model, &s).unwrap();
        let f2 = inverse_dynamics(&heavy, &s).unwrap();
        assert_relative_eq!(f2, f1 * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn loads_reconstruct_force() {
        let model = DynamicsModel::default();
        let s = TaskState::from_pose(&crate::geometry::constrained_pose(0.3, 0.1, 0.26, &model.geometry));
        let f = Vec6::new(1.0, -2.0, 120.0, 0.5, -0.3, 0.1);
        let loads = actuator_loads(&model.geometry, &s.position, &f).unwrap();
        let mut back = Vec6::zeros();
        let base = base_anchors(&model.geometry);
        for leg in 0..3 {
            let k = leg_kinematics(&s, &model.geometry, leg).unwrap();
            let jt = leg_jacobian(&s, &model.geometry, leg).transpose();
            let dir = base[leg].normalize();
            back += jt * (k.unit * loads.axial[leg] + Vec3::new(-dir.y, dir.x, 0.0) * loads.lateral[leg]);
        }
        assert_relative_eq!(back, f, epsilon = 1e-9);
        // level pose under a pure vertical load shares it equally
        let h = home_state(&model);
        let l = actuator_loads(&model.geometry, &h.position, &Vec6::new(0.0, 0.0, 90.0, 0.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(l.axial[0], l.axial[1], epsilon = 1e-9);
        assert_relative_eq!(l.axial[0], l.axial[2], epsilon = 1e-9);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let body = PlatformBody { mass: -1.0, ..Default::default() };
        assert!(body.validate().is_err());
        let mut a = ActuatorParams::default();
        a.piston_inertia[(0, 1)] = 1.0;
        assert!(a.validate().is_err());
        assert!(DynamicsModel::default().validate().is_ok());
    }
}
