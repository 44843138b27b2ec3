//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3, Vector6};
use rehab_core::dynamics::{DynamicsModel, TaskState};
use rehab_core::geometry::PlatformGeometry;

pub type V3 = Vector3<f64>;

fn rx(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}
fn ry(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}
fn rz(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}
fn drx(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}
fn dry(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}
fn drz(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Rotation and its time derivative built from elementary rotations.
pub fn rotation_and_rate(x: &Vector6<f64>, xd: &Vector6<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let (r, p, y) = (x[3], x[4], x[5]);
    let rot = rz(y) * ry(p) * rx(r);
    let dot = drz(y) * ry(p) * rx(r) * xd[5]
        + rz(y) * dry(p) * rx(r) * xd[4]
        + rz(y) * ry(p) * drx(r) * xd[3];
    (rot, dot)
}

pub fn vee(m: &Matrix3<f64>) -> V3 {
    V3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

pub fn base_points(g: &PlatformGeometry) -> [V3; 3] {
    let r = g.base_radius;
    let h = 3f64.sqrt() / 2.0;
    [V3::new(r, 0.0, 0.0), V3::new(-r / 2.0, h * r, 0.0), V3::new(-r / 2.0, -h * r, 0.0)]
}

pub fn top_points(g: &PlatformGeometry) -> [V3; 3] {
    let r = g.platform_radius;
    let h = 3f64.sqrt() / 2.0;
    [V3::new(r, 0.0, 0.0), V3::new(-r / 2.0, h * r, 0.0), V3::new(-r / 2.0, -h * r, 0.0)]
}

/// Attachment point and its velocity for leg `i`.
pub fn attachment(state: &TaskState, g: &PlatformGeometry, i: usize) -> (V3, V3) {
    let (rot, dot) = rotation_and_rate(&state.position, &state.velocity);
    let b = top_points(g)[i];
    let c = V3::new(state.position[0], state.position[1], state.position[2]);
    let cd = V3::new(state.velocity[0], state.velocity[1], state.velocity[2]);
    (c + rot * b, cd + dot * b)
}

/// Kinetic energy of one actuator from its part velocities.
pub fn leg_kinetic_energy(
    a: &V3,
    x: &V3,
    v: &V3,
    p: &rehab_core::ActuatorParams,
) -> f64 {
    let d = x - a;
    let l = d.norm();
    let u = d / l;
    let ld = u.dot(v);
    let ud = (v - u * ld) / l;
    let w = u.cross(&ud);
    let v1 = ud * p.piston_half_length;
    let v2 = v - ud * p.stroke_half_length;
    0.5 * p.piston_mass * v1.norm_squared()
        + 0.5 * p.stroke_mass * v2.norm_squared()
        + 0.5 * w.dot(&((p.piston_inertia + p.stroke_inertia) * w))
}

/// Potential energy of one actuator with gravity `g` (acceleration vector).
pub fn leg_potential_energy(a: &V3, x: &V3, p: &rehab_core::ActuatorParams, g: &V3) -> f64 {
    let u = (x - a).normalize();
    let c1 = a + u * p.piston_half_length;
    let c2 = x - u * p.stroke_half_length;
    -g.dot(&(c1 * p.piston_mass + c2 * p.stroke_mass))
}

pub fn kinetic_energy(model: &DynamicsModel, state: &TaskState) -> f64 {
    let (rot, dot) = rotation_and_rate(&state.position, &state.velocity);
    let wb = vee(&(rot.transpose() * dot));
    let cd = V3::new(state.velocity[0], state.velocity[1], state.velocity[2]);
    let mut e = 0.5 * model.body.mass * cd.norm_squared() + 0.5 * wb.dot(&(model.body.inertia * wb));
    let base = base_points(&model.geometry);
    for i in 0..3 {
        let (x, v) = attachment(state, &model.geometry, i);
        e += leg_kinetic_energy(&base[i], &x, &v, &model.actuators[i]);
    }
    e
}

pub fn potential_energy(model: &DynamicsModel, position: &Vector6<f64>) -> f64 {
    let state = TaskState::at_rest(*position);
    let c = V3::new(position[0], position[1], position[2]);
    let g = model.body.gravity;
    let mut e = -model.body.mass * g.dot(&c);
    let base = base_points(&model.geometry);
    for i in 0..3 {
        let (x, _) = attachment(&state, &model.geometry, i);
        e += leg_potential_energy(&base[i], &x, &model.actuators[i], &g);
    }
    e
}

pub fn total_energy(model: &DynamicsModel, state: &TaskState) -> f64 {
    kinetic_energy(model, state) + potential_energy(model, &state.position)
}

/// Central difference of `f` at `t = 0`.
pub fn central<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}
