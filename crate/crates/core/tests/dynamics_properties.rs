mod common;

use common::*;
use nalgebra::{Vector3, Vector6};
use proptest::prelude::*;
use rehab_core::dynamics::*;
use rehab_core::geometry::{constrained_pose, skew};

fn vec6(r: std::ops::Range<f64>) -> impl Strategy<Value = Vector6<f64>> {
    prop::array::uniform6(r).prop_map(Vector6::from)
}

fn workspace_state() -> impl Strategy<Value = TaskState> {
    (
        -0.02..0.02f64,
        -0.02..0.02f64,
        0.2..0.3f64,
        prop::array::uniform3(-0.3..0.3f64),
        vec6(-1.0..1.0),
        vec6(-2.0..2.0),
    )
        .prop_map(|(x, y, z, a, v, acc)| TaskState {
            position: Vector6::new(x, y, z, a[0], a[1], a[2]),
            velocity: v,
            acceleration: acc,
        })
}

fn along(s: &TaskState, t: f64) -> TaskState {
    TaskState {
        position: s.position + s.velocity * t + s.acceleration * (0.5 * t * t),
        velocity: s.velocity + s.acceleration * t,
        acceleration: s.acceleration,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn skew_matches_cross(v in prop::array::uniform3(-10.0..10.0f64), w in prop::array::uniform3(-10.0..10.0f64)) {
        let (v, w) = (Vector3::from(v), Vector3::from(w));
        let c = Vector3::new(v.y * w.z - v.z * w.y, v.z * w.x - v.x * w.z, v.x * w.y - v.y * w.x);
        prop_assert_eq!(skew(&v) * w, c);
        prop_assert_eq!(skew(&v).transpose(), -skew(&v));
    }

    #[test]
    fn leg_rates_match_finite_differences(s in workspace_state()) {
        let model = DynamicsModel::default();
        let base = base_points(&model.geometry);
        for i in 0..3 {
            let k = leg_kinematics(&s, &model.geometry, i).unwrap();
            let (x, v) = attachment(&s, &model.geometry, i);
            prop_assert!((k.attachment - x).norm() < 1e-14);
            prop_assert!((k.attachment_velocity - v).norm() < 1e-12);
            let len = |t: f64| (attachment(&along(&s, t), &model.geometry, i).0 - base[i]).norm();
            let fd = central(len, 1e-5);
            prop_assert!((k.length_rate - fd).abs() < 1e-6 * fd.abs().max(1.0), "{} {}", k.length_rate, fd);
            let dir = |t: f64| (attachment(&along(&s, t), &model.geometry, i).0 - base[i]).normalize();
            let ud = (dir(1e-5) - dir(-1e-5)) / 2e-5;
            let w = k.unit.cross(&ud);
            prop_assert!((k.angular_velocity - w).norm() < 1e-5 * w.norm().max(1.0));
        }
    }

    #[test]
    fn leg_mass_matches_part_energy(s in workspace_state()) {
        let model = DynamicsModel::default();
        let base = base_points(&model.geometry);
        for i in 0..3 {
            let k = leg_kinematics(&s, &model.geometry, i).unwrap();
            let a = actuator_matrices(&k, &model.actuators[i], &model.body.gravity);
            let v = k.attachment_velocity;
            let e = 0.5 * v.dot(&(a.mass * v));
            let oracle = leg_kinetic_energy(&base[i], &k.attachment, &v, &model.actuators[i]);
            prop_assert!(rel_err(e, oracle) < 1e-9, "{e} {oracle}");
            prop_assert!((a.mass - a.mass.transpose()).amax() < 1e-12);
        }
    }

    #[test]
    fn leg_gravity_is_potential_gradient(s in workspace_state()) {
        let model = DynamicsModel::default();
        let base = base_points(&model.geometry);
        let g = model.body.gravity;
        for i in 0..3 {
            let k = leg_kinematics(&s, &model.geometry, i).unwrap();
            let a = actuator_matrices(&k, &model.actuators[i], &g);
            for j in 0..3 {
                let mut e = Vector3::zeros();
                e[j] = 1.0;
                let pe = |t: f64| leg_potential_energy(&base[i], &(k.attachment + e * t), &model.actuators[i], &g);
                let fd = central(pe, 1e-6);
                prop_assert!((a.gravity[j] - fd).abs() < 1e-5 * a.gravity.norm(), "{} {}", a.gravity[j], fd);
            }
        }
    }

    #[test]
    fn euler_maps_match_rotation_derivative(s in workspace_state()) {
        let (rot, dot) = rotation_and_rate(&s.position, &s.velocity);
        let rates = s.angle_rates();
        let body = vee(&(rot.transpose() * dot));
        let world = vee(&(dot * rot.transpose()));
        let t = t_reverse(s.angles()).unwrap();
        prop_assert!((t * rates - body).norm() < 1e-12 * body.norm().max(1.0));
        prop_assert!((world_rate_map(s.angles()) * rates - world).norm() < 1e-12 * world.norm().max(1.0));
        let tt = |h: f64| t_reverse(along(&s, h).angles()).unwrap();
        let fd = (tt(1e-5) - tt(-1e-5)) / 2e-5;
        prop_assert!((t_reverse_dot(s.angles(), &rates) - fd).amax() < 1e-6);
        let ee = |h: f64| world_rate_map(along(&s, h).angles());
        let fd = (ee(1e-5) - ee(-1e-5)) / 2e-5;
        prop_assert!((world_rate_map_dot(s.angles(), &rates) - fd).amax() < 1e-6);
    }

    #[test]
    fn platform_rotational_energy(s in workspace_state()) {
        let body = PlatformBody::default();
        let p = platform_matrices(&s, &body, CoriolisForm::Lagrangian).unwrap();
        let (rot, dot) = rotation_and_rate(&s.position, &s.velocity);
        let w = vee(&(rot.transpose() * dot));
        let oracle = 0.5 * w.dot(&(body.inertia * w));
        let r = s.angle_rates();
        let e = 0.5 * r.dot(&(p.mass.fixed_view::<3, 3>(3, 3) * r));
        prop_assert!(rel_err(e, oracle) < 1e-9);
    }

    #[test]
    fn leg_jacobian_matches_finite_differences(s in workspace_state()) {
        let model = DynamicsModel::default();
        for i in 0..3 {
            let j = leg_jacobian(&s, &model.geometry, i);
            let pos = |t: f64| attachment(&along(&s, t), &model.geometry, i).0;
            let fd = (pos(1e-5) - pos(-1e-5)) / 2e-5;
            prop_assert!((j * s.velocity - fd).norm() < 1e-6 * fd.norm().max(1.0));
            let jd = leg_jacobian_dot(&s, &model.geometry, i);
            let jj = |t: f64| leg_jacobian(&along(&s, t), &model.geometry, i);
            let fd = (jj(1e-5) - jj(-1e-5)) / 2e-5;
            prop_assert!((jd - fd).amax() < 1e-5);
        }
    }

    #[test]
    fn assembled_mass_symmetric_and_energy_consistent(s in workspace_state()) {
        let model = DynamicsModel::default();
        let m = assemble(&model, &s).unwrap();
        prop_assert!((m.mass - m.mass.transpose()).amax() < 1e-9 * m.mass.norm());
        prop_assert!(m.mass.cholesky().is_some());
        let e = 0.5 * s.velocity.dot(&(m.mass * s.velocity));
        prop_assert!(rel_err(e, kinetic_energy(&model, &s)) < 1e-8);
    }

    #[test]
    fn gravity_is_potential_gradient(s in workspace_state()) {
        let model = DynamicsModel::default();
        let g = assemble(&model, &s).unwrap().gravity;
        for j in 0..6 {
            let mut e = Vector6::zeros();
            e[j] = 1.0;
            let fd = central(|t| potential_energy(&model, &(s.position + e * t)), 1e-6);
            prop_assert!((g[j] - fd).abs() < 1e-5 * g.norm(), "{j}: {} {}", g[j], fd);
        }
    }

    #[test]
    fn power_balance(s in workspace_state()) {
        let model = DynamicsModel::default();
        let f = inverse_dynamics(&model, &s).unwrap();
        let power = s.velocity.dot(&f);
        let de = central(|t| total_energy(&model, &along(&s, t)), 1e-5);
        prop_assert!((de - power).abs() < 1e-6 * power.abs().max(1.0), "{de} {power}");
    }

    #[test]
    fn inverse_forward_roundtrip(s in workspace_state()) {
        let model = DynamicsModel::default();
        let f = inverse_dynamics(&model, &s).unwrap();
        let acc = forward_dynamics(&model, &s.position, &s.velocity, &f).unwrap();
        prop_assert!((acc - s.acceleration).norm() < 1e-9 * s.acceleration.norm().max(1.0));
        let back = inverse_dynamics(&model, &TaskState { acceleration: acc, ..s }).unwrap();
        prop_assert!((back - f).norm() < 1e-9 * f.norm());
    }

    #[test]
    fn constrained_state_matches_finite_differences(
        a in -3.0..3.0f64, b in 0.02..0.3f64, z in 0.2..0.3f64,
        da in -1.0..1.0f64, db in -1.0..1.0f64, dz in -0.1..0.1f64,
        dda in -2.0..2.0f64, ddb in -2.0..2.0f64, ddz in -1.0..1.0f64,
    ) {
        let geom = rehab_core::PlatformGeometry::default();
        let q = |t: f64| Vector3::new(a + da * t + 0.5 * dda * t * t, b + db * t + 0.5 * ddb * t * t, z + dz * t + 0.5 * ddz * t * t);
        let state_at = |t: f64| {
            let m = ReducedMotion {
                position: q(t),
                velocity: Vector3::new(da + dda * t, db + ddb * t, dz + ddz * t),
                acceleration: Vector3::new(dda, ddb, ddz),
            };
            constrained_task_state(&m, &geom).unwrap()
        };
        let s = state_at(0.0);
        let p = constrained_pose(a, b, z, &geom);
        let from_pose = TaskState::from_pose(&p);
        prop_assert!((s.position - from_pose.position).norm() < 1e-12);
        let h = 1e-5;
        let fd_v = (state_at(h).position - state_at(-h).position) / (2.0 * h);
        let fd_a = (state_at(h).velocity - state_at(-h).velocity) / (2.0 * h);
        prop_assert!((s.velocity - fd_v).amax() < 1e-6, "{}", (s.velocity - fd_v).amax());
        prop_assert!((s.acceleration - fd_a).amax() < 1e-5, "{}", (s.acceleration - fd_a).amax());
    }
}

#[test]
fn gravity_compensation_stays_stationary() {
    let model = DynamicsModel::default();
    let start = TaskState::from_pose(&constrained_pose(0.4, 0.1, 0.25, &model.geometry));
    let f = assemble(&model, &start).unwrap().gravity;
    let (mut x, mut v) = (start.position, start.velocity);
    let dt = 1e-3;
    let acc = |x: &Vector6<f64>, v: &Vector6<f64>| forward_dynamics(&model, x, v, &f).unwrap();
    for _ in 0..1000 {
        let k1 = (v, acc(&x, &v));
        let k2 = (v + k1.1 * (dt / 2.0), acc(&(x + k1.0 * (dt / 2.0)), &(v + k1.1 * (dt / 2.0))));
        let k3 = (v + k2.1 * (dt / 2.0), acc(&(x + k2.0 * (dt / 2.0)), &(v + k2.1 * (dt / 2.0))));
        let k4 = (v + k3.1 * dt, acc(&(x + k3.0 * dt), &(v + k3.1 * dt)));
        x += (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (dt / 6.0);
        v += (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (dt / 6.0);
    }
    assert!((x - start.position).amax() < 1e-8);
    assert!(v.amax() < 1e-8);
}

#[test]
fn published_coriolis_form_breaks_power_balance() {
    let model = DynamicsModel { coriolis: CoriolisForm::AsPublished, ..Default::default() };
    let s = TaskState {
        position: Vector6::new(0.01, -0.01, 0.25, 0.1, -0.05, 0.2),
        velocity: Vector6::new(0.2, -0.1, 0.3, 0.8, -0.6, 0.5),
        acceleration: Vector6::zeros(),
    };
    let f = inverse_dynamics(&model, &s).unwrap();
    let de = central(|t| total_energy(&model, &along(&s, t)), 1e-5);
    assert!((de - s.velocity.dot(&f)).abs() > 1e-3);
}
