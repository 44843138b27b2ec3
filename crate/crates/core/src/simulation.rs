//! Closed-loop simulation: reference generation, computed-torque tracking of
//! the rigid-body model with RK4 integration, and RMS error reporting.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    actuator_loads, constrained_task_state, forward_dynamics, inverse_dynamics, DynamicsModel,
    ReducedMotion, TaskState, Vec6,
};
use crate::error::{GeometryError, SimulationError};
use crate::geometry::{
    forward_kinematics, inverse_kinematics, leg_lengths_from_frame, resolve_constraints,
    wrap_angle, LegLengths, PlatformGeometry, Pose,
};

/// Smallest accuracy reported for the published simulation study.
pub const PUBLISHED_MIN_ACCURACY: f64 = 96.2975;

pub const ACCURACY_METRIC: &str = "accuracy% = 100 * (1 - RMS(error) / RMS(reference)); z measured from home height";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Step,
    Sine,
    /// Half-amplitude step plus half-amplitude sine.
    Composite,
}

/// Reference for the independent coordinates `(alpha, beta, z)`. Channel
/// arrays are ordered `[alpha rad, beta rad, z m]`; the z channel is a
/// displacement from the home height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTrajectory {
    pub kind: ReferenceKind,
    pub amplitude: [f64; 3],
    #[serde(default)]
    pub offset: [f64; 3],
    #[serde(default = "default_frequency")]
    pub frequency: f64,
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub sample_dt: f64,
    #[serde(default)]
    pub step_time: f64,
    #[serde(default = "default_ramp")]
    pub ramp_time: f64,
}

fn default_frequency() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_ramp() -> f64 {
    0.05
}

impl ReferenceTrajectory {
    pub fn sine(amplitude: [f64; 3], offset: [f64; 3], frequency: f64, duration: f64) -> Self {
        Self {
            kind: ReferenceKind::Sine,
            amplitude,
            offset,
            frequency,
            duration,
            sample_dt: default_dt(),
            step_time: 0.0,
            ramp_time: default_ramp(),
        }
    }

    pub fn step(amplitude: [f64; 3], offset: [f64; 3], step_time: f64, duration: f64) -> Self {
        Self {
            kind: ReferenceKind::Step,
            step_time,
            ..Self::sine(amplitude, offset, 1.0, duration)
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: &str| Err(SimulationError::InvalidReference(m.into()));
        let finite = self.amplitude.iter().chain(&self.offset).all(|v| v.is_finite());
        if !finite {
            return bad("amplitudes and offsets must be finite");
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad("duration must be >= 0");
        }
        if !(self.sample_dt > 0.0) {
            return bad("sample_dt must be > 0");
        }
        if self.kind != ReferenceKind::Step && !(self.frequency >= 0.0 && self.frequency.is_finite()) {
            return bad("frequency must be >= 0");
        }
        if self.kind != ReferenceKind::Sine && !(self.ramp_time > 0.0) {
            return bad("ramp_time must be > 0");
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration / self.sample_dt).round() as usize
    }

    /// Reduced coordinates at `t` with the z channel absolute.
    pub fn motion_at(&self, t: f64, home_z: f64) -> ReducedMotion {
        let mut p = Vector3::from(self.offset);
        let mut v = Vector3::zeros();
        let mut a = Vector3::zeros();
        let (s, ds, dds) = self.shape(t);
        for c in 0..3 {
            p[c] += self.amplitude[c] * s;
            v[c] = self.amplitude[c] * ds;
            a[c] = self.amplitude[c] * dds;
        }
        p.z += home_z;
        ReducedMotion { position: p, velocity: v, acceleration: a }
    }

    /// Unit waveform and its first two derivatives.
    fn shape(&self, t: f64) -> (f64, f64, f64) {
        let sine = || {
            let w = 2.0 * PI * self.frequency;
            let (s, c) = (w * t).sin_cos();
            (s, w * c, -w * w * s)
        };
        let ramp = || cosine_ramp(t - self.step_time, self.ramp_time);
        match self.kind {
            ReferenceKind::Sine => sine(),
            ReferenceKind::Step => ramp(),
            ReferenceKind::Composite => {
                let (a, b) = (sine(), ramp());
                (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1), 0.5 * (a.2 + b.2))
            }
        }
    }
}

/// Raised-cosine transition from 0 to 1 over `[0, width]`.
pub fn cosine_ramp(tau: f64, width: f64) -> (f64, f64, f64) {
    if tau <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if tau >= width {
        (1.0, 0.0, 0.0)
    } else {
        let k = PI / width;
        let (s, c) = (k * tau).sin_cos();
        (0.5 * (1.0 - c), 0.5 * k * s, 0.5 * k * k * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub motion: ReducedMotion,
    pub pose: Pose,
    pub lengths: LegLengths,
}

/// Samples the reference on its grid, rejecting any sample outside the
/// workspace.
pub fn generate_reference(
    spec: &ReferenceTrajectory,
    geom: &PlatformGeometry,
) -> Result<Vec<ReferenceSample>, SimulationError> {
    spec.validate()?;
    let home_z = geom.home_height();
    (0..spec.sample_count())
        .map(|k| {
            let t = k as f64 * spec.sample_dt;
            let motion = spec.motion_at(t, home_z);
            let (pose, lengths) = reference_pose(&motion, geom)
                .map_err(|source| SimulationError::Workspace { t, source })?;
            Ok(ReferenceSample { t, motion, pose, lengths })
        })
        .collect()
}

fn reference_pose(
    motion: &ReducedMotion,
    geom: &PlatformGeometry,
) -> Result<(Pose, LegLengths), GeometryError> {
    let q = motion.position;
    let pose = resolve_constraints(q.x, q.y, q.z, geom)?;
    let lengths = inverse_kinematics(&pose, geom)?;
    Ok((pose, lengths))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LoopMode {
    /// Plant and controller share one model.
    Consistency,
    /// Plant masses and inertias scaled by `mass_scale`.
    Mismatch { mass_scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    /// Integration step [s]; the reference `sample_dt` must be a multiple.
    pub dt: f64,
    pub mode: LoopMode,
    pub natural_frequency_hz: f64,
    pub damping_ratio: f64,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            mode: LoopMode::Consistency,
            natural_frequency_hz: 5.0,
            damping_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub reference: Pose,
    pub achieved: Pose,
    pub lengths: LegLengths,
    /// Axial actuator forces [N].
    pub forces: [f64; 3],
    /// Reference minus achieved for `[alpha, beta, z]`.
    pub error: [f64; 3],
    /// Task-state error `X_ref - X`, roll/pitch/yaw angles.
    pub task_error: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub dt: f64,
    /// Datum subtracted from z before computing accuracy.
    pub z_datum: f64,
    pub samples: Vec<TraceSample>,
}

/// A run that stopped early; `trace` holds the samples recorded so far.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("simulation aborted after {} samples: {error}", .trace.samples.len())]
pub struct SimulationAbort {
    pub trace: SimulationTrace,
    pub error: SimulationError,
}

struct Controller<'a> {
    model: &'a DynamicsModel,
    reference: &'a ReferenceTrajectory,
    home_z: f64,
    kp: f64,
    kd: f64,
}

impl Controller<'_> {
    fn desired(&self, t: f64) -> Result<TaskState, SimulationError> {
        let motion = self.reference.motion_at(t, self.home_z);
        Ok(constrained_task_state(&motion, &self.model.geometry)?)
    }

    fn force(&self, t: f64, x: &Vec6, v: &Vec6) -> Result<Vec6, SimulationError> {
        let r = self.desired(t)?;
        let mut e = r.position - x;
        for i in 3..6 {
            e[i] = wrap_angle(e[i]);
        }
        let cmd = r.acceleration + (r.velocity - v) * self.kd + e * self.kp;
        let state = TaskState { position: *x, velocity: *v, acceleration: cmd };
        Ok(inverse_dynamics(self.model, &state)?)
    }
}

/// Tracks the reference with computed-torque control of the rigid-body model.
pub fn run_closed_loop(
    spec: &ReferenceTrajectory,
    model: &DynamicsModel,
    config: &LoopConfig,
) -> Result<SimulationTrace, SimulationAbort> {
    let geom = &model.geometry;
    let home_z = geom.home_height();
    let empty = SimulationTrace { dt: spec.sample_dt, z_datum: home_z, samples: Vec::new() };
    let abort = |trace: SimulationTrace, error: SimulationError| SimulationAbort { trace, error };

    let setup = || -> Result<(usize, DynamicsModel), SimulationError> {
        spec.validate()?;
        model.validate()?;
        if !(config.dt > 0.0) || !(config.natural_frequency_hz > 0.0) || !(config.damping_ratio >= 0.0) {
            return Err(SimulationError::InvalidReference("invalid loop configuration".into()));
        }
        let ratio = spec.sample_dt / config.dt;
        let sub = ratio.round();
        if sub < 1.0 || (ratio - sub).abs() > 1e-9 * ratio {
            return Err(SimulationError::InvalidReference(
                "sample_dt must be an integer multiple of the integration step".into(),
            ));
        }
        let plant = match config.mode {
            LoopMode::Consistency => *model,
            LoopMode::Mismatch { mass_scale } => {
                if !(mass_scale > 0.0) {
                    return Err(SimulationError::InvalidReference("mass_scale must be > 0".into()));
                }
                model.with_mass_scale(mass_scale)
            }
        };
        Ok((sub as usize, plant))
    };
    let (substeps, plant) = setup().map_err(|e| abort(empty.clone(), e))?;

    let wn = 2.0 * PI * config.natural_frequency_hz;
    let ctrl = Controller {
        model,
        reference: spec,
        home_z,
        kp: wn * wn,
        kd: 2.0 * config.damping_ratio * wn,
    };
    let accel = |t: f64, x: &Vec6, v: &Vec6| -> Result<Vec6, SimulationError> {
        let f = ctrl.force(t, x, v)?;
        Ok(forward_dynamics(&plant, x, v, &f)?)
    };

    let mut trace = empty;
    let n = spec.sample_count();
    trace.samples.reserve(n);
    let start = match ctrl.desired(0.0) {
        Ok(s) => s,
        Err(e) => return Err(abort(trace, e)),
    };
    let (mut x, mut v) = (start.position, start.velocity);
    let mut guess = geom.home_pose();
    let dt = config.dt;

    for k in 0..n {
        let t = k as f64 * spec.sample_dt;
        let sample = record(&ctrl, geom, t, &x, &v, &guess);
        match sample {
            Ok(s) => {
                guess = s.achieved;
                trace.samples.push(s);
            }
            Err(e) => return Err(abort(trace, e)),
        }
        if k + 1 == n {
            break;
        }
        for j in 0..substeps {
            let t0 = t + j as f64 * dt;
            match rk4_step(&accel, t0, &x, &v, dt) {
                Ok((nx, nv)) => {
                    x = nx;
                    v = nv;
                }
                Err(e) => return Err(abort(trace, e)),
            }
        }
    }
    Ok(trace)
}

fn rk4_step<F>(f: &F, t: f64, x: &Vec6, v: &Vec6, dt: f64) -> Result<(Vec6, Vec6), SimulationError>
where
    F: Fn(f64, &Vec6, &Vec6) -> Result<Vec6, SimulationError>,
{
    let h = 0.5 * dt;
    let a1 = f(t, x, v)?;
    let (x2, v2) = (x + v * h, v + a1 * h);
    let a2 = f(t + h, &x2, &v2)?;
    let (x3, v3) = (x + v2 * h, v + a2 * h);
    let a3 = f(t + h, &x3, &v3)?;
    let (x4, v4) = (x + v3 * dt, v + a3 * dt);
    let a4 = f(t + dt, &x4, &v4)?;
    let nx = x + (v + v2 * 2.0 + v3 * 2.0 + v4) * (dt / 6.0);
    let nv = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
    Ok((nx, nv))
}

fn record(
    ctrl: &Controller,
    geom: &PlatformGeometry,
    t: f64,
    x: &Vec6,
    v: &Vec6,
    guess: &Pose,
) -> Result<TraceSample, SimulationError> {
    let motion = ctrl.reference.motion_at(t, ctrl.home_z);
    let (reference, _) =
        reference_pose(&motion, geom).map_err(|source| SimulationError::Workspace { t, source })?;
    let desired = constrained_task_state(&motion, geom)?;

    let state = TaskState::at_rest(*x);
    let lengths = leg_lengths_from_frame(&state.center(), &state.rotation(), geom);
    lengths
        .check_stroke(geom)
        .map_err(|source| SimulationError::Workspace { t, source })?;
    let achieved = forward_kinematics(&lengths, geom, guess)?;

    let force = ctrl.force(t, x, v)?;
    let loads = actuator_loads(geom, x, &force)?;

    let mut task_error = [0.0; 6];
    for i in 0..6 {
        let e = desired.position[i] - x[i];
        task_error[i] = if i >= 3 { wrap_angle(e) } else { e };
    }
    Ok(TraceSample {
        t,
        reference,
        achieved,
        lengths,
        forces: loads.axial,
        error: [
            wrap_angle(reference.alpha - achieved.alpha),
            reference.beta - achieved.beta,
            reference.z - achieved.z,
        ],
        task_error,
    })
}

pub const TRACE_HEADER: [&str; 16] = [
    "t_s",
    "ref_alpha_rad",
    "ref_beta_rad",
    "ref_z_m",
    "out_alpha_rad",
    "out_beta_rad",
    "out_z_m",
    "L1_m",
    "L2_m",
    "L3_m",
    "F1_N",
    "F2_N",
    "F3_N",
    "err_alpha_rad",
    "err_beta_rad",
    "err_z_m",
];

impl SimulationTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        for s in &self.samples {
            let row = [
                s.t,
                s.reference.alpha,
                s.reference.beta,
                s.reference.z,
                s.achieved.alpha,
                s.achieved.beta,
                s.achieved.z,
                s.lengths.0[0],
                s.lengths.0[1],
                s.lengths.0[2],
                s.forces[0],
                s.forces[1],
                s.forces[2],
                s.error[0],
                s.error[1],
                s.error[2],
            ];
            w.write_record(row.iter().map(|v| format!("{v:.12e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn max_abs_error(&self) -> [f64; 3] {
        let mut m = [0.0f64; 3];
        for s in &self.samples {
            for c in 0..3 {
                m[c] = m[c].max(s.error[c].abs());
            }
        }
        m
    }

    /// Largest task-state error norm over the trace.
    pub fn max_task_error(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.task_error.iter().map(|e| e * e).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// `100 * (1 - rms(error) / rms(reference))`, or `None` when the reference
/// has no power.
pub fn accuracy_percent(reference: &[f64], error: &[f64]) -> Option<f64> {
    let r = rms(reference);
    (r > 0.0).then(|| 100.0 * (1.0 - rms(error) / r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelReport {
    pub channel: &'static str,
    pub rms_error: f64,
    pub rms_reference: f64,
    pub accuracy_percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmsReport {
    pub samples: usize,
    pub metric: &'static str,
    pub channels: Vec<ChannelReport>,
    pub min_accuracy_percent: Option<f64>,
    pub published_min_accuracy_percent: f64,
}

pub fn rms_report(trace: &SimulationTrace) -> Result<RmsReport, SimulationError> {
    if trace.samples.is_empty() {
        return Err(SimulationError::EmptyTrace);
    }
    let names = ["alpha", "beta", "z"];
    let channels: Vec<ChannelReport> = (0..3)
        .map(|c| {
            let reference: Vec<f64> = trace
                .samples
                .iter()
                .map(|s| match c {
                    0 => s.reference.alpha,
                    1 => s.reference.beta,
                    _ => s.reference.z - trace.z_datum,
                })
                .collect();
            let error: Vec<f64> = trace.samples.iter().map(|s| s.error[c]).collect();
            ChannelReport {
                channel: names[c],
                rms_error: rms(&error),
                rms_reference: rms(&reference),
                accuracy_percent: accuracy_percent(&reference, &error),
            }
        })
        .collect();
    let min_accuracy_percent = channels
        .iter()
        .filter_map(|c| c.accuracy_percent)
        .reduce(f64::min);
    Ok(RmsReport {
        samples: trace.samples.len(),
        metric: ACCURACY_METRIC,
        channels,
        min_accuracy_percent,
        published_min_accuracy_percent: PUBLISHED_MIN_ACCURACY,
    })
}
