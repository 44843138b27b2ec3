//! Per-actuator PID position control against a lumped linear-motor plant.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ControlError;
use crate::simulation::{accuracy_percent, cosine_ramp};

/// Published step tracking accuracies of motors 1..3 [%].
pub const PUBLISHED_STEP_ACCURACY: [f64; 3] = [94.6, 96.86, 96.8];
/// Published 0.5 Hz sine tracking accuracies of motors 1..3 [%].
pub const PUBLISHED_SINE_ACCURACY: [f64; 3] = [89.8, 88.8, 84.3];

/// Rated actuator force [N].
pub const RATED_FORCE: f64 = 900.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    #[serde(default = "default_output_limit")]
    pub output_limit: f64,
    /// Bound on the integral contribution `ki * integral` [N].
    #[serde(default = "default_integral_limit")]
    pub integral_limit: f64,
}

fn default_output_limit() -> f64 {
    RATED_FORCE
}
fn default_integral_limit() -> f64 {
    600.0
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Self {
        Self {
            kp,
            ki,
            kd,
            output_limit: default_output_limit(),
            integral_limit: default_integral_limit(),
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let gains = [self.kp, self.ki, self.kd];
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(ControlError::InvalidConfig("gains must be finite and >= 0".into()));
        }
        if !(self.output_limit > 0.0 && self.integral_limit > 0.0) {
            return Err(ControlError::InvalidConfig("limits must be > 0".into()));
        }
        Ok(())
    }
}

impl Default for PidGains {
    fn default() -> Self {
        Self::new(20000.0, 30000.0, 1000.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub previous_error: Option<f64>,
}

impl PidState {
    pub fn integral_term(&self, gains: &PidGains) -> f64 {
        gains.ki * self.integral
    }
}

/// One controller update. Integration is skipped while the output is
/// saturated in the direction of the error.
pub fn pid_step(gains: &PidGains, state: &mut PidState, error: f64, dt: f64) -> f64 {
    let derivative = match state.previous_error {
        Some(prev) if dt > 0.0 => (error - prev) / dt,
        _ => 0.0,
    };
    state.previous_error = Some(error);

    let mut integral = state.integral + error * dt;
    if gains.ki > 0.0 {
        let bound = gains.integral_limit / gains.ki;
        integral = integral.clamp(-bound, bound);
    }
    let unclamped = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    let saturated = unclamped.abs() > gains.output_limit;
    if !(saturated && unclamped.signum() == error.signum()) {
        state.integral = integral;
    }
    let u = gains.kp * error + gains.ki * state.integral + gains.kd * derivative;
    u.clamp(-gains.output_limit, gains.output_limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorPlant {
    /// Moving mass reflected to the actuator axis [kg].
    pub mass: f64,
    /// Viscous friction [N s/m].
    pub viscous: f64,
    /// Coulomb friction [N].
    pub coulomb: f64,
    /// Constant load opposing extension [N].
    pub gravity_load: f64,
    /// Position sensor noise standard deviation [m].
    pub noise_sigma: f64,
    /// Delay between sampling and actuation [s].
    pub latency: f64,
    /// Travel used for divergence detection [m].
    pub stroke: f64,
}

impl Default for MotorPlant {
    fn default() -> Self {
        Self {
            mass: 28.0,
            viscous: 200.0,
            coulomb: 40.0,
            gravity_load: 275.0,
            noise_sigma: 2e-4,
            latency: 0.01,
            stroke: 0.20,
        }
    }
}

impl MotorPlant {
    pub fn ideal() -> Self {
        Self { viscous: 0.0, coulomb: 0.0, gravity_load: 0.0, noise_sigma: 0.0, latency: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = self.mass > 0.0
            && self.viscous >= 0.0
            && self.coulomb >= 0.0
            && self.gravity_load.is_finite()
            && self.noise_sigma >= 0.0
            && self.latency >= 0.0
            && self.stroke > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ControlError::InvalidConfig("plant parameters out of range".into()))
        }
    }

    /// Velocity scale of the smoothed Coulomb friction [m/s].
    const FRICTION_SMOOTHING: f64 = 1e-2;

    fn acceleration(&self, v: f64, u: f64) -> f64 {
        let friction = self.viscous * v + self.coulomb * (v / Self::FRICTION_SMOOTHING).tanh();
        (u - friction - self.gravity_load) / self.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingKind {
    Step,
    Sine,
}

/// Position reference relative to the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingReference {
    pub kind: TrackingKind,
    pub amplitude: f64,
    #[serde(default = "default_frequency")]
    pub frequency: f64,
    #[serde(default = "default_step_time")]
    pub step_time: f64,
    /// Raised-cosine rise time of the step [s]; 0 gives an ideal step.
    #[serde(default)]
    pub ramp_time: f64,
    pub duration: f64,
}

fn default_frequency() -> f64 {
    0.5
}
fn default_step_time() -> f64 {
    1.0
}

impl TrackingReference {
    pub fn step() -> Self {
        Self {
            kind: TrackingKind::Step,
            amplitude: 0.03,
            frequency: 0.5,
            step_time: 1.0,
            ramp_time: 0.0,
            duration: 10.0,
        }
    }

    pub fn sine() -> Self {
        Self { kind: TrackingKind::Sine, ..Self::step() }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            TrackingKind::Step if self.ramp_time > 0.0 => {
                self.amplitude * cosine_ramp(t - self.step_time, self.ramp_time).0
            }
            TrackingKind::Step => {
                if t >= self.step_time {
                    self.amplitude
                } else {
                    0.0
                }
            }
            TrackingKind::Sine => self.amplitude * (2.0 * PI * self.frequency * t).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingConfig {
    /// Plant integration step [s].
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Controller period [s]; a multiple of `dt`.
    #[serde(default = "default_control_period")]
    pub control_period: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_control_period() -> f64 {
    1e-2
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self { dt: default_dt(), control_period: default_control_period(), seed: 0 }
    }
}

impl TrackingConfig {
    fn substeps(&self) -> Result<usize, ControlError> {
        let ratio = self.control_period / self.dt;
        let n = ratio.round();
        if !(self.dt > 0.0) || n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(ControlError::InvalidConfig(
                "control_period must be a positive multiple of dt".into(),
            ));
        }
        Ok(n as usize)
    }
}

/// Samples at the controller rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotorTrace {
    pub t: Vec<f64>,
    pub reference: Vec<f64>,
    pub position: Vec<f64>,
    pub command: Vec<f64>,
    /// Largest `|ki * integral|` seen [N].
    pub max_integral_term: f64,
}

impl MotorTrace {
    pub fn accuracy_percent(&self) -> Option<f64> {
        let err: Vec<f64> = self.reference.iter().zip(&self.position).map(|(r, p)| r - p).collect();
        accuracy_percent(&self.reference, &err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingResult {
    pub motors: Vec<MotorTrace>,
    pub accuracy_percent: Vec<Option<f64>>,
    pub published_accuracy_percent: [f64; 3],
}

/// Simulates one motor loop.
pub fn simulate_motor(
    gains: &PidGains,
    plant: &MotorPlant,
    reference: &TrackingReference,
    config: &TrackingConfig,
    seed: u64,
    motor: usize,
) -> Result<MotorTrace, ControlError> {
    gains.validate()?;
    plant.validate()?;
    let substeps = config.substeps()?;
    if !(reference.duration >= 0.0) || !reference.amplitude.is_finite() {
        return Err(ControlError::InvalidConfig("invalid tracking reference".into()));
    }
    let dt = config.dt;
    let period = config.control_period;
    let ticks = (reference.duration / period).round() as usize;
    let delay = (plant.latency / dt).round() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, plant.noise_sigma)
        .map_err(|e| ControlError::InvalidConfig(e.to_string()))?;

    let mut out = MotorTrace {
        t: Vec::with_capacity(ticks),
        reference: Vec::with_capacity(ticks),
        position: Vec::with_capacity(ticks),
        command: Vec::with_capacity(ticks),
        max_integral_term: 0.0,
    };
    let (mut x, mut v) = (0.0f64, 0.0f64);
    let mut history: VecDeque<f64> = VecDeque::with_capacity(delay + 1);
    history.push_back(x);
    let mut pid = PidState::default();

    for k in 0..ticks {
        let t = k as f64 * period;
        let delayed = *history.front().unwrap_or(&x);
        let measured = if plant.noise_sigma > 0.0 { delayed + noise.sample(&mut rng) } else { delayed };
        let r = reference.value(t);
        let u = pid_step(gains, &mut pid, r - measured, period);
        out.max_integral_term = out.max_integral_term.max(pid.integral_term(gains).abs());
        out.t.push(t);
        out.reference.push(r);
        out.position.push(x);
        out.command.push(u);

        for _ in 0..substeps {
            let f = |v: f64| plant.acceleration(v, u);
            let a1 = f(v);
            let a2 = f(v + 0.5 * dt * a1);
            let a3 = f(v + 0.5 * dt * a2);
            let a4 = f(v + dt * a3);
            let (v2, v3, v4) = (v + 0.5 * dt * a1, v + 0.5 * dt * a2, v + dt * a3);
            x += dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
            v += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
            history.push_back(x);
            if history.len() > delay + 1 {
                history.pop_front();
            }
        }
        if !x.is_finite() || x.abs() > 10.0 * plant.stroke {
            return Err(ControlError::Diverged { motor, t: t + period, position: x });
        }
    }
    Ok(out)
}

/// Runs the three motor loops in sequence. Motor `i` draws its noise from
/// seed `config.seed + i`.
pub fn simulate_tracking(
    gains: &[PidGains; 3],
    plants: &[MotorPlant; 3],
    reference: &TrackingReference,
    config: &TrackingConfig,
) -> Result<TrackingResult, ControlError> {
    let motors = (0..3)
        .map(|i| {
            simulate_motor(&gains[i], &plants[i], reference, config, config.seed.wrapping_add(i as u64), i + 1)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let accuracy_percent = motors.iter().map(MotorTrace::accuracy_percent).collect();
    let published_accuracy_percent = match reference.kind {
        TrackingKind::Step => PUBLISHED_STEP_ACCURACY,
        TrackingKind::Sine => PUBLISHED_SINE_ACCURACY,
    };
    Ok(TrackingResult { motors, accuracy_percent, published_accuracy_percent })
}

pub const TRACKING_HEADER: [&str; 8] =
    ["t_s", "ref_m", "pos1_m", "pos2_m", "pos3_m", "u1_N", "u2_N", "u3_N"];

impl TrackingResult {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACKING_HEADER)?;
        let m = &self.motors;
        for k in 0..m[0].t.len() {
            let row = [
                m[0].t[k],
                m[0].reference[k],
                m[0].position[k],
                m[1].position[k],
                m[2].position[k],
                m[0].command[k],
                m[1].command[k],
                m[2].command[k],
            ];
            w.write_record(row.iter().map(|v| format!("{v:.12e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Box and budget for [`tune_gains`]. Bounds are `[kp, ki, kd]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSearch {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub initial: PidGains,
    /// Maximum number of closed-loop evaluations.
    pub budget: usize,
}

impl Default for GainSearch {
    fn default() -> Self {
        Self {
            lower: [1000.0, 0.0, 50.0],
            upper: [100000.0, 200000.0, 5000.0],
            initial: PidGains::default(),
            budget: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningResult {
    pub gains: PidGains,
    /// `None` when no evaluation was made.
    pub accuracy_percent: Option<f64>,
    pub evaluations: usize,
}

/// Maximizes tracking accuracy on one plant: box corners first, then a
/// coordinate search in log space. A zero lower bound on a gain is searched
/// from 1% of its upper bound, with 0 kept as a candidate.
pub fn tune_gains(
    plant: &MotorPlant,
    reference: &TrackingReference,
    search: &GainSearch,
    config: &TrackingConfig,
) -> Result<TuningResult, ControlError> {
    search.initial.validate()?;
    for c in 0..3 {
        if !(search.lower[c] >= 0.0 && search.upper[c] >= search.lower[c]) {
            return Err(ControlError::InvalidConfig("search box bounds out of order".into()));
        }
    }
    if search.budget == 0 {
        return Ok(TuningResult { gains: search.initial, accuracy_percent: None, evaluations: 0 });
    }

    let mut evaluations = 0usize;
    let mut evaluate = |g: &[f64; 3]| -> Option<Option<f64>> {
        if evaluations >= search.budget {
            return None;
        }
        evaluations += 1;
        let gains = with_gains(&search.initial, g);
        let score = simulate_motor(&gains, plant, reference, config, config.seed, 1)
            .ok()
            .and_then(|t| t.accuracy_percent());
        Some(score)
    };

    let mut best: Option<([f64; 3], f64)> = None;
    let consider = |g: [f64; 3], score: Option<f64>, best: &mut Option<([f64; 3], f64)>| {
        if let Some(s) = score {
            if best.is_none_or(|(_, b)| s > b) {
                *best = Some((g, s));
            }
        }
    };

    let corners: Vec<[f64; 3]> = (0..8)
        .map(|m| {
            let mut g = [0.0; 3];
            for (c, gc) in g.iter_mut().enumerate() {
                *gc = if m >> c & 1 == 0 { search.lower[c] } else { search.upper[c] };
            }
            g
        })
        .collect();
    let initial = [search.initial.kp, search.initial.ki, search.initial.kd];
    let initial = clamp_box(initial, search);
    for g in corners.into_iter().chain(std::iter::once(initial)) {
        match evaluate(&g) {
            Some(score) => consider(g, score, &mut best),
            None => break,
        }
    }

    let mut factor = 2.0f64;
    'search: while factor > 1.01 {
        let Some((center, center_score)) = best else { break };
        let mut improved = false;
        for c in 0..3 {
            for dir in [1.0, -1.0] {
                let mut g = center;
                let base = if g[c] > 0.0 { g[c] } else { (search.upper[c] * 0.01).max(search.lower[c]) };
                g[c] = if dir > 0.0 { base * factor } else { base / factor };
                let g = clamp_box(g, search);
                if g == center {
                    continue;
                }
                let Some(score) = evaluate(&g) else { break 'search };
                if let Some(s) = score {
                    if s > center_score {
                        best = Some((g, s));
                        improved = true;
                        break;
                    }
                }
            }
            if improved {
                break;
            }
        }
        if !improved {
            factor = factor.sqrt();
        }
    }

    match best {
        Some((g, s)) => Ok(TuningResult {
            gains: with_gains(&search.initial, &g),
            accuracy_percent: Some(s),
            evaluations,
        }),
        None => Err(ControlError::TuningFailed { evaluations }),
    }
}

fn with_gains(template: &PidGains, g: &[f64; 3]) -> PidGains {
    PidGains { kp: g[0], ki: g[1], kd: g[2], ..*template }
}

fn clamp_box(mut g: [f64; 3], search: &GainSearch) -> [f64; 3] {
    for c in 0..3 {
        g[c] = g[c].clamp(search.lower[c], search.upper[c]);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_error_zero_output() {
        let mut s = PidState::default();
        assert_eq!(pid_step(&PidGains::new(100.0, 10.0, 5.0), &mut s, 0.0, 0.01), 0.0);
    }

    #[test]
    fn proportional_only() {
        let mut s = PidState::default();
        let u = pid_step(&PidGains::new(100.0, 0.0, 0.0), &mut s, 0.01, 0.01);
        assert_relative_eq!(u, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn output_saturates() {
        let mut s = PidState::default();
        let g = PidGains::new(1e6, 1e3, 0.0);
        assert_eq!(pid_step(&g, &mut s, 10.0, 0.01), g.output_limit);
        assert_eq!(pid_step(&g, &mut s, -10.0, 0.01), -g.output_limit);
        // integration halted during positive saturation
        assert_eq!(s.integral, 0.0);
    }

    #[test]
    fn derivative_uses_previous_error() {
        let mut s = PidState::default();
        let g = PidGains::new(0.0, 0.0, 2.0);
        assert_eq!(pid_step(&g, &mut s, 1.0, 0.1), 0.0);
        assert_relative_eq!(pid_step(&g, &mut s, 1.5, 0.1), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn integral_term_bounded() {
        let mut s = PidState::default();
        let g = PidGains { integral_limit: 50.0, ..PidGains::new(0.0, 100.0, 0.0) };
        for _ in 0..1000 {
            pid_step(&g, &mut s, 1.0, 0.01);
            assert!(s.integral_term(&g).abs() <= 50.0 + 1e-12);
        }
        assert_relative_eq!(s.integral_term(&g), 50.0, epsilon = 1e-12);
    }

    #[test]
    fn step_reference_shape() {
        let r = TrackingReference::step();
        assert_eq!(r.value(0.999), 0.0);
        assert_eq!(r.value(1.0), 0.03);
    }

    #[test]
    fn ideal_plant_tracks_smoothed_step() {
        // critically damped PD on a pure mass, no force limit
        let plant = MotorPlant::ideal();
        let wn = 400.0;
        let gains = PidGains {
            output_limit: 1e9,
            ..PidGains::new(plant.mass * wn * wn, 0.0, 2.0 * plant.mass * wn)
        };
        let reference = TrackingReference { ramp_time: 0.05, ..TrackingReference::step() };
        let cfg = TrackingConfig { control_period: 1e-3, ..Default::default() };
        let tr = simulate_motor(&gains, &plant, &reference, &cfg, 0, 1).unwrap();
        assert!(tr.accuracy_percent().unwrap() >= 99.0, "{:?}", tr.accuracy_percent());
        assert!((tr.position.last().unwrap() - 0.03).abs() < 1e-6);
    }

    #[test]
    fn unstable_gains_detected() {
        let gains = PidGains { output_limit: 1e9, ..PidGains::new(1e9, 0.0, 0.0) };
        let err = simulate_motor(&gains, &MotorPlant::ideal(), &TrackingReference::step(), &TrackingConfig::default(), 0, 2)
            .unwrap_err();
        assert!(matches!(err, ControlError::Diverged { motor: 2, .. }));
    }

    #[test]
    fn zero_budget_returns_initial() {
        let search = GainSearch { budget: 0, ..Default::default() };
        let r = tune_gains(&MotorPlant::default(), &TrackingReference::step(), &search, &TrackingConfig::default())
            .unwrap();
        assert_eq!(r.gains, search.initial);
        assert_eq!(r.evaluations, 0);
    }

    #[test]
    fn bad_period_rejected() {
        let cfg = TrackingConfig { control_period: 1.5e-3, ..Default::default() };
        assert!(simulate_motor(&PidGains::default(), &MotorPlant::default(), &TrackingReference::step(), &cfg, 0, 1).is_err());
    }
}
