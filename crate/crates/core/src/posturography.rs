//! Load-cell analytics for the upper (eight foot cells) and lower (three
//! weighing cells) platforms: center of mass, center of pressure, footpad
//! pressures, synthetic load streams and reaction-time detection.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::PostureError;

pub const GRAVITY: f64 = 9.8;
/// Upper (foot) cell capacity [N].
pub const UPPER_CAPACITY: f64 = 10.0 * GRAVITY;
/// Lower (weighing) cell capacity [N].
pub const LOWER_CAPACITY: f64 = 40.0 * GRAVITY;
/// Height of the force origin above ground [m].
pub const COP_HEIGHT: f64 = 0.03;
pub const DEFAULT_LOWER_RADIUS: f64 = 0.25;

/// Published mean footpad pressures [N/cm^2], `[toes, metatarsals, midfoot, heel]`.
pub const FOOTPAD_RIGHT: [f64; 4] = [3.54, 28.24, 0.97, 12.42];
pub const FOOTPAD_LEFT: [f64; 4] = [3.16, 23.85, 1.19, 12.51];

/// Published static-case means [N/cm^2] for regions 1..8.
pub const STATIC_MEANS: [[f64; 8]; 3] = [
    [49.02, 43.51, 10.67, 130.82, 46.79, 44.08, 9.56, 133.79],
    [81.52, 83.18, 10.54, 64.07, 74.4, 72.17, 4.02, 65.57],
    [19.97, 28.53, 10.39, 163.76, 26.84, 19.68, 3.82, 159.35],
];
/// Published static-case standard deviations [N/cm^2] for regions 1..8.
pub const STATIC_SIGMAS: [[f64; 8]; 3] = [
    [0.086, 0.066, 0.058, 0.102, 0.533, 0.124, 0.489, 0.241],
    [0.872, 1.872, 0.195, 1.028, 0.489, 0.563, 0.095, 0.172],
    [0.062, 0.186, 0.051, 0.041, 0.443, 0.426, 0.223, 0.858],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Toes,
    Metatarsals,
    Midfoot,
    Heel,
}

impl Zone {
    pub const ALL: [Zone; 4] = [Zone::Toes, Zone::Metatarsals, Zone::Midfoot, Zone::Heel];
}

/// Upper region number (1..8) of a zone on the left or right foot.
pub fn region(zone: Zone, right: bool) -> usize {
    zone as usize + 1 + if right { 4 } else { 0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadCellFrame {
    pub t: f64,
    /// Regions 1..8 [N]; 1..4 left foot, 5..8 right foot.
    pub upper: [f64; 8],
    /// Cells 9..11 [N].
    pub lower: [f64; 3],
}

impl LoadCellFrame {
    /// Cell numbers (1..11) at or above capacity.
    pub fn saturated_cells(&self) -> Vec<usize> {
        let up = self.upper.iter().enumerate().filter(|(_, f)| **f >= UPPER_CAPACITY).map(|(i, _)| i + 1);
        let low = self.lower.iter().enumerate().filter(|(_, f)| **f >= LOWER_CAPACITY).map(|(i, _)| i + 9);
        up.chain(low).collect()
    }

    pub fn channel(&self, c: usize) -> f64 {
        if c < 8 {
            self.upper[c]
        } else {
            self.lower[c - 8]
        }
    }
}

/// Positions of the foot cells. Coordinates are in the foot frame: heel cell
/// of each foot at `y = 0`, feet at `x = -/+ foot_separation / 2`, toes
/// towards `+y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootLayout {
    pub foot_length: f64,
    /// Cell distance from the heel as a fraction of foot length, per zone.
    #[serde(default = "default_zone_fraction")]
    pub zone_fraction: [f64; 4],
    /// Contact area of each zone pad [cm^2].
    #[serde(default = "default_pad_area")]
    pub pad_area_cm2: [f64; 4],
    #[serde(default = "default_separation")]
    pub foot_separation: f64,
    /// Farthest a rail can carry a cell from the heel [m].
    #[serde(default = "default_rail_travel")]
    pub rail_travel: f64,
    /// Heel position relative to the lower-platform center [m].
    #[serde(default = "default_heel_offset")]
    pub heel_offset: [f64; 2],
}

fn default_zone_fraction() -> [f64; 4] {
    [0.85, 0.68, 0.40, 0.0]
}
fn default_pad_area() -> [f64; 4] {
    [0.5; 4]
}
fn default_separation() -> f64 {
    0.20
}
fn default_rail_travel() -> f64 {
    0.26
}
fn default_heel_offset() -> [f64; 2] {
    [0.0, -0.10]
}

impl Default for FootLayout {
    fn default() -> Self {
        Self::for_foot_length(Anthropometrics::default().foot_length)
    }
}

impl FootLayout {
    pub fn for_foot_length(foot_length: f64) -> Self {
        Self {
            foot_length,
            zone_fraction: default_zone_fraction(),
            pad_area_cm2: default_pad_area(),
            foot_separation: default_separation(),
            rail_travel: default_rail_travel(),
            heel_offset: default_heel_offset(),
        }
    }

    pub fn validate(&self) -> Result<(), PostureError> {
        let bad = |m: &str| Err(PostureError::InvalidLayout(m.into()));
        if !(self.foot_length > 0.0) {
            return bad("foot_length must be > 0");
        }
        if self.pad_area_cm2.iter().any(|a| !(*a > 0.0)) {
            return bad("pad areas must be > 0");
        }
        if self.zone_fraction[Zone::Heel as usize] != 0.0 {
            return bad("heel cell is fixed at the origin");
        }
        for f in &self.zone_fraction {
            if !(0.0..=1.0).contains(f) {
                return bad("zone fractions must lie in [0, 1]");
            }
            if f * self.foot_length > self.rail_travel + 1e-12 {
                return bad("cell offset exceeds rail travel");
            }
        }
        Ok(())
    }

    /// Cell positions of regions 1..8 in the foot frame [m].
    pub fn cell_positions(&self) -> [[f64; 2]; 8] {
        let mut out = [[0.0; 2]; 8];
        for (foot, x) in [(0usize, -0.5 * self.foot_separation), (1, 0.5 * self.foot_separation)] {
            for z in 0..4 {
                out[foot * 4 + z] = [x, self.zone_fraction[z] * self.foot_length];
            }
        }
        out
    }

    fn area(&self, region_index: usize) -> f64 {
        self.pad_area_cm2[region_index % 4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anthropometrics {
    pub height: f64,
    pub body_mass_kg: f64,
    pub foot_length: f64,
    pub foot_width: f64,
}

impl Anthropometrics {
    pub fn women() -> Self {
        Self { height: 1.6294, body_mass_kg: 67.12, foot_length: 0.2362, foot_width: 0.0917 }
    }

    pub fn men() -> Self {
        Self { height: 1.7558, body_mass_kg: 74.74, foot_length: 0.2615, foot_width: 0.1028 }
    }
}

impl Default for Anthropometrics {
    /// Mean of the women and men tables.
    fn default() -> Self {
        let (w, m) = (Self::women(), Self::men());
        Self {
            height: 0.5 * (w.height + m.height),
            body_mass_kg: 0.5 * (w.body_mass_kg + m.body_mass_kg),
            foot_length: 0.5 * (w.foot_length + m.foot_length),
            foot_width: 0.5 * (w.foot_width + m.foot_width),
        }
    }
}

/// Lower cell positions 9, 10, 11 at 90, 210 and 330 degrees.
pub fn lower_cell_positions(r_low: f64) -> [[f64; 2]; 3] {
    let c = 30f64.to_radians().cos();
    [[0.0, r_low], [-r_low * c, -0.5 * r_low], [r_low * c, -0.5 * r_low]]
}

/// Weighted centroid of the lower cells.
pub fn center_of_mass(lower: [f64; 3], r_low: f64, min_total: f64) -> Result<[f64; 2], PostureError> {
    let total: f64 = lower.iter().sum();
    if !(total > min_total) {
        return Err(PostureError::Unloaded { total, threshold: min_total });
    }
    let p = lower_cell_positions(r_low);
    let mut c = [0.0; 2];
    for i in 0..3 {
        c[0] += lower[i] * p[i][0];
        c[1] += lower[i] * p[i][1];
    }
    Ok([c[0] / total, c[1] / total])
}

/// `(M_x - h F_y) / F_z`.
pub fn center_of_pressure(mx: f64, fy: f64, fz: f64, h: f64) -> Result<f64, PostureError> {
    if !(fz.abs() > 1e-9) {
        return Err(PostureError::UndefinedCop { fz });
    }
    Ok((mx - h * fy) / fz)
}

/// Zone pressures [N/cm^2] ordered `[toes, metatarsals, midfoot, heel]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZonePressures {
    pub left: [f64; 4],
    pub right: [f64; 4],
    pub left_total_n: f64,
    pub right_total_n: f64,
    pub saturated: Vec<usize>,
}

pub fn pressure_ratios(frame: &LoadCellFrame, layout: &FootLayout) -> ZonePressures {
    let mut left = [0.0; 4];
    let mut right = [0.0; 4];
    for z in 0..4 {
        left[z] = frame.upper[z] / layout.area(z);
        right[z] = frame.upper[z + 4] / layout.area(z + 4);
    }
    ZonePressures {
        left,
        right,
        left_total_n: frame.upper[..4].iter().sum(),
        right_total_n: frame.upper[4..].iter().sum(),
        saturated: frame.saturated_cells(),
    }
}

/// Frame whose foot cells carry the given zone pressures [N/cm^2].
pub fn frame_from_pressures(t: f64, left: [f64; 4], right: [f64; 4], layout: &FootLayout) -> LoadCellFrame {
    let mut upper = [0.0; 8];
    for z in 0..4 {
        upper[z] = left[z] * layout.area(z);
        upper[z + 4] = right[z] * layout.area(z + 4);
    }
    LoadCellFrame { t, upper, lower: [0.0; 3] }
}

/// Lower-cell loads carrying the foot loads in static equilibrium. The load
/// point is clamped into the cell triangle.
pub fn lower_loads(upper: &[f64; 8], layout: &FootLayout, r_low: f64) -> [f64; 3] {
    let total: f64 = upper.iter().sum();
    if total <= 0.0 {
        return [0.0; 3];
    }
    let cells = layout.cell_positions();
    let mut c = [layout.heel_offset[0], layout.heel_offset[1]];
    for i in 0..8 {
        c[0] += upper[i] * cells[i][0] / total;
        c[1] += upper[i] * cells[i][1] / total;
    }
    let w = barycentric(c, &lower_cell_positions(r_low));
    let w: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = w.iter().sum();
    [total * w[0] / s, total * w[1] / s, total * w[2] / s]
}

fn barycentric(p: [f64; 2], v: &[[f64; 2]; 3]) -> [f64; 3] {
    let (x1, y1, x2, y2, x3, y3) = (v[0][0], v[0][1], v[1][0], v[1][1], v[2][0], v[2][1]);
    let det = (y2 - y3) * (x1 - x3) + (x3 - x2) * (y1 - y3);
    let l1 = ((y2 - y3) * (p[0] - x3) + (x3 - x2) * (p[1] - y3)) / det;
    let l2 = ((y3 - y1) * (p[0] - x3) + (x1 - x3) * (p[1] - y3)) / det;
    [l1, l2, 1.0 - l1 - l2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostureCase {
    #[serde(rename = "static-1")]
    Static1,
    #[serde(rename = "static-2")]
    Static2,
    #[serde(rename = "static-3")]
    Static3,
    /// Half the load on the heels, half on toes and metatarsals.
    Standing,
    DynamicPlantar,
    DynamicDorsi,
    DynamicInver,
    DynamicEver,
}

impl PostureCase {
    pub const ALL: [PostureCase; 8] = [
        PostureCase::Static1,
        PostureCase::Static2,
        PostureCase::Static3,
        PostureCase::Standing,
        PostureCase::DynamicPlantar,
        PostureCase::DynamicDorsi,
        PostureCase::DynamicInver,
        PostureCase::DynamicEver,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PostureCase::Static1 => "static-1",
            PostureCase::Static2 => "static-2",
            PostureCase::Static3 => "static-3",
            PostureCase::Standing => "standing",
            PostureCase::DynamicPlantar => "dynamic-plantar",
            PostureCase::DynamicDorsi => "dynamic-dorsi",
            PostureCase::DynamicInver => "dynamic-inver",
            PostureCase::DynamicEver => "dynamic-ever",
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(
            self,
            PostureCase::DynamicPlantar
                | PostureCase::DynamicDorsi
                | PostureCase::DynamicInver
                | PostureCase::DynamicEver
        )
    }
}

impl fmt::Display for PostureCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PostureCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PostureCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown posture case '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisParams {
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    /// Static case length [s].
    #[serde(default = "default_static_duration")]
    pub static_duration: f64,
    /// Settling time before a dynamic ramp [s].
    #[serde(default = "default_settle")]
    pub settle: f64,
    /// Length of a dynamic ramp [s].
    #[serde(default = "default_phase")]
    pub phase: f64,
    /// Mass of the standing-profile load [kg].
    #[serde(default = "default_load_mass")]
    pub load_mass_kg: f64,
    /// Fraction of load moved between feet in inversion/eversion.
    #[serde(default = "default_lateral_shift")]
    pub lateral_shift: f64,
    #[serde(default = "default_true")]
    pub noise: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_r_low")]
    pub r_low: f64,
}

fn default_rate() -> f64 {
    100.0
}
fn default_static_duration() -> f64 {
    120.0
}
fn default_settle() -> f64 {
    10.0
}
fn default_phase() -> f64 {
    60.0
}
fn default_load_mass() -> f64 {
    24.0
}
fn default_lateral_shift() -> f64 {
    0.3
}
fn default_true() -> bool {
    true
}
fn default_r_low() -> f64 {
    DEFAULT_LOWER_RADIUS
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: default_rate(),
            static_duration: default_static_duration(),
            settle: default_settle(),
            phase: default_phase(),
            load_mass_kg: default_load_mass(),
            lateral_shift: default_lateral_shift(),
            noise: true,
            seed: 0,
            r_low: default_r_low(),
        }
    }
}

/// Mean foot-cell pressures [N/cm^2] of a static profile, regions 1..8.
pub fn profile_pressures(case: PostureCase, params: &SynthesisParams, layout: &FootLayout) -> [f64; 8] {
    match case {
        PostureCase::Static1 | PostureCase::DynamicInver | PostureCase::DynamicEver => STATIC_MEANS[0],
        PostureCase::Static2 | PostureCase::DynamicPlantar => STATIC_MEANS[1],
        PostureCase::Static3 | PostureCase::DynamicDorsi => STATIC_MEANS[2],
        PostureCase::Standing => {
            let per_foot = 0.5 * params.load_mass_kg * GRAVITY;
            let (toes, meta) = (FOOTPAD_RIGHT[0], FOOTPAD_RIGHT[1]);
            let forefoot = [toes / (toes + meta), meta / (toes + meta)];
            let mut out = [0.0; 8];
            for foot in 0..2 {
                let o = foot * 4;
                out[o] = 0.5 * per_foot * forefoot[0] / layout.area(o);
                out[o + 1] = 0.5 * per_foot * forefoot[1] / layout.area(o + 1);
                out[o + 3] = 0.5 * per_foot / layout.area(o + 3);
            }
            out
        }
    }
}

fn shifted(profile: [f64; 8], fraction: f64, to_right: bool) -> [f64; 8] {
    let mut out = profile;
    for z in 0..4 {
        let (from, to) = if to_right { (z, z + 4) } else { (z + 4, z) };
        let moved = profile[from] * fraction;
        out[from] -= moved;
        out[to] += moved;
    }
    out
}

/// Synthetic load-cell stream for a case. Static cases hold the case means
/// with the published per-region spread; dynamic cases settle on case 1 then
/// ramp linearly to the motion's target profile and back over one phase.
pub fn synthesize_loads(
    case: PostureCase,
    params: &SynthesisParams,
    layout: &FootLayout,
) -> Result<Vec<LoadCellFrame>, PostureError> {
    layout.validate()?;
    if !(params.sample_rate_hz > 0.0) || !(params.r_low > 0.0) {
        return Err(PostureError::InvalidLayout("sample rate and r_low must be > 0".into()));
    }
    let base = STATIC_MEANS[0];
    let (start, target, sigma, duration) = match case {
        PostureCase::Static1 => (base, base, STATIC_SIGMAS[0], params.static_duration),
        PostureCase::Static2 => (STATIC_MEANS[1], STATIC_MEANS[1], STATIC_SIGMAS[1], params.static_duration),
        PostureCase::Static3 => (STATIC_MEANS[2], STATIC_MEANS[2], STATIC_SIGMAS[2], params.static_duration),
        PostureCase::Standing => {
            let p = profile_pressures(case, params, layout);
            (p, p, [0.0; 8], params.static_duration)
        }
        PostureCase::DynamicPlantar | PostureCase::DynamicDorsi => {
            (base, profile_pressures(case, params, layout), STATIC_SIGMAS[0], params.settle + params.phase)
        }
        PostureCase::DynamicInver => {
            (base, shifted(base, params.lateral_shift, true), STATIC_SIGMAS[0], params.settle + params.phase)
        }
        PostureCase::DynamicEver => {
            (base, shifted(base, params.lateral_shift, false), STATIC_SIGMAS[0], params.settle + params.phase)
        }
    };

    let dt = 1.0 / params.sample_rate_hz;
    let n = (duration * params.sample_rate_hz).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normals: Vec<Normal<f64>> = sigma
        .iter()
        .map(|s| Normal::new(0.0, *s).map_err(|e| PostureError::InvalidLayout(e.to_string())))
        .collect::<Result<_, _>>()?;

    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let w = if case.is_dynamic() { triangle((t - params.settle) / params.phase) } else { 0.0 };
        let mut upper = [0.0; 8];
        for i in 0..8 {
            let mut p = (1.0 - w) * start[i] + w * target[i];
            if params.noise && sigma[i] > 0.0 {
                p += normals[i].sample(&mut rng);
            }
            upper[i] = (p * layout.area(i)).max(0.0);
        }
        let lower = lower_loads(&upper, layout, params.r_low);
        frames.push(LoadCellFrame { t, upper, lower });
    }
    Ok(frames)
}

/// 0 -> 1 -> 0 over `x` in `[0, 1]`, 0 outside.
fn triangle(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        1.0 - (2.0 * x - 1.0).abs()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdPolicy {
    /// Multiple of the baseline standard deviation.
    #[serde(default = "default_k")]
    pub k: f64,
    /// Smallest deviation counted as a response [N].
    #[serde(default = "default_min_deviation")]
    pub min_deviation: f64,
    /// Pre-stimulus baseline length [s].
    #[serde(default = "default_baseline")]
    pub baseline_window: f64,
    /// Post-stimulus search length [s].
    #[serde(default = "default_response_window")]
    pub response_window: f64,
}

fn default_k() -> f64 {
    5.0
}
fn default_min_deviation() -> f64 {
    0.5
}
fn default_baseline() -> f64 {
    1.0
}
fn default_response_window() -> f64 {
    3.0
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self {
            k: default_k(),
            min_deviation: default_min_deviation(),
            baseline_window: default_baseline(),
            response_window: default_response_window(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReactionEvent {
    pub stimulus_time: f64,
    /// `None` when no channel crossed its threshold in the window.
    pub response_time: Option<f64>,
    pub latency: Option<f64>,
    /// Cell number 1..11 of the first crossing.
    pub channel: Option<usize>,
}

fn check_monotone(frames: &[LoadCellFrame]) -> Result<(), PostureError> {
    for (i, w) in frames.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(PostureError::NonMonotone { row: i + 1 });
        }
    }
    Ok(())
}

/// First post-stimulus frame whose deviation from the pre-stimulus mean
/// exceeds `max(k * sigma, min_deviation)` on any channel.
pub fn detect_reaction(
    stimuli: &[f64],
    frames: &[LoadCellFrame],
    policy: &ThresholdPolicy,
) -> Result<Vec<ReactionEvent>, PostureError> {
    check_monotone(frames)?;
    let mut events = Vec::with_capacity(stimuli.len());
    for &s in stimuli {
        let lo = frames.partition_point(|f| f.t < s - policy.baseline_window);
        let mid = frames.partition_point(|f| f.t < s);
        let hi = frames.partition_point(|f| f.t < s + policy.response_window);
        let baseline = &frames[lo..mid];
        let mut event = ReactionEvent { stimulus_time: s, response_time: None, latency: None, channel: None };
        if !baseline.is_empty() {
            let n = baseline.len() as f64;
            let stats: Vec<(f64, f64)> = (0..11)
                .map(|c| {
                    let mean = baseline.iter().map(|f| f.channel(c)).sum::<f64>() / n;
                    let var = baseline.iter().map(|f| (f.channel(c) - mean).powi(2)).sum::<f64>() / n;
                    (mean, (policy.k * var.sqrt()).max(policy.min_deviation))
                })
                .collect();
            'scan: for f in &frames[mid..hi] {
                for (c, (mean, thr)) in stats.iter().enumerate() {
                    if (f.channel(c) - mean).abs() > *thr {
                        event.response_time = Some(f.t);
                        event.latency = Some(f.t - s);
                        event.channel = Some(c + 1);
                        break 'scan;
                    }
                }
            }
        }
        events.push(event);
    }
    Ok(events)
}

/// Per-stream summary used by the analysis command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostureSummary {
    pub frames: usize,
    /// Mean pressure of regions 1..8 [N/cm^2].
    pub mean_region_pressure: [f64; 8],
    /// Region numbers sorted by decreasing mean pressure.
    pub region_ranking: Vec<usize>,
    pub heel_share: f64,
    pub mean_center_of_mass: Option<[f64; 2]>,
    pub unloaded_frames: usize,
    pub saturated_frames: usize,
}

pub fn summarize(
    frames: &[LoadCellFrame],
    layout: &FootLayout,
    r_low: f64,
    min_total: f64,
) -> Result<PostureSummary, PostureError> {
    layout.validate()?;
    check_monotone(frames)?;
    let mut mean = [0.0; 8];
    let mut com = [0.0; 2];
    let (mut loaded, mut unloaded, mut saturated) = (0usize, 0usize, 0usize);
    for f in frames {
        for i in 0..8 {
            mean[i] += f.upper[i] / layout.area(i);
        }
        match center_of_mass(f.lower, r_low, min_total) {
            Ok(c) => {
                com[0] += c[0];
                com[1] += c[1];
                loaded += 1;
            }
            Err(_) => unloaded += 1,
        }
        if !f.saturated_cells().is_empty() {
            saturated += 1;
        }
    }
    if !frames.is_empty() {
        for m in mean.iter_mut() {
            *m /= frames.len() as f64;
        }
    }
    let mut ranking: Vec<usize> = (1..=8).collect();
    ranking.sort_by(|a, b| mean[b - 1].total_cmp(&mean[a - 1]));
    let force: Vec<f64> = (0..8).map(|i| mean[i] * layout.area(i)).collect();
    let total: f64 = force.iter().sum();
    let heel_share = if total > 0.0 { (force[3] + force[7]) / total } else { 0.0 };
    Ok(PostureSummary {
        frames: frames.len(),
        mean_region_pressure: mean,
        region_ranking: ranking,
        heel_share,
        mean_center_of_mass: (loaded > 0).then(|| [com[0] / loaded as f64, com[1] / loaded as f64]),
        unloaded_frames: unloaded,
        saturated_frames: saturated,
    })
}

pub const FRAME_HEADER: [&str; 12] =
    ["t_s", "u1_N", "u2_N", "u3_N", "u4_N", "u5_N", "u6_N", "u7_N", "u8_N", "l9_N", "l10_N", "l11_N"];

pub fn write_frames<W: Write>(out: W, frames: &[LoadCellFrame]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FRAME_HEADER)?;
    for f in frames {
        let row = std::iter::once(f.t).chain(f.upper).chain(f.lower);
        w.write_record(row.map(|v| format!("{v:.9e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads frames; header names may omit the unit suffixes.
pub fn read_frames<R: Read>(input: R) -> Result<Vec<LoadCellFrame>, PostureError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| PostureError::Parse(e.to_string()))?.clone();
    if headers.len() != FRAME_HEADER.len() {
        return Err(PostureError::Parse(format!("expected 12 columns, found {}", headers.len())));
    }
    for (got, want) in headers.iter().zip(FRAME_HEADER) {
        let bare = want.rsplit_once('_').map(|(b, _)| b).unwrap_or(want);
        if got.trim() != want && got.trim() != bare {
            return Err(PostureError::Parse(format!("unexpected column '{got}', expected '{want}'")));
        }
    }
    let mut frames = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| PostureError::Parse(e.to_string()))?;
        let mut v = [0.0f64; 12];
        for (i, field) in rec.iter().enumerate() {
            v[i] = field
                .trim()
                .parse()
                .map_err(|_| PostureError::Parse(format!("row {}: bad number '{field}'", row + 1)))?;
            if !v[i].is_finite() || (i > 0 && v[i] < 0.0) {
                return Err(PostureError::Parse(format!("row {}: value {} out of range", row + 1, v[i])));
            }
        }
        let mut upper = [0.0; 8];
        upper.copy_from_slice(&v[1..9]);
        frames.push(LoadCellFrame { t: v[0], upper, lower: [v[9], v[10], v[11]] });
    }
    check_monotone(&frames)?;
    Ok(frames)
}

pub const EVENT_HEADER: [&str; 4] = ["stimulus_t_s", "response_t_s", "latency_s", "channel"];

pub fn write_events<W: Write>(out: W, events: &[ReactionEvent]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for e in events {
        w.write_record([
            format!("{:.6}", e.stimulus_time),
            opt(e.response_time),
            opt(e.latency),
            e.channel.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn com_cases() {
        let c = center_of_mass([100.0; 3], 0.25, 1.0).unwrap();
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
        assert_eq!(center_of_mass([50.0, 0.0, 0.0], 0.25, 1.0).unwrap(), [0.0, 0.25]);
        let c = center_of_mass([0.0, 30.0, 30.0], 0.25, 1.0).unwrap();
        assert!(c[0].abs() < 1e-15);
        assert_relative_eq!(c[1], -0.125, epsilon = 1e-15);
        assert!(matches!(center_of_mass([0.1, 0.0, 0.0], 0.25, 1.0), Err(PostureError::Unloaded { .. })));
    }

    #[test]
    fn cop_cases() {
        assert_relative_eq!(center_of_pressure(10.0, 0.0, 500.0, COP_HEIGHT).unwrap(), 0.02, epsilon = 1e-15);
        assert_eq!(center_of_pressure(0.03 * 40.0, 40.0, 500.0, 0.03).unwrap(), 0.0);
        assert!(matches!(center_of_pressure(1.0, 0.0, 0.0, 0.03), Err(PostureError::UndefinedCop { .. })));
    }

    #[test]
    fn regions_map_to_zones() {
        assert_eq!(region(Zone::Toes, false), 1);
        assert_eq!(region(Zone::Heel, false), 4);
        assert_eq!(region(Zone::Midfoot, true), 7);
        assert_eq!(region(Zone::Heel, true), 8);
    }

    #[test]
    fn footpad_fixture_recovered() {
        let layout = FootLayout::default();
        let f = frame_from_pressures(0.0, FOOTPAD_LEFT, FOOTPAD_RIGHT, &layout);
        let p = pressure_ratios(&f, &layout);
        for z in 0..4 {
            assert!((p.right[z] - FOOTPAD_RIGHT[z]).abs() < 1e-9);
            assert!((p.left[z] - FOOTPAD_LEFT[z]).abs() < 1e-9);
        }
        let zero = pressure_ratios(&LoadCellFrame { t: 0.0, upper: [0.0; 8], lower: [0.0; 3] }, &layout);
        assert_eq!(zero.left, [0.0; 4]);
        assert_eq!(zero.right, [0.0; 4]);
    }

    #[test]
    fn saturation_flagged() {
        let f = LoadCellFrame { t: 0.0, upper: [0.0, 0.0, 0.0, 120.0, 0.0, 0.0, 0.0, 0.0], lower: [400.0, 0.0, 0.0] };
        assert_eq!(f.saturated_cells(), vec![4, 9]);
    }

    #[test]
    fn case_names_roundtrip() {
        for c in PostureCase::ALL {
            assert_eq!(c.name().parse::<PostureCase>().unwrap(), c);
            assert_eq!(serde_json::to_string(&c).unwrap(), format!("\"{}\"", c.name()));
        }
        assert!("static-4".parse::<PostureCase>().is_err());
    }

    #[test]
    fn lower_loads_balance_upper() {
        let layout = FootLayout::default();
        let upper = STATIC_MEANS[0].map(|p| p * 0.5);
        let lower = lower_loads(&upper, &layout, 0.25);
        assert_relative_eq!(lower.iter().sum::<f64>(), upper.iter().sum::<f64>(), epsilon = 1e-9);
        assert!(lower.iter().all(|l| *l > 0.0));
    }

    #[test]
    fn triangle_shape() {
        assert_eq!(triangle(-0.1), 0.0);
        assert_eq!(triangle(0.5), 1.0);
        assert_eq!(triangle(1.0), 0.0);
    }

    #[test]
    fn layout_limits() {
        let mut l = FootLayout::for_foot_length(0.40);
        assert!(l.validate().is_err());
        l.foot_length = 0.25;
        assert!(l.validate().is_ok());
        l.zone_fraction[3] = 0.1;
        assert!(l.validate().is_err());
    }

    #[test]
    fn csv_roundtrip_and_bare_headers() {
        let frames = vec![
            LoadCellFrame { t: 0.0, upper: [1.0; 8], lower: [2.0, 3.0, 4.0] },
            LoadCellFrame { t: 0.01, upper: [1.5; 8], lower: [2.0, 3.0, 4.5] },
        ];
        let mut buf = Vec::new();
        write_frames(&mut buf, &frames).unwrap();
        assert_eq!(read_frames(buf.as_slice()).unwrap(), frames);
        let bare = "t,u1,u2,u3,u4,u5,u6,u7,u8,l9,l10,l11\n0,1,1,1,1,1,1,1,1,2,3,4\n";
        assert_eq!(read_frames(bare.as_bytes()).unwrap().len(), 1);
        let back = "t,u1,u2,u3,u4,u5,u6,u7,u8,l9,l10,l11\n1,1,1,1,1,1,1,1,1,2,3,4\n0.5,1,1,1,1,1,1,1,1,2,3,4\n";
        assert!(matches!(read_frames(back.as_bytes()), Err(PostureError::NonMonotone { row: 1 })));
    }
}
