//! Scenario configuration file. Every block is optional and unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use rehab_core::control::{GainSearch, MotorPlant, PidGains, TrackingConfig, TrackingReference};
use rehab_core::dynamics::{ActuatorParams, CoriolisForm, DynamicsModel, PlatformBody};
use rehab_core::geometry::PlatformGeometry;
use rehab_core::posturography::{FootLayout, SynthesisParams, ThresholdPolicy};
use rehab_core::simulation::{LoopConfig, ReferenceTrajectory};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: PlatformGeometry,
    pub dynamics: DynamicsBlock,
    pub reference: Option<ReferenceTrajectory>,
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    pub control: ControlBlock,
    pub posture: PostureBlock,
    pub seed: Option<u64>,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsBlock {
    pub actuators: Option<[ActuatorParams; 3]>,
    pub body: PlatformBody,
    pub coriolis: CoriolisForm,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlBlock {
    pub gains: Option<PidGains>,
    pub plant: MotorPlant,
    pub reference: Option<TrackingReference>,
    pub tracking: TrackingConfig,
    pub search: GainSearch,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostureBlock {
    pub layout: Option<FootLayout>,
    pub synthesis: SynthesisParams,
    pub threshold: ThresholdPolicy,
    pub stimuli: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn model(&self) -> DynamicsModel {
        DynamicsModel {
            geometry: self.geometry,
            actuators: self.dynamics.actuators.unwrap_or([ActuatorParams::default(); 3]),
            body: self.dynamics.body,
            coriolis: self.dynamics.coriolis,
        }
    }
}

/// Parses a JSON file into `T`, reporting the offending field path.
pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        CliError::Usage(format!("{}: at '{field}': {}", path.display(), e.inner()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| e.path().to_string())
    }

    #[test]
    fn empty_object_gives_defaults() {
        let c = parse("{}").unwrap();
        assert_eq!(c.model(), DynamicsModel::default());
        assert!(c.reference.is_none());
    }

    #[test]
    fn partial_blocks_fill_defaults() {
        let c = parse(r#"{"geometry": {"joint_limit": 0.2}, "control": {"plant": {"mass": 30}}}"#).unwrap();
        assert_eq!(c.geometry.joint_limit, 0.2);
        assert_eq!(c.geometry.base_radius, PlatformGeometry::default().base_radius);
        assert_eq!(c.control.plant.mass, 30.0);
        assert_eq!(c.control.plant.viscous, MotorPlant::default().viscous);
    }

    #[test]
    fn unknown_keys_report_their_path() {
        assert_eq!(parse(r#"{"geometry": {"radius": 1}}"#).unwrap_err(), "geometry.radius");
        assert_eq!(parse(r#"{"loop": {"mode": {"kind": "mismatch", "scale": 2}}}"#).unwrap_err(), "loop.mode");
        assert_eq!(parse(r#"{"colour": 1}"#).unwrap_err(), "colour");
    }
}
