//! Kinematics, dynamics, control and posturography for a three-actuator
//! balance rehabilitation platform.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod posturography;
pub mod simulation;

pub use dynamics::{
    ActuatorParams, CoriolisForm, DynamicsMatrices, DynamicsModel, PlatformBody, TaskState,
};
pub use error::{ControlError, DynamicsError, GeometryError, PostureError, SimulationError};
pub use geometry::{AnchorSet, LegLengths, PlatformGeometry, Pose};
pub use control::{GainSearch, MotorPlant, PidGains, TrackingConfig, TrackingReference, TrackingResult};
pub use posturography::{FootLayout, LoadCellFrame, PostureCase, ReactionEvent, SynthesisParams, ThresholdPolicy};
pub use simulation::{LoopConfig, LoopMode, ReferenceTrajectory, SimulationTrace};
