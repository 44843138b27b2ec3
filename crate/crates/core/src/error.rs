use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("non-finite or non-positive input")]
    NonFinite,
    #[error("tilt {:.4} deg exceeds joint limit {:.4} deg", .tilt.to_degrees(), .limit.to_degrees())]
    TiltLimit { tilt: f64, limit: f64 },
    #[error("platform height {z} m is not above the base")]
    BelowBase { z: f64 },
    #[error("actuator {leg} length {length:.6} m outside stroke [{min:.4}, {max:.4}] m")]
    StrokeLimit { leg: usize, length: f64, min: f64, max: f64 },
    #[error("forward kinematics did not converge after {iterations} iterations (residual {residual:.3e} m)")]
    Convergence { iterations: usize, residual: f64 },
}

impl GeometryError {
    /// True for errors that mean the request lies outside the workspace.
    pub fn is_workspace(&self) -> bool {
        matches!(
            self,
            GeometryError::TiltLimit { .. }
                | GeometryError::BelowBase { .. }
                | GeometryError::StrokeLimit { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("actuator {leg} has zero length")]
    ZeroLengthLeg { leg: usize },
    #[error("Euler rate map is singular at pitch {pitch} rad")]
    RepresentationSingularity { pitch: f64 },
    #[error("mass matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularMass { condition: f64 },
    #[error("invalid inertial parameters: {0}")]
    InvalidParameters(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("invalid reference: {0}")]
    InvalidReference(String),
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("reference leaves the workspace at t = {t} s: {source}")]
    Workspace { t: f64, source: GeometryError },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid controller or plant configuration: {0}")]
    InvalidConfig(String),
    #[error("motor {motor} diverged at t = {t} s (position {position} m)")]
    Diverged { motor: usize, t: f64, position: f64 },
    #[error("no stabilizing gains found in the search box after {evaluations} evaluations")]
    TuningFailed { evaluations: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PostureError {
    #[error("total load {total} N is below the {threshold} N threshold")]
    Unloaded { total: f64, threshold: f64 },
    #[error("vertical force {fz} N too small for a center of pressure")]
    UndefinedCop { fz: f64 },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("timestamps are not monotone at row {row}")]
    NonMonotone { row: usize },
    #[error("malformed load-cell data: {0}")]
    Parse(String),
}
