use std::fmt;

use rehab_core::error::{ControlError, DynamicsError, GeometryError, PostureError, SimulationError};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    Usage(String),
    /// Request outside the workspace or the model's domain.
    Domain(String),
    /// Solver divergence or numerical breakdown.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::Convergence { .. } => CliError::Numerical(e.to_string()),
            _ if e.is_workspace() => CliError::Domain(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidParameters(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Geometry(g) => g.into(),
            SimulationError::Dynamics(d) => d.into(),
            SimulationError::Workspace { .. } => CliError::Domain(e.to_string()),
            SimulationError::InvalidReference(_) => CliError::Usage(e.to_string()),
            SimulationError::EmptyTrace => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<PostureError> for CliError {
    fn from(e: PostureError) -> Self {
        match e {
            PostureError::Unloaded { .. } | PostureError::UndefinedCop { .. } => CliError::Domain(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}
