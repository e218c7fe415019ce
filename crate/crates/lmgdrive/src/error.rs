use std::io;
use std::path::PathBuf;

use lmgdrive_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, AppError>;

/// Failures of the std layer, grouped by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot parse {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("{count} sweep points failed (see {sidecar}); first: {first}")]
    PointFailures { count: usize, sidecar: PathBuf, first: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("record store {path}: {reason}")]
    Store { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Process exit codes of the CLI.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Anything that is neither a config, solver nor resource failure (I/O).
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const RESOURCE: i32 = 4;
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// True when a downstream reader closed the output pipe (e.g. `| head`).
    pub fn is_broken_pipe(&self) -> bool {
        let kind = match self {
            Self::Io { source, .. } => Some(source.kind()),
            Self::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(e) => Some(e.kind()),
                _ => None,
            },
            Self::Json(e) => e.io_error_kind(),
            _ => None,
        };
        kind == Some(io::ErrorKind::BrokenPipe)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::ConfigParse { .. } => exit::CONFIG,
            Self::Core(e) => core_exit_code(e),
            Self::Grid(_) | Self::Fit(_) | Self::PointFailures { .. } => exit::SOLVER,
            Self::Store { .. } | Self::Io { .. } | Self::Csv(_) | Self::Json(_) => exit::FAILURE,
        }
    }
}

/// Invalid inputs are config errors, exhausted budgets are resource errors,
/// everything else the numerics can raise is a solver error.
pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidSize(_)
        | CoreError::InvalidTemperature(_)
        | CoreError::CriticalDomain(_)
        | CoreError::InvalidParameter { .. } => exit::CONFIG,
        CoreError::ResourceCap { .. } => exit::RESOURCE,
        _ => exit::SOLVER,
    }
}

/// Stable short name of a core error, stored in the errors sidecar.
pub fn core_error_kind(e: &CoreError) -> &'static str {
    match e {
        CoreError::InvalidSize(_) => "invalid_size",
        CoreError::NotHermitian(_) => "not_hermitian",
        CoreError::InvalidTemperature(_) => "invalid_temperature",
        CoreError::CriticalDomain(_) => "critical_domain",
        CoreError::InvalidParameter { .. } => "invalid_parameter",
        CoreError::Degenerate { .. } => "degenerate",
        CoreError::OutOfRange { .. } => "out_of_range",
        CoreError::PoleCollision { .. } => "pole_collision",
        CoreError::ExpansionInconsistent(_) => "expansion_inconsistent",
        CoreError::ResourceCap { .. } => "resource_cap",
        CoreError::Stiffness { .. } => "stiffness",
        CoreError::Accuracy { .. } => "accuracy",
        CoreError::ScanRange { .. } => "scan_range",
    }
}
