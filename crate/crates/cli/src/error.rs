use std::fmt;

use roadsift::canbus::CanError;
use roadsift::features::FeatureCsvError;
use roadsift::geometry::GeometryError;
use roadsift::ml::MlError;
use roadsift::oracle::OracleError;
use roadsift::selection::SelectionError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input files.
    Usage(String),
    /// Anything that fails after the inputs were accepted.
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        CliError::Runtime(msg.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::runtime(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::runtime(e)
    }
}

impl From<MlError> for CliError {
    fn from(e: MlError) -> Self {
        match e {
            MlError::Io(_) => CliError::runtime(e),
            _ => CliError::usage(e),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::InvalidConfig(_) | OracleError::EmptyDataset | OracleError::NonPositiveRadius(_) => {
                CliError::usage(e)
            }
            _ => CliError::runtime(e),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::usage(e)
    }
}

impl From<FeatureCsvError> for CliError {
    fn from(e: FeatureCsvError) -> Self {
        match e {
            FeatureCsvError::Io(_) => CliError::runtime(e),
            FeatureCsvError::Format { .. } => CliError::usage(e),
        }
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::Ml(inner) => inner.into(),
            SelectionError::Oracle(inner) => inner.into(),
            _ => CliError::usage(e),
        }
    }
}

impl From<CanError> for CliError {
    fn from(e: CanError) -> Self {
        match e {
            CanError::Sink { .. } | CanError::Io(_) => CliError::runtime(e),
            _ => CliError::usage(e),
        }
    }
}
