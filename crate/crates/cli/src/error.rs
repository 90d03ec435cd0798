//! Error-to-exit-code mapping: 0 success, 2 config/input, 3 runtime
//! numerical, 4 shape/precondition.

use qedlab_core::analysis::AnalysisError;
use qedlab_core::calibrate::CalibrateError;
use qedlab_core::simulate::SimError;
use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
    Shape(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Shape(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
            CliError::Shape(msg) => write!(f, "shape error: {msg}"),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::Format(_) => CliError::Config(e.to_string()),
            SimError::EmptySample | SimError::Io(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Shape(_) => CliError::Shape(e.to_string()),
            AnalysisError::Config(_) => CliError::Config(e.to_string()),
            AnalysisError::NonIntegrable(_) => CliError::Runtime(e.to_string()),
            AnalysisError::Sim(inner) => inner.into(),
        }
    }
}

impl From<CalibrateError> for CliError {
    fn from(e: CalibrateError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}
