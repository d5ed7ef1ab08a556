//! Command-line front end: configuration, dataset fetch, per-stage
//! subcommands, and the end-to-end pipeline.

pub mod config;
pub mod fetch;
pub mod output;
pub mod pipeline;

use std::fmt;

/// Errors carry their process exit code: 2 config, 3 data, 4 model.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Model(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Model(_) => 4,
        }
    }

    /// Prefixes the message with the pipeline stage that raised it.
    pub fn at_stage(self, stage: &str) -> CliError {
        match self {
            CliError::Config(m) => CliError::Config(format!("stage={stage}: {m}")),
            CliError::Data(m) => CliError::Data(format!("stage={stage}: {m}")),
            CliError::Model(m) => CliError::Model(format!("stage={stage}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Model(m) => write!(f, "model error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Parses a model-family name as used by `fit <family>`.
pub fn evaluation_family(name: &str) -> Result<lagcast::evaluation::ModelFamily, CliError> {
    use lagcast::evaluation::ModelFamily;
    match name.to_ascii_lowercase().as_str() {
        "sarimax" => Ok(ModelFamily::Sarimax),
        "mpr" | "poisson" => Ok(ModelFamily::Mpr),
        "ann" | "mlp" => Ok(ModelFamily::Ann),
        "xgb" | "gbt" => Ok(ModelFamily::Xgb),
        other => Err(CliError::Config(format!(
            "unknown family `{other}` (expected sarimax, mpr, ann, or xgb)"
        ))),
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<lagcast::data::DataError> for CliError {
    fn from(e: lagcast::data::DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<lagcast::stl::StlError> for CliError {
    fn from(e: lagcast::stl::StlError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<lagcast::correlation::CorrelationError> for CliError {
    fn from(e: lagcast::correlation::CorrelationError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<lagcast::diagnostics::DiagnosticsError> for CliError {
    fn from(e: lagcast::diagnostics::DiagnosticsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<lagcast::sarimax::SarimaxError> for CliError {
    fn from(e: lagcast::sarimax::SarimaxError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<lagcast::poisson::PoissonError> for CliError {
    fn from(e: lagcast::poisson::PoissonError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<lagcast::mlp::MlpError> for CliError {
    fn from(e: lagcast::mlp::MlpError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<lagcast::gbt::GbtError> for CliError {
    fn from(e: lagcast::gbt::GbtError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<lagcast::evaluation::EvalError> for CliError {
    fn from(e: lagcast::evaluation::EvalError) -> Self {
        CliError::Model(e.to_string())
    }
}
