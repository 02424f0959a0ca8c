//! Command errors and their exit codes.

use std::fmt;

use storyloom_core::analyzer::AnalyzerError;
use storyloom_core::gateway::GatewayError;
use storyloom_core::memory::MemoryError;
use storyloom_core::pipeline::{PipelineError, PremiseError};

pub const EXIT_OK: i32 = 0;
/// Interrupted on purpose (`--halt-after`); the run can be resumed.
pub const EXIT_HALTED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

fn gateway_code(e: &GatewayError) -> i32 {
    match e {
        GatewayError::EmptyCompletion => EXIT_PARSE,
        GatewayError::Config(_) => EXIT_INPUT,
        _ => EXIT_PROVIDER,
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        Self::new(gateway_code(&e), e.to_string())
    }
}

impl From<MemoryError> for CliError {
    fn from(e: MemoryError) -> Self {
        let code = match &e {
            MemoryError::Gateway(g) => gateway_code(g),
            MemoryError::ExtractionEmpty { .. } => EXIT_PARSE,
            MemoryError::EmptyText | MemoryError::InvalidThreshold(_) | MemoryError::Malformed { .. } | MemoryError::Io(_) => {
                EXIT_INPUT
            }
        };
        Self::new(code, e.to_string())
    }
}

impl From<PremiseError> for CliError {
    fn from(e: PremiseError) -> Self {
        Self::input(format!("premise: {e}"))
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Gateway(g) => g.into(),
            PipelineError::Memory(m) => m.into(),
            PipelineError::OutlineParse { .. } => Self::new(EXIT_PARSE, e.to_string()),
            PipelineError::Artifact(_) => Self::input(e.to_string()),
            PipelineError::Halted(_) => Self::new(EXIT_HALTED, e.to_string()),
        }
    }
}

impl From<AnalyzerError> for CliError {
    fn from(e: AnalyzerError) -> Self {
        match e {
            AnalyzerError::EmptyKg => Self::input(e.to_string()),
            AnalyzerError::Gateway(g) => g.into(),
        }
    }
}
