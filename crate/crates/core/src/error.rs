use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

/// A single validation finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, message: message.into() }
    }

    pub fn warning(message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            Severity::Warning => write!(f, "warning: {}", self.message),
            Severity::Error => write!(f, "error: {}", self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Validation(Diagnostics),
    #[error("no consistent rotating frame: {cycle}")]
    FrameIncompatible { cycle: String },
    #[error("unknown level `{label}` in atom `{atom}`")]
    UnknownLabel { atom: String, label: String },
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("too many integration steps before t = {t}")]
    TooManySteps { t: f64 },
    #[error("density matrix invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },
    #[error("steady state is not unique: Liouvillian kernel has dimension {dim}")]
    DegenerateKernel { dim: usize },
    #[error("susceptibility pole at probe detuning {detuning}")]
    Pole { detuning: f64 },
    #[error("probe response is not linear: relative deviation {deviation:e}")]
    Nonlinear { deviation: f64 },
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("unsupported level scheme: {0}")]
    Scheme(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
