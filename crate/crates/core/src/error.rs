use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LrdnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("leading coefficient is numerically singular (condition number {condition:.3e})")]
    SingularLeadingCoefficient { condition: f64 },

    #[error("truncated inverse does not decay: tail norm {tail_norm:.3e} exceeds {decay_tol:.3e} at horizon {horizon}")]
    NoDecay {
        tail_norm: f64,
        decay_tol: f64,
        horizon: usize,
    },

    #[error("model failed validation: {0}")]
    InvalidModel(String),

    #[error("exact Wiener filter is inconsistent: [S(inf)]_{{{index},{index}}} = {value:.3e} (contemporaneous feedback loop in G_l)")]
    ContemporaneousLoop { index: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("spectral block is singular at theta = {theta:.4} (condition number {condition:.3e})")]
    SingularBlock { theta: f64, condition: f64 },

    #[error("not enough samples: {available} available, {required} required")]
    InsufficientData { available: usize, required: usize },

    #[error("regression design for row {row} is rank deficient (condition number {condition:.3e})")]
    RankDeficientDesign { row: usize, condition: f64 },

    #[error("restricted design for target {target}, source {from} is degenerate: {reason}")]
    DegenerateRestriction {
        target: usize,
        from: usize,
        reason: String,
    },

    #[error("ambiguous rank: selected/rejected residual gap {gap:.3e} is below 10")]
    AmbiguousRank { gap: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl LrdnError {
    /// True for failures caused by the numbers rather than by the inputs' form.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LrdnError::SingularLeadingCoefficient { .. }
                | LrdnError::NoDecay { .. }
                | LrdnError::InvalidModel(_)
                | LrdnError::ContemporaneousLoop { .. }
                | LrdnError::GenerationFailed { .. }
                | LrdnError::SingularBlock { .. }
                | LrdnError::InsufficientData { .. }
                | LrdnError::RankDeficientDesign { .. }
                | LrdnError::DegenerateRestriction { .. }
                | LrdnError::AmbiguousRank { .. }
        )
    }
}

impl From<std::io::Error> for LrdnError {
    fn from(e: std::io::Error) -> Self {
        LrdnError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LrdnError {
    fn from(e: serde_json::Error) -> Self {
        LrdnError::Parse(e.to_string())
    }
}

impl From<csv::Error> for LrdnError {
    fn from(e: csv::Error) -> Self {
        LrdnError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LrdnError>;
