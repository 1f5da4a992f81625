use thiserror::Error;

pub type Result<T> = std::result::Result<T, CsxError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsxError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("no axial fixed point for species {species} in (0, {upper}]")]
    NoAxialFixedPoint { species: usize, upper: f64 },

    #[error("budget exceeded: {what} would need {count} evaluations (limit {limit})")]
    BudgetExceeded { what: &'static str, count: f64, limit: f64 },

    #[error("inverse map failed: {0}")]
    InverseFailed(String),

    #[error("bracket error along direction {direction:?}: {reason}")]
    BracketError { direction: Vec<f64>, reason: String },

    #[error("radial height undetermined along direction {0:?}")]
    HeightUndetermined(Vec<f64>),

    #[error("format error: {0}")]
    Format(String),

    #[error("nullcline of species {0} is not a plane")]
    NotPlanar(usize),

    #[error("orbit overflow at step {step}: component exceeded {limit}")]
    Overflow { step: usize, limit: f64 },

    #[error("closed-form condition {tag} does not apply to family {family}")]
    MismatchedTag { tag: String, family: String },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl CsxError {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CsxError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
