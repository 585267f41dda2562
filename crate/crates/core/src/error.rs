use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("monomial {monomial:?} is not a function of the formal actions")]
    NotActionRepresentable { monomial: Vec<u32> },

    #[error("point with norm {norm} lies outside the domain of radius {radius}")]
    OutOfDomain { norm: f64, radius: f64 },

    #[error("frequency vector is resonant: k = {k:?}, |k.alpha| = {value:e}")]
    ResonantFrequency { k: Vec<i64>, value: f64 },

    #[error("resonance at degree {degree}: divisor (k-l).alpha = {divisor:e} for k-l = {k:?}")]
    ResonanceEncountered {
        degree: u32,
        k: Vec<i64>,
        divisor: f64,
    },

    #[error("working degree {d_work} needs about {terms} monomials, above the budget of {budget}")]
    OrderTooHigh { d_work: u32, terms: u128, budget: u128 },

    #[error("threshold violated: {0}")]
    ThresholdViolation(String),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("combinatorial budget exceeded: {candidates} candidates > cap {cap}")]
    CombinatorialBudgetExceeded { candidates: u128, cap: u128 },

    #[error("fixed-point iteration diverged at t = {t} after {iterations} iterations (dt too large?)")]
    FixedPointDivergence { t: f64, iterations: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// Input and contract violations, as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::Invalid(_)
                | Error::NonSymmetric(_)
                | Error::Json(_)
                | Error::Io(_)
                | Error::ThresholdViolation(_)
                | Error::CombinatorialBudgetExceeded { .. }
                | Error::OrderTooHigh { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Invalid(_) => "invalid_input",
            Error::NotActionRepresentable { .. } => "not_action_representable",
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::ResonantFrequency { .. } => "resonant_frequency",
            Error::ResonanceEncountered { .. } => "resonance_encountered",
            Error::OrderTooHigh { .. } => "order_too_high",
            Error::ThresholdViolation(_) => "threshold_violation",
            Error::NonSymmetric(_) => "non_symmetric",
            Error::CombinatorialBudgetExceeded { .. } => "combinatorial_budget_exceeded",
            Error::FixedPointDivergence { .. } => "fixed_point_divergence",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
