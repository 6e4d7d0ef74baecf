use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A tilted moment was requested at or beyond the claim-size MGF bound.
    #[error("exponential moment diverges: tilt {tilt} >= mgf bound {bound}")]
    Domain { tilt: f64, bound: f64 },

    #[error("correlation matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("{name} = {value} outside [{lo}, {hi}]")]
    Range {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("concavity condition fails at (t={t}, y={y}, theta={theta})")]
    ConcavityViolation { t: f64, y: f64, theta: f64 },

    #[error("first-order condition not bracketed on [{lo}, {hi}] at (t={t}, y={y})")]
    NoBracket { t: f64, y: f64, lo: f64, hi: f64 },

    #[error("degenerate correlation: {0}")]
    DegenerateCorrelation(String),

    #[error("Riccati coefficient blew up at t={t} (|value| = {value:e})")]
    BlowUp { t: f64, value: f64 },

    #[error("standing assumptions violated: {0}")]
    AssumptionViolation(String),

    #[error("thinning bound exceeded at t={t}: intensity {intensity} > bound {bound}")]
    ThinningBoundExceeded { t: f64, intensity: f64, bound: f64 },

    #[error("model is outside the quadratic-ansatz class: {0}")]
    NotQuadratic(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::NotPsd { .. }
                | Error::Range { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
