use crate::dynamics::MeanFieldState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mixed frequency units: {0}")]
    MixedUnits(String),

    #[error("leading cubic coefficient is zero")]
    DegenerateCubic,

    #[error("root n = {n} is spurious: |alpha|^2 = {alpha_sq}")]
    SpuriousRoot { n: f64, alpha_sq: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("state is not stationary: |rhs| = {residual:e}")]
    NotStationary { residual: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64, last_state: Box<MeanFieldState> },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// Any of the above, tagged with where in a sweep it happened.
    #[error("{source} (at {at})")]
    At { at: String, source: Box<Error> },
}

impl Error {
    /// True for errors caused by bad input rather than by a numerical failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::At { source, .. } => source.is_config(),
            e => matches!(
                e,
                Error::InvalidParameter { .. } | Error::MixedUnits(_) | Error::InvalidGrid(_)
            ),
        }
    }

    pub fn at(self, at: impl Into<String>) -> Self {
        Error::At { at: at.into(), source: Box::new(self) }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
