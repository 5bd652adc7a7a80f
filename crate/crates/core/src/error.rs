use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The phonon (or spin) basis is too small for the state being produced.
    #[error("matter cutoff insufficient: {what} (defect {defect:.3e} > {limit:.1e})")]
    CutoffInsufficient { what: String, defect: f64, limit: f64 },

    /// Population reached the top retained cavity level.
    #[error("cavity cutoff leakage {population:.3e} at t = {t:.6e} (n_c_max = {n_c_max})")]
    CavityLeakage { population: f64, t: f64, n_c_max: usize },

    #[error("target unreachable: coefficient for m = {m} is nonzero but the initial state has no weight there")]
    UnreachableTarget { m: f64 },

    #[error("integrator step underflow on [{t0:.6e}, {t1:.6e}]")]
    StepUnderflow { t0: f64, t1: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("zero-norm state cannot be compared")]
    ZeroNorm,

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// One failure reported to several callers.
    #[error(transparent)]
    Shared(std::sync::Arc<Error>),
}

impl Error {
    /// Physics-validity failures as opposed to malformed input.
    pub fn is_physics(&self) -> bool {
        if let Error::Shared(e) = self {
            return e.is_physics();
        }
        matches!(
            self,
            Error::CutoffInsufficient { .. }
                | Error::CavityLeakage { .. }
                | Error::UnreachableTarget { .. }
                | Error::StepUnderflow { .. }
                | Error::Quadrature(_)
                | Error::ZeroNorm
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
