use thiserror::Error;

/// Failure modes shared by every layer of the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("weak-field approximation invalid: g*muB*B_R/hbar / omega = {ratio:.3e} (must be < 0.1)")]
    ApproximationInvalid { ratio: f64 },

    #[error(
        "raw gauge is singular at theta = pi (trajectory reaches theta = {theta:.9}); use the microwave-fixed gauge"
    )]
    GaugeSingularity { theta: f64 },

    #[error("trajectory is not closed: endpoints differ by {gap:.3e}")]
    NotClosed { gap: f64 },

    #[error("adaptive quadrature did not reach relative tolerance {tol:.1e} (estimated error {error:.3e})")]
    QuadratureFailure { tol: f64, error: f64 },

    #[error("operator is not Hermitian (max |H - H^dagger| = {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("state norm drifted by {drift:.3e}")]
    NormDrift { drift: f64 },

    #[error("evolution is not adiabatic: margin {margin:.3e} < {required}")]
    NotAdiabatic { margin: f64, required: f64 },

    #[error("phase branch continuation failed at t = {time:.6e}: {reason}")]
    PhaseUnwrapFailure { time: f64, reason: String },

    #[error("signal dead: sequence length {duration:.3e} s exceeds {limit:.3e} s")]
    SignalDead { duration: f64, limit: f64 },

    #[error("no microwave drive: sin(theta) = {sin_theta:.3e}")]
    NoDrive { sin_theta: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery, as opposed to a
    /// physics precondition or bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::QuadratureFailure { .. }
                | Error::NonHermitian { .. }
                | Error::NormDrift { .. }
                | Error::PhaseUnwrapFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
