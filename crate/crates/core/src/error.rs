use alloc::string::String;

/// Errors produced by the numerical engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("energy {energy} lies exactly on a band edge; derivative of the self-energy is singular")]
    BandEdge { energy: f64 },

    #[error("singular resolvent at energy {energy}: bound-state pole hit on the real axis")]
    BoundStateHit { energy: f64 },

    #[error("decimation did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("bound-state root search failed: {0}")]
    RootSearch(String),

    #[error("quadrature tolerance {tolerance:e} not reached (estimate {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("broadening {eta} is below the level spacing {spacing}")]
    BroadeningTooSmall { eta: f64, spacing: f64 },

    #[error("eigendecomposition residual {residual:e} exceeds tolerance")]
    Eigen { residual: f64 },

    #[error("rate evaluation failed at u = {u} ({quantity}): {source}")]
    Rate {
        u: f64,
        quantity: &'static str,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn at(self, u: f64, quantity: &'static str) -> Self {
        match self {
            e @ Error::Rate { .. } => e,
            e => Error::Rate { u, quantity, source: alloc::boxed::Box::new(e) },
        }
    }
}
