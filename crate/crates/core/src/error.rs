use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integration failed at t = {t}: non-finite {what}")]
    Integration { t: f64, what: &'static str },

    #[error(
        "integration failed at t = {t}: state blew up with saturation disabled \
         (high-gain observer peaking reached the loop)"
    )]
    Peaking { t: f64 },

    #[error("Riccati solution lost positive definiteness at t = {t}")]
    RiccatiIndefinite { t: f64 },

    #[error("{function} returned a non-finite value")]
    NonFinite { function: &'static str },

    #[error("matrix is not Hurwitz; the Lyapunov equation has no positive definite solution")]
    NotHurwitz,

    #[error("matrix is singular: {0}")]
    Singular(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trajectories are recorded on different grids: {0}")]
    GridMismatch(String),

    #[error("unknown system '{0}'")]
    UnknownSystem(String),

    #[error("run with epsilon = {epsilon} failed: {source}")]
    Sweep {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
