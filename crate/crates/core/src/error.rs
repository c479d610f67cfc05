use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A physical invariant of a domain type was violated. `invariant` names it.
    #[error("physics invariant violated ({invariant}): {detail}")]
    Physics { invariant: &'static str, detail: String },

    #[error("K_perp = {k_perp:e} eV lies outside the annulus [{lower:e}, {upper:e}] eV")]
    OutsideAnnulus { k_perp: f64, lower: f64, upper: f64 },

    #[error("K_perp = {k_perp:e} eV sits on the annulus boundary where the triangle area vanishes")]
    DegenerateBoundary { k_perp: f64 },

    #[error("no kinematic solution: {0}")]
    NoSolution(String),

    #[error("energy conservation violated: expected detuning {expected:e} eV, transfer gives {actual:e} eV")]
    EnergyMismatch { expected: f64, actual: f64 },

    #[error("longitudinal momentum mismatch: K_z = {actual:e} eV but k1z + k2z = {expected:e} eV")]
    LongitudinalMismatch { expected: f64, actual: f64 },

    #[error("quadrature did not converge: {0}")]
    NonConvergent(String),

    #[error("root finding failed: {0}")]
    RootFailure(String),

    #[error("pattern undersampled: phase step {max_step:.3} rad exceeds {limit:.3} rad")]
    Undersampled { max_step: f64, limit: f64 },

    #[error("pattern has no interior fringe")]
    NoFringe,

    #[error("visibility stays above the threshold over the whole search range")]
    AlwaysVisible,

    #[error("visibility is below the threshold even without smearing")]
    NeverVisible,

    #[error("design matrix rank {rank} is below grid size {size} and no regularization was requested")]
    IllPosed { rank: usize, size: usize },

    #[error("measurement set mixes photon energies; only fixed-energy OAM series are accepted: {0}")]
    EnergyScanRejected(String),
}

impl Error {
    /// Numerical failures, as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergent(_)
                | Error::RootFailure(_)
                | Error::Undersampled { .. }
                | Error::NoFringe
                | Error::AlwaysVisible
                | Error::NeverVisible
                | Error::IllPosed { .. }
                | Error::NoSolution(_)
                | Error::DegenerateBoundary { .. }
        )
    }

    pub(crate) fn physics(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Physics {
            invariant,
            detail: detail.into(),
        }
    }
}
