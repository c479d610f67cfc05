//! Two-photon absorption of Bessel (twisted) photons by atoms with a delocalized
//! center-of-mass wave function.
//!
//! All quantities are in natural units with energies and momenta in eV.

pub mod amplitude;
pub mod error;
pub mod kinematics;
pub mod lineshape;
pub mod oracle;
pub mod quad;
pub mod smearing;
pub mod spectra;

pub use amplitude::{twisted_amplitude, xsec_density, PwAmplitudeModel, TwistedAmplitude};
pub use error::{Error, Result};
pub use kinematics::{AtomBeam, BesselMode, Dispersion, TransferVector, TriangleGeometry};

/// Library version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
