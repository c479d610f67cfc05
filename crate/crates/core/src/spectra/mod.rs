//! Observable distributions: detuning and crossed-beam scans, kick-angle
//! distributions, the fringe census and the kick sampler.

mod census;
mod sampler;
mod shell;

use serde::{Deserialize, Serialize};

pub use census::{fringe_census, visibility, Census, Extremum, Fringe, DARK_CONTRAST};
pub use sampler::{sample_kicks, KickEvent, KickSample, CHUNK_EVENTS};
pub(crate) use shell::detuning_scan_unchecked;
pub use shell::{
    angular_distribution, auto_detuning_grid, azimuthal_distribution, crossed_beam_scan, detuning_scan, refine_support,
    uniform_grid, ShellProblem,
};

use crate::kinematics::annulus;

/// Default boundary cutoff relative to `κ1 + κ2`.
pub const EPS_CUTOFF_REL: f64 = 1e-4;

pub fn default_cutoff(kappa1: f64, kappa2: f64) -> f64 {
    EPS_CUTOFF_REL * (kappa1 + kappa2)
}

/// Fraction of the annulus area removed by trimming `eps` from both edges.
pub fn excluded_fraction(kappa1: f64, kappa2: f64, eps: f64) -> f64 {
    let (lo, hi) = annulus(kappa1, kappa2);
    let total = hi * hi - lo * lo;
    if total <= 0.0 {
        return 1.0;
    }
    let inner = (lo + eps).min(hi).powi(2) - lo * lo;
    let outer = hi * hi - (hi - eps).max(lo).powi(2);
    ((inner + outer) / total).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Detuning in eV.
    Detuning,
    /// Polar angle of the kick in rad.
    ThetaK,
    /// `|K_perp|` in eV.
    KPerp,
    /// Azimuth of the kick in rad.
    PhiK,
}

impl Axis {
    pub fn label(self) -> &'static str {
        match self {
            Axis::Detuning => "detuning_ev",
            Axis::ThetaK => "theta_k_rad",
            Axis::KPerp => "k_perp_ev",
            Axis::PhiK => "phi_k_rad",
        }
    }
}

/// A sampled rate distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringePattern {
    pub axis: Axis,
    pub grid: Vec<f64>,
    /// Unnormalized rate density per unit of the axis variable.
    pub values: Vec<f64>,
    /// Same density with the two paths added in magnitude, `(|M_a| + |M_b|)²` in place of
    /// `|M_a e^{iΦ} + M_b e^{-iΦ}|²`. Dividing by it leaves the pure fringe factor.
    pub envelope: Option<Vec<f64>>,
    /// Fringe phase `Φ = m1δ1 + m2δ2` at each grid point when it is single valued (NaN
    /// outside the support).
    pub phase: Option<Vec<f64>>,
    /// Upper bound on the number of `cos²` oscillations, `|m1| + |m2|`.
    pub max_oscillations: f64,
    pub boundary_cutoff: f64,
    pub excluded_fraction: f64,
}

impl FringePattern {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Values divided by the envelope where it is positive; raw values otherwise.
    pub fn normalized(&self) -> Vec<f64> {
        match &self.envelope {
            Some(env) => self
                .values
                .iter()
                .zip(env)
                .map(|(&v, &e)| if e > 0.0 { v / e } else { 0.0 })
                .collect(),
            None => self.values.clone(),
        }
    }

    /// Trapezoid integral of the values over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1]))
            .sum()
    }
}

/// Knobs shared by the scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Absolute boundary cutoff in eV; `None` selects [`default_cutoff`].
    pub eps_boundary: Option<f64>,
    /// Relative tolerance of the adaptive shell integral.
    pub rel_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            eps_boundary: None,
            rel_tol: 1e-6,
        }
    }
}

impl ScanOptions {
    pub fn cutoff(&self, kappa1: f64, kappa2: f64) -> f64 {
        self.eps_boundary.unwrap_or_else(|| default_cutoff(kappa1, kappa2))
    }
}
