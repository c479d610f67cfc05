//! Fringe smearing by the momentum spread of the atom beam.
//!
//! The single-atom rate is averaged over a Gaussian distribution of the initial atom
//! momentum. With non-relativistic kinematics the average is done in closed form under
//! the transfer integral; otherwise over a Gauss–Hermite tensor grid when it is small
//! enough, and by Monte Carlo with a fixed seed beyond that. The photon beams stay ideal.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::PwAmplitudeModel;
use crate::error::{Error, Result};
use crate::kinematics::{AtomBeam, BesselMode, Dispersion};
use crate::quad::normal_rule;
use crate::spectra::{fringe_census, visibility, FringePattern, ScanOptions, ShellProblem};

/// Largest tensor grid used by [`SmearMethod::Auto`] before switching to Monte Carlo.
pub const MAX_TENSOR_NODES: usize = 4096;
/// Upper end of the `tolerable_spread` search, in units of `κ1 + κ2`.
pub const SEARCH_RANGE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmearMethod {
    /// `Analytic` for non-relativistic atoms, nodes otherwise.
    #[default]
    Auto,
    /// Closed-form Gaussian average inside the `K_perp` integral (non-relativistic only).
    Analytic,
    /// Gauss–Hermite tensor grid over the active axes.
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumSpread {
    /// Standard deviation of each Cartesian momentum component (eV).
    pub sigma_p: Vector3<f64>,
    /// Gauss–Hermite nodes per active axis.
    pub n_quad: usize,
    pub n_mc: usize,
    pub seed: u64,
    pub method: SmearMethod,
}

impl Default for MomentumSpread {
    fn default() -> Self {
        MomentumSpread {
            sigma_p: Vector3::zeros(),
            n_quad: 8,
            n_mc: 2000,
            seed: 0,
            method: SmearMethod::Auto,
        }
    }
}

impl MomentumSpread {
    pub fn isotropic(sigma: f64) -> Self {
        MomentumSpread {
            sigma_p: Vector3::repeat(sigma),
            ..Default::default()
        }
    }

    pub fn with_sigma(self, sigma_p: Vector3<f64>) -> Self {
        MomentumSpread { sigma_p, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_p.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(Error::physics(
                "sigma_p >= 0",
                format!("sigma_p = {:?}", self.sigma_p.as_slice()),
            ));
        }
        if self.n_quad == 0 || self.n_mc == 0 {
            return Err(Error::InvalidArgument("smearing resolution must be positive".into()));
        }
        Ok(())
    }
}

/// A smeared pattern and, for the Monte Carlo path, the standard error of each value.
#[derive(Debug, Clone, PartialEq)]
pub struct Smeared {
    pub pattern: FringePattern,
    pub std_error: Option<Vec<f64>>,
}

/// Momentum offsets and weights. Axes that cannot change the shell are dropped: with
/// non-relativistic kinematics and `K_z = 0` the longitudinal momentum never enters.
fn active_axes(spread: &MomentumSpread, atom: &AtomBeam, kz: f64) -> Vec<usize> {
    let relevant = |axis: usize| axis < 2 || kz != 0.0 || atom.dispersion == Dispersion::Relativistic;
    (0..3).filter(|&a| spread.sigma_p[a] > 0.0 && relevant(a)).collect()
}

fn nodes(spread: &MomentumSpread, atom: &AtomBeam, kz: f64) -> Result<(Vec<(Vector3<f64>, f64)>, bool)> {
    let active = active_axes(spread, atom, kz);
    if active.is_empty() {
        return Ok((vec![(Vector3::zeros(), 1.0)], false));
    }
    let tensor_size = spread.n_quad.checked_pow(active.len() as u32).unwrap_or(usize::MAX);
    let use_mc = match spread.method {
        SmearMethod::Quadrature => false,
        SmearMethod::MonteCarlo => true,
        SmearMethod::Auto | SmearMethod::Analytic => tensor_size > MAX_TENSOR_NODES,
    };
    if use_mc {
        let mut rng = ChaCha8Rng::seed_from_u64(spread.seed);
        let w = 1.0 / spread.n_mc as f64;
        let out = (0..spread.n_mc)
            .map(|_| {
                let mut off = Vector3::zeros();
                for &a in &active {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    off[a] = spread.sigma_p[a] * z;
                }
                (off, w)
            })
            .collect();
        return Ok((out, true));
    }
    let rule = normal_rule(spread.n_quad)?;
    let mut out = vec![(Vector3::zeros(), 1.0)];
    for &a in &active {
        out = out
            .into_iter()
            .flat_map(|(off, w)| {
                rule.iter().map(move |&(z, wz)| {
                    let mut o = off;
                    o[a] = spread.sigma_p[a] * z;
                    (o, w * wz)
                })
            })
            .collect();
    }
    Ok((out, false))
}

/// Pattern averaged over the momentum spread, plus Monte Carlo standard errors.
pub fn smear(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    grid: &[f64],
    spread: &MomentumSpread,
    opts: &ScanOptions,
) -> Result<Smeared> {
    spread.validate()?;
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "scan grid must be non-empty, finite and strictly increasing".into(),
        ));
    }
    let kz = b1.kz + b2.kz;
    let active = active_axes(spread, atom, kz);
    let analytic = match spread.method {
        SmearMethod::Analytic => true,
        SmearMethod::Auto => atom.dispersion == Dispersion::NonRelativistic,
        _ => false,
    };
    if analytic && !active.is_empty() {
        let mut sigma = Vector3::zeros();
        for a in active {
            sigma[a] = spread.sigma_p[a];
        }
        let problem = ShellProblem::new(b1, b2, atom, model, opts)?;
        let base = crate::spectra::detuning_scan_unchecked(b1, b2, atom, model, &grid[..1], opts)?;
        let rates = grid
            .par_iter()
            .map(|&d| problem.gaussian_rate(d, &sigma))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Smeared {
            pattern: FringePattern {
                grid: grid.to_vec(),
                values: rates.iter().map(|r| r[0]).collect(),
                envelope: Some(rates.iter().map(|r| r[1]).collect()),
                phase: None,
                ..base
            },
            std_error: None,
        });
    }
    let (nodes, mc) = nodes(spread, atom, kz)?;
    // every node sees the same grid; reduction below runs in node order
    let per_node: Vec<FringePattern> = nodes
        .par_iter()
        .map(|(off, _)| {
            let shifted = atom.with_momentum(atom.p + off);
            crate::spectra::detuning_scan_unchecked(b1, b2, &shifted, model, grid, opts)
        })
        .collect::<Result<_>>()?;
    if nodes.len() == 1 {
        let mut pattern = per_node.into_iter().next().expect("one node");
        if nodes[0].0 != Vector3::zeros() {
            pattern.phase = None;
        }
        return Ok(Smeared {
            pattern,
            std_error: None,
        });
    }
    let n = grid.len();
    let mut values = vec![0.0; n];
    let mut envelope = vec![0.0; n];
    for ((_, w), p) in nodes.iter().zip(&per_node) {
        let env = p.envelope.as_ref().expect("scans carry an envelope");
        for i in 0..n {
            values[i] += w * p.values[i];
            envelope[i] += w * env[i];
        }
    }
    let std_error = mc.then(|| {
        let m = nodes.len() as f64;
        (0..n)
            .map(|i| {
                let var = per_node.iter().map(|p| (p.values[i] - values[i]).powi(2)).sum::<f64>() / (m - 1.0);
                (var / m).sqrt()
            })
            .collect()
    });
    let first = &per_node[0];
    Ok(Smeared {
        pattern: FringePattern {
            axis: first.axis,
            grid: grid.to_vec(),
            values,
            envelope: Some(envelope),
            phase: None,
            max_oscillations: first.max_oscillations,
            boundary_cutoff: first.boundary_cutoff,
            excluded_fraction: first.excluded_fraction,
        },
        std_error,
    })
}

pub fn smear_pattern(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    grid: &[f64],
    spread: &MomentumSpread,
    opts: &ScanOptions,
) -> Result<FringePattern> {
    Ok(smear(b1, b2, atom, model, grid, spread, opts)?.pattern)
}

/// Visibility of a smeared pattern; a pattern whose fringes have washed out completely
/// counts as zero visibility.
fn smeared_visibility(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    grid: &[f64],
    spread: &MomentumSpread,
    opts: &ScanOptions,
) -> Result<f64> {
    let p = smear_pattern(b1, b2, atom, model, grid, spread, opts)?;
    match visibility(&p) {
        Err(Error::NoFringe) => Ok(0.0),
        r => r,
    }
}

/// One fringe followed across a spread ladder, delimited by its neighbouring maxima in
/// the unsmeared pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedFringe {
    pub position: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Deepest fringe of `pattern`; among equally deep ones the one nearest the middle of
/// the support, where edge effects are weakest.
pub fn reference_fringe(pattern: &FringePattern) -> Result<TrackedFringe> {
    let census = fringe_census(pattern)?;
    let best = census.fringes.iter().map(|f| f.contrast).fold(0.0, f64::max);
    let first = pattern.values.iter().position(|&v| v > 0.0).unwrap_or(0);
    let last = pattern.values.iter().rposition(|&v| v > 0.0).unwrap_or(0);
    let mid = 0.5 * (pattern.grid[first] + pattern.grid[last]);
    let f = census
        .fringes
        .iter()
        .filter(|f| f.contrast >= best - 1e-9)
        .min_by(|a, b| (a.position - mid).abs().total_cmp(&(b.position - mid).abs()))
        .ok_or(Error::NoFringe)?;
    let lower = census
        .maxima
        .iter()
        .rev()
        .find(|m| m.position < f.position)
        .map_or(f64::NEG_INFINITY, |m| m.position);
    let upper = census
        .maxima
        .iter()
        .find(|m| m.position > f.position)
        .map_or(f64::INFINITY, |m| m.position);
    Ok(TrackedFringe {
        position: f.position,
        lower,
        upper,
    })
}

/// Contrast of the fringe nearest `fringe.position` within its original bracket; zero
/// once it has washed out.
pub fn tracked_contrast(pattern: &FringePattern, fringe: &TrackedFringe) -> Result<f64> {
    let census = match fringe_census(pattern) {
        Err(Error::NoFringe) => return Ok(0.0),
        r => r?,
    };
    Ok(census
        .fringes
        .iter()
        .filter(|f| f.position > fringe.lower && f.position < fringe.upper)
        .min_by(|a, b| {
            (a.position - fringe.position)
                .abs()
                .total_cmp(&(b.position - fringe.position).abs())
        })
        .map_or(0.0, |f| f.contrast))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub sigma: f64,
    /// Deepest fringe anywhere in the smeared pattern.
    pub visibility: f64,
    /// Contrast of the reference fringe.
    pub tracked_contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityCurve {
    pub reference: TrackedFringe,
    pub points: Vec<LadderPoint>,
}

/// Visibility against isotropic spread for each value in `sigmas`, with the deepest
/// fringe of the unsmeared pattern followed along the ladder.
#[allow(clippy::too_many_arguments)]
pub fn visibility_curve(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    grid: &[f64],
    template: &MomentumSpread,
    sigmas: &[f64],
    opts: &ScanOptions,
) -> Result<VisibilityCurve> {
    let plain = smear_pattern(b1, b2, atom, model, grid, &template.with_sigma(Vector3::zeros()), opts)?;
    let reference = reference_fringe(&plain)?;
    let points = sigmas
        .iter()
        .map(|&s| {
            let p = smear_pattern(
                b1,
                b2,
                atom,
                model,
                grid,
                &template.with_sigma(Vector3::repeat(s)),
                opts,
            )?;
            let visibility = match visibility(&p) {
                Err(Error::NoFringe) => 0.0,
                r => r?,
            };
            Ok(LadderPoint {
                sigma: s,
                visibility,
                tracked_contrast: tracked_contrast(&p, &reference)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(VisibilityCurve { reference, points })
}

/// Isotropic spread at which the visibility falls to `threshold`, bracketed to 0.1%.
#[allow(clippy::too_many_arguments)]
pub fn tolerable_spread(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    grid: &[f64],
    threshold: f64,
    template: &MomentumSpread,
    opts: &ScanOptions,
) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "visibility threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let vis = |s: f64| {
        smeared_visibility(
            b1,
            b2,
            atom,
            model,
            grid,
            &template.with_sigma(Vector3::repeat(s)),
            opts,
        )
    };
    let v0 = vis(0.0)?;
    if v0 < threshold {
        return Err(Error::NeverVisible);
    }
    let mut hi = SEARCH_RANGE * (b1.kappa + b2.kappa);
    if vis(hi)? >= threshold {
        return Err(Error::AlwaysVisible);
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        if hi - lo <= 1e-3 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if vis(mid)? >= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
