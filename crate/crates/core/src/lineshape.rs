//! Finite-width lines: forward model and reconstruction of the line profile from
//! fringe patterns recorded with several OAM settings at one pair of photon energies.
//!
//! A line component shifted by `e` above the nominal excitation energy sees the
//! detuning `x - e`, so the observed pattern is `R(x) = Σ_j w_j h P(x - e_j)`. The
//! profile is recovered by Tikhonov-regularized least squares with a second-difference
//! penalty, optionally under non-negativity.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::PwAmplitudeModel;
use crate::error::{Error, Result};
use crate::kinematics::{AtomBeam, BesselMode, Dispersion};
use crate::spectra::{Axis, FringePattern, ScanOptions, ShellProblem};

/// Tolerance on `∫ w = 1`.
pub const NORM_TOL: f64 = 1e-9;
const UNIFORM_TOL: f64 = 1e-9;
const SAME_ENERGY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Delta {
        center: f64,
    },
    /// `gamma` is the full width at half maximum.
    Lorentzian {
        center: f64,
        gamma: f64,
    },
    Gaussian {
        center: f64,
        sigma_e: f64,
    },
    DoubleLine {
        center1: f64,
        center2: f64,
        fraction1: f64,
    },
    Custom,
}

/// Line profile on a uniform grid of offsets from the nominal excitation energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineProfile {
    pub grid: Vec<f64>,
    /// Density per eV.
    pub weights: Vec<f64>,
    pub kind: ProfileKind,
}

pub fn grid_step(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("profile grid needs at least two points".into()));
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument("profile grid must increase".into()));
    }
    for (i, &e) in grid.iter().enumerate() {
        if (e - (grid[0] + i as f64 * h)).abs() > UNIFORM_TOL * h * grid.len() as f64 {
            return Err(Error::InvalidArgument("profile grid must be uniform".into()));
        }
    }
    Ok(h)
}

/// Uniform grid of `n` offsets centred on zero with spacing `h`.
pub fn centered_grid(n: usize, h: f64) -> Vec<f64> {
    let c = 0.5 * (n as f64 - 1.0);
    (0..n).map(|i| (i as f64 - c) * h).collect()
}

impl LineProfile {
    fn normalized(grid: Vec<f64>, raw: Vec<f64>, kind: ProfileKind) -> Result<Self> {
        let h = grid_step(&grid)?;
        let total: f64 = raw.iter().sum::<f64>() * h;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidArgument("profile has no weight on its grid".into()));
        }
        let p = LineProfile {
            weights: raw.iter().map(|w| w / total).collect(),
            grid,
            kind,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn delta(grid: Vec<f64>, center: f64) -> Result<Self> {
        let j = nearest(&grid, center);
        let mut raw = vec![0.0; grid.len()];
        raw[j] = 1.0;
        Self::normalized(grid, raw, ProfileKind::Delta { center })
    }

    /// Lorentzian truncated to the grid and renormalized there.
    pub fn lorentzian(grid: Vec<f64>, center: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Lorentzian width must be positive, got {gamma}"
            )));
        }
        let hw = 0.5 * gamma;
        let raw = grid.iter().map(|e| hw / ((e - center).powi(2) + hw * hw)).collect();
        Self::normalized(grid, raw, ProfileKind::Lorentzian { center, gamma })
    }

    pub fn gaussian(grid: Vec<f64>, center: f64, sigma_e: f64) -> Result<Self> {
        if !(sigma_e > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Gaussian width must be positive, got {sigma_e}"
            )));
        }
        let raw = grid
            .iter()
            .map(|e| (-0.5 * ((e - center) / sigma_e).powi(2)).exp())
            .collect();
        Self::normalized(grid, raw, ProfileKind::Gaussian { center, sigma_e })
    }

    pub fn double_line(grid: Vec<f64>, center1: f64, center2: f64, fraction1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction1) {
            return Err(Error::InvalidArgument(format!(
                "line fraction must lie in [0, 1], got {fraction1}"
            )));
        }
        let mut raw = vec![0.0; grid.len()];
        raw[nearest(&grid, center1)] += fraction1;
        raw[nearest(&grid, center2)] += 1.0 - fraction1;
        Self::normalized(
            grid,
            raw,
            ProfileKind::DoubleLine {
                center1,
                center2,
                fraction1,
            },
        )
    }

    pub fn custom(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidArgument(
                "profile weights and grid differ in length".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::physics("line weights >= 0", "negative or non-finite weight"));
        }
        Self::normalized(grid, weights, ProfileKind::Custom)
    }

    pub fn step(&self) -> f64 {
        grid_step(&self.grid).unwrap_or(f64::NAN)
    }

    pub fn validate(&self) -> Result<()> {
        let h = grid_step(&self.grid)?;
        if self.weights.len() != self.grid.len() {
            return Err(Error::InvalidArgument(
                "profile weights and grid differ in length".into(),
            ));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::physics("line weights >= 0", "negative or non-finite weight"));
        }
        let total: f64 = self.weights.iter().sum::<f64>() * h;
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::physics("line profile normalized", format!("integral = {total}")));
        }
        Ok(())
    }

    /// Relative L2 distance of the weights from `other` on the same grid.
    pub fn relative_error(&self, other: &LineProfile) -> f64 {
        let num: f64 = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        let den: f64 = other.weights.iter().map(|b| b * b).sum();
        (num / den).sqrt()
    }
}

fn nearest(grid: &[f64], x: f64) -> usize {
    grid.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Everything except the photons that the single-line pattern depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct LineModel {
    pub atom: AtomBeam,
    pub amplitude: PwAmplitudeModel,
    pub scan: ScanOptions,
}

/// Pattern samples `P(x_r - e_j) h` (rates, envelopes) for one OAM setting.
fn columns(
    line: &LineModel,
    b1: &BesselMode,
    b2: &BesselMode,
    x: &[f64],
    egrid: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let h = grid_step(egrid)?;
    let cols: Vec<Vec<[f64; 2]>> = egrid
        .par_iter()
        .map(|&e| {
            let atom = line.atom.with_excitation(line.atom.e_exc + e);
            let problem = ShellProblem::new(b1, b2, &atom, &line.amplitude, &line.scan)?;
            x.iter().map(|&xr| problem.rate(xr - e)).collect()
        })
        .collect::<Result<_>>()?;
    let rate = DMatrix::from_fn(x.len(), egrid.len(), |r, j| cols[j][r][0] * h);
    let env = DMatrix::from_fn(x.len(), egrid.len(), |r, j| cols[j][r][1] * h);
    Ok((rate, env))
}

/// Observed pattern of a finite-width line for one OAM setting.
pub fn forward_pattern(
    profile: &LineProfile,
    b1: &BesselMode,
    b2: &BesselMode,
    line: &LineModel,
    x: &[f64],
) -> Result<FringePattern> {
    profile.validate()?;
    if let (Some(&lo), Some(&hi)) = (x.first(), x.last()) {
        if hi - lo < profile.grid[profile.len() - 1] - profile.grid[0] {
            log::warn!("detuning grid is narrower than the profile support; shifted lines are clipped");
        }
    }
    let (rate, env) = columns(line, b1, b2, x, &profile.grid)?;
    let w = DVector::from_column_slice(&profile.weights);
    let cutoff = line.scan.cutoff(b1.kappa, b2.kappa);
    Ok(FringePattern {
        axis: Axis::Detuning,
        grid: x.to_vec(),
        values: (&rate * &w).as_slice().to_vec(),
        envelope: Some((&env * &w).as_slice().to_vec()),
        phase: None,
        max_oscillations: (b1.m.unsigned_abs() + b2.m.unsigned_abs()) as f64,
        boundary_cutoff: cutoff,
        excluded_fraction: crate::spectra::excluded_fraction(b1.kappa, b2.kappa, cutoff),
    })
}

impl LineProfile {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Design matrix with one block of rows per setting: `A[r, j] = P_s(x_r - e_j) h`.
pub fn build_design_matrix(
    line: &LineModel,
    settings: &[(BesselMode, BesselMode)],
    grids: &[Vec<f64>],
    egrid: &[f64],
) -> Result<DMatrix<f64>> {
    if settings.is_empty() || settings.len() != grids.len() {
        return Err(Error::InvalidArgument("need one detuning grid per OAM setting".into()));
    }
    let blocks = settings
        .iter()
        .zip(grids)
        .map(|((b1, b2), x)| Ok(columns(line, b1, b2, x, egrid)?.0))
        .collect::<Result<Vec<_>>>()?;
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut a = DMatrix::zeros(rows, egrid.len());
    let mut r0 = 0;
    for b in &blocks {
        a.rows_mut(r0, b.nrows()).copy_from(b);
        r0 += b.nrows();
    }
    Ok(a)
}

/// Patterns recorded with several OAM settings at one pair of photon energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub line: LineModel,
    pub settings: Vec<(BesselMode, BesselMode)>,
    /// On the detuning axis.
    pub patterns: Vec<FringePattern>,
    /// Per-point standard deviation; all zero means unweighted.
    pub sigma: Vec<Vec<f64>>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= SAME_ENERGY_RTOL * a.abs().max(b.abs())
}

impl MeasurementSet {
    /// Checks the fixed-energy contract and moves kick-angle patterns onto the detuning axis.
    pub fn new(
        line: LineModel,
        settings: Vec<(BesselMode, BesselMode)>,
        patterns: Vec<FringePattern>,
        sigma: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if settings.is_empty() || settings.len() != patterns.len() || patterns.len() != sigma.len() {
            return Err(Error::InvalidArgument(
                "need one pattern and one noise vector per setting".into(),
            ));
        }
        let (r1, r2) = settings[0];
        for (b1, b2) in &settings {
            b1.validate(line.atom.dispersion)?;
            b2.validate(line.atom.dispersion)?;
            let pairs = [
                (b1.omega, r1.omega),
                (b2.omega, r2.omega),
                (b1.kappa, r1.kappa),
                (b2.kappa, r2.kappa),
            ];
            if !pairs.iter().all(|&(a, b)| same(a, b)) {
                return Err(Error::EnergyScanRejected(format!(
                    "setting ({}, {}) has omega = ({}, {}), kappa = ({}, {}); first setting has ({}, {}), ({}, {})",
                    b1.m, b2.m, b1.omega, b2.omega, b1.kappa, b2.kappa, r1.omega, r2.omega, r1.kappa, r2.kappa
                )));
            }
        }
        let mut converted = Vec::with_capacity(patterns.len());
        let mut sig = Vec::with_capacity(patterns.len());
        for ((p, s), (b1, b2)) in patterns.into_iter().zip(sigma).zip(&settings) {
            if s.len() != p.len() {
                return Err(Error::InvalidArgument(
                    "noise vector length differs from its pattern".into(),
                ));
            }
            let (p, s) = match p.axis {
                Axis::Detuning => (p, s),
                Axis::ThetaK => theta_to_detuning(&line.atom, b1.kz + b2.kz, p, s)?,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "lineshape input must be on the detuning or kick-angle axis, got {}",
                        other.label()
                    )))
                }
            };
            converted.push(p);
            sig.push(s);
        }
        Ok(MeasurementSet {
            line,
            settings,
            patterns: converted,
            sigma: sig,
        })
    }

    pub fn grids(&self) -> Vec<Vec<f64>> {
        self.patterns.iter().map(|p| p.grid.clone()).collect()
    }
}

/// `δ = K_z²/(2M cos²θ)` for a non-relativistic atom at rest; densities pick up `1/|dδ/dθ|`.
fn theta_to_detuning(atom: &AtomBeam, kz: f64, p: FringePattern, s: Vec<f64>) -> Result<(FringePattern, Vec<f64>)> {
    if atom.dispersion != Dispersion::NonRelativistic || atom.p.norm() != 0.0 || kz == 0.0 {
        return Err(Error::InvalidArgument(
            "kick-angle patterns convert to detuning only for a non-relativistic atom at rest with K_z != 0".into(),
        ));
    }
    let m = atom.recoil_mass();
    let mut grid = Vec::with_capacity(p.len());
    let mut jac = Vec::with_capacity(p.len());
    for &th in &p.grid {
        let c2 = th.cos().powi(2);
        grid.push(kz * kz / (2.0 * m * c2));
        jac.push(kz * kz * th.sin().abs() / (m * c2 * th.cos().abs()));
    }
    let scale = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .zip(&jac)
            .map(|(a, j)| if *j > 0.0 { a / j } else { 0.0 })
            .collect()
    };
    let out = FringePattern {
        axis: Axis::Detuning,
        values: scale(&p.values),
        envelope: p.envelope.as_deref().map(scale),
        phase: p.phase.clone(),
        grid,
        ..p
    };
    Ok((out, scale(&s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambda {
    Fixed(f64),
    /// Corner of the L-curve.
    Auto(AutoLambda),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoLambda {
    LCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    /// Regularization strength relative to `‖A‖₂/‖L‖₂`.
    pub lambda: Lambda,
    pub nonnegativity: bool,
    pub grid: Vec<f64>,
    /// λ values of the L-curve table.
    pub l_curve: Vec<f64>,
}

impl ReconstructionConfig {
    pub fn new(grid: Vec<f64>, lambda: Lambda) -> Self {
        ReconstructionConfig {
            lambda,
            nonnegativity: true,
            grid,
            l_curve: default_l_curve(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        grid_step(&self.grid)?;
        if let Lambda::Fixed(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {l}")));
            }
        }
        if self.l_curve.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("L-curve lambdas must be positive".into()));
        }
        Ok(())
    }
}

/// 33 values from 1e-8 to 1, four per decade.
pub fn default_l_curve() -> Vec<f64> {
    (0..=32).map(|i| 10f64.powf(-8.0 + 0.25 * i as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LCurvePoint {
    pub lambda: f64,
    /// `‖A w - R‖` in noise units when weighted.
    pub residual_norm: f64,
    /// `‖L w‖`.
    pub seminorm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub lambda: f64,
    pub residual_norm: f64,
    pub seminorm: f64,
    pub effective_rank: usize,
    pub condition_number: f64,
    pub l_curve: Vec<LCurvePoint>,
    /// Solver output before clipping and renormalization.
    pub raw_weights: Vec<f64>,
}

/// Rank and condition number from the singular values, with the usual
/// `max(m, n)·ε·s_max` cutoff.
pub fn rank_and_condition(a: &DMatrix<f64>) -> (usize, f64) {
    let s = a.singular_values();
    let smax = s.max();
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    let rank = s.iter().filter(|&&v| v > tol).count();
    (rank, smax / s.min())
}

fn second_difference(n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n.saturating_sub(2), n);
    for i in 0..n.saturating_sub(2) {
        l[(i, i)] = 1.0;
        l[(i, i + 1)] = -2.0;
        l[(i, i + 2)] = 1.0;
    }
    l
}

/// Least squares `min ‖A x - b‖`, `x ≥ 0`, by Lawson–Hanson active sets.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.abs().max() * b.abs().max().max(f64::MIN_POSITIVE);
    let tol = 10.0 * f64::EPSILON * scale * a.nrows().max(n) as f64;
    let solve = |passive: &[bool]| -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select_columns(&idx);
        let z = sub
            .svd(true, true)
            .solve(b, f64::EPSILON)
            .map_err(|e| Error::NonConvergent(format!("NNLS subproblem: {e}")))?;
        let mut full = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            full[j] = z[k];
        }
        Ok(full)
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = pick.filter(|&j| w[j] > tol) else {
            return Ok(x);
        };
        passive[j] = true;
        loop {
            let z = solve(&passive)?;
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > 0.0) {
                x = z;
                break;
            }
            // step back to the first passive coefficient that hits zero
            let (kmin, alpha) = (0..n)
                .filter(|&k| passive[k] && z[k] <= 0.0)
                .map(|k| (k, x[k] / (x[k] - z[k])))
                .fold((n, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            if kmin == n || !alpha.is_finite() {
                return Err(Error::NonConvergent("NNLS step length is undefined".into()));
            }
            x += (z - &x) * alpha;
            x[kmin] = 0.0;
            passive[kmin] = false;
            let floor = f64::EPSILON * x.amax();
            for k in 0..n {
                if passive[k] && x[k] <= floor {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Err(Error::NonConvergent(
        "NNLS did not settle within its iteration budget".into(),
    ))
}

struct Tikhonov {
    a: DMatrix<f64>,
    b: DVector<f64>,
    l: DMatrix<f64>,
    /// `‖A‖₂/‖L‖₂`.
    scale: f64,
    nonneg: bool,
}

impl Tikhonov {
    fn solve(&self, lambda: f64) -> Result<DVector<f64>> {
        let n = self.a.ncols();
        let lam = lambda * self.scale;
        let (m, k) = (self.a.nrows(), self.l.nrows());
        let mut aug = DMatrix::zeros(m + k, n);
        aug.rows_mut(0, m).copy_from(&self.a);
        aug.rows_mut(m, k).copy_from(&(&self.l * lam));
        let mut rhs = DVector::zeros(m + k);
        rhs.rows_mut(0, m).copy_from(&self.b);
        // reduce to n x n; QR keeps the conditioning of the augmented system
        let qr = aug.qr();
        let r = qr.r();
        let qtb = qr.q().transpose() * rhs;
        if self.nonneg {
            nnls(&r, &qtb)
        } else {
            r.svd(true, true)
                .solve(&qtb, f64::EPSILON)
                .map_err(|e| Error::NonConvergent(format!("least squares: {e}")))
        }
    }

    fn point(&self, lambda: f64, w: &DVector<f64>) -> LCurvePoint {
        LCurvePoint {
            lambda,
            residual_norm: (&self.a * w - &self.b).norm(),
            seminorm: (&self.l * w).norm(),
        }
    }
}

/// Index of the L-curve corner: largest Menger curvature of `(log ρ, log η)`.
fn l_corner(points: &[LCurvePoint]) -> usize {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|p| {
            (
                p.residual_norm.max(f64::MIN_POSITIVE).ln(),
                p.seminorm.max(f64::MIN_POSITIVE).ln(),
            )
        })
        .collect();
    let mut best = (points.len() / 2, f64::NEG_INFINITY);
    for i in 1..xy.len().saturating_sub(1) {
        let (a, b, c) = (xy[i - 1], xy[i], xy[i + 1]);
        let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        let d = |p: (f64, f64), q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
        let denom = d(a, b) * d(b, c) * d(a, c);
        // walking towards larger λ the curve turns counter-clockwise at the corner
        let kappa = if denom > 0.0 {
            2.0 * cross / denom
        } else {
            f64::NEG_INFINITY
        };
        if kappa.is_finite() && kappa > best.1 {
            best = (i, kappa);
        }
    }
    best.0
}

/// Reconstructs the line profile from a fixed-energy OAM series.
pub fn invert_lineshape(
    measurements: &MeasurementSet,
    config: &ReconstructionConfig,
) -> Result<(LineProfile, Diagnostics)> {
    config.validate()?;
    let egrid = &config.grid;
    let a = build_design_matrix(&measurements.line, &measurements.settings, &measurements.grids(), egrid)?;
    let data: Vec<f64> = measurements
        .patterns
        .iter()
        .flat_map(|p| p.values.iter().copied())
        .collect();
    let sigma: Vec<f64> = measurements.sigma.iter().flatten().copied().collect();
    let weighted = sigma.iter().all(|&s| s > 0.0);
    let (a, b) = if weighted {
        let a = DMatrix::from_fn(a.nrows(), a.ncols(), |r, j| a[(r, j)] / sigma[r]);
        let b = DVector::from_iterator(data.len(), data.iter().zip(&sigma).map(|(d, s)| d / s));
        (a, b)
    } else {
        (a, DVector::from_vec(data))
    };
    let (rank, cond) = rank_and_condition(&a);
    let l = second_difference(egrid.len());
    let l_norm = l.singular_values().max();
    let problem = Tikhonov {
        scale: if l_norm > 0.0 {
            a.singular_values().max() / l_norm
        } else {
            0.0
        },
        a,
        b,
        l,
        nonneg: config.nonnegativity,
    };
    if config.lambda == Lambda::Fixed(0.0) && rank < egrid.len() {
        return Err(Error::IllPosed {
            rank,
            size: egrid.len(),
        });
    }
    let mut curve = Vec::with_capacity(config.l_curve.len());
    let mut sols = Vec::with_capacity(config.l_curve.len());
    for &lam in &config.l_curve {
        let w = problem.solve(lam)?;
        curve.push(problem.point(lam, &w));
        sols.push(w);
    }
    let (lambda, w) = match config.lambda {
        Lambda::Fixed(lam) => (lam, problem.solve(lam)?),
        Lambda::Auto(AutoLambda::LCurve) => {
            if curve.len() < 3 {
                return Err(Error::InvalidArgument(
                    "L-curve selection needs at least three lambdas".into(),
                ));
            }
            let i = l_corner(&curve);
            (curve[i].lambda, sols.swap_remove(i))
        }
    };
    let pt = problem.point(lambda, &w);
    let clipped: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let profile = LineProfile::normalized(egrid.clone(), clipped, ProfileKind::Custom)?;
    Ok((
        profile,
        Diagnostics {
            lambda,
            residual_norm: pt.residual_norm,
            seminorm: pt.seminorm,
            effective_rank: rank,
            condition_number: cond,
            l_curve: curve,
            raw_weights: w.as_slice().to_vec(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Dispersion;
    use crate::spectra::{detuning_scan, uniform_grid};

    fn line() -> LineModel {
        LineModel {
            atom: AtomBeam::at_rest(1e10, 1.0, Dispersion::NonRelativistic).unwrap(),
            amplitude: PwAmplitudeModel::default(),
            scan: ScanOptions::default(),
        }
    }

    fn photons(m1: i32, m2: i32) -> (BesselMode, BesselMode) {
        (
            BesselMode::photon(1.0, 0.1, m1).unwrap(),
            BesselMode::photon(-1.0, 0.15, m2).unwrap(),
        )
    }

    #[test]
    fn profiles_are_normalized() {
        let g = centered_grid(41, 1e-14);
        for p in [
            LineProfile::delta(g.clone(), 3e-14).unwrap(),
            LineProfile::lorentzian(g.clone(), 0.0, 5e-14).unwrap(),
            LineProfile::gaussian(g.clone(), 0.0, 3e-14).unwrap(),
            LineProfile::double_line(g.clone(), -5e-14, 5e-14, 0.3).unwrap(),
        ] {
            p.validate().unwrap();
        }
        assert!(LineProfile::custom(g.clone(), vec![-1.0; 41]).is_err());
        let mut bent = g.clone();
        bent[3] += 3e-15;
        assert!(grid_step(&bent).is_err());
    }

    #[test]
    fn delta_profile_is_the_single_line() {
        let l = line();
        let (b1, b2) = photons(2, 1);
        let x = uniform_grid(-1e-13, 3.5e-12, 60);
        let p = LineProfile::delta(centered_grid(5, 1e-14), 0.0).unwrap();
        let r = forward_pattern(&p, &b1, &b2, &l, &x).unwrap();
        let single = detuning_scan(&b1, &b2, &l.atom, &l.amplitude, &x, &l.scan).unwrap();
        for (a, b) in r.values.iter().zip(&single.values) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} {b}");
        }
    }

    #[test]
    fn energy_scan_is_rejected() {
        let l = line();
        let a = photons(1, 1);
        let b = (BesselMode::photon(1.01, 0.1, 2).unwrap(), a.1);
        let p = FringePattern {
            axis: Axis::Detuning,
            grid: vec![0.0, 1.0],
            values: vec![0.0, 0.0],
            envelope: None,
            phase: None,
            max_oscillations: 2.0,
            boundary_cutoff: 0.0,
            excluded_fraction: 0.0,
        };
        let r = MeasurementSet::new(l, vec![a, b], vec![p.clone(), p], vec![vec![0.0; 2]; 2]);
        assert!(matches!(r, Err(Error::EnergyScanRejected(_))));
    }

    #[test]
    fn nnls_small_problem() {
        // unconstrained optimum (1, -1) projects to (0.5, 0) on the orthant
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, -1.0, 0.0]);
        let x = nnls(&a, &b).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1] == 0.0, "{x}");
    }

    #[test]
    fn corner_of_a_synthetic_l() {
        let pts: Vec<LCurvePoint> = (0..21)
            .map(|i| {
                let t = i as f64 / 20.0;
                // vertical arm then horizontal arm, corner at i = 10
                let (r, s) = if i <= 10 {
                    (1.0 + 0.001 * t, 10f64.powf(5.0 * (1.0 - 2.0 * t)))
                } else {
                    (10f64.powf(5.0 * (2.0 * t - 1.0)), 1.0 - 0.001 * t)
                };
                LCurvePoint {
                    lambda: t,
                    residual_norm: r,
                    seminorm: s,
                }
            })
            .collect();
        assert_eq!(l_corner(&pts), 10);
    }
}
