//! JSON run configuration. Every section rejects unknown keys; physical invariants are
//! re-checked by building the library types on load.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use twisted_absorption::kinematics::annulus;
use twisted_absorption::lineshape::{centered_grid, Lambda, LineProfile};
use twisted_absorption::smearing::SmearMethod;
use twisted_absorption::spectra::{default_cutoff, ScanOptions};
use twisted_absorption::{AtomBeam, BesselMode, Dispersion, PwAmplitudeModel};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonSpec {
    /// Energy; derived from `kz` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Longitudinal momentum; derived from `omega` and `direction` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kz: Option<f64>,
    pub kappa: f64,
    pub m: i32,
    #[serde(default)]
    pub mass: f64,
    /// Sign of `kz` when it is derived. Defaults to +1 for photon1 and -1 for photon2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub mass: f64,
    /// Excitation energy; defaults to `omega1 + omega2` so that detuning is measured from
    /// the photon pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_exc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<[f64; 3]>,
    /// Velocity along +x, the crossed-beam geometry. Excludes `momentum`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default)]
    pub dispersion: Dispersion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    /// When set, rest-frame detuning grids are refined until the fringe phase moves by at
    /// most this much between neighbours; `points` is then ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_phase_step: Option<f64>,
    /// `|K_perp|` of the azimuthal distribution; mid-annulus by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_perp: Option<f64>,
    #[serde(default)]
    pub phi_k: f64,
    #[serde(default = "default_n_phi")]
    pub n_phi: usize,
    #[serde(default = "default_n_theta")]
    pub n_theta: usize,
}

fn default_points() -> usize {
    200
}
fn default_n_phi() -> usize {
    360
}
fn default_n_theta() -> usize {
    400
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            min: None,
            max: None,
            points: default_points(),
            max_phase_step: None,
            k_perp: None,
            phi_k: 0.0,
            n_phi: default_n_phi(),
            n_theta: default_n_theta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizationSpec {
    /// Boundary cutoff in eV; `1e-4·(κ1 + κ2)` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_boundary: Option<f64>,
    /// Oracle ring width in eV; `1e-3·min(κ)` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ring_sigma: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    1e-6
}

impl Default for RegularizationSpec {
    fn default() -> Self {
        RegularizationSpec {
            eps_boundary: None,
            ring_sigma: None,
            rel_tol: default_rel_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsSpec {
    #[serde(default = "default_events")]
    pub count: usize,
}

fn default_events() -> usize {
    10_000
}

impl Default for EventsSpec {
    fn default() -> Self {
        EventsSpec {
            count: default_events(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_perp: Option<f64>,
    #[serde(default = "default_oracle_phi")]
    pub phi_k: f64,
    /// Number of ring widths `σ, σ/2, …`.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Allowed change between the last two levels, relative to the amplitude scale.
    #[serde(default = "default_oracle_tol")]
    pub tolerance: f64,
}

fn default_oracle_phi() -> f64 {
    0.3
}
fn default_levels() -> usize {
    3
}
fn default_oracle_tol() -> f64 {
    1e-2
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            k_perp: None,
            phi_k: default_oracle_phi(),
            levels: default_levels(),
            tolerance: default_oracle_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSpec {
    Delta {
        #[serde(default)]
        center: f64,
    },
    /// `gamma` is the FWHM, five grid steps by default.
    Lorentzian {
        #[serde(default)]
        center: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Gaussian {
        #[serde(default)]
        center: f64,
        sigma_e: f64,
    },
    DoubleLine {
        center1: f64,
        center2: f64,
        #[serde(default = "half")]
        fraction1: f64,
    },
}

fn half() -> f64 {
    0.5
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec::Lorentzian {
            center: 0.0,
            gamma: None,
        }
    }
}

impl ProfileSpec {
    pub fn build(&self, grid: Vec<f64>) -> CliResult<LineProfile> {
        Ok(match *self {
            ProfileSpec::Delta { center } => LineProfile::delta(grid, center)?,
            ProfileSpec::Lorentzian { center, gamma } => {
                let gamma = gamma.ok_or_else(|| CliError::schema("lineshape.profile.gamma", "unresolved width"))?;
                LineProfile::lorentzian(grid, center, gamma)?
            }
            ProfileSpec::Gaussian { center, sigma_e } => LineProfile::gaussian(grid, center, sigma_e)?,
            ProfileSpec::DoubleLine {
                center1,
                center2,
                fraction1,
            } => LineProfile::double_line(grid, center1, center2, fraction1)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileGridSpec {
    #[serde(default = "default_profile_points")]
    pub points: usize,
    /// Spacing in eV; a hundredth of the rest-frame window width by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

fn default_profile_points() -> usize {
    41
}

impl Default for ProfileGridSpec {
    fn default() -> Self {
        ProfileGridSpec {
            points: default_profile_points(),
            step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuredAxis {
    #[default]
    Detuning,
    ThetaK,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub m1: i32,
    pub m2: i32,
    /// CSV with columns `axis_value,rate,sigma`, relative to the config file.
    pub path: PathBuf,
    #[serde(default)]
    pub axis: MeasuredAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineshapeSpec {
    #[serde(default)]
    pub profile: ProfileSpec,
    #[serde(default)]
    pub grid: ProfileGridSpec,
    /// OAM settings `[m1, m2]` for the forward model.
    #[serde(default = "default_settings")]
    pub settings: Vec<[i32; 2]>,
    /// Gaussian noise added by the forward model, relative to each setting's peak.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub measurements: Vec<MeasurementSpec>,
    #[serde(default = "default_lambda")]
    pub lambda: Lambda,
    #[serde(default = "yes")]
    pub nonnegativity: bool,
}

fn default_settings() -> Vec<[i32; 2]> {
    (1..=8).map(|m| [m, m]).collect()
}
fn default_lambda() -> Lambda {
    Lambda::Auto(twisted_absorption::lineshape::AutoLambda::LCurve)
}
fn yes() -> bool {
    true
}

impl Default for LineshapeSpec {
    fn default() -> Self {
        LineshapeSpec {
            profile: ProfileSpec::default(),
            grid: ProfileGridSpec::default(),
            settings: default_settings(),
            noise: 0.0,
            measurements: Vec::new(),
            lambda: default_lambda(),
            nonnegativity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmearSpec {
    #[serde(default)]
    pub sigma_p: [f64; 3],
    #[serde(default = "default_n_quad")]
    pub n_quad: usize,
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub method: SmearMethod,
    /// Isotropic spreads for the visibility table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    /// Builds an evenly spaced ladder from zero when `ladder` is absent;
    /// `0.25·(κ1 + κ2)` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder_max: Option<f64>,
    #[serde(default = "default_ladder_points")]
    pub ladder_points: usize,
    /// Visibility threshold for the tolerable-spread search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

fn default_n_quad() -> usize {
    8
}
fn default_n_mc() -> usize {
    2000
}
fn default_ladder_points() -> usize {
    10
}

impl Default for SmearSpec {
    fn default() -> Self {
        SmearSpec {
            sigma_p: [0.0; 3],
            n_quad: default_n_quad(),
            n_mc: default_n_mc(),
            method: SmearMethod::default(),
            ladder: None,
            ladder_max: None,
            ladder_points: default_ladder_points(),
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Where artifacts go. Not echoed: the manifest lives in this directory.
    #[serde(default, skip_serializing)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub photon1: PhotonSpec,
    pub photon2: PhotonSpec,
    pub atom: AtomSpec,
    #[serde(default)]
    pub amplitude: PwAmplitudeModel,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub regularization: RegularizationSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub events: EventsSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub lineshape: LineshapeSpec,
    #[serde(default)]
    pub smear: SmearSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub svg: bool,
    pub seed: Option<u64>,
    pub eps_boundary: Option<f64>,
    pub ring_sigma: Option<f64>,
}

/// A loaded configuration with every default filled in and the library objects built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    /// Directory of the config file, for relative measurement paths.
    pub base_dir: PathBuf,
    pub b1: BesselMode,
    pub b2: BesselMode,
    pub atom: AtomBeam,
    pub opts: ScanOptions,
}

fn line_of(text: &str, key: &str) -> usize {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map_or(0, |i| i + 1)
}

fn schema_at(text: &str, path: &str, reason: impl Into<String>) -> CliError {
    let key = path.rsplit('.').next().unwrap_or(path);
    CliError::Schema {
        key: path.to_string(),
        line: line_of(text, key),
        reason: reason.into(),
    }
}

/// Parses and validates a configuration file.
pub fn parse_config(path: &Path, overrides: &Overrides) -> CliResult<Resolved> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_str(&text, base_dir, overrides)
}

pub fn parse_str(text: &str, base_dir: PathBuf, overrides: &Overrides) -> CliResult<Resolved> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        CliError::Schema {
            key,
            line: inner.line(),
            reason: inner.to_string(),
        }
    })?;
    if let Some(dir) = &overrides.out {
        config.output.dir = Some(dir.clone());
    }
    if let Some(f) = overrides.format {
        config.output.format = f;
    }
    config.output.svg |= overrides.svg;
    if let Some(s) = overrides.seed {
        config.seed = s;
    }
    if let Some(e) = overrides.eps_boundary {
        config.regularization.eps_boundary = Some(e);
    }
    if let Some(s) = overrides.ring_sigma {
        config.regularization.ring_sigma = Some(s);
    }
    resolve(config, text, base_dir)
}

fn resolve_photon(
    spec: &mut PhotonSpec,
    default_dir: f64,
    dispersion: Dispersion,
    name: &str,
    text: &str,
) -> CliResult<BesselMode> {
    let PhotonSpec {
        omega,
        kz,
        kappa,
        m,
        mass,
        direction,
    } = *spec;
    let dispersion = if mass == 0.0 {
        Dispersion::Relativistic
    } else {
        dispersion
    };
    if let (Some(d), Some(kz)) = (direction, kz) {
        if d * kz < 0.0 {
            return Err(schema_at(
                text,
                &format!("{name}.direction"),
                "direction contradicts the sign of kz",
            ));
        }
    }
    if direction.is_some_and(|d| d == 0.0 || !d.is_finite()) {
        return Err(schema_at(
            text,
            &format!("{name}.direction"),
            "direction must be +1 or -1",
        ));
    }
    let mode = match (omega, kz) {
        (Some(omega), Some(kz)) => BesselMode::new(omega, kz, kappa, m, mass, dispersion)?,
        (Some(omega), None) => {
            let dir = direction.unwrap_or(default_dir).signum();
            if mass == 0.0 {
                BesselMode::photon_from_energy(omega, kappa, m, dir)?
            } else {
                let p2 = match dispersion {
                    Dispersion::Relativistic => (omega - mass) * (omega + mass),
                    Dispersion::NonRelativistic => 2.0 * mass * (omega - mass),
                };
                if !(p2 >= kappa * kappa) {
                    return Err(CliError::Physics {
                        invariant: "kappa <= |p|".into(),
                        detail: format!("{name}: omega = {omega:e} eV leaves no room for kappa = {kappa:e} eV"),
                    });
                }
                BesselMode::new(omega, dir * (p2 - kappa * kappa).sqrt(), kappa, m, mass, dispersion)?
            }
        }
        (None, Some(kz)) => {
            let p2 = kz * kz + kappa * kappa;
            let omega = match dispersion {
                Dispersion::Relativistic => (mass * mass + p2).sqrt(),
                Dispersion::NonRelativistic => mass + p2 / (2.0 * mass),
            };
            BesselMode::new(omega, kz, kappa, m, mass, dispersion)?
        }
        (None, None) => return Err(schema_at(text, name, "one of `omega` or `kz` is required")),
    };
    spec.omega = Some(mode.omega);
    spec.kz = Some(mode.kz);
    spec.direction = None;
    Ok(mode)
}

fn positive(text: &str, path: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(schema_at(text, path, format!("must be a positive number, got {v}")))
    }
}

fn resolve(mut c: RunConfig, text: &str, base_dir: PathBuf) -> CliResult<Resolved> {
    let disp = c.atom.dispersion;
    let b1 = resolve_photon(&mut c.photon1, 1.0, disp, "photon1", text)?;
    let b2 = resolve_photon(&mut c.photon2, -1.0, disp, "photon2", text)?;

    let e_exc = *c.atom.e_exc.get_or_insert(b1.omega + b2.omega);
    let atom = match (c.atom.momentum, c.atom.beta) {
        (Some(_), Some(_)) => {
            return Err(schema_at(
                text,
                "atom.beta",
                "give either `momentum` or `beta`, not both",
            ))
        }
        (None, Some(beta)) => AtomBeam::crossed(c.atom.mass, beta, e_exc, disp)?,
        (p, None) => {
            let p = p.unwrap_or([0.0; 3]);
            c.atom.momentum = Some(p);
            AtomBeam::new(c.atom.mass, Vector3::from(p), e_exc, disp)?
        }
    };
    c.amplitude.validate()?;

    let (lo, hi) = annulus(b1.kappa, b2.kappa);
    let ksum = b1.kappa + b2.kappa;
    let r = &mut c.regularization;
    let eps = *r.eps_boundary.get_or_insert(default_cutoff(b1.kappa, b2.kappa));
    if !(eps >= 0.0 && 2.0 * eps < hi - lo) {
        return Err(schema_at(
            text,
            "regularization.eps_boundary",
            format!("cutoff {eps:e} eV must be >= 0 and leave part of the annulus"),
        ));
    }
    let ring = *r.ring_sigma.get_or_insert(1e-3 * b1.kappa.min(b2.kappa));
    positive(text, "regularization.ring_sigma", ring)?;
    positive(text, "regularization.rel_tol", r.rel_tol)?;
    let opts = ScanOptions {
        eps_boundary: Some(eps),
        rel_tol: r.rel_tol,
    };

    let s = &mut c.scan;
    if let (Some(a), Some(b)) = (s.min, s.max) {
        if !(a < b) {
            return Err(schema_at(text, "scan.max", "scan.max must exceed scan.min"));
        }
    }
    if s.min.is_some() != s.max.is_some() {
        return Err(schema_at(text, "scan", "give both `min` and `max` or neither"));
    }
    if s.points < 2 || s.n_phi < 2 || s.n_theta < 2 {
        return Err(schema_at(text, "scan", "grids need at least two points"));
    }
    if let Some(step) = s.max_phase_step {
        positive(text, "scan.max_phase_step", step)?;
    }
    let mid = 0.5 * (lo + hi);
    let kp = *s.k_perp.get_or_insert(mid);
    if !(kp > lo && kp < hi) {
        return Err(CliError::Physics {
            invariant: "|kappa1 - kappa2| < K_perp < kappa1 + kappa2".into(),
            detail: format!("scan.k_perp = {kp:e} eV lies outside ({lo:e}, {hi:e}) eV"),
        });
    }
    let o = &mut c.oracle;
    let kp = *o.k_perp.get_or_insert(mid);
    if !(kp > lo && kp < hi) {
        return Err(CliError::Physics {
            invariant: "|kappa1 - kappa2| < K_perp < kappa1 + kappa2".into(),
            detail: format!("oracle.k_perp = {kp:e} eV lies outside ({lo:e}, {hi:e}) eV"),
        });
    }
    if o.levels < 2 {
        return Err(schema_at(
            text,
            "oracle.levels",
            "a convergence study needs at least two levels",
        ));
    }
    positive(text, "oracle.tolerance", o.tolerance)?;

    let l = &mut c.lineshape;
    if l.grid.points < 2 {
        return Err(schema_at(
            text,
            "lineshape.grid.points",
            "profile grid needs at least two points",
        ));
    }
    let step = match l.grid.step {
        Some(h) => h,
        None => {
            let w = twisted_absorption::kinematics::detuning_window_exact(&atom, b1.kz + b2.kz, lo, hi);
            *l.grid.step.insert(w.width() / 100.0)
        }
    };
    positive(text, "lineshape.grid.step", step)?;
    if let ProfileSpec::Lorentzian { gamma, .. } = &mut l.profile {
        positive(text, "lineshape.profile.gamma", *gamma.get_or_insert(5.0 * step))?;
    }
    if l.settings.is_empty() {
        return Err(schema_at(text, "lineshape.settings", "need at least one OAM setting"));
    }
    if !(l.noise >= 0.0 && l.noise.is_finite()) {
        return Err(schema_at(text, "lineshape.noise", "noise must be >= 0"));
    }
    // surfaces profile errors at load time
    l.profile.build(centered_grid(l.grid.points, step))?;

    let sm = &mut c.smear;
    if sm.sigma_p.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(CliError::Physics {
            invariant: "sigma_p >= 0".into(),
            detail: format!("smear.sigma_p = {:?}", sm.sigma_p),
        });
    }
    match (&sm.ladder, sm.ladder_max) {
        (Some(_), Some(_)) => {
            return Err(schema_at(
                text,
                "smear.ladder_max",
                "give either `ladder` or `ladder_max`, not both",
            ))
        }
        (None, max) => {
            let max = max.unwrap_or(0.25 * ksum);
            positive(text, "smear.ladder_max", max)?;
            if sm.ladder_points < 2 {
                return Err(schema_at(
                    text,
                    "smear.ladder_points",
                    "ladder needs at least two points",
                ));
            }
            sm.ladder = Some(twisted_absorption::spectra::uniform_grid(0.0, max, sm.ladder_points));
            sm.ladder_max = None;
        }
        (Some(ladder), None) => {
            if ladder.is_empty() || ladder.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(schema_at(text, "smear.ladder", "ladder values must be >= 0"));
            }
        }
    }
    if let Some(t) = sm.threshold {
        if !(t > 0.0 && t < 1.0) {
            return Err(schema_at(
                text,
                "smear.threshold",
                format!("visibility threshold must lie in (0, 1), got {t}"),
            ));
        }
    }
    if sm.n_quad == 0 || sm.n_mc < 2 {
        return Err(schema_at(text, "smear", "n_quad must be >= 1 and n_mc >= 2"));
    }
    if c.events.count == 0 {
        return Err(schema_at(text, "events.count", "need at least one event"));
    }

    Ok(Resolved {
        config: c,
        base_dir,
        b1,
        b2,
        atom,
        opts,
    })
}

impl Resolved {
    pub fn kz(&self) -> f64 {
        self.b1.kz + self.b2.kz
    }

    pub fn eps(&self) -> f64 {
        self.config.regularization.eps_boundary.unwrap_or(0.0)
    }

    pub fn format(&self) -> Format {
        self.config.output.format
    }
}
