//! Kinematics of the `atom + γ_tw + γ_tw → atom*` process.
//!
//! Natural units (ħ = c = 1) throughout: energies, momenta and masses are in eV.
//!
//! The two twisted photons share the z axis. Each is a Bessel mode, a cone of
//! plane waves with fixed longitudinal momentum `kz` and fixed transverse
//! magnitude `kappa`. Transverse momentum conservation forces the two cone
//! vectors and the transverse transfer `K_perp` to close a triangle, which is
//! only possible inside the annulus `|kappa1 - kappa2| <= K_perp <= kappa1 + kappa2`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for on-shell checks of Bessel modes.
pub const DISPERSION_RTOL: f64 = 1e-12;

/// Default annulus-boundary tolerance, relative to `kappa1 + kappa2`.
pub const EPS_BOUNDARY_REL: f64 = 1e-9;

/// Dispersion relation used for massive particles. Chosen once per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    #[default]
    NonRelativistic,
    Relativistic,
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = wrap_angle(phi);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Kinetic energy `sqrt(M² + q²) - M` without cancellation.
pub fn kinetic_energy(mass: f64, q2: f64) -> f64 {
    q2 / ((mass * mass + q2).sqrt() + mass)
}

/// One twisted participant in a Bessel state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselMode {
    /// Energy.
    pub omega: f64,
    /// Signed longitudinal momentum.
    pub kz: f64,
    /// Cone radius (transverse momentum modulus).
    pub kappa: f64,
    /// OAM projection on z.
    pub m: i32,
    /// Rest mass, zero for photons.
    pub mass: f64,
}

impl BesselMode {
    /// A validated mode with explicit energy.
    pub fn new(omega: f64, kz: f64, kappa: f64, m: i32, mass: f64, dispersion: Dispersion) -> Result<Self> {
        let mode = BesselMode {
            omega,
            kz,
            kappa,
            m,
            mass,
        };
        mode.validate(dispersion)?;
        Ok(mode)
    }

    /// A photon with its energy derived from the cone: `ω = sqrt(kz² + κ²)`.
    pub fn photon(kz: f64, kappa: f64, m: i32) -> Result<Self> {
        Self::new(
            (kz * kz + kappa * kappa).sqrt(),
            kz,
            kappa,
            m,
            0.0,
            Dispersion::Relativistic,
        )
    }

    /// A photon of given energy and cone radius travelling along `+z` (`direction > 0`) or `-z`.
    pub fn photon_from_energy(omega: f64, kappa: f64, m: i32, direction: f64) -> Result<Self> {
        if !(omega.is_finite() && kappa.is_finite()) || kappa > omega {
            return Err(Error::physics(
                "kappa <= omega",
                format!("photon with omega = {omega:e} eV cannot have kappa = {kappa:e} eV"),
            ));
        }
        let kz = direction.signum() * ((omega - kappa) * (omega + kappa)).sqrt();
        Self::new(omega, kz, kappa, m, 0.0, Dispersion::Relativistic)
    }

    pub fn validate(&self, dispersion: Dispersion) -> Result<()> {
        let Self {
            omega, kz, kappa, mass, ..
        } = *self;
        if ![omega, kz, kappa, mass].iter().all(|v| v.is_finite()) {
            return Err(Error::physics("finite", "Bessel mode fields must be finite"));
        }
        if kappa < 0.0 {
            return Err(Error::physics("kappa >= 0", format!("kappa = {kappa:e} eV")));
        }
        if mass < 0.0 {
            return Err(Error::physics("mass >= 0", format!("mass = {mass:e} eV")));
        }
        let p2 = kz * kz + kappa * kappa;
        if mass == 0.0 || dispersion == Dispersion::Relativistic {
            let lhs = omega * omega;
            let rhs = mass * mass + p2;
            if (lhs - rhs).abs() > DISPERSION_RTOL * lhs.max(rhs) {
                return Err(Error::physics(
                    "omega^2 = mass^2 + kz^2 + kappa^2",
                    format!("omega = {omega:e} eV, kz = {kz:e} eV, kappa = {kappa:e} eV, mass = {mass:e} eV"),
                ));
            }
        } else {
            let rhs = mass + p2 / (2.0 * mass);
            if (omega - rhs).abs() > DISPERSION_RTOL * omega.abs().max(rhs) {
                return Err(Error::physics(
                    "omega = mass + (kz^2 + kappa^2) / (2 mass)",
                    format!("omega = {omega:e} eV, expected {rhs:e} eV"),
                ));
            }
        }
        Ok(())
    }

    /// Same cone and energy, different OAM.
    pub fn with_m(self, m: i32) -> Self {
        Self { m, ..self }
    }
}

/// Emits a warning when the photons do not follow `k1z > 0`, `k2z < 0`.
pub fn lint_sign_convention(b1: &BesselMode, b2: &BesselMode) -> bool {
    let ok = b1.kz > 0.0 && b2.kz < 0.0;
    if !ok {
        log::warn!(
            "sign convention k1z > 0, k2z < 0 not followed (k1z = {:e} eV, k2z = {:e} eV)",
            b1.kz,
            b2.kz
        );
    }
    ok
}

/// The initial atom, described as a plane wave.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomBeam {
    /// Ground-state rest mass `M_i`.
    pub mass_i: f64,
    /// Momentum of the incoming atom.
    pub p: Vector3<f64>,
    /// Excitation energy `M_f - M_i`.
    pub e_exc: f64,
    pub dispersion: Dispersion,
}

impl AtomBeam {
    pub fn new(mass_i: f64, p: Vector3<f64>, e_exc: f64, dispersion: Dispersion) -> Result<Self> {
        let atom = AtomBeam {
            mass_i,
            p,
            e_exc,
            dispersion,
        };
        atom.validate()?;
        Ok(atom)
    }

    pub fn at_rest(mass_i: f64, e_exc: f64, dispersion: Dispersion) -> Result<Self> {
        Self::new(mass_i, Vector3::zeros(), e_exc, dispersion)
    }

    /// Atom moving along `+x` (perpendicular to the photon axis) with velocity `beta`.
    ///
    /// Non-relativistically `p = βM`; relativistically `p = βγM`.
    pub fn crossed(mass_i: f64, beta: f64, e_exc: f64, dispersion: Dispersion) -> Result<Self> {
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::physics("0 <= beta < 1", format!("beta = {beta}")));
        }
        let p = match dispersion {
            Dispersion::NonRelativistic => beta * mass_i,
            Dispersion::Relativistic => beta * mass_i / (1.0 - beta * beta).sqrt(),
        };
        Self::new(mass_i, Vector3::new(p, 0.0, 0.0), e_exc, dispersion)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_i.is_finite() && self.mass_i > 0.0) {
            return Err(Error::physics("mass_i > 0", format!("mass_i = {:e} eV", self.mass_i)));
        }
        if !(self.e_exc.is_finite() && self.e_exc > 0.0) {
            return Err(Error::physics("e_exc > 0", format!("e_exc = {:e} eV", self.e_exc)));
        }
        if !self.p.iter().all(|c| c.is_finite()) {
            return Err(Error::physics("finite momentum", "atom momentum must be finite"));
        }
        Ok(())
    }

    pub fn mass_f(&self) -> f64 {
        self.mass_i + self.e_exc
    }

    /// Mass used in non-relativistic recoil terms.
    pub fn recoil_mass(&self) -> f64 {
        self.mass_i
    }

    /// Kinetic energy of the incoming atom.
    pub fn kinetic(&self) -> f64 {
        let p2 = self.p.norm_squared();
        match self.dispersion {
            Dispersion::NonRelativistic => p2 / (2.0 * self.mass_i),
            Dispersion::Relativistic => kinetic_energy(self.mass_i, p2),
        }
    }

    /// Total energy of the incoming atom.
    pub fn energy_i(&self) -> f64 {
        self.mass_i + self.kinetic()
    }

    /// Velocity: `|p|/M` non-relativistically, `|p|/E` relativistically. Always in `[0, 1)`
    /// for the relativistic dispersion.
    pub fn beta(&self) -> f64 {
        let p = self.p.norm();
        match self.dispersion {
            Dispersion::NonRelativistic => p / self.mass_i,
            Dispersion::Relativistic => p / (self.mass_i * self.mass_i + p * p).sqrt(),
        }
    }

    pub fn with_momentum(self, p: Vector3<f64>) -> Self {
        Self { p, ..self }
    }

    pub fn with_excitation(self, e_exc: f64) -> Self {
        Self { e_exc, ..self }
    }

    pub fn transverse_momentum(&self) -> Vector2<f64> {
        Vector2::new(self.p.x, self.p.y)
    }
}

/// Momentum transfer `K = p_f - p_i` in cylindrical components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferVector {
    pub k_perp: f64,
    /// Azimuth in `[0, 2π)`.
    pub phi_k: f64,
    pub kz: f64,
}

impl TransferVector {
    pub fn new(k_perp: f64, phi_k: f64, kz: f64) -> Result<Self> {
        if !(k_perp.is_finite() && phi_k.is_finite() && kz.is_finite()) || k_perp < 0.0 {
            return Err(Error::physics("k_perp >= 0", format!("k_perp = {k_perp:e} eV")));
        }
        Ok(TransferVector {
            k_perp,
            phi_k: wrap_angle(phi_k),
            kz,
        })
    }

    pub fn from_cartesian(k: Vector3<f64>) -> Self {
        let k_perp = k.x.hypot(k.y);
        let phi_k = if k_perp == 0.0 { 0.0 } else { wrap_angle(k.y.atan2(k.x)) };
        TransferVector { k_perp, phi_k, kz: k.z }
    }

    pub fn transverse(&self) -> Vector2<f64> {
        Vector2::new(self.k_perp * self.phi_k.cos(), self.k_perp * self.phi_k.sin())
    }

    pub fn to_cartesian(&self) -> Vector3<f64> {
        let t = self.transverse();
        Vector3::new(t.x, t.y, self.kz)
    }

    pub fn norm_squared(&self) -> f64 {
        self.k_perp * self.k_perp + self.kz * self.kz
    }
}

/// The triangle formed by the two cone vectors and `K_perp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleGeometry {
    pub kappa1: f64,
    pub kappa2: f64,
    pub k_perp: f64,
    /// Triangle area Δ (eV²).
    pub area: f64,
    /// Internal angle between `k1_perp` and `K_perp`.
    pub delta1: f64,
    /// Internal angle between `k2_perp` and `K_perp`.
    pub delta2: f64,
    /// `K_perp` sits on an annulus edge, Δ = 0 and the two configurations coincide.
    pub degenerate: bool,
}

/// Default absolute boundary tolerance for a pair of cone radii.
pub fn default_eps_boundary(kappa1: f64, kappa2: f64) -> f64 {
    EPS_BOUNDARY_REL * (kappa1 + kappa2)
}

/// Annulus `[|κ1 - κ2|, κ1 + κ2]` of allowed `K_perp`.
pub fn annulus(kappa1: f64, kappa2: f64) -> (f64, f64) {
    ((kappa1 - kappa2).abs(), kappa1 + kappa2)
}

/// Triangle area from the three sides, in the cancellation-free ordering of Heron's formula.
///
/// Equal to `sqrt(2K²κ1² + 2K²κ2² + 2κ1²κ2² - K⁴ - κ1⁴ - κ2⁴) / 4`.
/// Returns a negative value when the sides cannot close a triangle.
pub fn heron_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if prod < 0.0 {
        -0.25 * (-prod).sqrt()
    } else {
        0.25 * prod.sqrt()
    }
}

pub fn triangle_geometry(kappa1: f64, kappa2: f64, k_perp: f64) -> Result<TriangleGeometry> {
    triangle_geometry_with_eps(kappa1, kappa2, k_perp, default_eps_boundary(kappa1, kappa2))
}

pub fn triangle_geometry_with_eps(
    kappa1: f64,
    kappa2: f64,
    k_perp: f64,
    eps_boundary: f64,
) -> Result<TriangleGeometry> {
    if !(kappa1.is_finite() && kappa1 > 0.0 && kappa2.is_finite() && kappa2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cone radii must be positive, got kappa1 = {kappa1:e}, kappa2 = {kappa2:e}"
        )));
    }
    if !(k_perp.is_finite() && k_perp >= 0.0) {
        return Err(Error::InvalidArgument(format!("k_perp must be >= 0, got {k_perp:e}")));
    }
    let (lower, upper) = annulus(kappa1, kappa2);
    if k_perp < lower - eps_boundary || k_perp > upper + eps_boundary {
        return Err(Error::OutsideAnnulus { k_perp, lower, upper });
    }
    let geom = |area, delta1, delta2, degenerate| TriangleGeometry {
        kappa1,
        kappa2,
        k_perp,
        area,
        delta1,
        delta2,
        degenerate,
    };
    if (k_perp - upper).abs() <= eps_boundary {
        // collinear, both cone vectors along K
        return Ok(geom(0.0, 0.0, 0.0, true));
    }
    if (k_perp - lower).abs() <= eps_boundary {
        // the longer cone vector along K, the shorter one opposite
        let (d1, d2) = match kappa1.partial_cmp(&kappa2) {
            Some(std::cmp::Ordering::Greater) => (0.0, PI),
            Some(std::cmp::Ordering::Less) => (PI, 0.0),
            _ => (0.5 * PI, 0.5 * PI),
        };
        return Ok(geom(0.0, d1, d2, true));
    }
    let area = heron_area(kappa1, kappa2, k_perp).max(0.0);
    // cos δ1 = (κ1² + K² - κ2²)/(2κ1K) and sin δ1 = 2Δ/(κ1K); atan2 keeps
    // full precision near the edges where arccos of a clamped cosine does not
    let d1 = (4.0 * area).atan2((kappa1 - kappa2) * (kappa1 + kappa2) + k_perp * k_perp);
    let d2 = (4.0 * area).atan2((kappa2 - kappa1) * (kappa2 + kappa1) + k_perp * k_perp);
    Ok(geom(area, d1, d2, false))
}

/// Azimuths `(φ1, φ2)` of the two cone vectors for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Azimuths {
    pub phi1: f64,
    pub phi2: f64,
}

/// The two plane-wave configurations reaching the same `K_perp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigPair {
    /// `φ1 = φK + δ1`, `φ2 = φK - δ2`.
    pub a: Azimuths,
    /// `φ1 = φK - δ1`, `φ2 = φK + δ2`.
    pub b: Azimuths,
}

pub fn config_azimuths(geom: &TriangleGeometry, phi_k: f64) -> ConfigPair {
    ConfigPair {
        a: Azimuths {
            phi1: wrap_angle(phi_k + geom.delta1),
            phi2: wrap_angle(phi_k - geom.delta2),
        },
        b: Azimuths {
            phi1: wrap_angle(phi_k - geom.delta1),
            phi2: wrap_angle(phi_k + geom.delta2),
        },
    }
}

/// `K² + 2 p·K`, the quantity fixed by energy conservation.
fn recoil_invariant(atom: &AtomBeam, k: &Vector3<f64>) -> f64 {
    k.norm_squared() + 2.0 * atom.p.dot(k)
}

/// Detuning `δ = ω1 + ω2 - E_exc` implied by a momentum transfer.
///
/// Non-relativistic: `(K² + 2p·K)/(2M)`. Relativistic: `E_f - E_i - E_exc`, evaluated
/// without cancellation so that meV detunings survive GeV-scale atom energies.
pub fn detuning_from_transfer(atom: &AtomBeam, k: &TransferVector) -> f64 {
    detuning_from_vector(atom, &k.to_cartesian())
}

pub fn detuning_from_vector(atom: &AtomBeam, k: &Vector3<f64>) -> f64 {
    let q = recoil_invariant(atom, k);
    match atom.dispersion {
        Dispersion::NonRelativistic => q / (2.0 * atom.recoil_mass()),
        Dispersion::Relativistic => {
            let pf2 = (atom.p + k).norm_squared();
            let kin_i = kinetic_energy(atom.mass_i, atom.p.norm_squared());
            let kin_f = kinetic_energy(atom.mass_f(), pf2);
            let e_i = atom.mass_i + kin_i;
            let e_f = atom.mass_f() + kin_f;
            // E_f - E_i - E_exc = [(p_f² - p_i²) - E_exc (T_f + T_i)] / (E_f + E_i)
            (q - atom.e_exc * (kin_f + kin_i)) / (e_f + e_i)
        }
    }
}

/// `|K|²` of an atom at rest excited at detuning `delta`.
pub fn transfer_squared_at_rest(atom: &AtomBeam, delta: f64) -> f64 {
    match atom.dispersion {
        Dispersion::NonRelativistic => 2.0 * atom.recoil_mass() * delta,
        Dispersion::Relativistic => delta * (2.0 * atom.mass_f() + delta),
    }
}

/// Polar angle of the kick for an atom (nearly) at rest: `cos θ_K = K_z / |K|`.
pub fn kick_polar_angle(kz: f64, atom: &AtomBeam, delta: f64) -> Result<f64> {
    let k2 = transfer_squared_at_rest(atom, delta);
    if !(k2 > 0.0) || k2 < kz * kz {
        return Err(Error::NoSolution(format!(
            "|K|^2 = {k2:e} eV^2 cannot accommodate K_z = {kz:e} eV"
        )));
    }
    Ok((kz / k2.sqrt()).clamp(-1.0, 1.0).acos())
}

/// A closed detuning interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub min: f64,
    pub max: f64,
}

impl Window {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

/// Detuning window for an atom at rest: `[(κ1-κ2)² + Kz², (κ1+κ2)² + Kz²] / 2M`.
pub fn detuning_window_rest(kappa1: f64, kappa2: f64, kz: f64, mass: f64) -> Result<Window> {
    if !(mass > 0.0) {
        return Err(Error::physics("mass > 0", format!("mass = {mass:e} eV")));
    }
    let lo = (kappa1 - kappa2).powi(2) + kz * kz;
    let hi = (kappa1 + kappa2).powi(2) + kz * kz;
    Ok(Window {
        min: lo / (2.0 * mass),
        max: hi / (2.0 * mass),
    })
}

/// Crossed-beam window `±(κ1 + κ2) β` for balanced photons, `k1z + k2z = 0`.
pub fn detuning_window_crossed(kappa1: f64, kappa2: f64, beta: f64) -> Result<Window> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::physics("0 <= beta <= 1", format!("beta = {beta}")));
    }
    let half = (kappa1 + kappa2) * beta;
    Ok(Window { min: -half, max: half })
}

/// Exact detuning range reachable with `K_perp` in `[k_lo, k_hi]` for an arbitrary atom momentum.
///
/// The energy shell is a circle in the `K_perp` plane centred at `-p_perp`, so the range
/// follows from the closest and farthest annulus points to that centre.
pub fn detuning_window_exact(atom: &AtomBeam, kz: f64, k_lo: f64, k_hi: f64) -> Window {
    let p_perp = atom.transverse_momentum().norm();
    // signed kick along p_perp that minimizes |K_perp + p_perp| over the annulus
    let k_par_min = if p_perp < k_lo {
        -k_lo
    } else if p_perp > k_hi {
        -k_hi
    } else {
        -p_perp
    };
    let at = |k_par: f64| {
        let k = if p_perp > 0.0 {
            let u = atom.transverse_momentum() / p_perp;
            Vector3::new(u.x * k_par, u.y * k_par, kz)
        } else {
            Vector3::new(k_par, 0.0, kz)
        };
        detuning_from_vector(atom, &k)
    };
    Window {
        min: at(k_par_min),
        max: at(k_hi),
    }
}

/// Outcome of the plane-wave reference calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PwReference {
    pub allowed: bool,
    pub transfer: TransferVector,
    /// `ω1 + ω2 - E_exc - δ(K)`.
    pub mismatch: f64,
}

/// Plane-wave photons: the transfer is fixed to `k1 + k2` and absorption happens only
/// on the energy shell.
pub fn pw_reference(
    atom: &AtomBeam,
    k1: Vector3<f64>,
    k2: Vector3<f64>,
    omega1: f64,
    omega2: f64,
    energy_tol: f64,
) -> PwReference {
    let k = k1 + k2;
    let mismatch = omega1 + omega2 - atom.e_exc - detuning_from_vector(atom, &k);
    PwReference {
        allowed: mismatch.abs() <= energy_tol,
        transfer: TransferVector::from_cartesian(k),
        mismatch,
    }
}
