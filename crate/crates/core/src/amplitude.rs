//! Two-path twisted amplitude.
//!
//! Only two plane-wave configurations of the photon pair reach a given transfer
//! `K_perp` (see [`config_azimuths`]). Their amplitudes interfere:
//!
//! ```text
//! J = exp(i(m1 - m2)φK) · κ1κ2/(2Δ) · [M_a exp(iΦ) + M_b exp(-iΦ)],   Φ = m1δ1 + m2δ2
//! ```

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    config_azimuths, default_eps_boundary, detuning_from_transfer, triangle_geometry_with_eps, wrap_angle, wrap_phase,
    AtomBeam, BesselMode, ConfigPair, TransferVector, TriangleGeometry,
};

/// Distance from an annulus edge, relative to `κ1 + κ2`, below which an amplitude is
/// flagged as lying in the boundary zone.
pub const BOUNDARY_ZONE_REL: f64 = 1e-4;

/// Which of the two plane-wave configurations a photon pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Configuration {
    /// `k1_perp` rotated counter-clockwise from `K_perp`.
    A,
    B,
}

/// Complex plane-wave amplitudes tabulated against the photon-1 azimuth; periodic
/// linear interpolation in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable")]
pub struct AmplitudeTable {
    azimuths: Vec<f64>,
    values: Vec<Complex64>,
}

// deserialized tables go through the same checks as `AmplitudeTable::new`
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    azimuths: Vec<f64>,
    values: Vec<Complex64>,
}

impl TryFrom<RawTable> for AmplitudeTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<Self> {
        AmplitudeTable::new(raw.azimuths, raw.values)
    }
}

impl AmplitudeTable {
    pub fn new(azimuths: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if azimuths.is_empty() || azimuths.len() != values.len() {
            return Err(Error::InvalidArgument(
                "amplitude table needs matching, non-empty azimuth and value lists".into(),
            ));
        }
        if azimuths.iter().any(|a| !(0.0..TAU).contains(a)) || azimuths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "amplitude table azimuths must be strictly increasing within [0, 2pi)".into(),
            ));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("amplitude table values must be finite".into()));
        }
        Ok(AmplitudeTable { azimuths, values })
    }

    pub fn azimuths(&self) -> &[f64] {
        &self.azimuths
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn eval(&self, phi: f64) -> Complex64 {
        let phi = wrap_angle(phi);
        let n = self.azimuths.len();
        if n == 1 {
            return self.values[0];
        }
        let idx = self.azimuths.partition_point(|&a| a <= phi);
        let (i0, i1, a0, a1) = if idx == 0 {
            (n - 1, 0, self.azimuths[n - 1] - TAU, self.azimuths[0])
        } else if idx == n {
            (n - 1, 0, self.azimuths[n - 1], self.azimuths[0] + TAU)
        } else {
            (idx - 1, idx, self.azimuths[idx - 1], self.azimuths[idx])
        };
        let t = (phi - a0) / (a1 - a0);
        self.values[i0] * (1.0 - t) + self.values[i1] * t
    }

    fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Plane-wave transition amplitude model `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PwAmplitudeModel {
    /// `M_a = M_b = m0`.
    Constant { m0: Complex64 },
    /// `M_a = m0`, `M_b = m0·exp(i·phase_ab)`.
    RelativePhase { m0: Complex64, phase_ab: f64 },
    /// Amplitude depends on the photon-1 azimuth of each configuration.
    Table(AmplitudeTable),
}

impl Default for PwAmplitudeModel {
    fn default() -> Self {
        PwAmplitudeModel::Constant {
            m0: Complex64::new(1.0, 0.0),
        }
    }
}

impl PwAmplitudeModel {
    pub fn constant(m0: f64) -> Self {
        PwAmplitudeModel::Constant {
            m0: Complex64::new(m0, 0.0),
        }
    }

    /// Amplitude of a single plane-wave photon pair.
    pub fn plane_wave(&self, phi1: f64, config: Configuration) -> Complex64 {
        match (self, config) {
            (PwAmplitudeModel::Constant { m0 }, _) => *m0,
            (PwAmplitudeModel::RelativePhase { m0, .. }, Configuration::A) => *m0,
            (PwAmplitudeModel::RelativePhase { m0, phase_ab }, Configuration::B) => *m0 * Complex64::cis(*phase_ab),
            (PwAmplitudeModel::Table(t), _) => t.eval(phi1),
        }
    }

    /// `(M_a, M_b)` for a configuration pair.
    pub fn config_amplitudes(&self, pair: &ConfigPair) -> (Complex64, Complex64) {
        (
            self.plane_wave(pair.a.phi1, Configuration::A),
            self.plane_wave(pair.b.phi1, Configuration::B),
        )
    }

    /// Whether `|M_a|`, `|M_b|` or their relative phase can change with `φ_K`.
    pub fn depends_on_azimuth(&self) -> bool {
        matches!(self, PwAmplitudeModel::Table(_))
    }

    /// Upper bound on `|M_a| + |M_b|` over all kinematics.
    pub fn bound(&self) -> f64 {
        match self {
            PwAmplitudeModel::Constant { m0 } | PwAmplitudeModel::RelativePhase { m0, .. } => 2.0 * m0.norm(),
            PwAmplitudeModel::Table(t) => 2.0 * t.max_abs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        match self {
            PwAmplitudeModel::Constant { m0 } if !finite(m0) => Err(Error::InvalidArgument("m0 must be finite".into())),
            PwAmplitudeModel::RelativePhase { m0, phase_ab } if !finite(m0) || !phase_ab.is_finite() => {
                Err(Error::InvalidArgument("m0 and phase_ab must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Evaluated twisted amplitude `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistedAmplitude {
    pub value: Complex64,
    /// Phase of the configuration-a term, in `(-π, π]`.
    pub phase_a: f64,
    pub phase_b: f64,
    /// `K_perp` lies within the boundary zone next to an annulus edge.
    pub boundary_flag: bool,
}

/// Fringe phase `Φ = m1δ1 + m2δ2`.
pub fn fringe_phase(m1: i32, m2: i32, geom: &TriangleGeometry) -> f64 {
    m1 as f64 * geom.delta1 + m2 as f64 * geom.delta2
}

/// `cos²(m1δ1 + m2δ2)`.
pub fn fringe_function(m1: i32, m2: i32, geom: &TriangleGeometry) -> f64 {
    fringe_phase(m1, m2, geom).cos().powi(2)
}

/// Pieces of the amplitude shared by every evaluation path.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Bracket {
    /// `M_a e^{iΦ} + M_b e^{-iΦ}`.
    pub value: Complex64,
    /// `|M_a| + |M_b|`.
    pub envelope: f64,
    pub term_a: Complex64,
    pub term_b: Complex64,
}

pub(crate) fn bracket(model: &PwAmplitudeModel, m1: i32, m2: i32, geom: &TriangleGeometry, phi_k: f64) -> Bracket {
    let phase = fringe_phase(m1, m2, geom);
    let (ma, mb) = match model {
        PwAmplitudeModel::Table(_) => model.config_amplitudes(&config_azimuths(geom, phi_k)),
        _ => model.config_amplitudes(&ConfigPair {
            a: crate::kinematics::Azimuths { phi1: 0.0, phi2: 0.0 },
            b: crate::kinematics::Azimuths { phi1: 0.0, phi2: 0.0 },
        }),
    };
    let term_a = ma * Complex64::cis(phase);
    let term_b = mb * Complex64::cis(-phase);
    Bracket {
        value: term_a + term_b,
        envelope: ma.norm() + mb.norm(),
        term_a,
        term_b,
    }
}

/// `|J|²` and its interference-free envelope `(κ1κ2/2Δ)²(|M_a| + |M_b|)²` for a
/// non-degenerate triangle.
pub(crate) fn density_and_envelope(
    model: &PwAmplitudeModel,
    m1: i32,
    m2: i32,
    geom: &TriangleGeometry,
    phi_k: f64,
) -> (f64, f64) {
    let br = bracket(model, m1, m2, geom, phi_k);
    let pref = geom.kappa1 * geom.kappa2 / (2.0 * geom.area);
    let p2 = pref * pref;
    (p2 * br.value.norm_sqr(), p2 * br.envelope * br.envelope)
}

fn geometry_for(b1: &BesselMode, b2: &BesselMode, k: &TransferVector, eps_boundary: f64) -> Result<TriangleGeometry> {
    triangle_geometry_with_eps(b1.kappa, b2.kappa, k.k_perp, eps_boundary)
}

pub fn twisted_amplitude(
    b1: &BesselMode,
    b2: &BesselMode,
    k: &TransferVector,
    model: &PwAmplitudeModel,
) -> Result<TwistedAmplitude> {
    twisted_amplitude_with_eps(b1, b2, k, model, default_eps_boundary(b1.kappa, b2.kappa))
}

pub fn twisted_amplitude_with_eps(
    b1: &BesselMode,
    b2: &BesselMode,
    k: &TransferVector,
    model: &PwAmplitudeModel,
    eps_boundary: f64,
) -> Result<TwistedAmplitude> {
    let geom = geometry_for(b1, b2, k, eps_boundary)?;
    if geom.degenerate || geom.area <= 0.0 {
        return Err(Error::DegenerateBoundary { k_perp: k.k_perp });
    }
    let br = bracket(model, b1.m, b2.m, &geom, k.phi_k);
    let global = Complex64::cis((b1.m - b2.m) as f64 * k.phi_k);
    let pref = b1.kappa * b2.kappa / (2.0 * geom.area);
    let (lo, hi) = crate::kinematics::annulus(b1.kappa, b2.kappa);
    let zone = BOUNDARY_ZONE_REL * (b1.kappa + b2.kappa);
    Ok(TwistedAmplitude {
        value: global * br.value * pref,
        phase_a: wrap_phase((global * br.term_a).arg()),
        phase_b: wrap_phase((global * br.term_b).arg()),
        boundary_flag: k.k_perp - lo < zone || hi - k.k_perp < zone,
    })
}

/// `Δ·J`, finite on the annulus edges where `J` itself diverges.
pub fn area_scaled_amplitude(
    b1: &BesselMode,
    b2: &BesselMode,
    k: &TransferVector,
    model: &PwAmplitudeModel,
) -> Result<Complex64> {
    let geom = geometry_for(b1, b2, k, default_eps_boundary(b1.kappa, b2.kappa))?;
    let br = bracket(model, b1.m, b2.m, &geom, k.phi_k);
    let global = Complex64::cis((b1.m - b2.m) as f64 * k.phi_k);
    Ok(global * br.value * (0.5 * b1.kappa * b2.kappa))
}

/// Relative tolerance on energy conservation checks.
pub const ENERGY_RTOL: f64 = 1e-9;

/// Unnormalized `dσ/d²K_perp = |J|²` at an on-shell transfer; zero outside the annulus.
pub fn xsec_density(
    b1: &BesselMode,
    b2: &BesselMode,
    k: &TransferVector,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
) -> Result<f64> {
    let kz = b1.kz + b2.kz;
    if (k.kz - kz).abs() > ENERGY_RTOL * (b1.kz.abs() + b2.kz.abs()).max(b1.kappa + b2.kappa) {
        return Err(Error::LongitudinalMismatch {
            expected: kz,
            actual: k.kz,
        });
    }
    let expected = b1.omega + b2.omega - atom.e_exc;
    let actual = detuning_from_transfer(atom, k);
    let ksum = b1.kappa + b2.kappa;
    let recoil_scale = ksum * (ksum + 2.0 * atom.p.norm()) / (2.0 * atom.mass_i);
    let scale = expected.abs().max(actual.abs()).max(recoil_scale);
    let rounding = 8.0 * f64::EPSILON * (b1.omega.abs() + b2.omega.abs() + atom.e_exc.abs());
    if (expected - actual).abs() > ENERGY_RTOL * scale + rounding {
        return Err(Error::EnergyMismatch { expected, actual });
    }
    match twisted_amplitude(b1, b2, k, model) {
        Ok(j) => Ok(j.value.norm_sqr()),
        Err(Error::OutsideAnnulus { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{triangle_geometry, Dispersion};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    fn photons(k1: f64, k2: f64, m1: i32, m2: i32) -> (BesselMode, BesselMode) {
        (
            BesselMode::photon(1.0, k1, m1).unwrap(),
            BesselMode::photon(-1.0, k2, m2).unwrap(),
        )
    }

    #[test]
    fn right_isosceles_without_oam() {
        let (b1, b2) = photons(1.0, 1.0, 0, 0);
        let k = TransferVector::new(SQRT_2, 0.0, 0.0).unwrap();
        let j = twisted_amplitude(&b1, &b2, &k, &PwAmplitudeModel::constant(1.0)).unwrap();
        assert_relative_eq!(j.value.re, 2.0, max_relative = 1e-14);
        assert!(j.value.im.abs() < 1e-14);
    }

    #[test]
    fn three_four_five_is_an_exact_zero() {
        let (b1, b2) = photons(3.0, 4.0, 1, 1);
        let k = TransferVector::new(5.0, 0.7, 0.0).unwrap();
        let j = twisted_amplitude(&b1, &b2, &k, &PwAmplitudeModel::constant(1.0)).unwrap();
        assert!(j.value.norm() < 1e-14, "{}", j.value);
    }

    #[test]
    fn single_oam_gives_global_phase() {
        let (b1, b2) = photons(1.0, 1.0, 1, 0);
        for phi in [0.0, 0.4, 2.5, 5.9] {
            let k = TransferVector::new(SQRT_2, phi, 0.0).unwrap();
            let j = twisted_amplitude(&b1, &b2, &k, &PwAmplitudeModel::constant(1.0)).unwrap();
            let expect = Complex64::cis(phi) * SQRT_2;
            assert!((j.value - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn fringe_function_examples() {
        let g = triangle_geometry(3.0, 4.0, 5.0).unwrap();
        assert_eq!(fringe_function(0, 0, &g), 1.0);
        assert!(fringe_function(1, 1, &g) < 1e-30);
        let g = triangle_geometry(1.0, 1.0, SQRT_2).unwrap();
        assert_relative_eq!(fringe_function(1, 0, &g), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn degenerate_and_outside() {
        let (b1, b2) = photons(1.0, 1.0, 1, 2);
        let model = PwAmplitudeModel::constant(1.0);
        let edge = TransferVector::new(2.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            twisted_amplitude(&b1, &b2, &edge, &model),
            Err(Error::DegenerateBoundary { .. })
        ));
        let out = TransferVector::new(2.5, 0.0, 0.0).unwrap();
        assert!(matches!(
            twisted_amplitude(&b1, &b2, &out, &model),
            Err(Error::OutsideAnnulus { .. })
        ));
    }

    #[test]
    fn boundary_limit_of_area_scaled_amplitude() {
        let (b1, b2) = photons(0.7, 1.1, 3, -2);
        let model = PwAmplitudeModel::RelativePhase {
            m0: Complex64::new(0.8, 0.3),
            phase_ab: 1.1,
        };
        let (ma, mb) = (Complex64::new(0.8, 0.3), Complex64::new(0.8, 0.3) * Complex64::cis(1.1));
        let limit = 0.7 * 1.1 * (ma + mb).norm() / 2.0;
        let hi = 1.8;
        let mut prev = f64::INFINITY;
        for exp in 2..9 {
            let kp = hi * (1.0 - 10f64.powi(-exp));
            let k = TransferVector::new(kp, 0.3, 0.0).unwrap();
            let j = twisted_amplitude(&b1, &b2, &k, &model).unwrap();
            let g = triangle_geometry(0.7, 1.1, kp).unwrap();
            let dev = (j.value.norm() * g.area - limit).abs();
            assert!(dev <= prev * 1.0001, "not approaching: {dev} after {prev}");
            prev = dev;
        }
        assert!(prev < 1e-3 * limit);
        let at_edge = area_scaled_amplitude(&b1, &b2, &TransferVector::new(hi, 0.3, 0.0).unwrap(), &model).unwrap();
        assert_relative_eq!(at_edge.norm(), limit, max_relative = 1e-12);
    }

    #[test]
    fn density_is_uniform_in_azimuth_and_zero_outside() {
        let (b1, b2) = photons(0.6, 0.9, 2, -3);
        let atom = AtomBeam::at_rest(1e9, 1.0, Dispersion::NonRelativistic).unwrap();
        let model = PwAmplitudeModel::constant(1.3);
        let kz = b1.kz + b2.kz;
        let kp = 1.1;
        let delta = (kp * kp + kz * kz) / 2e9;
        let atom = atom.with_excitation(b1.omega + b2.omega - delta);
        let reference = xsec_density(&b1, &b2, &TransferVector::new(kp, 0.0, kz).unwrap(), &atom, &model).unwrap();
        assert!(reference > 0.0);
        for i in 1..36 {
            let k = TransferVector::new(kp, i as f64 * TAU / 36.0, kz).unwrap();
            let d = xsec_density(&b1, &b2, &k, &atom, &model).unwrap();
            assert!((d - reference).abs() <= 1e-12 * reference);
        }
        // off shell
        let k = TransferVector::new(1.2, 0.0, kz).unwrap();
        assert!(matches!(
            xsec_density(&b1, &b2, &k, &atom, &model),
            Err(Error::EnergyMismatch { .. })
        ));
        // outside the annulus, on shell
        let kp = 1.6;
        let delta = (kp * kp + kz * kz) / 2e9;
        let atom = atom.with_excitation(b1.omega + b2.omega - delta);
        let k = TransferVector::new(kp, 0.0, kz).unwrap();
        assert_eq!(xsec_density(&b1, &b2, &k, &atom, &model).unwrap(), 0.0);
    }

    #[test]
    fn density_ratio_between_two_radii() {
        let (b1, b2) = photons(1.0, 0.8, 2, 1);
        let model = PwAmplitudeModel::constant(1.0);
        let dens = |kp: f64| {
            twisted_amplitude(&b1, &b2, &TransferVector::new(kp, 0.0, 0.0).unwrap(), &model)
                .unwrap()
                .value
                .norm_sqr()
        };
        let (a, b) = (0.9, 1.5);
        let ga = triangle_geometry(1.0, 0.8, a).unwrap();
        let gb = triangle_geometry(1.0, 0.8, b).unwrap();
        let expect =
            (gb.area * fringe_phase(2, 1, &ga).cos()).powi(2) / (ga.area * fringe_phase(2, 1, &gb).cos()).powi(2);
        assert_relative_eq!(dens(a) / dens(b), expect, max_relative = 1e-12);
    }

    #[test]
    fn table_model_interpolates_periodically() {
        let t = AmplitudeTable::new(vec![0.0, PI], vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)]).unwrap();
        assert_relative_eq!(t.eval(PI / 2.0).re, 2.0);
        assert_relative_eq!(t.eval(1.5 * PI).re, 2.0);
        assert_relative_eq!(t.eval(-PI / 2.0).re, 2.0);
        assert!(AmplitudeTable::new(vec![1.0, 0.5], vec![Complex64::new(1.0, 0.0); 2]).is_err());
        assert_eq!(PwAmplitudeModel::Table(t).bound(), 6.0);
    }

    #[test]
    fn relative_phase_shifts_the_fringe() {
        // bracket = 2 m0 e^{iα/2} cos(Φ - α/2): zeros move by α/2 in Φ
        let g = triangle_geometry(1.0, 1.0, 1.2).unwrap();
        let alpha = 0.6;
        let model = PwAmplitudeModel::RelativePhase {
            m0: Complex64::new(1.0, 0.0),
            phase_ab: alpha,
        };
        let br = bracket(&model, 1, 2, &g, 0.0);
        let phase = fringe_phase(1, 2, &g);
        assert_relative_eq!(
            br.value.norm(),
            2.0 * (phase - alpha / 2.0).cos().abs(),
            max_relative = 1e-12
        );
    }

    fn interior() -> impl Strategy<Value = (f64, f64, f64)> {
        (0.1f64..2.0, 0.1f64..2.0, 0.01f64..0.99).prop_map(|(k1, k2, t)| {
            let (lo, hi) = crate::kinematics::annulus(k1, k2);
            (k1, k2, lo + t * (hi - lo))
        })
    }

    proptest! {
        #[test]
        fn magnitude_matches_fringe_formula((k1, k2, kp) in interior(), m1 in -10i32..=10, m2 in -10i32..=10, phi in 0.0f64..TAU) {
            let (b1, b2) = photons(k1, k2, m1, m2);
            let k = TransferVector::new(kp, phi, 0.0).unwrap();
            let m0 = 0.7;
            let j = twisted_amplitude(&b1, &b2, &k, &PwAmplitudeModel::constant(m0)).unwrap();
            let g = triangle_geometry(k1, k2, kp).unwrap();
            let expect = k1 * k2 / g.area * (m0 * fringe_phase(m1, m2, &g).cos()).abs();
            prop_assert!((j.value.norm() - expect).abs() <= 1e-12 * expect + 1e-12 * k1 * k2 / g.area);
        }

        #[test]
        fn azimuth_only_changes_the_global_phase((k1, k2, kp) in interior(), m1 in -6i32..=6, m2 in -6i32..=6, phi in 0.0f64..TAU, alpha in -3.0f64..3.0) {
            let (b1, b2) = photons(k1, k2, m1, m2);
            let model = PwAmplitudeModel::RelativePhase { m0: Complex64::new(0.3, -0.4), phase_ab: alpha };
            let j0 = twisted_amplitude(&b1, &b2, &TransferVector::new(kp, 0.0, 0.0).unwrap(), &model).unwrap();
            let j1 = twisted_amplitude(&b1, &b2, &TransferVector::new(kp, phi, 0.0).unwrap(), &model).unwrap();
            prop_assert!((j0.value.norm() - j1.value.norm()).abs() <= 1e-12 * j0.value.norm().max(1e-300) + 1e-14);
        }

        #[test]
        fn flipping_oam_conjugates_the_bracket((k1, k2, kp) in interior(), m1 in -8i32..=8, m2 in -8i32..=8) {
            let g = triangle_geometry(k1, k2, kp).unwrap();
            let model = PwAmplitudeModel::constant(1.0);
            let a = bracket(&model, m1, m2, &g, 0.0).value;
            let b = bracket(&model, -m1, -m2, &g, 0.0).value;
            prop_assert!((a - b.conj()).norm() <= 1e-12);
            prop_assert!((fringe_function(m1, m2, &g) - fringe_function(-m1, -m2, &g)).abs() <= 1e-12);
        }
    }

    #[test]
    fn xsec_density_rejects_wrong_kz() {
        let (b1, b2) = photons(1.0, 1.0, 0, 0);
        let atom = AtomBeam::new(1e9, Vector3::zeros(), 1.0, Dispersion::NonRelativistic).unwrap();
        let k = TransferVector::new(1.0, 0.0, 0.5).unwrap();
        assert!(matches!(
            xsec_density(&b1, &b2, &k, &atom, &PwAmplitudeModel::default()),
            Err(Error::LongitudinalMismatch { .. })
        ));
    }
}
