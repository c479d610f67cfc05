//! Brute-force check of the two-path amplitude.
//!
//! The radial delta functions of both Bessel states are replaced by unit-area
//! Gaussians of width `σ`, the transverse delta eliminates `k2_perp = K_perp - k1_perp`,
//! and the remaining integral over `k1_perp` runs on a polar grid centered on ring 1:
//! Gauss–Hermite nodes across the ring, trapezoid along it.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::amplitude::{twisted_amplitude, Configuration, PwAmplitudeModel};
use crate::error::{Error, Result};
use crate::kinematics::{annulus, triangle_geometry, wrap_angle, Azimuths, BesselMode, ConfigPair, TransferVector};
use crate::quad::normal_rule;

pub const MIN_AZIMUTHAL: usize = 512;
pub const MIN_RADIAL: usize = 8;
const AZIMUTH_CHUNK: usize = 4096;
/// Points further than this many widths from ring 2 contribute nothing in double precision.
const RING_CUTOFF: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingRegularization {
    pub sigma: f64,
    pub n_radial: usize,
    pub n_azimuthal: usize,
}

impl RingRegularization {
    pub fn new(sigma: f64, n_radial: usize, n_azimuthal: usize) -> Result<Self> {
        let reg = RingRegularization {
            sigma,
            n_radial,
            n_azimuthal,
        };
        reg.validate()?;
        Ok(reg)
    }

    /// Default point counts for a given width.
    pub fn with_sigma(sigma: f64) -> Result<Self> {
        Self::new(sigma, 48, MIN_AZIMUTHAL)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ring sigma must be positive, got {:e}",
                self.sigma
            )));
        }
        if self.n_radial < MIN_RADIAL || self.n_azimuthal < MIN_AZIMUTHAL {
            return Err(Error::InvalidArgument(format!(
                "ring quadrature needs at least {MIN_RADIAL} radial and {MIN_AZIMUTHAL} azimuthal points"
            )));
        }
        Ok(())
    }

    pub fn halved(&self) -> Self {
        RingRegularization {
            sigma: 0.5 * self.sigma,
            ..*self
        }
    }
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (TAU).sqrt())
}

/// `(-i)^m`.
fn minus_i_pow(m: i32) -> Complex64 {
    match m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Fourier amplitude of a Bessel state at transverse momentum `k`, with the radial
/// delta function replaced by a unit-area Gaussian.
pub fn bessel_fourier_weight(kappa: f64, m: i32, k: Vector2<f64>, reg: &RingRegularization) -> Complex64 {
    let phi = k.y.atan2(k.x);
    minus_i_pow(m) * Complex64::cis(m as f64 * phi) * (TAU / kappa).sqrt() * gaussian(k.norm() - kappa, reg.sigma)
}

/// Numerical two-Bessel amplitude, normalized so that it converges to
/// [`twisted_amplitude`] as `σ → 0`.
pub fn ring_quadrature_amplitude(
    b1: &BesselMode,
    b2: &BesselMode,
    k: &TransferVector,
    model: &PwAmplitudeModel,
    reg: &RingRegularization,
) -> Result<Complex64> {
    reg.validate()?;
    let (k1, k2) = (b1.kappa, b2.kappa);
    let (lo, hi) = annulus(k1, k2);
    let margin = 5.0 * reg.sigma;
    if k.k_perp - lo < margin || hi - k.k_perp < margin {
        return Err(Error::InvalidArgument(format!(
            "K_perp = {:e} eV is closer than 5 sigma to the annulus edge",
            k.k_perp
        )));
    }
    if reg.sigma > 0.01 * k1.min(k2) {
        log::warn!("ring width {:e} eV is wider than 1% of the smaller kappa", reg.sigma);
    }
    let sigma = reg.sigma;
    let radial: Vec<(f64, f64)> = normal_rule(reg.n_radial)?
        .into_iter()
        .map(|(z, w)| (k1 + sigma * z, w))
        .filter(|&(r, _)| r > 0.0)
        .collect();
    let n_az = reg.n_azimuthal.max((3.0 * TAU * k1 / sigma).ceil() as usize);
    let dphi = TAU / n_az as f64;
    let kv = k.transverse();
    let (m1, m2) = (b1.m as f64, b2.m as f64);

    let chunks: Vec<Complex64> = (0..n_az.div_ceil(AZIMUTH_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in c * AZIMUTH_CHUNK..((c + 1) * AZIMUTH_CHUNK).min(n_az) {
                let phi1 = k.phi_k + j as f64 * dphi;
                let (s, co) = phi1.sin_cos();
                let mut partial = Complex64::new(0.0, 0.0);
                for &(r1, w) in &radial {
                    let q1 = Vector2::new(r1 * co, r1 * s);
                    let q2 = kv - q1;
                    let r2 = q2.norm();
                    if (r2 - k2).abs() > RING_CUTOFF * sigma {
                        continue;
                    }
                    let phi2 = q2.y.atan2(q2.x);
                    let config = if kv.x * q1.y - kv.y * q1.x >= 0.0 {
                        Configuration::A
                    } else {
                        Configuration::B
                    };
                    let amp = model.plane_wave(phi1, config);
                    partial += amp * Complex64::cis(m1 * phi1 - m2 * phi2) * (w * r1 * gaussian(r2 - k2, sigma));
                }
                acc += partial;
            }
            acc
        })
        .collect();
    let integral = chunks.into_iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b) * dphi;
    Ok(integral)
}

/// Full normalization of the integral evaluated by [`ring_quadrature_amplitude`]:
/// the product of the two Fourier weights carries `(-i)^(m1-m2)·2π/sqrt(κ1κ2)`.
pub fn weight_prefactor(b1: &BesselMode, b2: &BesselMode) -> Complex64 {
    minus_i_pow(b1.m - b2.m) * (TAU / (b1.kappa * b2.kappa).sqrt())
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub sigma: f64,
    pub numeric: Complex64,
    pub analytic: Complex64,
    /// `|numeric| / |analytic|`; NaN when the analytic value is an exact zero.
    pub ratio: f64,
    /// `arg(numeric) - arg(analytic)` wrapped to `(-π, π]`.
    pub phase_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Scale `κ1κ2/(2Δ)·(|M_a| + |M_b|)` used for absolute comparisons.
    pub scale: f64,
    /// `log2(e(σ)/e(σ/2))` of the error against the analytic value for the last halving.
    pub observed_order: Option<f64>,
}

impl ConvergenceStudy {
    pub fn last(&self) -> &ConvergenceRow {
        self.rows.last().expect("study has at least one level")
    }
}

/// Ring quadrature at `σ, σ/2, …` (`levels` values). Fails with `NonConvergent` when the
/// last two levels differ by more than `tol·scale`.
pub fn convergence_study(
    b1: &BesselMode,
    b2: &BesselMode,
    k: &TransferVector,
    model: &PwAmplitudeModel,
    reg: &RingRegularization,
    levels: usize,
    tol: f64,
) -> Result<ConvergenceStudy> {
    let analytic = twisted_amplitude(b1, b2, k, model)?;
    let geom = triangle_geometry(b1.kappa, b2.kappa, k.k_perp)?;
    let br = crate::amplitude::bracket(model, b1.m, b2.m, &geom, k.phi_k);
    let scale = b1.kappa * b2.kappa / (2.0 * geom.area) * br.envelope;
    let mut rows = Vec::with_capacity(levels);
    let mut r = *reg;
    for _ in 0..levels.max(1) {
        let numeric = ring_quadrature_amplitude(b1, b2, k, model, &r)?;
        let a = analytic.value;
        let ratio = if a.norm() > 1e-12 * scale {
            numeric.norm() / a.norm()
        } else {
            f64::NAN
        };
        rows.push(ConvergenceRow {
            sigma: r.sigma,
            numeric,
            analytic: a,
            ratio,
            phase_diff: crate::kinematics::wrap_phase(numeric.arg() - a.arg()),
        });
        r = r.halved();
    }
    let observed_order = if rows.len() >= 2 {
        let e = |row: &ConvergenceRow| (row.numeric - row.analytic).norm();
        let (e0, e1) = (e(&rows[rows.len() - 2]), e(rows.last().unwrap()));
        (e0 > 0.0 && e1 > 0.0).then(|| (e0 / e1).log2())
    } else {
        None
    };
    if rows.len() >= 2 {
        let d = (rows[rows.len() - 1].numeric - rows[rows.len() - 2].numeric).norm();
        if d > tol * scale {
            return Err(Error::NonConvergent(format!(
                "successive ring widths differ by {:e}, above {:e}",
                d,
                tol * scale
            )));
        }
    }
    Ok(ConvergenceStudy {
        rows,
        scale,
        observed_order,
    })
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Result<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootFailure(format!(
            "no sign change of the closure residual on [{a}, {b}]"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Numerical solution of `κ1 n(φ1) + κ2 n(φ2) = K_perp` by bisection in `φ1`.
pub fn root_find_configs(kappa1: f64, kappa2: f64, k: &TransferVector) -> Result<ConfigPair> {
    let (lo, hi) = annulus(kappa1, kappa2);
    if !(k.k_perp >= lo && k.k_perp <= hi) || kappa1 <= 0.0 || k.k_perp <= 0.0 {
        return Err(Error::OutsideAnnulus {
            k_perp: k.k_perp,
            lower: lo,
            upper: hi,
        });
    }
    let kk = k.k_perp;
    // |K - k1|² - κ2², as a function of the angle between k1 and K
    let residual = |u: f64| kk * kk + kappa1 * kappa1 - 2.0 * kk * kappa1 * u.cos() - kappa2 * kappa2;
    let ua = bisect(residual, 0.0, PI)?;
    let ub = -bisect(residual, 0.0, PI)?;
    let azimuths = |u: f64| {
        let phi1 = k.phi_k + u;
        let q2 = k.transverse() - kappa1 * Vector2::new(phi1.cos(), phi1.sin());
        Azimuths {
            phi1: wrap_angle(phi1),
            phi2: wrap_angle(q2.y.atan2(q2.x)),
        }
    };
    Ok(ConfigPair {
        a: azimuths(ua),
        b: azimuths(ub),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::config_azimuths;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::SQRT_2;

    fn photons(k1: f64, k2: f64, m1: i32, m2: i32) -> (BesselMode, BesselMode) {
        (
            BesselMode::photon(1.0, k1, m1).unwrap(),
            BesselMode::photon(-1.0, k2, m2).unwrap(),
        )
    }

    fn angle_diff(a: f64, b: f64) -> f64 {
        crate::kinematics::wrap_phase(a - b).abs()
    }

    #[test]
    fn fourier_weight_examples() {
        let reg = RingRegularization::with_sigma(1e-2).unwrap();
        let on = bessel_fourier_weight(1.0, 0, Vector2::new(1.0, 0.0), &reg);
        assert_relative_eq!(on.norm(), TAU.sqrt() / (1e-2 * TAU.sqrt()), max_relative = 1e-12);
        let off = bessel_fourier_weight(1.0, 0, Vector2::new(1.05, 0.0), &reg);
        assert_relative_eq!(off.norm() / on.norm(), (-12.5f64).exp(), max_relative = 1e-9);
        let w = |phi: f64| bessel_fourier_weight(1.0, 3, Vector2::new(phi.cos(), phi.sin()), &reg);
        assert_relative_eq!(wrap_angle((w(0.5) / w(0.0)).arg()), 1.5, max_relative = 1e-12);
    }

    #[test]
    fn weight_product_normalization() {
        let reg = RingRegularization::with_sigma(1e-3).unwrap();
        let (b1, b2) = photons(1.0, 1.0, 0, 0);
        let k = TransferVector::new(SQRT_2, 0.0, 0.0).unwrap();
        let j = ring_quadrature_amplitude(&b1, &b2, &k, &PwAmplitudeModel::constant(1.0), &reg).unwrap();
        assert!((j.norm() - 2.0).abs() < 2e-2, "{j}");
        // the raw weights carry the prefactor on top of the normalized integrand
        let p = weight_prefactor(&b1, &b2);
        assert_relative_eq!(p.norm(), TAU, max_relative = 1e-14);
    }

    #[test]
    fn right_isosceles_from_rings() {
        let (b1, b2) = photons(1.0, 1.0, 0, 0);
        let k = TransferVector::new(SQRT_2, 0.3, 0.0).unwrap();
        let reg = RingRegularization::with_sigma(1e-3).unwrap();
        let j = ring_quadrature_amplitude(&b1, &b2, &k, &PwAmplitudeModel::constant(1.0), &reg).unwrap();
        assert!((j.norm() / 2.0 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn three_four_five_zero_from_rings() {
        let (b1, b2) = photons(3.0, 4.0, 1, 1);
        let k = TransferVector::new(5.0, 0.0, 0.0).unwrap();
        let reg = RingRegularization::with_sigma(3e-3).unwrap();
        let j = ring_quadrature_amplitude(&b1, &b2, &k, &PwAmplitudeModel::constant(1.0), &reg).unwrap();
        let scale = 3.0 * 4.0 / (2.0 * 6.0);
        assert!(j.norm() <= 1e-2 * scale, "{j}");
    }

    #[test]
    fn convergence_with_halving() {
        let (b1, b2) = photons(0.8, 1.1, 2, -1);
        let k = TransferVector::new(1.3, 1.0, 0.0).unwrap();
        let model = PwAmplitudeModel::RelativePhase {
            m0: Complex64::new(1.0, 0.5),
            phase_ab: 0.4,
        };
        let reg = RingRegularization::with_sigma(4e-3).unwrap();
        let study = convergence_study(&b1, &b2, &k, &model, &reg, 3, 1e-2).unwrap();
        let errs: Vec<f64> = study.rows.iter().map(|r| (r.numeric - r.analytic).norm()).collect();
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
        assert!(study.observed_order.unwrap() > 0.9);
        assert!(study.last().phase_diff.abs() < 0.02);
    }

    #[test]
    fn rejects_points_near_the_edge() {
        let (b1, b2) = photons(1.0, 1.0, 0, 0);
        let k = TransferVector::new(2.0 - 1e-3, 0.0, 0.0).unwrap();
        let reg = RingRegularization::with_sigma(1e-3).unwrap();
        assert!(ring_quadrature_amplitude(&b1, &b2, &k, &PwAmplitudeModel::default(), &reg).is_err());
        assert!(RingRegularization::new(1e-3, 48, 100).is_err());
    }

    #[test]
    fn root_examples() {
        let k = TransferVector::new(SQRT_2, 0.0, 0.0).unwrap();
        let r = root_find_configs(1.0, 1.0, &k).unwrap();
        assert!(angle_diff(r.a.phi1, PI / 4.0) < 1e-12);
        assert!(angle_diff(r.a.phi2, -PI / 4.0) < 1e-12);
        assert!(angle_diff(r.b.phi1, -PI / 4.0) < 1e-12);
        assert!(angle_diff(r.b.phi2, PI / 4.0) < 1e-12);

        let k = TransferVector::new(5.0, 0.0, 0.0).unwrap();
        let r = root_find_configs(3.0, 4.0, &k).unwrap();
        assert!(angle_diff(r.a.phi1, 0.6f64.acos()) < 1e-12);
        assert!(angle_diff(r.b.phi1, -(0.6f64.acos())) < 1e-12);

        let kp = 2.0 * (1.0 - 1e-6);
        let r = root_find_configs(1.0, 1.0, &TransferVector::new(kp, 0.7, 0.0).unwrap()).unwrap();
        let sep = angle_diff(r.a.phi1, r.b.phi1);
        assert!(sep > 0.0 && sep < 1e-2);
    }

    proptest! {
        #[test]
        fn roots_match_closed_form(k1 in 0.1f64..3.0, k2 in 0.1f64..3.0, t in 0.02f64..0.98, phi in 0.0f64..TAU) {
            let (lo, hi) = annulus(k1, k2);
            let kp = lo + t * (hi - lo);
            let k = TransferVector::new(kp, phi, 0.0).unwrap();
            let roots = root_find_configs(k1, k2, &k).unwrap();
            let geom = triangle_geometry(k1, k2, kp).unwrap();
            let closed = config_azimuths(&geom, phi);
            prop_assert!(angle_diff(roots.a.phi1, closed.a.phi1) < 1e-8);
            prop_assert!(angle_diff(roots.a.phi2, closed.a.phi2) < 1e-8);
            prop_assert!(angle_diff(roots.b.phi1, closed.b.phi1) < 1e-8);
            prop_assert!(angle_diff(roots.b.phi2, closed.b.phi2) < 1e-8);
        }
    }
}
