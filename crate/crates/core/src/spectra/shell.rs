//! Rate densities on the energy shell.
//!
//! For a fixed detuning the allowed transfers form a circle in the `K_perp` plane,
//! centred at `-p_perp`, with radius `R² = p_perp² + S(δ)`. Integrating `|J|²` over the
//! part of that circle inside the trimmed annulus, with the inverse gradient of the
//! detuning as line weight, gives the rate per unit detuning:
//!
//! ```text
//! rate(δ) = C ∫ dψ |J(-p_perp + R n(ψ))|²,    C = M_i (non-relativistic) or E_f
//! ```
//!
//! For `p_perp ≫ κ` the circle is parameterized by the transverse coordinate `t`
//! instead, which avoids the cancellation in `R cos ψ - p_perp`.

use std::f64::consts::TAU;

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;

use super::{excluded_fraction, Axis, FringePattern, ScanOptions};
use crate::amplitude::{density_and_envelope, fringe_phase, PwAmplitudeModel};
use crate::error::{Error, Result};
use crate::kinematics::{
    annulus, detuning_from_vector, kinetic_energy, triangle_geometry_with_eps, AtomBeam, BesselMode, Dispersion, Window,
};
use crate::quad::{integrate, uniform_breaks, Adaptive};

/// Switch to the `t` parameterization once `p_perp` exceeds this multiple of `κ1 + κ2`.
const LARGE_MOMENTUM: f64 = 8.0;
const INITIAL_PIECES: usize = 16;

/// `|J|²` restricted to the trimmed annulus.
#[derive(Debug, Clone, Copy)]
struct Kernel<'a> {
    b1: &'a BesselMode,
    b2: &'a BesselMode,
    model: &'a PwAmplitudeModel,
    eps: f64,
    lo: f64,
    hi: f64,
    slack: f64,
}

impl<'a> Kernel<'a> {
    fn new(b1: &'a BesselMode, b2: &'a BesselMode, model: &'a PwAmplitudeModel, opts: &ScanOptions) -> Result<Self> {
        if !(b1.kappa > 0.0 && b2.kappa > 0.0) {
            return Err(Error::InvalidArgument(
                "both photons need a non-zero cone opening for a two-dimensional annulus".into(),
            ));
        }
        model.validate()?;
        let eps = opts.cutoff(b1.kappa, b2.kappa);
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "boundary cutoff must be >= 0, got {eps:e}"
            )));
        }
        if !(opts.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("relative tolerance must be positive".into()));
        }
        let (lo, hi) = annulus(b1.kappa, b2.kappa);
        let (lo, hi) = (lo + eps, hi - eps);
        if lo >= hi {
            return Err(Error::InvalidArgument(format!(
                "boundary cutoff {eps:e} eV removes the whole annulus"
            )));
        }
        Ok(Kernel {
            b1,
            b2,
            model,
            eps,
            lo,
            hi,
            slack: 1e-12 * hi,
        })
    }

    fn inside(&self, kp: f64) -> bool {
        kp >= self.lo - self.slack && kp <= self.hi + self.slack
    }

    fn density(&self, k: Vector2<f64>) -> [f64; 2] {
        let kp = k.norm();
        if !self.inside(kp) {
            return [0.0; 2];
        }
        match triangle_geometry_with_eps(self.b1.kappa, self.b2.kappa, kp, 0.0) {
            Ok(g) if !g.degenerate && g.area > 0.0 => {
                let (d, e) = density_and_envelope(self.model, self.b1.m, self.b2.m, &g, k.y.atan2(k.x));
                [d, e]
            }
            _ => [0.0; 2],
        }
    }

    /// `∫ dφ |J(K_perp, φ)|²` and its envelope at fixed `|K_perp|`.
    fn ring(&self, kp: f64, rel_tol: f64) -> Result<[f64; 2]> {
        if !self.inside(kp) {
            return Ok([0.0; 2]);
        }
        if !self.model.depends_on_azimuth() {
            return Ok(self.density(Vector2::new(kp, 0.0)).map(|v| TAU * v));
        }
        integrate(
            |phi| self.density(Vector2::new(kp * phi.cos(), kp * phi.sin())),
            &uniform_breaks(0.0, TAU, INITIAL_PIECES),
            adaptive(rel_tol),
        )
    }

    fn phase(&self, kp: f64) -> f64 {
        if !self.inside(kp) {
            return f64::NAN;
        }
        match triangle_geometry_with_eps(self.b1.kappa, self.b2.kappa, kp, 0.0) {
            Ok(g) => fringe_phase(self.b1.m, self.b2.m, &g),
            Err(_) => f64::NAN,
        }
    }

    fn max_oscillations(&self) -> f64 {
        (self.b1.m.unsigned_abs() + self.b2.m.unsigned_abs()) as f64
    }

    fn pattern(&self, axis: Axis, grid: Vec<f64>, rates: Vec<[f64; 2]>, phase: Option<Vec<f64>>) -> FringePattern {
        FringePattern {
            axis,
            grid,
            values: rates.iter().map(|r| r[0]).collect(),
            envelope: Some(rates.iter().map(|r| r[1]).collect()),
            phase,
            max_oscillations: self.max_oscillations(),
            boundary_cutoff: self.eps,
            excluded_fraction: excluded_fraction(self.b1.kappa, self.b2.kappa, self.eps),
        }
    }
}

fn adaptive(rel_tol: f64) -> Adaptive {
    Adaptive {
        rel_tol,
        ..Adaptive::default()
    }
}

/// Root of an increasing function on `[a, b]` with `f(a) <= 0 <= f(b)`.
fn bisect_increasing(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Everything needed to evaluate the rate per unit detuning.
#[derive(Debug, Clone, Copy)]
pub struct ShellProblem<'a> {
    kernel: Kernel<'a>,
    pub atom: &'a AtomBeam,
    rel_tol: f64,
}

impl<'a> ShellProblem<'a> {
    pub fn new(
        b1: &'a BesselMode,
        b2: &'a BesselMode,
        atom: &'a AtomBeam,
        model: &'a PwAmplitudeModel,
        opts: &ScanOptions,
    ) -> Result<Self> {
        atom.validate()?;
        Ok(ShellProblem {
            kernel: Kernel::new(b1, b2, model, opts)?,
            atom,
            rel_tol: opts.rel_tol,
        })
    }

    pub fn kz(&self) -> f64 {
        self.kernel.b1.kz + self.kernel.b2.kz
    }

    /// Trimmed annulus `[|κ1-κ2| + ε, κ1 + κ2 - ε]`.
    pub fn trimmed(&self) -> (f64, f64) {
        (self.kernel.lo, self.kernel.hi)
    }

    pub fn cutoff(&self) -> f64 {
        self.kernel.eps
    }

    /// `K² + 2p·K` on the shell of detuning `delta`.
    fn shell_invariant(&self, delta: f64) -> f64 {
        let a = self.atom;
        match a.dispersion {
            Dispersion::NonRelativistic => 2.0 * a.recoil_mass() * delta,
            Dispersion::Relativistic => {
                let t_i = kinetic_energy(a.mass_i, a.p.norm_squared());
                let e_i = a.mass_i + t_i;
                2.0 * a.e_exc * t_i + delta * (2.0 * e_i + 2.0 * a.e_exc + delta)
            }
        }
    }

    fn prefactor(&self, delta: f64) -> f64 {
        let a = self.atom;
        match a.dispersion {
            Dispersion::NonRelativistic => a.recoil_mass(),
            Dispersion::Relativistic => a.energy_i() + a.e_exc + delta,
        }
    }

    /// `S = |K_perp + p_perp|² - p_perp²` on the shell.
    fn shell_offset(&self, delta: f64) -> f64 {
        let kz = self.kz();
        self.shell_invariant(delta) - kz * kz - 2.0 * self.atom.p.z * kz
    }

    /// Rate per unit detuning and its envelope.
    pub fn rate(&self, delta: f64) -> Result<[f64; 2]> {
        let s = self.shell_offset(delta);
        let pp = self.atom.transverse_momentum();
        let p = pp.norm();
        let r2 = p * p + s;
        if !(r2 > 0.0) {
            return Ok([0.0; 2]);
        }
        let c = self.prefactor(delta);
        let (lo, hi) = (self.kernel.lo, self.kernel.hi);
        let k = &self.kernel;
        let opts = adaptive(self.rel_tol);
        let v = if p == 0.0 {
            k.ring(r2.sqrt(), self.rel_tol)?
        } else {
            let u = pp / p;
            let w = Vector2::new(-u.y, u.x);
            if p >= LARGE_MOMENTUM * (k.b1.kappa + k.b2.kappa) {
                // K = x(t) u + t w on the shell, x = (S - t²)/(sqrt(R² - t²) + p)
                let r = r2.sqrt();
                let x_of = |t: f64| (s - t * t) / ((r2 - t * t).max(0.0).sqrt() + p);
                let k2_of = |t: f64| {
                    let x = x_of(t);
                    x * x + t * t
                };
                if x_of(0.0).abs() >= hi {
                    return Ok([0.0; 2]);
                }
                let ta = if x_of(0.0).abs() >= lo {
                    0.0
                } else {
                    bisect_increasing(|t| k2_of(t) - lo * lo, 0.0, r)
                };
                let tb = if k2_of(r) <= hi * hi {
                    r
                } else {
                    bisect_increasing(|t| k2_of(t) - hi * hi, 0.0, r)
                };
                if tb <= ta {
                    return Ok([0.0; 2]);
                }
                integrate(
                    |t| {
                        let x = x_of(t);
                        let d1 = k.density(u * x + w * t);
                        let d2 = k.density(u * x - w * t);
                        let jac = 1.0 / (p + x);
                        [(d1[0] + d2[0]) * jac, (d1[1] + d2[1]) * jac]
                    },
                    &uniform_breaks(ta, tb, INITIAL_PIECES),
                    opts,
                )?
            } else {
                // |K|² = p² + R² - 2pR cos α, α measured from the direction of p_perp
                let r = r2.sqrt();
                let cos_of = |kk: f64| (p * p + r2 - kk * kk) / (2.0 * p * r);
                let (c_lo, c_hi) = (cos_of(lo), cos_of(hi));
                if c_lo < -1.0 || c_hi > 1.0 {
                    return Ok([0.0; 2]);
                }
                let a0 = c_lo.min(1.0).acos();
                let a1 = c_hi.max(-1.0).acos();
                if a1 <= a0 {
                    return Ok([0.0; 2]);
                }
                integrate(
                    |a| {
                        let (sa, ca) = a.sin_cos();
                        let along = u * (r * ca - p);
                        let d1 = k.density(along + w * (r * sa));
                        let d2 = k.density(along - w * (r * sa));
                        [d1[0] + d2[0], d1[1] + d2[1]]
                    },
                    &uniform_breaks(a0, a1, INITIAL_PIECES),
                    opts,
                )?
            }
        };
        Ok([c * v[0], c * v[1]])
    }

    /// Rate averaged over a Gaussian spread `sigma` of the atom momentum around its mean,
    /// for non-relativistic kinematics. The detuning `(K² + 2p·K)/(2M)` is linear in `p`,
    /// so the average turns the shell into a Gaussian of width `sd(p·K)/M` in detuning:
    ///
    /// ```text
    /// rate(δ) = ∫ d²K_perp |J|² N(δ; (K² + 2p̄·K)/(2M), sd(p·K)/M)
    /// ```
    pub fn gaussian_rate(&self, delta: f64, sigma: &Vector3<f64>) -> Result<[f64; 2]> {
        if self.atom.dispersion != Dispersion::NonRelativistic {
            return Err(Error::InvalidArgument(
                "closed-form momentum smearing needs non-relativistic kinematics".into(),
            ));
        }
        let k = &self.kernel;
        let m = self.atom.recoil_mass();
        let kz = self.kz();
        let p0 = self.atom.p;
        let c0 = kz * kz + 2.0 * p0.z * kz;
        let (lo, hi) = (k.lo, k.hi);
        let (raw_lo, raw_hi) = (lo - k.eps, hi + k.eps);
        // the ring density rises like 1/distance towards the annulus edges
        let mut edge_breaks = vec![lo, hi];
        let mid = 0.5 * (lo + hi);
        let mut d = k.eps.max(1e-12 * hi);
        while raw_lo + d < mid {
            edge_breaks.push(raw_lo + d);
            edge_breaks.push(raw_hi - d);
            d *= 4.0;
        }
        let opts = adaptive(self.rel_tol);
        let inner = |phi: f64| -> Result<[f64; 2]> {
            let (sn, cs) = phi.sin_cos();
            let b = p0.x * cs + p0.y * sn;
            let var_dir = sigma.x * sigma.x * cs * cs + sigma.y * sigma.y * sn * sn;
            let tau_of = |r: f64| (r * r * var_dir + sigma.z * sigma.z * kz * kz).sqrt() / m;
            let disc = b * b - c0 + 2.0 * m * delta;
            let ridge = (disc >= 0.0).then(|| -b + disc.sqrt()).filter(|r| *r > 0.0);
            let dens = |r: f64| k.density(Vector2::new(r * cs, r * sn));
            if let Some(rs) = ridge {
                let tau = tau_of(rs);
                let slope = (rs + b) / m;
                let width = if slope > 0.0 { tau / slope } else { f64::INFINITY };
                if width < 1e-9 * (hi - lo) {
                    // Gaussian narrower than anything the ring density resolves
                    if rs < lo || rs > hi || !(slope > 0.0) {
                        return Ok([0.0; 2]);
                    }
                    return Ok(dens(rs).map(|v| v * rs / slope));
                }
            }
            let mut breaks = edge_breaks.clone();
            if let Some(rs) = ridge {
                let tau = tau_of(rs);
                let width = tau * m / (rs + b).abs().max(f64::MIN_POSITIVE);
                for f in [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0] {
                    breaks.push(rs + f * width);
                }
            }
            breaks.retain(|x| *x >= lo && *x <= hi);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            integrate(
                |r| {
                    let tau = tau_of(r);
                    let mu = (r * r + 2.0 * b * r + c0) / (2.0 * m);
                    let g = if tau > 0.0 {
                        (-0.5 * ((delta - mu) / tau).powi(2)).exp() / (tau * (TAU).sqrt())
                    } else {
                        0.0
                    };
                    if g == 0.0 {
                        return [0.0; 2];
                    }
                    let dv = dens(r);
                    [dv[0] * r * g, dv[1] * r * g]
                },
                &breaks,
                opts,
            )
        };
        let symmetric = !k.model.depends_on_azimuth() && sigma.x == sigma.y && p0.x == 0.0 && p0.y == 0.0;
        if symmetric {
            return Ok(inner(0.0)?.map(|v| TAU * v));
        }
        // the integrand needs a fallible inner integral; keep the first error
        let failure = std::cell::RefCell::new(None);
        let v = integrate(
            |phi| match inner(phi) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    [0.0; 2]
                }
            },
            &uniform_breaks(0.0, TAU, INITIAL_PIECES),
            opts,
        )?;
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// `|K_perp|` on the shell of an atom without transverse momentum; NaN when the
    /// shell is empty.
    fn rest_radius(&self, delta: f64) -> f64 {
        let s = self.shell_offset(delta);
        if s > 0.0 {
            s.sqrt()
        } else {
            f64::NAN
        }
    }

    fn has_transverse_momentum(&self) -> bool {
        self.atom.transverse_momentum().norm() > 0.0
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("scan grid is empty".into()));
    }
    if grid.iter().any(|x| !x.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "scan grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn scan(problem: &ShellProblem, grid: &[f64]) -> Result<FringePattern> {
    check_grid(grid)?;
    let rates = grid.par_iter().map(|&d| problem.rate(d)).collect::<Result<Vec<_>>>()?;
    let phase = (!problem.has_transverse_momentum()).then(|| {
        grid.iter()
            .map(|&d| problem.kernel.phase(problem.rest_radius(d)))
            .collect()
    });
    Ok(problem.kernel.pattern(Axis::Detuning, grid.to_vec(), rates, phase))
}

/// Detuning scan without the transverse-momentum warning, for smearing nodes.
pub(crate) fn detuning_scan_unchecked(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    grid: &[f64],
    opts: &ScanOptions,
) -> Result<FringePattern> {
    scan(&ShellProblem::new(b1, b2, atom, model, opts)?, grid)
}

/// Excitation rate against detuning for an atom (nearly) at rest.
pub fn detuning_scan(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    grid: &[f64],
    opts: &ScanOptions,
) -> Result<FringePattern> {
    let problem = ShellProblem::new(b1, b2, atom, model, opts)?;
    let p_perp = atom.transverse_momentum().norm();
    if p_perp > 0.1 * b1.kappa.min(b2.kappa) {
        log::warn!("detuning scan with transverse atom momentum {p_perp:e} eV; consider the crossed-beam scan");
    }
    scan(&problem, grid)
}

/// Excitation rate against detuning for an atom moving across balanced photons.
pub fn crossed_beam_scan(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    grid: &[f64],
    opts: &ScanOptions,
) -> Result<FringePattern> {
    if !(atom.transverse_momentum().norm() > 0.0) {
        return Err(Error::InvalidArgument(
            "crossed-beam scan needs a transverse atom momentum".into(),
        ));
    }
    let kz = b1.kz + b2.kz;
    let scale = b1.kz.abs().max(b2.kz.abs()).max(b1.kappa + b2.kappa);
    if kz.abs() > 1e-9 * scale {
        return Err(Error::InvalidArgument(format!(
            "crossed-beam scan needs balanced photons, k1z + k2z = {kz:e} eV"
        )));
    }
    let problem = ShellProblem::new(b1, b2, atom, model, opts)?;
    scan(&problem, grid)
}

/// Detuning interval where `rate > 0`, with edges refined by bisection between the
/// outermost zero and non-zero grid points. `None` for an all-zero pattern.
pub fn refine_support(problem: &ShellProblem, pattern: &FringePattern) -> Result<Option<Window>> {
    let first = pattern.values.iter().position(|&v| v > 0.0);
    let last = pattern.values.iter().rposition(|&v| v > 0.0);
    let (Some(first), Some(last)) = (first, last) else {
        return Ok(None);
    };
    let positive = |d: f64| -> Result<bool> { Ok(problem.rate(d)?[0] > 0.0) };
    let edge = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..80 {
            let m = 0.5 * (inside + outside);
            if m == inside || m == outside {
                break;
            }
            if positive(m)? {
                inside = m;
            } else {
                outside = m;
            }
        }
        Ok(0.5 * (inside + outside))
    };
    let g = &pattern.grid;
    let min = if first > 0 { edge(g[first], g[first - 1])? } else { g[0] };
    let max = if last + 1 < g.len() {
        edge(g[last], g[last + 1])?
    } else {
        g[last]
    };
    Ok(Some(Window { min, max }))
}

/// Detuning grid for an atom without transverse momentum on which the fringe phase
/// moves by at most `max_dphi` between neighbours, spanning the trimmed window.
pub fn auto_detuning_grid(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    opts: &ScanOptions,
    max_dphi: f64,
) -> Result<Vec<f64>> {
    const MAX_POINTS: usize = 2_000_000;
    if atom.transverse_momentum().norm() > 0.0 {
        return Err(Error::InvalidArgument(
            "phase-adaptive grids need an atom without transverse momentum".into(),
        ));
    }
    if !(max_dphi > 0.0) {
        return Err(Error::InvalidArgument("phase step must be positive".into()));
    }
    let model = PwAmplitudeModel::default();
    let kernel = Kernel::new(b1, b2, &model, opts)?;
    let phase = |k: f64| kernel.phase(k);
    let mut ks = vec![kernel.lo];
    let mut stack: Vec<(f64, f64)> = uniform_breaks(kernel.lo, kernel.hi, 64)
        .windows(2)
        .rev()
        .map(|w| (w[0], w[1]))
        .collect();
    while let Some((a, b)) = stack.pop() {
        let m = 0.5 * (a + b);
        if (phase(b) - phase(a)).abs() > max_dphi && m > a && m < b {
            stack.push((m, b));
            stack.push((a, m));
        } else {
            ks.push(b);
            if ks.len() > MAX_POINTS {
                return Err(Error::Undersampled {
                    max_step: (phase(b) - phase(a)).abs(),
                    limit: max_dphi,
                });
            }
        }
    }
    let kz = b1.kz + b2.kz;
    let mut grid: Vec<f64> = ks
        .iter()
        .map(|&k| detuning_from_vector(atom, &Vector3::new(k, 0.0, kz)))
        .collect();
    grid.dedup_by(|b, a| *b <= *a);
    Ok(grid)
}

/// `|J|²` against the kick azimuth at fixed `|K_perp|`.
pub fn azimuthal_distribution(
    b1: &BesselMode,
    b2: &BesselMode,
    model: &PwAmplitudeModel,
    k_perp: f64,
    n_phi: usize,
    opts: &ScanOptions,
) -> Result<FringePattern> {
    if n_phi < 2 {
        return Err(Error::InvalidArgument(
            "azimuthal distribution needs at least 2 points".into(),
        ));
    }
    let kernel = Kernel::new(b1, b2, model, opts)?;
    let grid: Vec<f64> = (0..n_phi).map(|j| TAU * j as f64 / n_phi as f64).collect();
    let rates: Vec<[f64; 2]> = grid
        .iter()
        .map(|&phi| kernel.density(Vector2::new(k_perp * phi.cos(), k_perp * phi.sin())))
        .collect();
    let mut pattern = kernel.pattern(Axis::PhiK, grid, rates, None);
    // the fringe factor does not vary along a ring
    pattern.max_oscillations = 0.0;
    Ok(pattern)
}

/// Rate per unit polar kick angle, summed over the whole detuning window: the detuning
/// scan re-parameterized by `θ_K = atan2(K_perp, K_z)`.
///
/// Without a longitudinal transfer every kick is at `θ_K = π/2`; with a single allowed
/// `K_perp` every kick has the same angle. Both cases return one grid point with unit
/// weight.
pub fn angular_distribution(
    b1: &BesselMode,
    b2: &BesselMode,
    model: &PwAmplitudeModel,
    n_theta: usize,
    opts: &ScanOptions,
) -> Result<FringePattern> {
    let kz = b1.kz + b2.kz;
    let single = |theta: f64, eps: f64| FringePattern {
        axis: Axis::ThetaK,
        grid: vec![theta],
        values: vec![1.0],
        envelope: None,
        phase: None,
        max_oscillations: 0.0,
        boundary_cutoff: eps,
        excluded_fraction: 0.0,
    };
    if b1.kappa == 0.0 || b2.kappa == 0.0 {
        let kp = b1.kappa + b2.kappa;
        if kp == 0.0 && kz == 0.0 {
            return Err(Error::NoSolution(
                "no transfer at all: the polar angle is undefined".into(),
            ));
        }
        return Ok(single(kp.atan2(kz), 0.0));
    }
    let kernel = Kernel::new(b1, b2, model, opts)?;
    if kz == 0.0 {
        return Ok(single(0.5 * std::f64::consts::PI, kernel.eps));
    }
    if n_theta < 2 {
        return Err(Error::InvalidArgument(
            "angular distribution needs at least 2 points".into(),
        ));
    }
    let (ta, tb) = (kernel.lo.atan2(kz), kernel.hi.atan2(kz));
    let grid = uniform_grid(ta.min(tb), ta.max(tb), n_theta);
    let rates = grid
        .par_iter()
        .map(|&theta| {
            let kp = (kz * theta.tan()).abs();
            let jac = kz.abs() / theta.cos().powi(2);
            let ring = kernel.ring(kp, opts.rel_tol)?;
            Ok(ring.map(|v| v * kp * jac))
        })
        .collect::<Result<Vec<_>>>()?;
    let phase = grid
        .iter()
        .map(|&theta| kernel.phase((kz * theta.tan()).abs()))
        .collect();
    Ok(kernel.pattern(Axis::ThetaK, grid, rates, Some(phase)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::twisted_amplitude;
    use crate::kinematics::{detuning_window_rest, triangle_geometry, TransferVector};
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use num_complex::Complex64;

    fn photons(k1: f64, k2: f64, m1: i32, m2: i32, kz: f64) -> (BesselMode, BesselMode) {
        (
            BesselMode::photon(0.5 * kz + 1.0, k1, m1).unwrap(),
            BesselMode::photon(0.5 * kz - 1.0, k2, m2).unwrap(),
        )
    }

    #[test]
    fn rest_rate_is_mass_times_ring_integral() {
        let (b1, b2) = photons(0.3, 0.5, 2, 1, 0.1);
        let mass = 1e9;
        let atom = AtomBeam::at_rest(mass, 1.0, Dispersion::NonRelativistic).unwrap();
        let model = PwAmplitudeModel::constant(1.0);
        let problem = ShellProblem::new(&b1, &b2, &atom, &model, &ScanOptions::default()).unwrap();
        let kp = 0.6;
        let delta = (kp * kp + 0.01) / (2.0 * mass);
        let rate = problem.rate(delta).unwrap();
        let j = twisted_amplitude(&b1, &b2, &TransferVector::new(kp, 0.0, 0.1).unwrap(), &model).unwrap();
        assert_relative_eq!(rate[0], mass * TAU * j.value.norm_sqr(), max_relative = 1e-10);
        let g = triangle_geometry(0.3, 0.5, kp).unwrap();
        assert_relative_eq!(
            rate[0] / rate[1],
            fringe_phase(2, 1, &g).cos().powi(2),
            max_relative = 1e-10
        );
    }

    #[test]
    fn small_offset_matches_rest_limit() {
        // a tiny transverse momentum moves the shell centre; the off-centre circle
        // integral must reduce to the concentric one
        let (b1, b2) = photons(0.3, 0.5, 1, 1, 0.0);
        let mass = 1e6;
        let model = PwAmplitudeModel::constant(1.0);
        let rest = AtomBeam::at_rest(mass, 1.0, Dispersion::NonRelativistic).unwrap();
        let moving = rest.with_momentum(Vector3::new(1e-7, 0.0, 0.0));
        let opts = ScanOptions::default();
        let p0 = ShellProblem::new(&b1, &b2, &rest, &model, &opts).unwrap();
        let p1 = ShellProblem::new(&b1, &b2, &moving, &model, &opts).unwrap();
        let delta = 0.45 / (2.0 * mass);
        let (r0, r1) = (p0.rate(delta).unwrap(), p1.rate(delta).unwrap());
        assert_relative_eq!(r0[0], r1[0], max_relative = 1e-4);
    }

    #[test]
    fn parameterizations_agree_at_the_switch() {
        // same kinematics evaluated just below and above the large-momentum switch
        let (b1, b2) = photons(0.1, 0.1, 2, 3, 0.0);
        let model = PwAmplitudeModel::constant(1.0);
        let mass = 1e3;
        let opts = ScanOptions::default();
        for p in [1.5999, 1.6001] {
            let atom = AtomBeam::new(mass, Vector3::new(p, 0.0, 0.0), 1.0, Dispersion::NonRelativistic).unwrap();
            let problem = ShellProblem::new(&b1, &b2, &atom, &model, &opts).unwrap();
            let ref_atom = AtomBeam::new(mass, Vector3::new(1.6, 0.0, 0.0), 1.0, Dispersion::NonRelativistic).unwrap();
            let reference = ShellProblem::new(&b1, &b2, &ref_atom, &model, &opts).unwrap();
            for delta in [-1e-4, 2e-5, 1.1e-4] {
                let a = problem.rate(delta).unwrap()[0];
                let b = reference.rate(delta).unwrap()[0];
                assert!((a - b).abs() <= 2e-3 * b.abs().max(1e-30), "{p} {delta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn crossed_total_rate_matches_area_integral() {
        // ∫ rate dδ = ∫ d²K |J|², independent of the atom momentum
        let (b1, b2) = photons(0.1, 0.1, 1, 2, 0.0);
        let model = PwAmplitudeModel::constant(1.0);
        let mass = 1e10;
        let atom = AtomBeam::crossed(mass, 0.5, 1.0, Dispersion::NonRelativistic).unwrap();
        let opts = ScanOptions::default();
        let grid = uniform_grid(-0.105, 0.105, 801);
        let pattern = crossed_beam_scan(&b1, &b2, &atom, &model, &grid, &opts).unwrap();
        let rest = AtomBeam::at_rest(mass, 1.0, Dispersion::NonRelativistic).unwrap();
        let problem = ShellProblem::new(&b1, &b2, &rest, &model, &opts).unwrap();
        let (lo, hi) = problem.trimmed();
        // area integral of |J|² in K_perp: ∫ K dK 2π |J(K)|²
        let area = integrate(
            |k| [k * problem.kernel.ring(k, 1e-9).unwrap()[0]],
            &uniform_breaks(lo, hi, 64),
            Adaptive::default(),
        )
        .unwrap()[0];
        assert_relative_eq!(pattern.integral(), area, max_relative = 2e-2);
    }

    #[test]
    fn crossed_support_is_doppler_window() {
        let (b1, b2) = photons(0.1, 0.1, 1, -1, 0.0);
        let model = PwAmplitudeModel::constant(1.0);
        let atom = AtomBeam::crossed(1e10, 0.5, 1.0, Dispersion::NonRelativistic).unwrap();
        let opts = ScanOptions::default();
        let grid = uniform_grid(-0.15, 0.15, 200);
        let pattern = crossed_beam_scan(&b1, &b2, &atom, &model, &grid, &opts).unwrap();
        let problem = ShellProblem::new(&b1, &b2, &atom, &model, &opts).unwrap();
        let w = refine_support(&problem, &pattern).unwrap().unwrap();
        assert!((w.max - 0.1).abs() < 1e-3 && (w.min + 0.1).abs() < 1e-3, "{w:?}");
        assert!(pattern
            .values
            .iter()
            .zip(&grid)
            .all(|(&v, &d)| d.abs() <= 0.1 || v == 0.0));
        assert!(crossed_beam_scan(&b1, &b1, &atom, &model, &grid, &opts).is_err());
    }

    #[test]
    fn rest_scan_vanishes_outside_window() {
        let (b1, b2) = photons(0.1, 0.1, 1, 1, 0.0);
        let mass = 1e10;
        let atom = AtomBeam::at_rest(mass, 1.0, Dispersion::NonRelativistic).unwrap();
        let w = detuning_window_rest(0.1, 0.1, 0.0, mass).unwrap();
        let grid = uniform_grid(-0.5 * w.max, 1.5 * w.max, 201);
        let pattern = detuning_scan(
            &b1,
            &b2,
            &atom,
            &PwAmplitudeModel::default(),
            &grid,
            &ScanOptions::default(),
        )
        .unwrap();
        for (&d, &v) in grid.iter().zip(&pattern.values) {
            if !(w.min..=w.max).contains(&d) {
                assert_eq!(v, 0.0);
            }
            assert!(v >= 0.0);
        }
        assert!(pattern.values.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn three_four_five_zero_in_scan() {
        let scale = 0.01;
        let (b1, b2) = photons(3.0 * scale, 4.0 * scale, 1, 1, 0.0);
        let mass = 1e9;
        let atom = AtomBeam::at_rest(mass, 1.0, Dispersion::NonRelativistic).unwrap();
        let delta = (5.0 * scale).powi(2) / (2.0 * mass);
        let p = detuning_scan(
            &b1,
            &b2,
            &atom,
            &PwAmplitudeModel::default(),
            &[delta],
            &ScanOptions::default(),
        )
        .unwrap();
        assert!(p.values[0] <= 1e-25 * p.envelope.as_ref().unwrap()[0]);
    }

    #[test]
    fn azimuthal_flatness_and_consistency() {
        let (b1, b2) = photons(0.4, 0.7, 3, -2, 0.0);
        let opts = ScanOptions::default();
        let constant = PwAmplitudeModel::constant(0.9);
        let p = azimuthal_distribution(&b1, &b2, &constant, 0.8, 360, &opts).unwrap();
        let v0 = p.values[0];
        assert!(p.values.iter().all(|&v| (v - v0).abs() <= 1e-12 * v0));
        let table = PwAmplitudeModel::Table(
            crate::amplitude::AmplitudeTable::new(
                vec![0.0, 2.0, 4.0],
                vec![
                    Complex64::new(1.0, 0.0),
                    Complex64::new(0.2, 0.5),
                    Complex64::new(-0.4, 0.1),
                ],
            )
            .unwrap(),
        );
        let n = 4096;
        let p = azimuthal_distribution(&b1, &b2, &table, 0.8, n, &opts).unwrap();
        let spread = p.values.iter().cloned().fold(0.0, f64::max) - p.values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 1e-3 * v0);
        let ring_sum: f64 = p.values.iter().sum::<f64>() * TAU / n as f64;
        let mass = 1e8;
        let atom = AtomBeam::at_rest(mass, 1.0, Dispersion::NonRelativistic).unwrap();
        let delta = 0.64 / (2.0 * mass);
        let scan = detuning_scan(&b1, &b2, &atom, &table, &[delta], &opts).unwrap();
        assert_relative_eq!(scan.values[0], mass * ring_sum, max_relative = 1e-4);
    }

    #[test]
    fn angular_examples() {
        let model = PwAmplitudeModel::default();
        let opts = ScanOptions::default();
        let (b1, b2) = photons(0.3, 0.3, 2, 2, 0.0);
        let p = angular_distribution(&b1, &b2, &model, 100, &opts).unwrap();
        assert_eq!(p.grid, vec![0.5 * std::f64::consts::PI]);
        let b0 = BesselMode::photon(-1.0, 0.0, 0).unwrap();
        let (b1, _) = photons(0.3, 0.3, 2, 2, 0.2);
        let p = angular_distribution(&b1, &b0, &model, 100, &opts).unwrap();
        assert_relative_eq!(p.grid[0], 0.3f64.atan2(b1.kz - 1.0), max_relative = 1e-14);
        // pointwise: value(θ) = rate(δ(θ)) |dδ/dθ|
        let (b1, b2) = photons(0.3, 0.4, 2, 1, 0.5);
        let kz = b1.kz + b2.kz;
        let p = angular_distribution(&b1, &b2, &model, 101, &opts).unwrap();
        let mass = 1e6;
        let atom = AtomBeam::at_rest(mass, 1.0, Dispersion::NonRelativistic).unwrap();
        let problem = ShellProblem::new(&b1, &b2, &atom, &model, &opts).unwrap();
        for (&theta, &v) in p.grid.iter().zip(&p.values).skip(1).step_by(7) {
            let k = kz * theta.tan();
            let delta = (k * k + kz * kz) / (2.0 * mass);
            let jac = k / mass * kz.abs() / theta.cos().powi(2);
            assert_relative_eq!(v, problem.rate(delta).unwrap()[0] * jac, max_relative = 1e-9);
        }
    }

    #[test]
    fn auto_grid_respects_phase_step() {
        let (b1, b2) = photons(0.2, 0.2, 10, 10, 0.1);
        let atom = AtomBeam::at_rest(1e9, 1.0, Dispersion::NonRelativistic).unwrap();
        let opts = ScanOptions::default();
        let grid = auto_detuning_grid(&b1, &b2, &atom, &opts, 0.1).unwrap();
        let p = detuning_scan(&b1, &b2, &atom, &PwAmplitudeModel::default(), &grid, &opts).unwrap();
        let ph = p.phase.unwrap();
        assert!(ph.windows(2).all(|w| (w[1] - w[0]).abs() <= 0.1 + 1e-12));
        assert!(p.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn relativistic_rest_matches_nonrelativistic_for_heavy_atom() {
        let (b1, b2) = photons(0.2, 0.3, 1, 2, 0.05);
        let model = PwAmplitudeModel::default();
        let mass = 1e10;
        let nr = AtomBeam::at_rest(mass, 1.0, Dispersion::NonRelativistic).unwrap();
        let rel = AtomBeam::at_rest(mass, 1.0, Dispersion::Relativistic).unwrap();
        let opts = ScanOptions::default();
        let delta = (0.09 + 0.0025) / (2.0 * mass);
        let a = ShellProblem::new(&b1, &b2, &nr, &model, &opts)
            .unwrap()
            .rate(delta)
            .unwrap();
        let b = ShellProblem::new(&b1, &b2, &rel, &model, &opts)
            .unwrap()
            .rate(delta)
            .unwrap();
        assert_relative_eq!(a[0], b[0], max_relative = 1e-6);
    }
}
