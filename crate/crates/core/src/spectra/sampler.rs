//! Rejection sampler for the kick `K_perp`.
//!
//! With `u = K_perp²` the density `d²K |J|²` is `½ du dφ · 4κ1²κ2²|bracket|²/((u-a)(b-u))`,
//! `a = (κ1-κ2)²`, `b = (κ1+κ2)²`. The factor `1/((u-a)(b-u))` is drawn exactly through
//! `L = ln((u-a)/(b-u))`, which is uniform under it, and the bracket is accepted
//! against its bound.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{excluded_fraction, ScanOptions};
use crate::amplitude::{bracket, PwAmplitudeModel};
use crate::error::{Error, Result};
use crate::kinematics::{
    annulus, detuning_from_vector, triangle_geometry_with_eps, AtomBeam, BesselMode, TransferVector,
};

/// Accepted events per random-number substream.
pub const CHUNK_EVENTS: usize = 65_536;
const LOW_ACCEPTANCE: f64 = 1e-4;
const MAX_BLIND_PROPOSALS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickEvent {
    pub k: TransferVector,
    /// Detuning at which this kick is on shell.
    pub delta: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KickSample {
    pub events: Vec<KickEvent>,
    /// Accepted over proposed.
    pub acceptance: f64,
    pub boundary_cutoff: f64,
    pub excluded_fraction: f64,
}

struct Proposal {
    a: f64,
    b: f64,
    l_lo: f64,
    l_hi: f64,
}

impl Proposal {
    fn u(&self, l: f64) -> f64 {
        // u = (a + b e^L)/(1 + e^L), written to stay finite for large |L|
        if l > 0.0 {
            let e = (-l).exp();
            (self.a * e + self.b) / (1.0 + e)
        } else {
            let e = l.exp();
            (self.a + self.b * e) / (1.0 + e)
        }
    }
}

pub fn sample_kicks(
    b1: &BesselMode,
    b2: &BesselMode,
    atom: &AtomBeam,
    model: &PwAmplitudeModel,
    n: usize,
    seed: u64,
    opts: &ScanOptions,
) -> Result<KickSample> {
    if !(b1.kappa > 0.0 && b2.kappa > 0.0) {
        return Err(Error::InvalidArgument(
            "sampling needs two non-zero cone openings".into(),
        ));
    }
    model.validate()?;
    atom.validate()?;
    let eps = opts.cutoff(b1.kappa, b2.kappa);
    let (lo, hi) = annulus(b1.kappa, b2.kappa);
    let (k_lo, k_hi) = (lo + eps, hi - eps);
    if !(eps >= 0.0) || k_lo >= hi - eps {
        return Err(Error::InvalidArgument(format!(
            "boundary cutoff {eps:e} eV removes the whole annulus"
        )));
    }
    let bound = model.bound();
    if !(bound > 0.0) {
        return Err(Error::InvalidArgument("amplitude model vanishes identically".into()));
    }
    let (a, b) = (lo * lo, hi * hi);
    let logit = |u: f64| ((u - a) / (b - u)).ln();
    let prop = Proposal {
        a,
        b,
        l_lo: logit(k_lo * k_lo),
        l_hi: logit(k_hi * k_hi),
    };
    let kz = b1.kz + b2.kz;
    let chunks = n.div_ceil(CHUNK_EVENTS);
    let results: Vec<Result<(Vec<KickEvent>, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let quota = CHUNK_EVENTS.min(n - c * CHUNK_EVENTS);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut events = Vec::with_capacity(quota);
            let mut proposed = 0u64;
            while events.len() < quota {
                proposed += 1;
                let l = prop.l_lo + (prop.l_hi - prop.l_lo) * rng.random::<f64>();
                let phi = TAU * rng.random::<f64>();
                let accept: f64 = rng.random();
                let kp = prop.u(l).sqrt().clamp(k_lo, k_hi);
                let geom = triangle_geometry_with_eps(b1.kappa, b2.kappa, kp, 0.0)?;
                let br = bracket(model, b1.m, b2.m, &geom, phi);
                if accept * bound * bound < br.value.norm_sqr() {
                    let k = TransferVector::new(kp, phi, kz)?;
                    events.push(KickEvent {
                        k,
                        delta: detuning_from_vector(atom, &Vector3::new(kp * phi.cos(), kp * phi.sin(), kz)),
                        weight: 1.0,
                    });
                }
                if events.is_empty() && proposed > MAX_BLIND_PROPOSALS {
                    return Err(Error::NonConvergent(format!(
                        "no event accepted after {proposed} proposals"
                    )));
                }
            }
            Ok((events, proposed))
        })
        .collect();
    let mut events = Vec::with_capacity(n);
    let mut proposed = 0u64;
    for r in results {
        let (e, p) = r?;
        events.extend(e);
        proposed += p;
    }
    let acceptance = if proposed > 0 { n as f64 / proposed as f64 } else { 1.0 };
    if acceptance < LOW_ACCEPTANCE {
        log::warn!("kick sampling acceptance {acceptance:e} is below {LOW_ACCEPTANCE:e}");
    }
    Ok(KickSample {
        events,
        acceptance,
        boundary_cutoff: eps,
        excluded_fraction: excluded_fraction(b1.kappa, b2.kappa, eps),
    })
}
