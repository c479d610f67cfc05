//! Quadrature rules shared by the scans, the oracle and the smearing code.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

const GL_ORDER: usize = 10;

fn legendre_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(GL_ORDER).unwrap())
            .as_node_weight_pairs()
            .to_vec()
    })
}

/// Probabilists' Gauss–Hermite rule for a standard normal variable: nodes `z_i` and
/// weights summing to one, so that `E[f(Z)] ≈ Σ w_i f(z_i)`. Nodes are returned in
/// increasing order.
pub fn normal_rule(n: usize) -> Result<Vec<(f64, f64)>> {
    let n = NonZeroUsize::new(n).ok_or_else(|| Error::InvalidArgument("quadrature order must be positive".into()))?;
    if n.get() == 1 {
        return Ok(vec![(0.0, 1.0)]);
    }
    let rule = GaussHermite::new(n);
    let norm = std::f64::consts::PI.sqrt();
    let mut out: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x * std::f64::consts::SQRT_2, w / norm))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Adaptive {
    pub rel_tol: f64,
    /// Absolute floor on the error target, per component.
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Adaptive {
            rel_tol: 1e-6,
            abs_tol: 0.0,
            max_intervals: 4000,
        }
    }
}

struct Piece<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
}

fn gl<const N: usize>(f: &impl Fn(f64) -> [f64; N], a: f64, b: f64) -> [f64; N] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = [0.0; N];
    for &(x, w) in legendre_rule() {
        let v = f(mid + half * x);
        for c in 0..N {
            acc[c] += w * v[c];
        }
    }
    acc.map(|s| s * half)
}

fn piece<const N: usize>(f: &impl Fn(f64) -> [f64; N], a: f64, b: f64) -> Piece<N> {
    let m = 0.5 * (a + b);
    let whole = gl(f, a, b);
    let left = gl(f, a, m);
    let right = gl(f, m, b);
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for c in 0..N {
        value[c] = left[c] + right[c];
        error[c] = (value[c] - whole[c]).abs();
    }
    Piece { a, b, value, error }
}

/// Globally adaptive Gauss–Legendre integration of a vector-valued integrand over
/// the union of the intervals between consecutive `breaks`.
///
/// The interval with the largest weighted error estimate is bisected until every
/// component meets `rel_tol·|total| + abs_tol`. The order of operations does not
/// depend on thread scheduling, so results are reproducible bit for bit.
pub fn integrate<const N: usize>(f: impl Fn(f64) -> [f64; N], breaks: &[f64], opts: Adaptive) -> Result<[f64; N]> {
    let mut pieces: Vec<Piece<N>> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| piece(&f, w[0], w[1]))
        .collect();
    if pieces.is_empty() {
        return Ok([0.0; N]);
    }
    loop {
        let mut total = [0.0; N];
        let mut err = [0.0; N];
        for p in &pieces {
            for c in 0..N {
                total[c] += p.value[c];
                err[c] += p.error[c];
            }
        }
        let target: [f64; N] = std::array::from_fn(|c| opts.rel_tol * total[c].abs() + opts.abs_tol);
        if (0..N).all(|c| err[c] <= target[c]) {
            return Ok(total);
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::NonConvergent(format!(
                "adaptive quadrature stopped at {} intervals with error {:e} against target {:e}",
                pieces.len(),
                err[0],
                target[0]
            )));
        }
        let weight: [f64; N] = std::array::from_fn(|c| 1.0 / target[c].max(f64::MIN_POSITIVE));
        let score = |p: &Piece<N>| (0..N).map(|c| p.error[c] * weight[c]).fold(0.0, f64::max);
        let (worst, _) = pieces.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, p)| {
            let s = score(p);
            if s > best.1 {
                (i, s)
            } else {
                best
            }
        });
        let p = pieces.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            return Err(Error::NonConvergent(format!(
                "adaptive quadrature exhausted floating-point resolution near {:e}",
                p.a
            )));
        }
        pieces.push(piece(&f, p.a, m));
        pieces.push(piece(&f, m, p.b));
    }
}

/// `n + 1` equally spaced break points on `[a, b]`.
pub fn uniform_breaks(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn smooth_and_log_singular() {
        let r = integrate(|x| [x.sin(), x * x], &[0.0, std::f64::consts::PI], Adaptive::default()).unwrap();
        assert_relative_eq!(r[0], 2.0, max_relative = 1e-9);
        assert_relative_eq!(r[1], std::f64::consts::PI.powi(3) / 3.0, max_relative = 1e-12);
        // integrable endpoint singularity 1/sqrt(x)
        let r = integrate(|x| [1.0 / x.sqrt()], &[0.0, 1.0], Adaptive::default()).unwrap();
        assert_relative_eq!(r[0], 2.0, max_relative = 1e-5);
    }

    #[test]
    fn near_singular_with_cutoff() {
        let eps = 1e-8;
        let r = integrate(|x| [1.0 / x], &[eps, 1.0], Adaptive::default()).unwrap();
        assert_relative_eq!(r[0], -eps.ln(), max_relative = 1e-6);
    }

    #[test]
    fn normal_rule_moments() {
        let rule = normal_rule(12).unwrap();
        let m = |k: i32| rule.iter().map(|&(z, w)| w * z.powi(k)).sum::<f64>();
        assert_relative_eq!(m(0), 1.0, max_relative = 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert_relative_eq!(m(2), 1.0, max_relative = 1e-12);
        assert_relative_eq!(m(4), 3.0, max_relative = 1e-12);
        assert_eq!(normal_rule(1).unwrap(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn empty_range() {
        assert_eq!(integrate(|_| [1.0], &[1.0, 1.0], Adaptive::default()).unwrap(), [0.0]);
    }
}
