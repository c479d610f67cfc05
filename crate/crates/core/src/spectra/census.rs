//! Fringe census: maxima, interleaved minima and the contrast of each fringe.
//!
//! The census works on the pattern divided by its envelope when one is available, so
//! that the steep boundary enhancement does not hide shallow fringes.

use std::f64::consts::PI;

use super::FringePattern;
use crate::error::{Error, Result};

/// Contrast above which a minimum counts as a dark fringe (an interior zero).
pub const DARK_CONTRAST: f64 = 0.99;
/// Largest fringe-phase step between neighbours, an eighth of one `cos²` period.
const MAX_PHASE_STEP: f64 = PI / 8.0;
/// Relative hysteresis suppressing rounding-level wiggles.
const HYSTERESIS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub index: usize,
    /// Axis position, refined by a parabola through the neighbours for interior points.
    pub position: f64,
    /// Normalized value.
    pub value: f64,
}

/// One interior minimum with its neighbouring lobes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fringe {
    pub position: f64,
    /// Normalized value at the minimum.
    pub depth: f64,
    /// Lower of the two neighbouring maxima.
    pub height: f64,
    /// Michelson contrast `(height - depth)/(height + depth)`.
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Census {
    pub maxima: Vec<Extremum>,
    pub minima: Vec<Extremum>,
    pub fringes: Vec<Fringe>,
}

impl Census {
    /// Number of minima deep enough to be zeros of the fringe factor.
    pub fn dark_count(&self, min_contrast: f64) -> usize {
        self.fringes.iter().filter(|f| f.contrast >= min_contrast).count()
    }

    /// Contrast of the deepest interior fringe.
    pub fn visibility(&self) -> Result<f64> {
        self.fringes
            .iter()
            .map(|f| f.contrast)
            .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))))
            .ok_or(Error::NoFringe)
    }
}

/// Index ranges `[start, end]` carrying signal.
fn support_runs(pattern: &FringePattern) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    match &pattern.envelope {
        Some(env) => {
            let mut start = None;
            for (i, &e) in env.iter().enumerate() {
                match (e > 0.0, start) {
                    (true, None) => start = Some(i),
                    (false, Some(s)) => {
                        runs.push((s, i - 1));
                        start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = start {
                runs.push((s, env.len() - 1));
            }
        }
        None => {
            let first = pattern.values.iter().position(|&v| v > 0.0);
            let last = pattern.values.iter().rposition(|&v| v > 0.0);
            if let (Some(a), Some(b)) = (first, last) {
                runs.push((a, b));
            }
        }
    }
    runs
}

fn check_sampling(pattern: &FringePattern, runs: &[(usize, usize)]) -> Result<()> {
    if let Some(phase) = &pattern.phase {
        let mut worst: f64 = 0.0;
        for &(s, e) in runs {
            for w in phase[s..=e].windows(2) {
                if w[0].is_finite() && w[1].is_finite() {
                    worst = worst.max((w[1] - w[0]).abs());
                }
            }
        }
        if worst > MAX_PHASE_STEP {
            return Err(Error::Undersampled {
                max_step: worst,
                limit: MAX_PHASE_STEP,
            });
        }
        return Ok(());
    }
    // without a phase, require eight points per possible oscillation
    let points: usize = runs.iter().map(|&(s, e)| e - s + 1).sum();
    let needed = 8.0 * pattern.max_oscillations;
    if (points as f64) < needed {
        return Err(Error::Undersampled {
            max_step: PI * pattern.max_oscillations / points.max(1) as f64,
            limit: MAX_PHASE_STEP,
        });
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Max,
    Min,
}

/// Alternating extrema of `y[s..=e]`, run edges included.
fn extrema(y: &[f64], s: usize, e: usize) -> Vec<(Kind, usize)> {
    let peak = y[s..=e].iter().cloned().fold(0.0, f64::max);
    let tol = HYSTERESIS * peak;
    let mut out = Vec::new();
    let (mut hi, mut lo) = (s, s);
    let mut mode: Option<Kind> = None;
    for i in s + 1..=e {
        match mode {
            None => {
                if y[i] > y[hi] {
                    hi = i;
                }
                if y[i] < y[lo] {
                    lo = i;
                }
                if y[i] > y[lo] + tol {
                    out.push((Kind::Min, lo));
                    mode = Some(Kind::Max);
                    hi = i;
                } else if y[i] < y[hi] - tol {
                    out.push((Kind::Max, hi));
                    mode = Some(Kind::Min);
                    lo = i;
                }
            }
            Some(Kind::Max) => {
                if y[i] > y[hi] {
                    hi = i;
                } else if y[i] < y[hi] - tol {
                    out.push((Kind::Max, hi));
                    mode = Some(Kind::Min);
                    lo = i;
                }
            }
            Some(Kind::Min) => {
                if y[i] < y[lo] {
                    lo = i;
                } else if y[i] > y[lo] + tol {
                    out.push((Kind::Min, lo));
                    mode = Some(Kind::Max);
                    hi = i;
                }
            }
        }
    }
    match mode {
        Some(Kind::Max) => out.push((Kind::Max, hi)),
        Some(Kind::Min) => out.push((Kind::Min, lo)),
        None => out.push((Kind::Max, hi)),
    }
    out
}

/// Vertex of the parabola through three points, if it opens in the expected direction.
fn parabola(x: [f64; 3], y: [f64; 3], minimum: bool) -> Option<(f64, f64)> {
    // y(x) = y0 + d01 (x - x0) + a (x - x0)(x - x1)
    let d01 = (y[1] - y[0]) / (x[1] - x[0]);
    let d12 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d12 - d01) / (x[2] - x[0]);
    if (minimum && a <= 0.0) || (!minimum && a >= 0.0) {
        return None;
    }
    let xv = 0.5 * (x[0] + x[1]) - d01 / (2.0 * a);
    if !(xv >= x[0] && xv <= x[2]) {
        return None;
    }
    Some((xv, y[0] + d01 * (xv - x[0]) + a * (xv - x[0]) * (xv - x[1])))
}

fn refine(grid: &[f64], y: &[f64], i: usize, s: usize, e: usize, minimum: bool) -> (f64, f64) {
    if i > s && i < e {
        if let Some((xv, yv)) = parabola([grid[i - 1], grid[i], grid[i + 1]], [y[i - 1], y[i], y[i + 1]], minimum) {
            let yv = if minimum { yv.clamp(0.0, y[i]) } else { yv.max(y[i]) };
            return (xv, yv);
        }
    }
    (grid[i], y[i])
}

/// Maxima, interior minima and per-fringe contrast.
pub fn fringe_census(pattern: &FringePattern) -> Result<Census> {
    let n = pattern.grid.len();
    if pattern.values.len() != n || pattern.envelope.as_ref().is_some_and(|e| e.len() != n) {
        return Err(Error::InvalidArgument("pattern columns differ in length".into()));
    }
    let runs = support_runs(pattern);
    check_sampling(pattern, &runs)?;
    let y = pattern.normalized();
    let mut census = Census::default();
    for (s, e) in runs {
        let ext = extrema(&y, s, e);
        let point = |i: usize, minimum: bool| {
            let (position, value) = refine(&pattern.grid, &y, i, s, e, minimum);
            Extremum {
                index: i,
                position,
                value,
            }
        };
        for (k, &(kind, i)) in ext.iter().enumerate() {
            match kind {
                Kind::Max => census.maxima.push(point(i, false)),
                Kind::Min => {
                    let m = point(i, true);
                    census.minima.push(m);
                    let interior = k > 0 && k + 1 < ext.len();
                    if interior {
                        let height = y[ext[k - 1].1].min(y[ext[k + 1].1]);
                        if height + m.value > 0.0 {
                            census.fringes.push(Fringe {
                                position: m.position,
                                depth: m.value,
                                height,
                                contrast: (height - m.value) / (height + m.value),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(census)
}

/// Michelson contrast of the deepest interior fringe.
pub fn visibility(pattern: &FringePattern) -> Result<f64> {
    fringe_census(pattern)?.visibility()
}
