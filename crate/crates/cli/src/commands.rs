//! One function per subcommand. Each returns its tables, a JSON summary and the lines
//! printed to stdout; nothing here touches the filesystem except measurement input.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};
use twisted_absorption::amplitude::{fringe_function, fringe_phase};
use twisted_absorption::kinematics::{
    annulus, detuning_from_transfer, detuning_window_crossed, detuning_window_exact, detuning_window_rest,
    triangle_geometry, Window,
};
use twisted_absorption::lineshape::{
    centered_grid, forward_pattern, invert_lineshape, LineModel, MeasurementSet, ReconstructionConfig,
};
use twisted_absorption::oracle::{convergence_study, RingRegularization};
use twisted_absorption::smearing::{smear, tolerable_spread, visibility_curve, MomentumSpread};
use twisted_absorption::spectra::{
    angular_distribution, auto_detuning_grid, azimuthal_distribution, crossed_beam_scan, detuning_scan, fringe_census,
    refine_support, sample_kicks, uniform_grid, visibility, Axis, FringePattern, ShellProblem, DARK_CONTRAST,
};
use twisted_absorption::{twisted_amplitude, Error as CoreError, TransferVector};

use crate::config::{MeasuredAxis, Resolved};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_ev, Cell, Table};

pub const SUBCOMMANDS: [&str; 11] = [
    "geometry",
    "window",
    "fringes",
    "angular",
    "azimuthal",
    "crossed",
    "events",
    "oracle",
    "lineshape-forward",
    "lineshape-invert",
    "smear",
];

pub struct Outcome {
    pub tables: Vec<Table>,
    pub summary: Value,
    pub stdout: Vec<String>,
}

pub fn run(name: &str, r: &Resolved) -> CliResult<Outcome> {
    match name {
        "geometry" => geometry(r),
        "window" => window(r),
        "fringes" => fringes(r),
        "angular" => angular(r),
        "azimuthal" => azimuthal(r),
        "crossed" => crossed(r),
        "events" => events(r),
        "oracle" => oracle(r),
        "lineshape-forward" => lineshape_forward(r),
        "lineshape-invert" => lineshape_invert(r),
        "smear" => smear_cmd(r),
        other => Err(CliError::schema("subcommand", format!("unknown subcommand `{other}`"))),
    }
}

fn interval(w: &Window) -> String {
    format!("[{}, {}] eV", fmt_ev(w.min), fmt_ev(w.max))
}

/// The full reachable detuning range.
fn exact_window(r: &Resolved) -> Window {
    let (lo, hi) = annulus(r.b1.kappa, r.b2.kappa);
    detuning_window_exact(&r.atom, r.kz(), lo, hi)
}

/// Configured detuning grid, or the exact window widened by `pad` of its width.
fn detuning_grid(r: &Resolved, pad: f64) -> CliResult<Vec<f64>> {
    let s = &r.config.scan;
    if let (Some(a), Some(b)) = (s.min, s.max) {
        return Ok(uniform_grid(a, b, s.points));
    }
    if let Some(step) = s.max_phase_step {
        if r.atom.p.norm() == 0.0 {
            return Ok(auto_detuning_grid(&r.b1, &r.b2, &r.atom, &r.opts, step)?);
        }
        log::warn!(
            "scan.max_phase_step applies to atoms at rest; using {} uniform points",
            s.points
        );
    }
    let w = exact_window(r);
    let d = pad * w.width();
    Ok(uniform_grid(w.min - d, w.max + d, s.points))
}

fn pattern_table(name: &str, p: &FringePattern) -> Table {
    let x = p.axis.label();
    let mut t = Table::new(name, &[x, "rate", "envelope", "fringe_factor"]).plotted();
    let env = p.envelope.clone().unwrap_or_else(|| vec![f64::NAN; p.len()]);
    let norm = p.normalized();
    for i in 0..p.len() {
        t.push(vec![
            p.grid[i].into(),
            p.values[i].into(),
            env[i].into(),
            norm[i].into(),
        ]);
    }
    t
}

fn pattern_summary(p: &FringePattern) -> Value {
    json!({
        "axis": p.axis.label(),
        "points": p.len(),
        "integral": p.integral(),
        "boundary_cutoff_ev": p.boundary_cutoff,
        "excluded_fraction": p.excluded_fraction,
    })
}

fn geometry(r: &Resolved) -> CliResult<Outcome> {
    let (k1, k2) = (r.b1.kappa, r.b2.kappa);
    let (lo, hi) = annulus(k1, k2);
    let eps = r.eps();
    let s = &r.config.scan;
    let kps = uniform_grid(lo + eps, hi - eps, s.points);
    let mut t = Table::new(
        "geometry",
        &[
            "k_perp_ev",
            "area_ev2",
            "delta1_rad",
            "delta2_rad",
            "fringe_phase_rad",
            "fringe_factor",
            "detuning_ev",
            "j_re",
            "j_im",
            "j_abs",
        ],
    )
    .plotted();
    for &kp in &kps {
        let g = triangle_geometry(k1, k2, kp)?;
        let k = TransferVector::new(kp, s.phi_k, r.kz())?;
        let j = twisted_amplitude(&r.b1, &r.b2, &k, &r.config.amplitude)?.value;
        t.push(vec![
            kp.into(),
            g.area.into(),
            g.delta1.into(),
            g.delta2.into(),
            fringe_phase(r.b1.m, r.b2.m, &g).into(),
            fringe_function(r.b1.m, r.b2.m, &g).into(),
            detuning_from_transfer(&r.atom, &k).into(),
            j.re.into(),
            j.im.into(),
            j.norm().into(),
        ]);
    }
    let stdout = vec![format!("annulus: [{}, {}] eV", fmt_ev(lo), fmt_ev(hi))];
    let summary = json!({ "annulus_ev": [lo, hi], "points": kps.len(), "phi_k_rad": s.phi_k });
    Ok(Outcome {
        tables: vec![t],
        summary,
        stdout,
    })
}

fn window(r: &Resolved) -> CliResult<Outcome> {
    let (k1, k2) = (r.b1.kappa, r.b2.kappa);
    let exact = exact_window(r);
    let p = r.atom.p;
    let p_perp = r.atom.transverse_momentum().norm();
    let mut rows = Vec::new();
    if p.norm() == 0.0 {
        rows.push(("rest", detuning_window_rest(k1, k2, r.kz(), r.atom.mass_i)?));
    } else if p_perp > 0.0 && p.z == 0.0 && r.kz().abs() <= 1e-9 * (k1 + k2) {
        rows.push(("crossed", detuning_window_crossed(k1, k2, r.atom.beta())?));
    }
    rows.push(("exact", exact));
    let mut t = Table::new("window", &["kind", "min_ev", "max_ev"]);
    let mut stdout = Vec::new();
    let mut summary = serde_json::Map::new();
    for (kind, w) in &rows {
        t.push(vec![Cell::Text(kind.to_string()), w.min.into(), w.max.into()]);
        stdout.push(format!("{kind}: {}", interval(w)));
        summary.insert(kind.to_string(), json!({ "min_ev": w.min, "max_ev": w.max }));
    }
    Ok(Outcome {
        tables: vec![t],
        summary: Value::Object(summary),
        stdout,
    })
}

fn fringes(r: &Resolved) -> CliResult<Outcome> {
    let grid = detuning_grid(r, 0.0)?;
    let p = detuning_scan(&r.b1, &r.b2, &r.atom, &r.config.amplitude, &grid, &r.opts)?;
    let census = fringe_census(&p)?;
    let mut f = Table::new("fringes", &["position_ev", "depth", "height", "contrast"]);
    for fr in &census.fringes {
        f.push(vec![
            fr.position.into(),
            fr.depth.into(),
            fr.height.into(),
            fr.contrast.into(),
        ]);
    }
    let vis = census.visibility().ok();
    let dark = census.dark_count(DARK_CONTRAST);
    let mut summary = pattern_summary(&p);
    summary["fringes"] = json!(census.fringes.len());
    summary["dark_fringes"] = json!(dark);
    summary["maxima"] = json!(census.maxima.len());
    summary["visibility"] = json!(vis);
    let stdout = vec![format!(
        "{} fringes ({dark} dark), visibility {}",
        census.fringes.len(),
        vis.map_or("n/a".to_string(), |v| format!("{v:.6}"))
    )];
    Ok(Outcome {
        tables: vec![pattern_table("pattern", &p), f],
        summary,
        stdout,
    })
}

fn angular(r: &Resolved) -> CliResult<Outcome> {
    if r.atom.p.norm() > 0.0 {
        log::warn!("angular distribution assumes an atom at rest; the configured momentum is ignored");
    }
    let p = angular_distribution(&r.b1, &r.b2, &r.config.amplitude, r.config.scan.n_theta, &r.opts)?;
    let summary = pattern_summary(&p);
    Ok(Outcome {
        tables: vec![pattern_table("angular", &p)],
        summary,
        stdout: vec![],
    })
}

fn azimuthal(r: &Resolved) -> CliResult<Outcome> {
    let kp = r.config.scan.k_perp.expect("resolved");
    let p = azimuthal_distribution(&r.b1, &r.b2, &r.config.amplitude, kp, r.config.scan.n_phi, &r.opts)?;
    let (mn, mx) = p
        .values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let flatness = if mx > 0.0 { (mx - mn) / mx } else { 0.0 };
    let mut summary = pattern_summary(&p);
    summary["k_perp_ev"] = json!(kp);
    summary["relative_spread"] = json!(flatness);
    Ok(Outcome {
        tables: vec![pattern_table("azimuthal", &p)],
        summary,
        stdout: vec![format!("relative spread over phi_K: {flatness:e}")],
    })
}

fn crossed(r: &Resolved) -> CliResult<Outcome> {
    let grid = detuning_grid(r, 0.02)?;
    let model = &r.config.amplitude;
    let p = crossed_beam_scan(&r.b1, &r.b2, &r.atom, model, &grid, &r.opts)?;
    let problem = ShellProblem::new(&r.b1, &r.b2, &r.atom, model, &r.opts)?;
    let support = refine_support(&problem, &p)?;
    let mut summary = pattern_summary(&p);
    let mut stdout = Vec::new();
    let (k1, k2) = (r.b1.kappa, r.b2.kappa);
    if let Ok(w) = detuning_window_crossed(k1, k2, r.atom.beta()) {
        summary["crossed_window_ev"] = json!([w.min, w.max]);
        stdout.push(format!("crossed window: {}", interval(&w)));
    }
    match support {
        Some(s) => {
            summary["support_ev"] = json!([s.min, s.max]);
            stdout.push(format!("support: {}", interval(&s)));
        }
        None => {
            summary["support_ev"] = Value::Null;
            stdout.push("support: empty".into());
        }
    }
    Ok(Outcome {
        tables: vec![pattern_table("crossed", &p)],
        summary,
        stdout,
    })
}

fn events(r: &Resolved) -> CliResult<Outcome> {
    let n = r.config.events.count;
    let s = sample_kicks(&r.b1, &r.b2, &r.atom, &r.config.amplitude, n, r.config.seed, &r.opts)?;
    let mut t = Table::new("events", &["k_perp_ev", "phi_k_rad", "kz_ev", "delta_ev", "weight"]);
    for e in &s.events {
        t.push(vec![
            e.k.k_perp.into(),
            e.k.phi_k.into(),
            e.k.kz.into(),
            e.delta.into(),
            e.weight.into(),
        ]);
    }
    let summary = json!({
        "events": s.events.len(),
        "acceptance": s.acceptance,
        "boundary_cutoff_ev": s.boundary_cutoff,
        "excluded_fraction": s.excluded_fraction,
    });
    Ok(Outcome {
        tables: vec![t],
        summary,
        stdout: vec![format!("{} events, acceptance {:.4}", s.events.len(), s.acceptance)],
    })
}

fn oracle(r: &Resolved) -> CliResult<Outcome> {
    let o = &r.config.oracle;
    let k = TransferVector::new(o.k_perp.expect("resolved"), o.phi_k, r.kz())?;
    let reg = RingRegularization::with_sigma(r.config.regularization.ring_sigma.expect("resolved"))?;
    let study = convergence_study(&r.b1, &r.b2, &k, &r.config.amplitude, &reg, o.levels, o.tolerance)?;
    let mut t = Table::new(
        "oracle",
        &["sigma_ev", "j_numeric_abs", "j_analytic_abs", "ratio", "phase_diff_rad"],
    );
    let mut stdout = vec![format!(
        "{:>12} {:>14} {:>14} {:>10}",
        "sigma", "|J_num|", "|J_analytic|", "ratio"
    )];
    for row in &study.rows {
        t.push(vec![
            row.sigma.into(),
            row.numeric.norm().into(),
            row.analytic.norm().into(),
            row.ratio.into(),
            row.phase_diff.into(),
        ]);
        stdout.push(format!(
            "{:>12.4e} {:>14.6e} {:>14.6e} {:>10.6}",
            row.sigma,
            row.numeric.norm(),
            row.analytic.norm(),
            row.ratio
        ));
    }
    let last = study.last();
    let summary = json!({
        "k_perp_ev": k.k_perp,
        "phi_k_rad": k.phi_k,
        "scale": study.scale,
        "final_ratio": last.ratio,
        "final_phase_diff_rad": last.phase_diff,
        "observed_order": study.observed_order,
    });
    Ok(Outcome {
        tables: vec![t],
        summary,
        stdout,
    })
}

fn line_model(r: &Resolved) -> LineModel {
    LineModel {
        atom: r.atom,
        amplitude: r.config.amplitude.clone(),
        scan: r.opts,
    }
}

fn profile_grid(r: &Resolved) -> Vec<f64> {
    let g = &r.config.lineshape.grid;
    centered_grid(g.points, g.step.expect("resolved"))
}

fn setting_name(m: [i32; 2]) -> String {
    format!("forward_m{}_{}", m[0], m[1])
}

fn lineshape_forward(r: &Resolved) -> CliResult<Outcome> {
    let l = &r.config.lineshape;
    let egrid = profile_grid(r);
    let profile = l.profile.build(egrid.clone())?;
    let x = match (r.config.scan.min, r.config.scan.max) {
        (Some(a), Some(b)) => uniform_grid(a, b, r.config.scan.points),
        _ => {
            let w = exact_window(r);
            let half = 0.5 * (egrid[egrid.len() - 1] - egrid[0]) + 5.0 * profile.step();
            uniform_grid(w.min - half, w.max + half, r.config.scan.points)
        }
    };
    let line = line_model(r);
    let mut rng = ChaCha8Rng::seed_from_u64(r.config.seed);
    let mut tables = Vec::new();
    let mut files = Vec::new();
    for &m in &l.settings {
        let p = forward_pattern(&profile, &r.b1.with_m(m[0]), &r.b2.with_m(m[1]), &line, &x)?;
        let peak = p.values.iter().cloned().fold(0.0, f64::max);
        let sd = l.noise * peak;
        let noise = Normal::new(0.0, sd.max(f64::MIN_POSITIVE)).map_err(|e| CliError::Io(e.to_string()))?;
        let mut t = Table::new(setting_name(m), &["axis_value", "rate", "sigma"]).plotted();
        for (i, &xv) in p.grid.iter().enumerate() {
            let v = if sd > 0.0 {
                p.values[i] + noise.sample(&mut rng)
            } else {
                p.values[i]
            };
            t.push(vec![xv.into(), v.into(), sd.into()]);
        }
        files.push(t.name.clone());
        tables.push(t);
    }
    let mut t = Table::new("profile_true", &["energy_offset_ev", "weight"]).plotted();
    for (e, w) in profile.grid.iter().zip(&profile.weights) {
        t.push(vec![(*e).into(), (*w).into()]);
    }
    tables.push(t);
    let summary = json!({
        "settings": l.settings,
        "patterns": files,
        "profile_step_ev": profile.step(),
        "noise": l.noise,
        "points": x.len(),
    });
    Ok(Outcome {
        tables,
        summary,
        stdout: vec![format!("{} settings forward-modelled", l.settings.len())],
    })
}

/// Reads a measured pattern with columns `axis_value,rate,sigma`.
pub fn read_measurement(path: &Path) -> CliResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut rd = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["axis_value", "rate", "sigma"] {
        return Err(CliError::Io(format!(
            "{}: expected columns axis_value,rate,sigma, found {}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> CliResult<f64> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|e| CliError::Io(format!("{} row {}: {e}", path.display(), i + 2)))
        };
        x.push(num(0)?);
        y.push(num(1)?);
        s.push(num(2)?);
    }
    Ok((x, y, s))
}

fn lineshape_invert(r: &Resolved) -> CliResult<Outcome> {
    let l = &r.config.lineshape;
    if l.measurements.is_empty() {
        return Err(CliError::schema(
            "lineshape.measurements",
            "no measured patterns configured",
        ));
    }
    let cutoff = r.eps();
    let mut settings = Vec::new();
    let mut patterns = Vec::new();
    let mut sigma = Vec::new();
    for m in &l.measurements {
        let path = r.base_dir.join(&m.path);
        let (x, y, s) = read_measurement(&path)?;
        let b1 = r.b1.with_m(m.m1);
        let b2 = r.b2.with_m(m.m2);
        settings.push((b1, b2));
        patterns.push(FringePattern {
            axis: match m.axis {
                MeasuredAxis::Detuning => Axis::Detuning,
                MeasuredAxis::ThetaK => Axis::ThetaK,
            },
            grid: x,
            values: y,
            envelope: None,
            phase: None,
            max_oscillations: (m.m1.unsigned_abs() + m.m2.unsigned_abs()) as f64,
            boundary_cutoff: cutoff,
            excluded_fraction: twisted_absorption::spectra::excluded_fraction(b1.kappa, b2.kappa, cutoff),
        });
        sigma.push(s);
    }
    let set = MeasurementSet::new(line_model(r), settings, patterns, sigma)?;
    let mut cfg = ReconstructionConfig::new(profile_grid(r), l.lambda);
    cfg.nonnegativity = l.nonnegativity;
    let (profile, diag) = invert_lineshape(&set, &cfg)?;
    let mut t = Table::new("profile", &["energy_offset_ev", "weight", "raw_weight"]).plotted();
    for i in 0..profile.len() {
        t.push(vec![
            profile.grid[i].into(),
            profile.weights[i].into(),
            diag.raw_weights[i].into(),
        ]);
    }
    let mut lc = Table::new("l_curve", &["lambda", "residual_norm", "seminorm"]);
    for p in &diag.l_curve {
        lc.push(vec![p.lambda.into(), p.residual_norm.into(), p.seminorm.into()]);
    }
    let summary = json!({
        "lambda": diag.lambda,
        "residual_norm": diag.residual_norm,
        "seminorm": diag.seminorm,
        "effective_rank": diag.effective_rank,
        "grid_points": profile.len(),
        "condition_number": diag.condition_number,
    });
    let stdout = vec![format!(
        "lambda {:e}, effective rank {}/{}, residual {:e}",
        diag.lambda,
        diag.effective_rank,
        profile.len(),
        diag.residual_norm
    )];
    Ok(Outcome {
        tables: vec![t, lc],
        summary,
        stdout,
    })
}

fn smear_cmd(r: &Resolved) -> CliResult<Outcome> {
    let sm = &r.config.smear;
    let grid = detuning_grid(r, 0.0)?;
    let model = &r.config.amplitude;
    let spread = MomentumSpread {
        sigma_p: nalgebra::Vector3::from(sm.sigma_p),
        n_quad: sm.n_quad,
        n_mc: sm.n_mc,
        seed: r.config.seed,
        method: sm.method,
    };
    let plain = detuning_scan(&r.b1, &r.b2, &r.atom, model, &grid, &r.opts)?;
    let out = smear(&r.b1, &r.b2, &r.atom, model, &grid, &spread, &r.opts)?;
    let mut t = Table::new("smeared", &["detuning_ev", "rate", "unsmeared", "std_error"]).plotted();
    for i in 0..grid.len() {
        let se = out.std_error.as_ref().map_or(f64::NAN, |s| s[i]);
        t.push(vec![
            grid[i].into(),
            out.pattern.values[i].into(),
            plain.values[i].into(),
            se.into(),
        ]);
    }
    let vis_or_zero = |p: &FringePattern| match visibility(p) {
        Ok(v) => Ok(Some(v)),
        Err(CoreError::NoFringe) => Ok(None),
        Err(e) => Err(e),
    };
    let mut summary = pattern_summary(&out.pattern);
    summary["sigma_p_ev"] = json!(sm.sigma_p);
    summary["visibility"] = json!(vis_or_zero(&out.pattern)?);
    summary["unsmeared_visibility"] = json!(vis_or_zero(&plain)?);
    let mut tables = vec![t];
    let mut stdout = Vec::new();

    let ladder = sm.ladder.clone().expect("resolved");
    match visibility_curve(&r.b1, &r.b2, &r.atom, model, &grid, &spread, &ladder, &r.opts) {
        Ok(curve) => {
            let mut v = Table::new("visibility", &["sigma_p_ev", "visibility", "tracked_contrast"]).plotted();
            for p in &curve.points {
                v.push(vec![p.sigma.into(), p.visibility.into(), p.tracked_contrast.into()]);
            }
            summary["tracked_fringe_ev"] = json!(curve.reference.position);
            tables.push(v);
        }
        Err(CoreError::NoFringe) => log::warn!("unsmeared pattern has no fringe; visibility table skipped"),
        Err(e) => return Err(e.into()),
    }
    if let Some(th) = sm.threshold {
        let s = tolerable_spread(&r.b1, &r.b2, &r.atom, model, &grid, th, &spread, &r.opts)?;
        let check = smear(
            &r.b1,
            &r.b2,
            &r.atom,
            model,
            &grid,
            &spread.with_sigma(nalgebra::Vector3::repeat(s)),
            &r.opts,
        )?;
        let v = vis_or_zero(&check.pattern)?.unwrap_or(0.0);
        summary["threshold"] = json!(th);
        summary["tolerable_sigma_p_ev"] = json!(s);
        summary["visibility_at_tolerable"] = json!(v);
        stdout.push(format!("tolerable spread: {} eV (visibility {v:.4})", fmt_ev(s)));
    }
    Ok(Outcome {
        tables,
        summary,
        stdout,
    })
}
