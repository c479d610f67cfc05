use approx::assert_relative_eq;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use twisted_absorption::lineshape::*;
use twisted_absorption::spectra::{fringe_census, uniform_grid, ScanOptions};
use twisted_absorption::{AtomBeam, BesselMode, Dispersion, Error, PwAmplitudeModel};

// profile step: about a hundredth of the detuning window below
const H: f64 = 3e-14;
const LO: f64 = 1.25e-13;
const HI: f64 = 3.125e-12;

fn line() -> LineModel {
    LineModel {
        atom: AtomBeam::at_rest(1e10, 1.0, Dispersion::NonRelativistic).unwrap(),
        amplitude: PwAmplitudeModel::default(),
        scan: ScanOptions::default(),
    }
}

fn settings(n: i32) -> Vec<(BesselMode, BesselMode)> {
    (1..=n)
        .map(|m| {
            (
                BesselMode::photon(1.0, 0.1, m).unwrap(),
                BesselMode::photon(-1.0, 0.15, m).unwrap(),
            )
        })
        .collect()
}

fn xgrid() -> Vec<f64> {
    uniform_grid(LO - 25.0 * H, HI + 25.0 * H, 250)
}

fn measure(truth: &LineProfile, set: &[(BesselMode, BesselMode)], noise: f64, seed: u64) -> MeasurementSet {
    let l = line();
    let x = xgrid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pats = Vec::new();
    let mut sig = Vec::new();
    for (b1, b2) in set {
        let mut p = forward_pattern(truth, b1, b2, &l, &x).unwrap();
        let peak = p.values.iter().cloned().fold(0.0, f64::max);
        let s = noise * peak;
        if s > 0.0 {
            let n = Normal::new(0.0, s).unwrap();
            for v in &mut p.values {
                *v += n.sample(&mut rng);
            }
        }
        sig.push(vec![s; p.len()]);
        pats.push(p);
    }
    MeasurementSet::new(l, set.to_vec(), pats, sig).unwrap()
}

#[test]
fn delta_line_round_trip() {
    let g = centered_grid(41, H);
    let truth = LineProfile::delta(g.clone(), 4.0 * H).unwrap();
    let ms = measure(&truth, &settings(8), 0.0, 0);
    let (p, _) = invert_lineshape(&ms, &ReconstructionConfig::new(g.clone(), Lambda::Fixed(0.0))).unwrap();
    let j = g.iter().position(|&e| (e - 4.0 * H).abs() < 0.5 * H).unwrap();
    let near: f64 = p.weights[j - 1..=j + 1].iter().sum::<f64>() * H;
    assert!(near >= 0.9, "{near}");
}

#[test]
fn lorentzian_round_trips() {
    let g = centered_grid(41, H);
    let truth = LineProfile::lorentzian(g.clone(), 0.0, 5.0 * H).unwrap();
    let clean = measure(&truth, &settings(8), 0.0, 0);
    let (p, d) = invert_lineshape(&clean, &ReconstructionConfig::new(g.clone(), Lambda::Fixed(0.0))).unwrap();
    assert!(p.relative_error(&truth) < 0.05, "{}", p.relative_error(&truth));
    assert_eq!(d.effective_rank, 41);
    let noisy = measure(&truth, &settings(8), 0.01, 11);
    let cfg = ReconstructionConfig::new(g, Lambda::Auto(AutoLambda::LCurve));
    let (p, d) = invert_lineshape(&noisy, &cfg).unwrap();
    assert!(p.relative_error(&truth) < 0.15, "{}", p.relative_error(&truth));
    assert_eq!(d.l_curve.len(), cfg.l_curve.len());
}

#[test]
fn unregularized_limit_is_least_squares() {
    let g = centered_grid(21, H);
    let truth = LineProfile::gaussian(g.clone(), 0.0, 3.0 * H).unwrap();
    let ms = measure(&truth, &settings(3), 0.01, 5);
    let mut cfg = ReconstructionConfig::new(g.clone(), Lambda::Fixed(0.0));
    cfg.nonnegativity = false;
    let (_, d) = invert_lineshape(&ms, &cfg).unwrap();
    // independent solve of the weighted normal equations
    let a = build_design_matrix(&ms.line, &ms.settings, &ms.grids(), &g).unwrap();
    let s: Vec<f64> = ms.sigma.iter().flatten().copied().collect();
    let v = ms.patterns.iter().flat_map(|p| p.values.iter().copied());
    let b = DVector::from_iterator(a.nrows(), v.zip(&s).map(|(v, s)| v / s));
    let a = nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |r, j| a[(r, j)] / s[r]);
    let w = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * b));
    for (x, y) in d.raw_weights.iter().zip(w.iter()) {
        assert_relative_eq!(*x, *y, max_relative = 1e-6, epsilon = 1e-9 * w.amax());
    }
}

#[test]
fn strong_regularization_smooths() {
    let g = centered_grid(21, H);
    let truth = LineProfile::double_line(g.clone(), -4.0 * H, 4.0 * H, 0.5).unwrap();
    let ms = measure(&truth, &settings(2), 0.0, 0);
    let mut seminorms = Vec::new();
    for lam in [1e-6, 1e-2, 1e2, 1e6] {
        let mut cfg = ReconstructionConfig::new(g.clone(), Lambda::Fixed(lam));
        cfg.nonnegativity = false;
        cfg.l_curve.clear();
        seminorms.push(invert_lineshape(&ms, &cfg).unwrap().1.seminorm);
    }
    for w in seminorms.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{seminorms:?}");
    }
    assert!(seminorms[3] < 1e-6 * seminorms[0], "{seminorms:?}");
}

#[test]
fn rank_deficient_grid_is_ill_posed() {
    // columns a femto-step apart are numerically identical
    let g = centered_grid(9, 1e-40);
    let truth = LineProfile::delta(g.clone(), 0.0).unwrap();
    let ms = measure(&truth, &settings(1), 0.0, 0);
    let r = invert_lineshape(&ms, &ReconstructionConfig::new(g, Lambda::Fixed(0.0)));
    assert!(matches!(r, Err(Error::IllPosed { size: 9, .. })), "{r:?}");
}

#[test]
fn more_settings_raise_the_smallest_singular_value() {
    let g = centered_grid(41, H);
    let mut last = 0.0;
    for n in 1..=10 {
        let a = build_design_matrix(&line(), &settings(n), &vec![xgrid(); n as usize], &g).unwrap();
        let smin = a.singular_values().min();
        assert!(smin >= last, "n = {n}: {smin} < {last}");
        last = smin;
    }
}

#[test]
fn wide_line_washes_out_fringes() {
    let b1 = BesselMode::photon(1.0, 0.1, 4).unwrap();
    let b2 = BesselMode::photon(-1.0, 0.15, 4).unwrap();
    // pattern and profile share one step so the comb of discrete lines is sampled in phase
    let h = H / 4.0;
    let g = centered_grid(801, h);
    let wide = LineProfile::lorentzian(g, 0.0, 60.0 * H).unwrap();
    let x: Vec<f64> = (0..400).map(|i| LO + i as f64 * h).collect();
    let p = forward_pattern(&wide, &b1, &b2, &line(), &x).unwrap();
    match fringe_census(&p) {
        Ok(c) => assert!(c.fringes.iter().all(|f| f.contrast < 0.1), "{:?}", c.fringes),
        Err(e) => assert!(matches!(e, Error::NoFringe), "{e}"),
    }
}

fn profile_from(raw: &[f64]) -> LineProfile {
    LineProfile::custom(centered_grid(raw.len(), H), raw.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn forward_is_linear_and_matches_the_matrix(
        raw1 in prop::collection::vec(0.0f64..1.0, 9),
        raw2 in prop::collection::vec(0.0f64..1.0, 9),
        alpha in 0.0f64..1.0,
    ) {
        prop_assume!(raw1.iter().sum::<f64>() > 0.1 && raw2.iter().sum::<f64>() > 0.1);
        let (b1, b2) = settings(3)[2];
        let (p1, p2) = (profile_from(&raw1), profile_from(&raw2));
        let mix: Vec<f64> = p1.weights.iter().zip(&p2.weights).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let pm = profile_from(&mix);
        let x = xgrid();
        let l = line();
        let f1 = forward_pattern(&p1, &b1, &b2, &l, &x).unwrap();
        let f2 = forward_pattern(&p2, &b1, &b2, &l, &x).unwrap();
        let fm = forward_pattern(&pm, &b1, &b2, &l, &x).unwrap();
        let scale = fm.values.iter().cloned().fold(0.0, f64::max);
        for i in 0..x.len() {
            let lin = alpha * f1.values[i] + (1.0 - alpha) * f2.values[i];
            prop_assert!((fm.values[i] - lin).abs() <= 1e-12 * scale);
        }
        let a = build_design_matrix(&l, &[(b1, b2)], &[x.clone()], &pm.grid).unwrap();
        let aw = a * DVector::from_column_slice(&pm.weights);
        for i in 0..x.len() {
            prop_assert!((aw[i] - fm.values[i]).abs() <= 1e-10 * scale);
        }
    }
}
