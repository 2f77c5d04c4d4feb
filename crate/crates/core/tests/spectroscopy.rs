use nanofiber_trap::atomic::{saturated_power_per_atom, AtomSpecies};
use nanofiber_trap::spectroscopy::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const G0: f64 = 5.2e6;
const AREA: f64 = 3.5e-12;

fn three_lines() -> Vec<LineComponent> {
    [5.5e6, 13e6, 20.5e6].iter().map(|&shift| LineComponent { weight: 1.0 / 3.0, shift }).collect()
}

fn detunings() -> Vec<f64> {
    (0..=110).map(|i| (-40.0 + i as f64) * 1e6).collect()
}

fn synthetic(od: f64, center: f64, fwhm: f64, noise: f64, seed: u64) -> SpectrumDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let points = detunings()
        .into_iter()
        .map(|d| {
            let t = single_line_transmission(d, od, center, fwhm);
            let observed = t * (1.0 + noise * normal.sample(&mut rng));
            SpectrumPoint { detuning: d, transmission: observed, sigma: (noise > 0.0).then_some(noise * observed) }
        })
        .collect();
    SpectrumDataset::new(points).unwrap()
}

fn opts() -> FitOptions {
    FitOptions { max_iterations: 200, tolerance: 1e-12, gamma0: G0 }
}

#[test]
fn noiseless_single_line_round_trip() {
    let data = synthetic(13.0, 13e6, 20e6, 0.0, 0);
    let fit = fit_spectrum(&data, &SpectrumFitMode::SingleLine, &opts()).unwrap();
    assert!(fit.converged, "{fit:?}");
    assert!((fit.od.value / 13.0 - 1.0).abs() < 1e-8);
    assert!((fit.shift.value / 13e6 - 1.0).abs() < 1e-8);
    assert!((fit.fwhm.value / 20e6 - 1.0).abs() < 1e-8);
}

#[test]
fn noisy_fit_covers_truth() {
    let data = synthetic(13.0, 13e6, 20e6, 0.01, 7);
    let fit = fit_spectrum(&data, &SpectrumFitMode::SingleLine, &opts()).unwrap();
    assert!(fit.converged && fit.weighted);
    for (est, truth) in [(fit.od, 13.0), (fit.shift, 13e6), (fit.fwhm, 20e6)] {
        assert!((est.value - truth).abs() < 3.0 * est.uncertainty.unwrap(), "{est:?} vs {truth}");
    }
}

#[test]
fn free_atom_reference_spectrum() {
    let od = -(0.8f64).ln();
    let data = synthetic(od, 0.0, 5.6e6, 0.0, 0);
    let fit = fit_spectrum(&data, &SpectrumFitMode::SingleLine, &opts()).unwrap();
    assert!((fit.od.value - od).abs() < 1e-8);
    assert!(fit.warnings.is_empty(), "{:?}", fit.warnings);
}

#[test]
fn width_clamped_at_natural_linewidth() {
    // data narrower than the natural line
    let data = synthetic(2.0, 0.0, 3e6, 0.0, 0);
    let fit = fit_spectrum(&data, &SpectrumFitMode::SingleLine, &opts()).unwrap();
    assert_eq!(fit.fwhm.value, G0);
    assert!(fit.warnings.iter().any(|w| w.contains("lower bound")));
}

#[test]
fn shallow_dip_is_flagged() {
    let data = synthetic(0.005, 0.0, 10e6, 0.01, 3);
    let fit = fit_spectrum(&data, &SpectrumFitMode::SingleLine, &opts()).unwrap();
    assert!(fit.warnings.iter().any(|w| w.contains("ill-conditioned")), "{:?}", fit.warnings);
}

#[test]
fn too_few_points() {
    let data = SpectrumDataset::new(
        (0..5).map(|i| SpectrumPoint { detuning: i as f64, transmission: 0.5, sigma: None }).collect(),
    )
    .unwrap();
    assert!(fit_spectrum(&data, &SpectrumFitMode::SingleLine, &opts()).is_err());
}

#[test]
fn iteration_cap_is_flagged_not_fatal() {
    let data = synthetic(13.0, 13e6, 20e6, 0.01, 1);
    let capped = FitOptions { max_iterations: 1, ..opts() };
    let fit = fit_spectrum(&data, &SpectrumFitMode::SingleLine, &capped).unwrap();
    assert!(!fit.converged);
    assert!(fit.warnings.iter().any(|w| w.contains("no convergence")));
}

#[test]
fn multi_component_round_trip() {
    let comps = three_lines();
    let offset = -1.5e6;
    let shifted: Vec<LineComponent> =
        comps.iter().map(|c| LineComponent { weight: c.weight, shift: c.shift + offset }).collect();
    let points = detunings()
        .into_iter()
        .map(|d| SpectrumPoint { detuning: d, transmission: spectrum_model(d, 13.0, &shifted, G0).unwrap(), sigma: None })
        .collect();
    let data = SpectrumDataset::new(points).unwrap();
    let fit = fit_spectrum(&data, &SpectrumFitMode::MultiComponent { components: comps.clone() }, &opts()).unwrap();
    assert!(fit.converged);
    assert!((fit.od.value / 13.0 - 1.0).abs() < 1e-8);
    assert!((fit.shift.value - offset).abs() < 1e-2);
    assert!((fit.fwhm.value - envelope_fwhm(&comps, G0)).abs() < 1e-3);
}

#[test]
fn unsorted_input_is_sorted_and_duplicates_rejected() {
    let pts = vec![
        SpectrumPoint { detuning: 2.0, transmission: 0.9, sigma: None },
        SpectrumPoint { detuning: 1.0, transmission: 1.02, sigma: None },
    ];
    let data = SpectrumDataset::new(pts.clone()).unwrap();
    assert_eq!(data.points[0].detuning, 1.0);
    assert_eq!(data.above_unity(), 1);
    let mut dup = pts;
    dup.push(SpectrumPoint { detuning: 1.0, transmission: 0.5, sigma: None });
    assert!(SpectrumDataset::new(dup).is_err());
}

#[test]
fn eta_of_split_pair_matches_scan_fixture() {
    // two equal lines 2 Gamma0 apart, dense-scan fixture
    const FIXTURE: f64 = 1.888_543_819_998_317_6;
    let pair = [LineComponent { weight: 0.5, shift: -G0 }, LineComponent { weight: 0.5, shift: G0 }];
    let eta = broadening_recovery_factor(&pair, G0).unwrap();
    assert!((eta / FIXTURE - 1.0).abs() < 1e-9, "{eta}");
    let scan = (0..=100_000)
        .map(|i| absorption_profile(-3.0 * G0 + 6.0 * G0 * i as f64 / 100_000.0, &pair, G0))
        .fold(0.0, f64::max);
    assert!((eta * scan - 1.0).abs() < 1e-8);
}

#[test]
fn shipped_pattern_gives_paper_broadening() {
    let comps = three_lines();
    let fwhm = envelope_fwhm(&comps, G0);
    let eta = broadening_recovery_factor(&comps, G0).unwrap();
    assert!((fwhm - 20e6).abs() < 1e6, "{fwhm}");
    assert!((2.0..=3.0).contains(&eta), "{eta}");
}

proptest! {
    #[test]
    fn transmission_bounds(d in -1e8f64..1e8, od in 0.0f64..50.0, s1 in -3e7f64..3e7, w in 0.01f64..0.99) {
        let comps = [LineComponent { weight: w, shift: s1 }, LineComponent { weight: 1.0 - w, shift: -s1 }];
        let t = spectrum_model(d, od, &comps, G0).unwrap();
        prop_assert!(t > 0.0 && t <= 1.0);
        let far = spectrum_model(1e12, od, &comps, G0).unwrap();
        prop_assert!(1.0 - far < 1e-8);
    }

    #[test]
    fn deeper_od_deeper_dip(od in 0.0f64..30.0, extra in 0.01f64..5.0) {
        let comps = three_lines();
        let (at, _) = profile_peak(&comps, G0);
        let a = spectrum_model(at, od, &comps, G0).unwrap();
        let b = spectrum_model(at, od + extra, &comps, G0).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn noiseless_fit_self_consistent(od in 1.0f64..20.0, center in -10e6f64..30e6, fwhm in 6e6f64..30e6) {
        let data = synthetic(od, center, fwhm, 0.0, 0);
        let fit = fit_spectrum(&data, &SpectrumFitMode::SingleLine, &opts()).unwrap();
        prop_assert!((fit.od.value / od - 1.0).abs() < 1e-6);
        prop_assert!((fit.shift.value - center).abs() < 1e-6 * fwhm);
        prop_assert!((fit.fwhm.value / fwhm - 1.0).abs() < 1e-6);
    }
}

// ---- saturation ----

fn model() -> SaturationModel {
    SaturationModel::new(&AtomSpecies::cesium133(), AREA).unwrap()
}

/// `ln(P_out / P_in) + (P_out - P_in) / P_sat = -N sigma0 / A`, solved by bisection in `ln(P_out / P_in)`.
fn implicit_absorbed(m: &SaturationModel, p_in: f64, n: f64) -> f64 {
    let od = n * m.single_atom_od();
    let rho = p_in / m.saturation_power;
    let g = |y: f64| y + rho * y.exp_m1() + od;
    let (mut lo, mut hi) = (-od, 0.0);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    -p_in * (0.5 * (lo + hi)).exp_m1()
}

fn log_powers(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

#[test]
fn rk4_matches_implicit_solution() {
    let m = model();
    for n in [1.0, 50.0, 2000.0] {
        for p in log_powers(13, 1e-13, 1e-6) {
            let a = m.absorbed(p, n);
            let b = implicit_absorbed(&m, p, n);
            assert!((a / b - 1.0).abs() < 1e-8, "n={n} p={p}: {a} vs {b}");
        }
    }
}

#[test]
fn step_halving_hygiene() {
    let m = model();
    for (p, n) in [(1e-11, 2000.0), (5e-9, 2000.0), (1e-7, 2000.0), (1e-10, 30.0)] {
        let steps = m.default_steps(n);
        let a = m.absorbed_with_steps(p, n, steps);
        let b = m.absorbed_with_steps(p, n, 2 * steps);
        assert!((a / b - 1.0).abs() < 1e-8);
    }
}

#[test]
fn saturation_asymptote_and_monotonicity() {
    let atom = AtomSpecies::cesium133();
    let m = model();
    let n = 2000.0;
    let ceiling = n * saturated_power_per_atom(&atom);
    let mut last = 0.0;
    for p in log_powers(40, 1e-13, 1e-5) {
        let a = saturation_model(p, n, AREA, &atom).unwrap();
        assert!(a > last && a < ceiling && a <= p);
        last = a;
    }
    let half = m.half_saturation_power(n);
    let gap = 1.0 - m.absorbed(100.0 * half, n) / ceiling;
    assert!(gap > 0.0 && gap < 0.01, "{gap}");
    assert!((ceiling - 7.6e-9).abs() < 0.1e-9);
    assert!(m.absorbed(1e-7, 2000.0) > m.absorbed(1e-7, 1000.0));
    assert_eq!(saturation_model(1e-9, 0.0, AREA, &atom).unwrap(), 0.0);
}

#[test]
fn asymptote_estimator() {
    let atom = AtomSpecies::cesium133();
    let n = atom_number_from_asymptote(7.5e-9, &atom);
    assert!((n - 1957.0).abs() < 20.0, "{n}");
}

fn saturation_data(n: f64, noise: f64, seed: u64, lo: f64, hi: f64) -> SaturationDataset {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    SaturationDataset::new(
        log_powers(24, lo, hi)
            .into_iter()
            .map(|p| {
                let a = m.absorbed(p, n) * (1.0 + noise * normal.sample(&mut rng));
                SaturationPoint { incident: p, absorbed: a.min(p) }
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn saturation_fit_recovers_atom_number() {
    let data = saturation_data(2000.0, 0.03, 11, 1e-11, 1e-6);
    let fit = fit_saturation(&data, &model(), &SaturationFitOptions::default()).unwrap();
    assert!(fit.converged && !fit.degenerate, "{fit:?}");
    assert!((fit.atom_number.value / 2000.0 - 1.0).abs() < 0.05, "{fit:?}");
}

#[test]
fn saturation_scale_fit_at_moderate_depth() {
    // optically thin enough that the weak-probe absorption still depends on N
    let data = saturation_data(20.0, 0.0, 0, 1e-13, 1e-8);
    let with_scale = SaturationFitOptions { fit_saturation_scale: true, ..Default::default() };
    let fit = fit_saturation(&data, &model(), &with_scale).unwrap();
    assert!(fit.converged, "{fit:?}");
    assert!((fit.atom_number.value / 20.0 - 1.0).abs() < 1e-4, "{fit:?}");
    assert!((fit.saturation_scale.unwrap().value - 1.0).abs() < 1e-4);
}

#[test]
fn doubling_absorbed_power_doubles_n_when_saturated() {
    let data = saturation_data(2000.0, 0.0, 0, 2e-7, 1e-5);
    let doubled = SaturationDataset::new(
        data.points.iter().map(|p| SaturationPoint { incident: p.incident, absorbed: 2.0 * p.absorbed }).collect(),
    )
    .unwrap();
    let m = model();
    let a = fit_saturation(&data, &m, &SaturationFitOptions::default()).unwrap();
    let b = fit_saturation(&doubled, &m, &SaturationFitOptions::default()).unwrap();
    assert!((b.atom_number.value / a.atom_number.value - 2.0).abs() < 0.02);
    assert!((b.asymptote_estimate / a.asymptote_estimate - 2.0).abs() < 1e-12);
}

#[test]
fn linear_regime_data_are_degenerate() {
    let data = saturation_data(2000.0, 0.0, 0, 1e-14, 1e-12);
    let fit = fit_saturation(&data, &model(), &SaturationFitOptions::default()).unwrap();
    assert!(fit.degenerate, "{fit:?}");
}

#[test]
fn empty_saturation_data() {
    let data = SaturationDataset::new(vec![]).unwrap();
    assert!(fit_saturation(&data, &model(), &SaturationFitOptions::default()).is_err());
    assert!(SaturationDataset::new(vec![SaturationPoint { incident: 1e-9, absorbed: 2e-9 }]).is_err());
}
