//! Least-squares coefficient extraction: exact synthetic models, basis
//! algebra, drift probes, comparisons and the cone Weyl anchor.

use proptest::prelude::*;
use rtrace_core::cone::{log_grid, sample_cone_trace, ConeProblem, Route, TraceSamples, TraceValue};
use rtrace_core::error::Error;
use rtrace_core::fit::{
    fit_expansion, fit_points, peel_leading_two, sal_vs_fit, stability_probe, subwindows, FitBasis,
    DEFAULT_SAMPLES_PER_COEFF, DEFAULT_WINDOW, MAX_CONDITION,
};
use rtrace_core::series::{ExpansionSeries, ExpansionTerm, SeriesDiagnostics};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn series(terms: &[(f64, u32, f64)]) -> ExpansionSeries {
    let t = terms
        .iter()
        .map(|&(power, logpow, coeff)| ExpansionTerm { power, logpow, coeff })
        .collect();
    ExpansionSeries::new(t, None, SeriesDiagnostics::default()).unwrap()
}

fn samples_of(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> TraceSamples {
    let z = log_grid(lo, hi, n).unwrap();
    let values = z
        .iter()
        .map(|&x| TraceValue {
            value: f(x),
            tail_bound: 0.0,
        })
        .collect();
    TraceSamples::new(z, values, Route::ClosedForm, 2, "synthetic".into()).unwrap()
}

fn synthetic() -> TraceSamples {
    samples_of(|z| 3.0 * z.powi(-2) + 5.0 * z.powi(-3) * z.ln(), 8.0, 512.0, 96)
}

#[test]
fn exact_model_is_recovered() {
    let b = FitBasis::new(vec![(-2.0, 0), (-3.0, 1)], DEFAULT_WINDOW, 12).unwrap();
    let f = fit_expansion(&synthetic(), &b).unwrap();
    assert!(rel(f.coeff(-2.0, 0).unwrap(), 3.0) < 1e-10);
    assert!(rel(f.coeff(-3.0, 1).unwrap(), 5.0) < 1e-10);
    assert!(f.diagnostics.residual_norm.unwrap() < 1e-13);
    assert_eq!(f.diagnostics.route, "fit:closed-form");
    assert_eq!(f.diagnostics.samples, Some(96));
    assert_eq!(f.validity, Some(DEFAULT_WINDOW));
}

#[test]
fn absent_terms_come_out_zero() {
    let b = FitBasis::new(vec![(-2.0, 0), (-3.0, 0), (-3.0, 1), (-4.0, 0)], DEFAULT_WINDOW, 12).unwrap();
    let f = fit_expansion(&synthetic(), &b).unwrap();
    assert!(f.coeff(-3.0, 0).unwrap().abs() <= 1e-8);
    assert!(f.coeff(-4.0, 0).unwrap().abs() <= 1e-8);
    assert!(rel(f.coeff(-3.0, 1).unwrap(), 5.0) < 1e-8);
}

#[test]
fn too_few_samples_are_refused() {
    let b = FitBasis::new(vec![(-2.0, 0), (-3.0, 1)], DEFAULT_WINDOW, 12).unwrap();
    let s = samples_of(|z| 3.0 * z.powi(-2), 8.0, 512.0, 20);
    assert!(matches!(fit_expansion(&s, &b), Err(Error::Precondition(_))));
}

#[test]
fn near_collinear_basis_is_ill_conditioned() {
    // z^{-2}, z^{-3}, z^{-4} are nearly dependent on a window of relative
    // width 1e-8.
    let z: Vec<f64> = (0..40).map(|i| 100.0 * (1.0 + 2.5e-10 * i as f64)).collect();
    let v: Vec<f64> = z.iter().map(|x| x.powi(-2)).collect();
    match fit_points(&z, &v, &[(-2.0, 0), (-3.0, 0), (-4.0, 0)]) {
        Err(Error::IllConditioned { cond, limit }) => {
            assert!(cond > limit);
            assert_eq!(limit, MAX_CONDITION);
        }
        other => panic!("expected ill-conditioned error, got {other:?}"),
    }
}

#[test]
fn basis_validation() {
    assert!(FitBasis::new(vec![], DEFAULT_WINDOW, 12).is_err());
    assert!(FitBasis::new(vec![(-2.0, 0)], DEFAULT_WINDOW, 2).is_err());
    assert!(FitBasis::new(vec![(-2.0, 0)], (8.0, 8.0), 12).is_err());
    assert!(FitBasis::new(vec![(-2.0, 0), (-2.0, 0)], DEFAULT_WINDOW, 12).is_err());
    let b = FitBasis::new(vec![(-3.0, 1), (-2.0, 0), (-3.0, 0)], DEFAULT_WINDOW, 12).unwrap();
    assert_eq!(b.terms, vec![(-2.0, 0), (-3.0, 0), (-3.0, 1)]);
    assert_eq!(DEFAULT_SAMPLES_PER_COEFF, 12);
}

#[test]
fn log_order_above_depth_is_a_config_error() {
    let terms = vec![(-1.0, 0), (-3.0, 1), (-3.0, 2)];
    match FitBasis::for_depth(terms.clone(), DEFAULT_WINDOW, 12, 1) {
        Err(Error::Config { field, .. }) => assert_eq!(field, "fit.terms"),
        other => panic!("expected config error, got {other:?}"),
    }
    assert!(FitBasis::for_depth(terms, DEFAULT_WINDOW, 12, 2).is_ok());
}

#[test]
fn theorem_basis_follows_the_depth() {
    // Depth-1 edge, dim 3, m 2: logs only at z^{b−2m−j}, never squared.
    let edge = FitBasis::theorem(3, 2, &[(1, 1)], 5, 1, DEFAULT_WINDOW, 12).unwrap();
    assert_eq!(
        edge.terms,
        vec![(-1.0, 0), (-2.0, 0), (-3.0, 0), (-3.0, 1), (-4.0, 0), (-5.0, 0)]
    );
    // Depth-2 cone over a spindle: edge ray (1, 1) and tip (0, 2).
    let cone = FitBasis::theorem(3, 2, &[(1, 1), (0, 2)], 4, 1, DEFAULT_WINDOW, 12).unwrap();
    assert!(cone.terms.contains(&(-4.0, 2)));
    assert!(cone.terms.contains(&(-3.0, 1)));
    assert!(!cone.terms.contains(&(-3.0, 2)));
    // Smooth model: pure powers.
    let smooth = FitBasis::theorem(3, 2, &[], 4, 2, DEFAULT_WINDOW, 12).unwrap();
    assert!(smooth.terms.iter().all(|t| t.1 == 0));
}

#[test]
fn enlarging_the_basis_never_raises_the_residual() {
    let p = ConeProblem::circle(0.7, 1.0, 2, 48).unwrap();
    let s = sample_cone_trace(&p, &log_grid(8.0, 512.0, 96).unwrap(), Route::ClosedForm).unwrap();
    let ladder = [(-2.0, 0), (-3.0, 0), (-4.0, 0), (-4.0, 1), (-5.0, 0), (-6.0, 0)];
    let mut last = f64::INFINITY;
    for k in 1..=ladder.len() {
        let b = FitBasis::new(ladder[..k].to_vec(), DEFAULT_WINDOW, 12).unwrap();
        let r = fit_expansion(&s, &b).unwrap().diagnostics.residual_norm.unwrap();
        assert!(r <= last * (1.0 + 1e-9), "basis of {k} terms: {r} > {last}");
        last = r;
    }
}

#[test]
fn rescaling_mixes_log_powers_binomially() {
    let base = series(&[(-2.0, 0, 3.0), (-3.0, 0, -1.5), (-3.0, 1, 5.0), (-4.0, 2, 0.5)]);
    let c = 2.5;
    let s = samples_of(|z| base.eval(c * z), 8.0, 512.0, 96);
    let b = FitBasis::new(vec![(-2.0, 0), (-3.0, 0), (-3.0, 1), (-4.0, 0), (-4.0, 1), (-4.0, 2)], DEFAULT_WINDOW, 12).unwrap();
    let fitted = fit_expansion(&s, &b).unwrap();
    let predicted = base.rescaled(c).unwrap();
    for t in &predicted.terms {
        let got = fitted.coeff(t.power, t.logpow).unwrap();
        assert!((got - t.coeff).abs() <= 1e-8 * t.coeff.abs().max(1.0), "{t:?} fitted {got}");
    }
    // Top log power at each power only picks up c^p.
    assert!(rel(fitted.coeff(-3.0, 1).unwrap(), 5.0 * c.powi(-3)) < 1e-8);
    assert!(rel(fitted.coeff(-4.0, 2).unwrap(), 0.5 * c.powi(-4)) < 1e-8);
}

#[test]
fn exact_data_has_no_drift() {
    let b = FitBasis::new(vec![(-2.0, 0), (-3.0, 1)], DEFAULT_WINDOW, 12).unwrap();
    let r = stability_probe(&synthetic(), &b, 3, 0.05).unwrap();
    assert_eq!(r.windows.len(), 3);
    for t in &r.terms {
        assert!(t.drift < 1e-9, "{t:?}");
        assert!(t.detected);
    }
    assert!(stability_probe(&synthetic(), &b, 1, 0.05).is_err());
}

#[test]
fn subwindows_overlap_and_cover() {
    let w = subwindows((8.0, 512.0), 2);
    assert_eq!(w.len(), 2);
    assert_eq!(w[0].0, 8.0);
    assert_eq!(w[1].1, 512.0);
    assert!(w[1].0 < w[0].1);
    // Each spans 2/3 of the log-window.
    let span = |x: (f64, f64)| (x.1 / x.0).ln() / 64f64.ln();
    assert!((span(w[0]) - 2.0 / 3.0).abs() < 1e-12);
    assert!((span(w[1]) - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn identical_series_compare_to_zero() {
    let a = series(&[(-1.0, 0, 0.35), (-3.0, 1, -0.2), (-4.0, 0, 1.1)]);
    let r = sal_vs_fit(&a, &a, 1e-12);
    assert_eq!(r.matched.len(), 3);
    assert!(r.matched.iter().all(|k| k.rel_diff == 0.0 && k.within));
    assert!(r.only_predicted.is_empty() && r.only_fitted.is_empty());
    assert!(r.all_within());
}

#[test]
fn comparison_is_order_insensitive() {
    let a = series(&[(-1.0, 0, 0.35), (-3.0, 1, -0.2), (-4.0, 0, 1.1)]);
    let b = series(&[(-4.0, 0, 1.0), (-5.0, 0, 2.0), (-1.0, 0, 0.35)]);
    let mut permuted = b.clone();
    permuted.terms.reverse();
    let r1 = sal_vs_fit(&a, &b, 0.02);
    let r2 = sal_vs_fit(&a, &permuted, 0.02);
    assert_eq!(r1, r2);
    assert_eq!(r1.matched.len(), 2);
    assert_eq!(r1.only_predicted.len(), 1);
    assert_eq!(r1.only_fitted.len(), 1);
    assert!(!r1.all_within());
}

#[test]
fn cone_weyl_coefficient_and_peeling_cross_check() {
    let beta = 0.7;
    let p = ConeProblem::circle(beta, 0.0, 2, 48).unwrap();
    let s = sample_cone_trace(&p, &log_grid(8.0, 512.0, 96).unwrap(), Route::ClosedForm).unwrap();
    let b = FitBasis::new(vec![(-2.0, 0), (-3.0, 0), (-4.0, 0), (-5.0, 0)], DEFAULT_WINDOW, 12).unwrap();
    let f = fit_expansion(&s, &b).unwrap();
    let c2 = f.coeff(-2.0, 0).unwrap();
    assert!(rel(c2, beta / 4.0) < 0.01, "z^-2 coefficient {c2}");
    let (p0, p1) = peel_leading_two(&s, -2.0, -3.0).unwrap();
    assert!(rel(p0, c2) < 1e-3, "peeled {p0} vs fitted {c2}");
    assert!(rel(p1, f.coeff(-3.0, 0).unwrap()) < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn own_basis_is_recovered(
        mask in 1u32..32,
        coeffs in proptest::collection::vec(0.5f64..2.0, 5),
        signs in proptest::collection::vec(any::<bool>(), 5),
    ) {
        let keys = [(-1.0, 0), (-2.0, 0), (-2.0, 1), (-3.0, 0), (-3.5, 1)];
        let terms: Vec<(f64, u32, f64)> = keys
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(i, &(p, l))| (p, l, if signs[i] { coeffs[i] } else { -coeffs[i] }))
            .collect();
        let s = series(&terms);
        let z = log_grid(8.0, 512.0, 96).unwrap();
        let v: Vec<f64> = z.iter().map(|&x| s.eval(x)).collect();
        prop_assume!(v.iter().all(|x| x.abs() > 1e-12));
        let basis: Vec<(f64, u32)> = s.terms.iter().map(|t| (t.power, t.logpow)).collect();
        let out = fit_points(&z, &v, &basis).unwrap();
        for (t, c) in s.terms.iter().zip(&out.coeffs) {
            prop_assert!(rel(*c, t.coeff) < 1e-9, "{:?} got {}", t, c);
        }
    }
}
