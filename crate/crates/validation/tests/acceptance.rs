//! Acceptance criteria 1-10. Every criterion runs, prints one verdict line
//! and the binary fails if any criterion fails. Thresholds are literal.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rtrace_core::cache::SpectrumCache;
use rtrace_core::cone::{
    cone_trace, eigensum_zeros, log_grid, mode_trace, offdiag_decay_probe, sample_cone_trace, ConeProblem, Route,
};
use rtrace_core::edge::{sample_edge_trace, EdgeProblem};
use rtrace_core::experiment::{run_experiment_with, ExperimentConfig, ModelSpec};
use rtrace_core::fit::{fit_expansion, stability_probe, FitBasis};
use rtrace_core::sal::{regularized_integral, verify_sal, SalOrders, SeparableComponent, SymbolSpec, XProfile, ZetaProfile};
use rtrace_core::special::gamma::{gamma, ln_gamma};
use rtrace_core::special::{
    baricz_ratio_bounds, composite_bound, ik_scaled_ln_recurrence, ln_bessel_i, ln_bessel_k, olver_uniform_scaled_ln,
    OlverKind,
};
use rtrace_core::spectra::DoubleBc;

type Verdict = (bool, String);

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst_mode: f64 = 0.0;
    for &nu in &[0.5, 1.7, 3.2, 7.0] {
        for &z in &[1.0, 5.0, 25.0] {
            worst_mode = worst_mode.max(rel(mode_trace(nu, z).unwrap(), eigensum_zeros(nu, z, 1.0).unwrap()));
        }
    }
    let p = ConeProblem::circle(0.7, 0.0, 2, 48).unwrap();
    let mut worst_cone: f64 = 0.0;
    for z in log_grid(8.0, 512.0, 7).unwrap() {
        let e = cone_trace(&p, z, Route::Eigensum).unwrap().value;
        for route in [Route::Kernel, Route::ClosedForm] {
            worst_cone = worst_cone.max(rel(cone_trace(&p, z, route).unwrap().value, e));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst_mode <= 1e-8 && worst_cone <= 1e-6 && secs <= 120.0,
        format!("mode kernel vs zeros max rel {worst_mode:.2e} (<= 1e-8); cone routes on [8,512] max rel {worst_cone:.2e} (<= 1e-6); {secs:.1} s"),
    )
}

fn criterion_2() -> Verdict {
    let p = ConeProblem::circle(0.7, 0.0, 2, 48).unwrap();
    let samples = sample_cone_trace(&p, &log_grid(8.0, 512.0, 64).unwrap(), Route::Eigensum).unwrap();
    let basis = FitBasis::new(vec![(-2.0, 0), (-3.0, 0), (-4.0, 0), (-5.0, 0)], (8.0, 512.0), 12).unwrap();
    let c = fit_expansion(&samples, &basis).unwrap().coeff(-2.0, 0).unwrap();
    let r = rel(c, 0.7 / 4.0);
    (r <= 0.01, format!("z^-2 coefficient {c:.6} vs 0.175, rel {r:.2e} (<= 1e-2)"))
}

fn edge_samples() -> rtrace_core::cone::TraceSamples {
    let p = EdgeProblem::new(ConeProblem::circle(0.7, 1.0, 2, 48).unwrap(), 1, 4.0).unwrap();
    sample_edge_trace(&p, &log_grid(8.0, 512.0, 120).unwrap()).unwrap()
}

fn powers(ps: &[f64]) -> Vec<(f64, u32)> {
    ps.iter().map(|&p| (p, 0)).collect()
}

fn criterion_3(samples: &rtrace_core::cone::TraceSamples) -> Verdict {
    let mut terms = powers(&[-1.0, -2.0, -3.0, -4.0, -5.0]);
    terms.push((-3.0, 1));
    let basis = FitBasis::new(terms, (8.0, 512.0), 12).unwrap();
    let c = fit_expansion(samples, &basis).unwrap().coeff(-1.0, 0).unwrap();
    let want = (4.0 * PI).powf(-1.5) * gamma(0.5) * 4.0 * PI * 0.7;
    let r = rel(c, want);
    (r <= 0.02, format!("z^-1 coefficient {c:.6} vs {want:.6}, rel {r:.2e} (<= 2e-2)"))
}

fn criterion_4(samples: &rtrace_core::cone::TraceSamples) -> Verdict {
    let window = (8.0, 512.0);
    let pure = FitBasis::new(powers(&[-1.0, -2.0, -3.0, -4.0, -5.0]), window, 12).unwrap();
    let with_log = pure.with_term((-3.0, 1)).unwrap();
    let r_pure = fit_expansion(samples, &pure).unwrap().diagnostics.residual_norm.unwrap();
    let r_log = fit_expansion(samples, &with_log).unwrap().diagnostics.residual_norm.unwrap();
    let drift = stability_probe(samples, &with_log, 2, 0.05).unwrap();
    let log_drift = drift.term(-3.0, 1).unwrap().drift;
    let with_log2 = with_log.with_term((-3.0, 2)).unwrap();
    let d2 = stability_probe(samples, &with_log2, 2, 0.05).unwrap();
    let log2 = d2.term(-3.0, 2).unwrap();
    let pass = r_log < r_pure && log_drift < 0.05 && !log2.detected;
    (
        pass,
        format!(
            "residual {r_pure:.2e} -> {r_log:.2e} with z^-3 log z; log drift {:.2}% (< 5%); log^2 drift {:.2} detected={}",
            100.0 * log_drift,
            log2.drift,
            log2.detected
        ),
    )
}

/// Log² fit on the spindle cone: (coefficient, residual with, residual without).
fn spindle_fit(problem: &ConeProblem, window: (f64, f64)) -> (f64, f64, f64) {
    let samples = sample_cone_trace(problem, &log_grid(window.0, window.1, 160).unwrap(), Route::ClosedForm).unwrap();
    let mut terms = powers(&[-1.0, -2.0, -3.0, -4.0, -5.0, -6.0, 0.0, 2.0, 4.0]);
    terms.extend([(-3.0, 1), (-4.0, 1), (-4.0, 2)]);
    let basis = FitBasis::new(terms, window, 12).unwrap();
    let full = fit_expansion(&samples, &basis).unwrap();
    let reduced = fit_expansion(&samples, &basis.without_term((-4.0, 2)).unwrap()).unwrap();
    (
        full.coeff(-4.0, 2).unwrap(),
        full.diagnostics.residual_norm.unwrap(),
        reduced.diagnostics.residual_norm.unwrap(),
    )
}

fn criterion_5() -> Verdict {
    let spec = ModelSpec::IteratedCone {
        beta: 0.7,
        m: 2,
        inner_shift: 1.0,
        bc: DoubleBc::NeumannDouble,
        cutoff: 800.0,
    };
    let full = spec.build_spectrum(800.0).unwrap();
    let p400 = ConeProblem::new(full.truncated(400.0), 2).unwrap();
    let p800 = ConeProblem::new(full, 2).unwrap();
    let base = spindle_fit(&p400, (8.0, 50.0));
    let doubled = spindle_fit(&p800, (8.0, 50.0));
    let shifted = spindle_fit(&p800, (10.0, 62.5));
    let reduces = [base, doubled, shifted].iter().all(|f| f.1 < f.2);
    let d_cut = rel(doubled.0, base.0);
    let d_win = rel(shifted.0, doubled.0);
    (
        reduces && d_cut <= 0.2 && d_win <= 0.2,
        format!(
            "z^-4 log^2 coefficient {:.4} (cutoff 400, [8,50]), {:.4} (cutoff 800), {:.4} (cutoff 800, [10,62.5]); \
             residual reduced in all fits: {reduces}; drift under cutoff doubling {:.1}%, under window shift {:.1}% (<= 20%)",
            base.0,
            doubled.0,
            shifted.0,
            100.0 * d_cut,
            100.0 * d_win
        ),
    )
}

fn criterion_6() -> Verdict {
    let grid: Vec<f64> = (4..=9).map(|k| 2f64.powi(k)).collect();
    let slopes: Vec<f64> = [2.0, 3.0, 5.0, 10.0, 20.0]
        .iter()
        .map(|&nu| offdiag_decay_probe(nu, &grid, (0.6, 1.0), (0.0, 0.3)).unwrap())
        .collect();
    let worst = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (
        worst <= -6.0,
        format!("off-diagonal log-log slopes for nu in {{2,3,5,10,20}}: max {worst:.2} (<= -6)"),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = StdRng::seed_from_u64(7);
    let mut bound_failures = 0;
    for _ in 0..10_000 {
        let nu = rng.random_range(1e-6..20.0);
        let y = rng.random_range(1e-3..1.0);
        let x = y + rng.random_range(1e-6..2.0);
        let z = rng.random_range(1e-3..50.0);
        let b = baricz_ratio_bounds(nu, x, y, z).unwrap();
        if !(b.exponential && b.power && composite_bound(nu, x, y, z).unwrap()) {
            bound_failures += 1;
        }
    }
    let mut worst_w: f64 = 0.0;
    for _ in 0..10_000 {
        let nu = rng.random_range(0.0..200.0);
        let x = 10f64.powf(rng.random_range(-2.0..2.845));
        let ik = |n: f64| (ln_bessel_i(n, x).unwrap() - x, ln_bessel_k(n, x).unwrap() + x);
        let (a, b) = ik(nu);
        let (c, d) = ik(nu + 1.0);
        // x (I_ν K_{ν+1} + I_{ν+1} K_ν) = 1
        worst_w = worst_w.max((x * ((a + d).exp() + (c + b).exp()) - 1.0).abs());
    }
    (
        bound_failures == 0 && worst_w <= 1e-10,
        format!("ratio and composite bounds: {bound_failures} failures in 10^4 samples; Wronskian max error {worst_w:.2e} (<= 1e-10)"),
    )
}

fn olver_sup_error(kind: OlverKind, nu: f64, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&t| {
            let (li, lk) = ik_scaled_ln_recurrence(nu, nu * t).unwrap();
            let reference = if kind == OlverKind::I { li } else { lk };
            (olver_uniform_scaled_ln(kind, nu, t, 4).unwrap() - reference).exp_m1().abs()
        })
        .fold(0.0, f64::max)
}

fn criterion_8() -> Verdict {
    let grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 60.0)).collect();
    let ratio = |kind| olver_sup_error(kind, 20.0, &grid) / olver_sup_error(kind, 40.0, &grid);
    let (ri, rk) = (ratio(OlverKind::I), ratio(OlverKind::K));
    (
        ri >= 16.0 && rk >= 16.0,
        format!("4-term sup error ratio nu 20 -> 40 over t in [0.01,100]: I {ri:.2}, K {rk:.2} (>= 16)"),
    )
}

fn criterion_9() -> Verdict {
    let spec = SymbolSpec {
        components: vec![SeparableComponent {
            weight: 1.0,
            x: XProfile::Exp { rate: 1.0 },
            zeta: ZetaProfile::RationalSquare { power: 2 },
            zeta_scale: 1.0,
        }],
    };
    let orders = SalOrders::through(-5.0);
    let grid: Vec<f64> = (0..=10).map(|i| 100.0 * 10f64.powf(i as f64 / 10.0)).collect();
    let v = verify_sal(&spec.provider_for(orders).unwrap(), orders, &grid);
    let slopes: Vec<(f64, f64)> = v.orders.iter().take(4).map(|o| (o.slope.unwrap_or(f64::NAN), o.next_power)).collect();
    let slopes_ok = v.rejection.is_none() && slopes.len() == 4 && slopes.iter().all(|(s, n)| (s - n).abs() <= 0.2);

    let mut rng = StdRng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let b = rng.random_range(-0.8..2.0);
        let (got, want) = if i % 2 == 0 {
            // ∫ ζ^b (1+ζ)^{-c} = B(b+1, c−b−1)
            let c = b + 1.0 + rng.random_range(0.3..2.5);
            let got = regularized_integral(|z| z.powf(b) * (1.0 + z).powf(-c), &[], b - c).unwrap();
            (got, (ln_gamma(b + 1.0) + ln_gamma(c - b - 1.0) - ln_gamma(c)).exp())
        } else {
            // ∫ e^{-aζ} ζ^b = Γ(b+1)/a^{b+1}
            let a: f64 = rng.random_range(0.5..3.0);
            let got = regularized_integral(|z| (-a * z).exp() * z.powf(b), &[], f64::NEG_INFINITY).unwrap();
            (got, (ln_gamma(b + 1.0) - (b + 1.0) * a.ln()).exp())
        };
        worst = worst.max(rel(got, want));
    }
    let shown: Vec<String> = slopes.iter().map(|(s, n)| format!("{s:.2}/{n}")).collect();
    (
        slopes_ok && worst <= 1e-9,
        format!(
            "remainder slope/next exponent {} (within 0.2); regularized integrals on 20 functions max rel {worst:.2e} (<= 1e-9)",
            shown.join(", ")
        ),
    )
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn criterion_10() -> Verdict {
    let t = tempfile::TempDir::new().unwrap();
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get().max(4));
    let run = |par: usize| {
        let out = t.path().join(format!("p{par}"));
        let json = format!(
            r#"{{"name":"det","model":{{"kind":"edge","beta":0.7,"m":2,"b":1,"length":4.0,"shift":1.0}},
 "z_grid":{{"min":4,"max":600,"count":120}},
 "fit":{{"orders":5,"max_log":1}},
 "output_dir":{:?},"parallelism":{par}}}"#,
            out.to_str().unwrap()
        );
        let cfg = ExperimentConfig::from_json(&json).unwrap();
        run_experiment_with(&cfg, &SpectrumCache::in_memory()).unwrap();
        read_dir_bytes(&out)
    };
    let (one, many) = (run(1), run(workers));
    let identical = one == many;
    (
        identical,
        format!("edge experiment bundle ({} files) at parallelism 1 vs {workers}: byte-identical={identical}", one.len()),
    )
}

fn main() {
    let edge = edge_samples();
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Verdict + '_>)> = vec![
        (1, "oracle equivalence (cone)", Box::new(criterion_1)),
        (2, "Weyl term (cone)", Box::new(criterion_2)),
        (3, "Weyl term (edge)", Box::new(|| criterion_3(&edge))),
        (4, "expansion structure, depth 1", Box::new(|| criterion_4(&edge))),
        (5, "expansion structure, depth 2", Box::new(criterion_5)),
        (6, "off-diagonal decay", Box::new(criterion_6)),
        (7, "Bessel inequalities", Box::new(criterion_7)),
        (8, "Olver uniformity", Box::new(criterion_8)),
        (9, "SAL engine", Box::new(criterion_9)),
        (10, "determinism", Box::new(criterion_10)),
    ];
    let mut failed = Vec::new();
    for (n, name, check) in &criteria {
        let (pass, detail) = check();
        println!("criterion {n:>2} {}: {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(*n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
