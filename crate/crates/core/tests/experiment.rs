use std::f64::consts::PI;

use rtrace_core::cache::SpectrumCache;
use rtrace_core::experiment::{run_experiment_with, ExperimentConfig, ModelSpec};
use rtrace_core::Error;
use tempfile::TempDir;

fn cone_json(out: &str) -> String {
    format!(
        r#"{{"name":"c","model":{{"kind":"cone","beta":0.7,"m":2}},
 "z_grid":{{"min":4,"max":600,"count":96}},
 "fit":{{"orders":5,"max_log":1}},
 "output_dir":{out:?}}}"#
    )
}

fn field_of(e: Error) -> String {
    match e {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn weyl_terms() {
    let cone = ModelSpec::Cone {
        beta: 0.7,
        m: 2,
        shift: 0.0,
        explicit_modes: 48,
    };
    let (p, c) = cone.weyl_term();
    assert_eq!(p, -2.0);
    assert!((c - 0.175).abs() < 1e-15);

    let edge = ModelSpec::Edge {
        beta: 0.7,
        m: 2,
        b: 1,
        length: 4.0,
        shift: 0.0,
        explicit_modes: 48,
    };
    let (p, c) = edge.weyl_term();
    assert_eq!(p, -1.0);
    // (4π)^{-3/2} Γ(1/2) · 4 · 0.7π
    assert!((c - 0.35).abs() < 1e-14);

    let it = ModelSpec::IteratedCone {
        beta: 0.7,
        m: 2,
        inner_shift: 1.0,
        bc: rtrace_core::spectra::DoubleBc::NeumannDouble,
        cutoff: 100.0,
    };
    let (p, c) = it.weyl_term();
    assert_eq!(p, -1.0);
    let expect = 2.0 * PI * 0.7 / 3.0 * (4.0 * PI).powf(-1.5) * PI.sqrt();
    assert!((c - expect).abs() < 1e-15);
    assert!((c - 0.058333333333333).abs() < 1e-12);
    assert_eq!((it.dim(), it.depth()), (3, 2));
}

#[test]
fn iterated_basis_carries_log_squared_only_at_the_apex() {
    let cfg = ExperimentConfig::from_json(
        r#"{"name":"it","model":{"kind":"iterated-cone","beta":0.7,"m":2,"bc":"neumann-double","cutoff":400},
 "z_grid":{"min":4,"max":100,"count":400},
 "fit":{"orders":4,"max_log":2,"window":[8,50],"nuisance_powers":[0]},
 "output_dir":"/tmp/unused"}"#,
    )
    .unwrap();
    let terms = cfg.basis().unwrap().terms;
    for t in [(-1.0, 0), (-2.0, 0), (-3.0, 0), (-4.0, 0), (-3.0, 1), (-4.0, 1), (-4.0, 2), (0.0, 0)] {
        assert!(terms.contains(&t), "{t:?} missing from {terms:?}");
    }
    assert_eq!(terms.iter().filter(|t| t.1 == 2).count(), 1);

    let capped = ExperimentConfig::from_json(&cfg_json_with_max_log(1)).unwrap();
    assert!(capped.basis().unwrap().terms.iter().all(|t| t.1 <= 1));
}

fn cfg_json_with_max_log(l: u32) -> String {
    format!(
        r#"{{"name":"it","model":{{"kind":"iterated-cone","beta":0.7,"m":2,"bc":"neumann-double","cutoff":400}},
 "z_grid":{{"min":4,"max":100,"count":400}},
 "fit":{{"orders":4,"max_log":{l},"window":[8,50]}},
 "output_dir":"/tmp/unused"}}"#
    )
}

#[test]
fn validation_names_the_offending_field() {
    let base = cone_json("/tmp/unused");
    assert!(ExperimentConfig::from_json(&base).is_ok());
    let cases = [
        (base.replace(r#""max_log":1"#, r#""max_log":2"#), "fit.max_log"),
        (base.replace(r#""count":96"#, r#""count":96,"spacing":"linear""#), "z_grid.spacing"),
        (base.replace(r#""max_log":1"#, r#""max_log":1,"window":[2,512]"#), "fit.window"),
        (base.replace(r#""max_log":1"#, r#""max_log":1,"extra_terms":[[-3.0,2]]"#), "fit.terms"),
        (base.replace(r#""beta":0.7"#, r#""beta":-0.7"#), "model.beta"),
        (base.replace(r#""m":2"#, r#""m":1"#), "model.m"),
        (base.replace(r#""count":96"#, r#""count":30"#), "z_grid.count"),
        (base.replace(r#""name":"c","#, r#""name":"c","parallelism":0,"#), "parallelism"),
        (base.replace(r#","m":2"#, ""), "<document>"),
        (base.replace(r#""beta":0.7"#, r#""beta":0.7,"colour":1"#), "<document>"),
        (base.replace(r#""max_log":1"#, r#""max_log":1,"colour":1"#), "<document>"),
    ];
    for (json, field) in cases {
        let e = ExperimentConfig::from_json(&json).expect_err(field);
        assert_eq!(field_of(e), field, "{json}");
    }
}

#[test]
fn cone_run_passes_oracle_and_weyl() {
    let t = TempDir::new().unwrap();
    let cfg = ExperimentConfig::from_json(&cone_json(t.path().join("o").to_str().unwrap())).unwrap();
    let run = run_experiment_with(&cfg, &SpectrumCache::in_memory()).unwrap();
    let r = &run.report;
    assert!(r.pass);
    let o = r.oracle.as_ref().unwrap();
    assert_eq!((o.primary_route.as_str(), o.oracle_route.as_str()), ("closed-form", "eigensum"));
    assert!(o.max_rel_diff < 1e-9);
    assert!(r.weyl.rel_diff < 1e-4, "{:?}", r.weyl);
    // ν = 0 and 1/β lie below the Witt threshold 3/2.
    assert_eq!(r.witt.offending_modes.len(), 2);
    assert!(!r.witt.satisfied && r.witt.offending_modes.iter().all(|m| m.nu <= 1.5));
    assert_eq!(r.ablation.len(), 1);
    assert_eq!(r.files.len(), 4);
}

#[test]
fn edge_run_uses_the_naive_lattice_oracle() {
    let t = TempDir::new().unwrap();
    let json = format!(
        r#"{{"name":"e","model":{{"kind":"edge","beta":0.7,"m":2,"b":1,"length":4.0}},
 "z_grid":{{"min":4,"max":600,"count":120}},
 "fit":{{"orders":5,"max_log":1}},
 "oracle":{{"points":2,"tolerance":1e-6}},
 "output_dir":{:?}}}"#,
        t.path().to_str().unwrap()
    );
    let cfg = ExperimentConfig::from_json(&json).unwrap();
    let run = run_experiment_with(&cfg, &SpectrumCache::in_memory()).unwrap();
    let o = run.report.oracle.as_ref().unwrap();
    assert_eq!((o.primary_route.as_str(), o.oracle_route.as_str()), ("lattice", "naive-lattice"));
    assert!(o.pass, "{o:?}");
    assert!(run.report.weyl.pass, "{:?}", run.report.weyl);
    assert!(t.path().join("samples-lattice.csv").exists());
}

#[test]
fn science_hash_ignores_paths_and_parallelism() {
    let a = ExperimentConfig::from_json(&cone_json("/tmp/a")).unwrap();
    let mut b = ExperimentConfig::from_json(&cone_json("/tmp/b")).unwrap();
    b.parallelism = Some(3);
    b.cache_dir = Some("/tmp/c".into());
    assert_eq!(a.science_hash(), b.science_hash());
    let c = ExperimentConfig::from_json(&cone_json("/tmp/a").replace("0.7", "0.8")).unwrap();
    assert_ne!(a.science_hash(), c.science_hash());
}
