use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn rtrace(args: &[&str], cache_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rtrace"));
    cmd.args(args);
    match cache_env {
        Some(p) => cmd.env("RTRACE_CACHE_DIR", p),
        None => cmd.env_remove("RTRACE_CACHE_DIR"),
    };
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn cone_config(out: &Path, cache: Option<&Path>, modes: u32, parallelism: Option<usize>) -> String {
    let cache = cache.map_or("null".to_string(), |c| format!("{:?}", c.to_str().unwrap()));
    let par = parallelism.map_or("null".to_string(), |p| p.to_string());
    format!(
        r#"{{"name":"cone","model":{{"kind":"cone","beta":0.7,"m":2,"shift":1.0,"explicit_modes":{modes}}},
 "z_grid":{{"min":4,"max":600,"count":96}},
 "fit":{{"orders":5,"max_log":1}},
 "cache_dir":{cache},"output_dir":{:?},"parallelism":{par}}}"#,
        out.to_str().unwrap()
    )
}

fn edge_config(out: &Path, extra: &str, max_log: u32) -> String {
    format!(
        r#"{{"name":"edge","model":{{"kind":"edge","beta":0.7,"m":2,"b":1,"length":4.0}},
 "z_grid":{{"min":4,"max":600,"count":96}},
 "fit":{{"orders":5,"max_log":{max_log},"extra_terms":{extra}}},
 "output_dir":{:?}}}"#,
        out.to_str().unwrap()
    )
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn log_squared_on_a_depth_one_edge_is_a_config_error() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "e.json", &edge_config(&t.path().join("out"), "[[-3.0, 2]]", 1));
    let o = rtrace(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("fit.terms"), "{}", stderr(&o));
    assert!(!t.path().join("out").exists(), "nothing is computed");

    let cfg = write_config(t.path(), "e2.json", &edge_config(&t.path().join("out"), "[]", 2));
    let o = rtrace(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fit.max_log"), "{}", stderr(&o));
}

#[test]
fn missing_m_and_trace_class_violation_are_config_errors() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    let no_m = cone_config(&out, None, 48, None).replace(r#""m":2,"#, "");
    let cfg = write_config(t.path(), "a.json", &no_m);
    let o = rtrace(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing field `m`"), "{}", stderr(&o));

    let m1 = cone_config(&out, None, 48, None).replace(r#""m":2"#, r#""m":1"#);
    let cfg = write_config(t.path(), "b.json", &m1);
    let o = rtrace(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trace-class"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn passing_run_writes_a_hashed_bundle() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    let cfg = write_config(t.path(), "c.json", &cone_config(&out, None, 48, None));
    let o = rtrace(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    for (name, hash) in report["files"].as_object().unwrap() {
        let bytes = fs::read(out.join(name)).unwrap();
        let digest = rtrace_core::spectra::sha256_hex(&bytes);
        assert_eq!(hash.as_str().unwrap(), digest, "{name}");
    }
    for f in ["spectrum.txt", "samples-closed-form.csv", "oracle-eigensum.csv", "fit.json"] {
        assert!(report["files"].get(f).is_some(), "{f}");
    }
    assert_eq!(report["pass"], true);
}

#[test]
fn failed_verification_exits_one() {
    let t = TempDir::new().unwrap();
    let out = t.path().join("out");
    let body = cone_config(&out, None, 48, None).replace(
        r#""fit":{"orders":5,"max_log":1}"#,
        r#""fit":{"orders":5,"max_log":1},"oracle":{"points":3,"tolerance":1e-300}"#,
    );
    let cfg = write_config(t.path(), "c.json", &body);
    let o = rtrace(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(out.join("report.json").exists());
}

#[test]
fn warm_cache_rerun_is_bit_identical() {
    let t = TempDir::new().unwrap();
    let cache = t.path().join("cache");
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let ca = write_config(t.path(), "a.json", &cone_config(&a, Some(&cache), 48, None));
    let cb = write_config(t.path(), "b.json", &cone_config(&b, Some(&cache), 48, None));
    let o1 = rtrace(&["run", ca.to_str().unwrap()], None);
    assert!(stderr(&o1).contains(r#""kind":"built""#), "{}", stderr(&o1));
    let o2 = rtrace(&["run", cb.to_str().unwrap()], None);
    assert!(stderr(&o2).contains(r#""kind":"hit""#), "{}", stderr(&o2));
    assert_eq!(read_outputs(&a), read_outputs(&b));
}

#[test]
fn tampered_cache_entry_is_rebuilt() {
    let t = TempDir::new().unwrap();
    let cache = t.path().join("cache");
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let ca = write_config(t.path(), "a.json", &cone_config(&a, Some(&cache), 48, None));
    let cb = write_config(t.path(), "b.json", &cone_config(&b, Some(&cache), 48, None));
    assert_eq!(rtrace(&["run", ca.to_str().unwrap()], None).status.code(), Some(0));
    let entry = fs::read_dir(cache.join("spectra")).unwrap().next().unwrap().unwrap().path();
    let text = fs::read_to_string(&entry).unwrap();
    let tampered = text.replacen(",2,analytic", ",3,analytic", 1);
    assert_ne!(text, tampered);
    fs::write(&entry, tampered).unwrap();
    let o = rtrace(&["run", cb.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("rebuilt"), "{}", stderr(&o));
    assert_eq!(read_outputs(&a), read_outputs(&b));
    assert_eq!(fs::read_to_string(&entry).unwrap(), text, "entry repaired");
}

#[test]
fn smaller_cutoff_is_served_from_a_larger_entry() {
    let t = TempDir::new().unwrap();
    let cache = t.path().join("cache");
    let big = write_config(t.path(), "big.json", &cone_config(&t.path().join("big"), Some(&cache), 80, None));
    assert_eq!(rtrace(&["run", big.to_str().unwrap()], None).status.code(), Some(0));
    let (p, f) = (t.path().join("prefix"), t.path().join("fresh"));
    let cp = write_config(t.path(), "p.json", &cone_config(&p, Some(&cache), 40, None));
    let cf = write_config(t.path(), "f.json", &cone_config(&f, None, 40, None));
    let o = rtrace(&["run", cp.to_str().unwrap()], None);
    assert!(stderr(&o).contains(r#""kind":"prefix""#), "{}", stderr(&o));
    assert_eq!(rtrace(&["run", cf.to_str().unwrap()], None).status.code(), Some(0));
    assert_eq!(read_outputs(&p), read_outputs(&f));
}

#[test]
fn cache_root_env_var_overrides_the_config() {
    let t = TempDir::new().unwrap();
    let env_cache = t.path().join("env-cache");
    let cfg = write_config(t.path(), "c.json", &cone_config(&t.path().join("out"), None, 48, None));
    assert_eq!(rtrace(&["run", cfg.to_str().unwrap()], Some(&env_cache)).status.code(), Some(0));
    assert_eq!(fs::read_dir(env_cache.join("spectra")).unwrap().count(), 1);
}

#[test]
fn unwritable_cache_falls_back_to_memory_with_a_warning() {
    let t = TempDir::new().unwrap();
    let blocker = t.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    let ca = write_config(t.path(), "a.json", &cone_config(&a, Some(&blocker.join("cache")), 48, None));
    let cb = write_config(t.path(), "b.json", &cone_config(&b, None, 48, None));
    let o = rtrace(&["run", ca.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning: cache directory"), "{}", stderr(&o));
    assert_eq!(rtrace(&["run", cb.to_str().unwrap()], None).status.code(), Some(0));
    assert_eq!(read_outputs(&a), read_outputs(&b));
}

#[test]
fn reports_do_not_depend_on_parallelism() {
    let t = TempDir::new().unwrap();
    let (a, b) = (t.path().join("one"), t.path().join("many"));
    let ca = write_config(t.path(), "a.json", &cone_config(&a, None, 48, Some(1)));
    let cb = write_config(t.path(), "b.json", &cone_config(&b, None, 48, Some(6)));
    assert_eq!(rtrace(&["run", ca.to_str().unwrap()], None).status.code(), Some(0));
    assert_eq!(rtrace(&["run", cb.to_str().unwrap()], None).status.code(), Some(0));
    assert_eq!(read_outputs(&a), read_outputs(&b));
}

#[test]
fn verify_sal_passes_on_a_separable_symbol() {
    let t = TempDir::new().unwrap();
    let report = t.path().join("sal.json");
    let body = format!(
        r#"{{"symbol":{{"components":[{{"x":{{"kind":"poly-on-unit","coeffs":[1.0,0.0,-1.0]}},
   "zeta":{{"kind":"rational-square","power":1}}}}]}},
 "power_min":-4.0,
 "z_grid":[100,158.5,251.2,398.1,631,1000],
 "output":{:?}}}"#,
        report.to_str().unwrap()
    );
    let cfg = write_config(t.path(), "s.json", &body);
    let o = rtrace(&["verify-sal", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(report).unwrap()).unwrap();
    assert!(v["orders"].as_array().unwrap().len() >= 2);
    assert!(v["rejection"].is_null());
}

#[test]
fn verify_sal_rejects_a_bad_symbol_config() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "s.json", r#"{"symbol":{"components":[]},"power_min":-3,"z_grid":[10,20,40]}"#);
    assert_eq!(rtrace(&["verify-sal", cfg.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn dump_special_writes_a_csv_table() {
    let t = TempDir::new().unwrap();
    let table = t.path().join("t.csv");
    let body = format!(
        r#"{{"function":"bessel-i","nu":[0.0,2.5],"x":[0.5,3.0,40.0],"output":{:?}}}"#,
        table.to_str().unwrap()
    );
    let cfg = write_config(t.path(), "d.json", &body);
    let o = rtrace(&["dump-special", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "nu,x,value");
    assert_eq!(lines.len(), 7);
    // I_0(0.5) = 1.0634833707413236
    let v: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((v - 1.0634833707413236).abs() < 1e-14);

    let bad = write_config(t.path(), "bad.json", r#"{"function":"bessel-k","nu":[-1.0],"x":[1.0]}"#);
    assert_eq!(rtrace(&["dump-special", bad.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn too_few_samples_for_the_basis_is_a_config_error() {
    let t = TempDir::new().unwrap();
    let body = cone_config(&t.path().join("out"), None, 48, None).replace(r#""count":96"#, r#""count":40"#);
    let cfg = write_config(t.path(), "c.json", &body);
    let o = rtrace(&["run", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("z_grid.count"), "{}", stderr(&o));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["cone.json", "edge.json", "spindle.json"] {
        rtrace_core::experiment::ExperimentConfig::load(&dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let o = rtrace(&["verify-sal", dir.join("sal.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = rtrace(&["dump-special", dir.join("bessel-table.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 17);
}
