use proptest::prelude::*;
use rtrace_core::cache::{CacheOutcome, SpectrumCache};
use rtrace_core::experiment::ModelSpec;
use rtrace_core::spectra::DoubleBc;
use tempfile::TempDir;

fn circle(beta: f64, shift: f64) -> ModelSpec {
    ModelSpec::Cone {
        beta,
        m: 2,
        shift,
        explicit_modes: 48,
    }
}

fn spindle() -> ModelSpec {
    ModelSpec::IteratedCone {
        beta: 0.7,
        m: 2,
        inner_shift: 1.0,
        bc: DoubleBc::NeumannDouble,
        cutoff: 60.0,
    }
}

#[test]
fn iterated_spectrum_has_the_prefix_property() {
    let s = spindle();
    let small = s.build_spectrum(30.0).unwrap();
    let large = s.build_spectrum(60.0).unwrap();
    let cut = large.truncated(30.0);
    assert!(small.len() > 100 && large.len() > small.len());
    assert_eq!(small.entries, cut.entries);
}

#[test]
fn hit_then_prefix_from_memory() {
    let cache = SpectrumCache::in_memory();
    let s = spindle();
    let (family, _) = s.spectrum_key();
    let (a, o) = cache.get_or_build(&family, 60.0, |c| s.build_spectrum(c)).unwrap();
    assert_eq!(o, CacheOutcome::Built);
    let (b, o) = cache.get_or_build(&family, 60.0, |_| panic!("must not rebuild")).unwrap();
    assert_eq!(o, CacheOutcome::Hit);
    assert_eq!(a.to_text(), b.to_text());
    let (p, o) = cache.get_or_build(&family, 30.0, |_| panic!("must not rebuild")).unwrap();
    assert_eq!(o, CacheOutcome::Prefix { from_cutoff: 60.0 });
    let (mut fresh, _) = SpectrumCache::in_memory()
        .get_or_build(&family, 30.0, |c| s.build_spectrum(c))
        .unwrap();
    fresh.builder.clone_from(&p.builder);
    assert_eq!(p.to_text(), fresh.to_text());
}

#[test]
fn larger_request_rebuilds_and_replaces_the_entry() {
    let t = TempDir::new().unwrap();
    let cache = SpectrumCache::open(Some(t.path()));
    assert!(cache.is_persistent());
    let s = circle(0.7, 0.0);
    let (family, _) = s.spectrum_key();
    cache.get_or_build(&family, 20.0, |c| s.build_spectrum(c)).unwrap();
    let (_, o) = cache.get_or_build(&family, 40.0, |c| s.build_spectrum(c)).unwrap();
    assert_eq!(o, CacheOutcome::Built);
    let (_, o) = cache.get_or_build(&family, 20.0, |_| panic!("must not rebuild")).unwrap();
    assert_eq!(o, CacheOutcome::Prefix { from_cutoff: 40.0 });
}

#[test]
fn corrupt_entry_is_rebuilt_and_repaired() {
    let t = TempDir::new().unwrap();
    let cache = SpectrumCache::open(Some(t.path()));
    let s = circle(0.7, 1.0);
    let (family, cutoff) = s.spectrum_key();
    let (good, _) = cache.get_or_build(&family, cutoff, |c| s.build_spectrum(c)).unwrap();
    let path = cache.entry_path(&family).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replacen(",2,", ",4,", 1)).unwrap();
    let (again, o) = cache.get_or_build(&family, cutoff, |c| s.build_spectrum(c)).unwrap();
    assert!(matches!(o, CacheOutcome::Rebuilt { .. }), "{o:?}");
    assert_eq!(good.to_text(), again.to_text());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);

    std::fs::write(&path, "garbage").unwrap();
    let (_, o) = cache.get_or_build(&family, cutoff, |c| s.build_spectrum(c)).unwrap();
    assert!(matches!(o, CacheOutcome::Rebuilt { .. }), "{o:?}");
}

#[test]
fn unwritable_root_warns_and_stays_in_memory() {
    let t = TempDir::new().unwrap();
    let file = t.path().join("plain-file");
    std::fs::write(&file, "x").unwrap();
    let cache = SpectrumCache::open(Some(&file.join("below")));
    assert!(!cache.is_persistent());
    assert_eq!(cache.warnings().len(), 1);
    let s = circle(0.5, 0.0);
    let (family, cutoff) = s.spectrum_key();
    cache.get_or_build(&family, cutoff, |c| s.build_spectrum(c)).unwrap();
    let (_, o) = cache.get_or_build(&family, cutoff, |_| panic!("must not rebuild")).unwrap();
    assert_eq!(o, CacheOutcome::Hit);
}

#[test]
fn families_do_not_collide() {
    let cache = SpectrumCache::in_memory();
    let (a, b) = (circle(0.7, 0.0), circle(0.7, 1.0));
    let (fa, ca) = a.spectrum_key();
    let (fb, cb) = b.spectrum_key();
    assert_ne!(fa, fb);
    let (sa, _) = cache.get_or_build(&fa, ca, |c| a.build_spectrum(c)).unwrap();
    let (sb, o) = cache.get_or_build(&fb, cb, |c| b.build_spectrum(c)).unwrap();
    assert_eq!(o, CacheOutcome::Built);
    assert_ne!(sa.entries, sb.entries);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prefix_served_entries_equal_a_direct_build(
        beta in 0.3f64..2.0,
        shift in 0.0f64..3.0,
        small in 5.0f64..40.0,
        extra in 1.0f64..40.0,
    ) {
        let s = circle(beta, shift);
        let (family, _) = s.spectrum_key();
        let cache = SpectrumCache::in_memory();
        cache.get_or_build(&family, small + extra, |c| s.build_spectrum(c)).unwrap();
        let (p, o) = cache.get_or_build(&family, small, |_| panic!("must not rebuild")).unwrap();
        let is_prefix = matches!(o, CacheOutcome::Prefix { .. });
        prop_assert!(is_prefix);
        let direct = s.build_spectrum(small).unwrap();
        prop_assert!(p.max_nu() < small);
        prop_assert_eq!(p.entries, direct.entries);
    }
}
