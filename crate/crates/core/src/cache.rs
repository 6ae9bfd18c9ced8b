//! Content-addressed spectrum cache. One file per spectrum family holds the
//! largest ν-cutoff computed so far; smaller cutoffs are served as prefixes.
//! Entries carry a SHA-256 of their body and are rebuilt when it does not
//! match. An unwritable root degrades to an in-memory map with a warning.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::write_atomic;
use crate::spectra::{fmt17, sha256_hex, CrossSectionSpectrum};

/// How a spectrum request was served.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CacheOutcome {
    Built,
    Hit,
    /// Truncated from an entry with a larger cutoff.
    Prefix { from_cutoff: f64 },
    /// The stored entry failed its hash check or did not parse.
    Rebuilt { reason: String },
}

#[derive(Debug)]
pub struct SpectrumCache {
    root: Option<PathBuf>,
    memory: Mutex<BTreeMap<String, String>>,
    warnings: Mutex<Vec<String>>,
}

impl SpectrumCache {
    /// Uses `root` when it can be created and written, memory otherwise.
    pub fn open(root: Option<&Path>) -> Self {
        let cache = SpectrumCache::in_memory();
        let Some(root) = root else {
            return cache;
        };
        let dir = root.join("spectra");
        let probe = dir.join(".probe");
        match fs::create_dir_all(&dir).and_then(|_| fs::write(&probe, b"ok")) {
            Ok(()) => {
                let _ = fs::remove_file(&probe);
                SpectrumCache {
                    root: Some(dir),
                    ..cache
                }
            }
            Err(e) => {
                cache.warn(format!(
                    "cache directory {} is not writable ({e}); using an in-memory cache",
                    root.display()
                ));
                cache
            }
        }
    }

    pub fn in_memory() -> Self {
        SpectrumCache {
            root: None,
            memory: Mutex::new(BTreeMap::new()),
            warnings: Mutex::new(Vec::new()),
        }
    }

    pub fn is_persistent(&self) -> bool {
        self.root.is_some()
    }

    pub fn warnings(&self) -> Vec<String> {
        self.warnings.lock().expect("unpoisoned").clone()
    }

    fn warn(&self, w: String) {
        self.warnings.lock().expect("unpoisoned").push(w);
    }

    /// Path of the entry for `family`, if persistent.
    pub fn entry_path(&self, family: &str) -> Option<PathBuf> {
        self.root
            .as_ref()
            .map(|d| d.join(format!("{}.txt", sha256_hex(family.as_bytes()))))
    }

    fn load(&self, family: &str) -> Option<String> {
        match self.entry_path(family) {
            Some(p) => fs::read_to_string(p).ok(),
            None => self.memory.lock().expect("unpoisoned").get(family).cloned(),
        }
    }

    fn store(&self, family: &str, text: String) {
        match self.entry_path(family) {
            Some(p) => {
                if let Err(e) = write_atomic(&p, text.as_bytes()) {
                    self.warn(format!("cache write to {} failed: {e}", p.display()));
                    self.memory.lock().expect("unpoisoned").insert(family.to_string(), text);
                }
            }
            None => {
                self.memory.lock().expect("unpoisoned").insert(family.to_string(), text);
            }
        }
    }

    /// The spectrum of `family` with entries ν < `cutoff`. `build` computes
    /// it from scratch; its entries below any smaller cutoff must not depend
    /// on `cutoff` (the prefix property of sorted spectra). The returned
    /// builder string is `family;cutoff=…` on every path.
    pub fn get_or_build<F>(&self, family: &str, cutoff: f64, build: F) -> Result<(CrossSectionSpectrum, CacheOutcome)>
    where
        F: FnOnce(f64) -> Result<CrossSectionSpectrum>,
    {
        let label = |c: f64| format!("{family};cutoff={}", fmt17(c));
        let mut outcome = CacheOutcome::Built;
        if let Some(text) = self.load(family) {
            match CrossSectionSpectrum::from_text(&text) {
                Ok(stored) => {
                    let stored_cutoff = stored
                        .builder
                        .rsplit_once(";cutoff=")
                        .filter(|(f, _)| *f == family)
                        .and_then(|(_, c)| c.parse::<f64>().ok());
                    match stored_cutoff {
                        Some(c) if c == cutoff => return Ok((stored, CacheOutcome::Hit)),
                        Some(c) if c > cutoff => {
                            let mut s = stored.truncated(cutoff);
                            s.builder = label(cutoff);
                            return Ok((s, CacheOutcome::Prefix { from_cutoff: c }));
                        }
                        Some(_) => {}
                        None => {
                            outcome = CacheOutcome::Rebuilt {
                                reason: "entry belongs to another family".into(),
                            }
                        }
                    }
                }
                Err(e) => outcome = CacheOutcome::Rebuilt { reason: e.to_string() },
            }
        }
        let mut s = build(cutoff)?;
        s.builder = label(cutoff);
        self.store(family, s.to_text());
        Ok((s, outcome))
    }
}
