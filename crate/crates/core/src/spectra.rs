//! Cross-section spectra {ν} of the tangential operator A, the Witt margin
//! check, and a line-oriented persistence format.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::special::{bessel_j_zeros_resolved, robin_zeros_up_to};

/// Witt threshold on ν (A = ν² > 9/4).
pub const WITT_NU: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumSource {
    Analytic,
    Computed,
    UserSupplied,
}

impl SpectrumSource {
    fn tag(self) -> &'static str {
        match self {
            SpectrumSource::Analytic => "analytic",
            SpectrumSource::Computed => "computed",
            SpectrumSource::UserSupplied => "user-supplied",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(SpectrumSource::Analytic),
            "computed" => Ok(SpectrumSource::Computed),
            "user-supplied" => Ok(SpectrumSource::UserSupplied),
            other => Err(Error::Format(format!("unknown spectrum source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub nu: f64,
    pub mult: u32,
}

/// Spectral data of A as (ν, multiplicity) pairs sorted by ν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionSpectrum {
    pub entries: Vec<SpectrumEntry>,
    pub source: SpectrumSource,
    pub f_dim: u32,
    /// Builder parameters in canonical `key=value;...` form.
    pub builder: String,
}

/// Gluing rule for the double of a truncated cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoubleBc {
    /// Two Dirichlet cones: only the modes odd under the reflection.
    DirichletDouble,
    /// The closed double: odd modes and the even (Neumann-type) modes.
    NeumannDouble,
}

/// Block of the form-degree shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormBlock {
    /// ω_ℓ block: (ℓ − (f+1)/2)².
    Omega,
    /// dx∧ω_{ℓ−1} block: (ℓ − (f+3)/2)².
    DxOmega,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WittReport {
    pub margin: f64,
    pub satisfied: bool,
    pub offending_modes: Vec<SpectrumEntry>,
}

impl CrossSectionSpectrum {
    /// Sorts by ν, merges exact duplicates and validates.
    pub fn new(
        mut entries: Vec<SpectrumEntry>,
        source: SpectrumSource,
        f_dim: u32,
        builder: String,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Precondition("spectrum must be nonempty".into()));
        }
        for e in &entries {
            if !(e.nu >= 0.0 && e.nu.is_finite()) || e.mult == 0 {
                return Err(Error::Domain(format!(
                    "invalid spectrum entry nu={}, mult={}",
                    e.nu, e.mult
                )));
            }
        }
        entries.sort_by(|a, b| a.nu.total_cmp(&b.nu));
        let mut merged: Vec<SpectrumEntry> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.nu == e.nu => last.mult += e.mult,
                _ => merged.push(e),
            }
        }
        Ok(CrossSectionSpectrum {
            entries: merged,
            source,
            f_dim,
            builder,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_nu(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.nu)
    }

    /// Total multiplicity of entries with ν ≤ `nu`.
    pub fn counting(&self, nu: f64) -> u64 {
        self.entries
            .iter()
            .take_while(|e| e.nu <= nu)
            .map(|e| e.mult as u64)
            .sum()
    }

    /// Entries with ν < `cutoff`.
    pub fn truncated(&self, cutoff: f64) -> CrossSectionSpectrum {
        CrossSectionSpectrum {
            entries: self.entries.iter().copied().filter(|e| e.nu < cutoff).collect(),
            source: self.source,
            f_dim: self.f_dim,
            builder: format!("{};truncate={}", self.builder, fmt17(cutoff)),
        }
    }

    /// Coefficient C of the fitted Weyl law N(ν) ≈ C ν^{f_dim}, by least
    /// squares over the upper half of the ν range.
    pub fn weyl_coefficient(&self) -> f64 {
        let top = self.max_nu();
        let f = self.f_dim as i32;
        let mut count = 0u64;
        let (mut num, mut den) = (0.0, 0.0);
        for e in &self.entries {
            count += e.mult as u64;
            if e.nu >= 0.5 * top && e.nu > 0.0 {
                let basis = e.nu.powi(f);
                num += basis * count as f64;
                den += basis * basis;
            }
        }
        num / den
    }

    /// Canonical text form: header comments, then `nu,mult,source` rows.
    pub fn to_text(&self) -> String {
        let body = self.body_text();
        let mut out = String::new();
        let _ = writeln!(out, "# f_dim={}", self.f_dim);
        let _ = writeln!(out, "# builder={}", self.builder);
        let _ = writeln!(out, "# sha256={}", sha256_hex(body.as_bytes()));
        out.push_str(&body);
        out
    }

    fn body_text(&self) -> String {
        let mut body = String::with_capacity(40 * self.entries.len());
        for e in &self.entries {
            let _ = writeln!(body, "{},{},{}", fmt17(e.nu), e.mult, self.source.tag());
        }
        body
    }

    /// Hash of the canonical body.
    pub fn content_hash(&self) -> String {
        sha256_hex(self.body_text().as_bytes())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut f_dim = None;
        let mut builder = None;
        let mut hash = None;
        let mut body = String::new();
        let mut entries = Vec::new();
        let mut source = None;
        for line in text.lines() {
            if let Some(h) = line.strip_prefix("# ") {
                let (k, v) = h
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("bad header line {line:?}")))?;
                match k {
                    "f_dim" => {
                        f_dim = Some(
                            v.parse::<u32>()
                                .map_err(|e| Error::Format(format!("f_dim: {e}")))?,
                        )
                    }
                    "builder" => builder = Some(v.to_string()),
                    "sha256" => hash = Some(v.to_string()),
                    _ => return Err(Error::Format(format!("unknown header {k:?}"))),
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            body.push_str(line);
            body.push('\n');
            let mut parts = line.split(',');
            let (Some(nu), Some(mult), Some(src), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Format(format!("bad spectrum row {line:?}")));
            };
            let nu: f64 = nu
                .parse()
                .map_err(|e| Error::Format(format!("nu {nu:?}: {e}")))?;
            let mult: u32 = mult
                .parse()
                .map_err(|e| Error::Format(format!("mult {mult:?}: {e}")))?;
            let src = SpectrumSource::parse(src)?;
            if source.is_some_and(|s| s != src) {
                return Err(Error::Format("mixed sources in one spectrum".into()));
            }
            source = Some(src);
            entries.push(SpectrumEntry { nu, mult });
        }
        let expected = hash.ok_or_else(|| Error::Format("missing sha256 header".into()))?;
        if sha256_hex(body.as_bytes()) != expected {
            return Err(Error::Format("spectrum content hash mismatch".into()));
        }
        let spec = CrossSectionSpectrum {
            entries,
            source: source.ok_or_else(|| Error::Format("empty spectrum".into()))?,
            f_dim: f_dim.ok_or_else(|| Error::Format("missing f_dim header".into()))?,
            builder: builder.ok_or_else(|| Error::Format("missing builder header".into()))?,
        };
        if spec.entries.windows(2).any(|w| w[0].nu >= w[1].nu) {
            return Err(Error::Format("spectrum rows not strictly ascending".into()));
        }
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Shortest decimal with 17 significant digits; parses back bit-exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// ν_n = |n|/β for |n| ≤ cutoff; multiplicity 2 for n ≥ 1.
pub fn circle_scalar_spectrum(beta: f64, cutoff: u32) -> Result<CrossSectionSpectrum> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if cutoff < 1 {
        return Err(Error::Domain("cutoff must be >= 1".into()));
    }
    let entries = (0..=cutoff)
        .map(|n| SpectrumEntry {
            nu: n as f64 / beta,
            mult: if n == 0 { 1 } else { 2 },
        })
        .collect();
    CrossSectionSpectrum::new(
        entries,
        SpectrumSource::Analytic,
        1,
        format!("circle;beta={};cutoff={cutoff}", fmt17(beta)),
    )
}

/// Scalar shift of the form-degree block, (ℓ−(f+1)/2)² or (ℓ−(f+3)/2)².
pub fn scalar_a_shift(ell: u32, f: u32, block: FormBlock) -> Result<f64> {
    if ell > f {
        return Err(Error::Domain(format!("need 0 <= ell <= f, got ell={ell}, f={f}")));
    }
    let centre = match block {
        FormBlock::Omega => (f as f64 + 1.0) / 2.0,
        FormBlock::DxOmega => (f as f64 + 3.0) / 2.0,
    };
    let d = ell as f64 - centre;
    Ok(d * d)
}

/// ν → √(ν² + c) for every entry.
pub fn shift_spectrum(s: &CrossSectionSpectrum, c: f64) -> Result<CrossSectionSpectrum> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("shift must be >= 0, got {c}")));
    }
    let entries = s
        .entries
        .iter()
        .map(|e| SpectrumEntry {
            nu: (e.nu * e.nu + c).sqrt(),
            mult: e.mult,
        })
        .collect();
    CrossSectionSpectrum::new(
        entries,
        s.source,
        s.f_dim,
        format!("{};shift={}", s.builder, fmt17(c)),
    )
}

/// Spectrum of the cone over the double of the truncated cone over `inner`:
/// outer ν' = √(μ + ((f+1)/2)²) with f = inner.f_dim + 1, where μ runs over
/// the squared roots of the odd (J_ν = 0) and, for the closed double, even
/// (J_ν/2 + xJ_ν' = 0) conditions. Entries with ν' < `cutoff` are kept.
pub fn iterated_cone_spectrum(
    inner: &CrossSectionSpectrum,
    bc: DoubleBc,
    cutoff: f64,
) -> Result<CrossSectionSpectrum> {
    iterated_cone_spectrum_resolved(inner, bc, cutoff, 1)
}

/// As [`iterated_cone_spectrum`] with the root-finder marching refined by
/// `resolution`.
pub fn iterated_cone_spectrum_resolved(
    inner: &CrossSectionSpectrum,
    bc: DoubleBc,
    cutoff: f64,
    resolution: u32,
) -> Result<CrossSectionSpectrum> {
    if inner.is_empty() {
        return Err(Error::Precondition("inner spectrum must be nonempty".into()));
    }
    if !(cutoff >= 1.0 && cutoff.is_finite()) {
        return Err(Error::Domain(format!("cutoff must be >= 1, got {cutoff}")));
    }
    let f_outer = inner.f_dim + 1;
    let shift = scalar_a_shift(0, f_outer, FormBlock::Omega)?;
    let root_max = (cutoff * cutoff - shift).max(0.0).sqrt();
    let per_mode: Vec<Vec<SpectrumEntry>> = inner
        .entries
        .par_iter()
        .filter(|e| e.nu < root_max)
        .map(|e| {
            let j = zeros_past(e.nu, root_max, resolution)?;
            let mut roots: Vec<f64> = j.iter().copied().filter(|&x| x <= root_max).collect();
            if bc == DoubleBc::NeumannDouble {
                roots.extend(robin_zeros_up_to(e.nu, root_max, &j)?);
            }
            Ok(roots
                .into_iter()
                .map(|r| SpectrumEntry {
                    nu: (r * r + shift).sqrt(),
                    mult: e.mult,
                })
                .filter(|x| x.nu < cutoff)
                .collect())
        })
        .collect::<Result<_>>()?;
    let bc_tag = match bc {
        DoubleBc::DirichletDouble => "dirichlet-double",
        DoubleBc::NeumannDouble => "neumann-double",
    };
    CrossSectionSpectrum::new(
        per_mode.into_iter().flatten().collect(),
        SpectrumSource::Computed,
        f_outer,
        format!(
            "iterated[{}];bc={bc_tag};cutoff={}",
            inner.builder,
            fmt17(cutoff)
        ),
    )
}

/// Zeros of J_ν up to and including the first one beyond `xmax`.
fn zeros_past(nu: f64, xmax: f64, resolution: u32) -> Result<Vec<f64>> {
    let mut reach = xmax.max(nu) + 8.0;
    loop {
        let z = bessel_j_zeros_resolved(nu, reach, resolution)?;
        if z.last().is_some_and(|&l| l > xmax) {
            return Ok(z);
        }
        reach = 2.0 * reach + 8.0;
    }
}

/// Witt margin min ν − 3/2 and the offending modes ν ≤ 3/2.
pub fn witt_check(s: &CrossSectionSpectrum) -> Result<WittReport> {
    let first = s
        .entries
        .first()
        .ok_or_else(|| Error::Precondition("spectrum must be nonempty".into()))?;
    let margin = first.nu - WITT_NU;
    Ok(WittReport {
        margin,
        satisfied: margin > 0.0,
        offending_modes: s.entries.iter().copied().filter(|e| e.nu <= WITT_NU).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_block_symmetry() {
        for f in 0..6 {
            for ell in 0..f {
                assert_eq!(
                    scalar_a_shift(ell, f, FormBlock::Omega).unwrap(),
                    scalar_a_shift(ell + 1, f, FormBlock::DxOmega).unwrap()
                );
            }
        }
    }

    #[test]
    fn merge_sums_duplicates() {
        let s = CrossSectionSpectrum::new(
            vec![
                SpectrumEntry { nu: 2.0, mult: 1 },
                SpectrumEntry { nu: 1.0, mult: 2 },
                SpectrumEntry { nu: 2.0, mult: 3 },
            ],
            SpectrumSource::UserSupplied,
            1,
            "test".into(),
        )
        .unwrap();
        assert_eq!(s.entries.len(), 2);
        assert_eq!(s.entries[1].mult, 4);
    }

    #[test]
    fn tampered_text_is_rejected() {
        let s = circle_scalar_spectrum(0.7, 5).unwrap();
        let text = s.to_text().replace(",2,analytic", ",3,analytic");
        assert!(matches!(CrossSectionSpectrum::from_text(&text), Err(Error::Format(_))));
    }
}
