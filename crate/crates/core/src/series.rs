//! Asymptotic series Σ c·z^p·log^ℓ z as produced by the singular-asymptotics
//! engine and by the least-squares fitter.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub power: f64,
    pub logpow: u32,
    pub coeff: f64,
}

/// Diagnostics attached to a series; fields not produced by a route are None.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostics {
    /// Tag of the route that produced the series.
    pub route: String,
    /// Weighted relative residual norm of a fit.
    pub residual_norm: Option<f64>,
    /// Condition estimate of the normalized fit matrix.
    pub condition: Option<f64>,
    /// Log-log slope of the remainder after subtracting the whole series.
    pub residual_slope: Option<f64>,
    /// Largest estimated error among finite-difference x-derivatives.
    pub derivative_error: Option<f64>,
    /// Number of samples entering a fit.
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSeries {
    pub terms: Vec<ExpansionTerm>,
    /// z-range over which the series was fitted or validated; None for a
    /// purely asymptotic prediction.
    pub validity: Option<(f64, f64)>,
    pub diagnostics: SeriesDiagnostics,
}

/// Descending power, then ascending log power.
pub fn key_order(a: (f64, u32), b: (f64, u32)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Keys closer than this in power are the same key.
pub const POWER_EPS: f64 = 1e-12;

pub fn same_key(a: (f64, u32), b: (f64, u32)) -> bool {
    (a.0 - b.0).abs() <= POWER_EPS && a.1 == b.1
}

impl ExpansionSeries {
    /// Sorts the terms and rejects duplicate keys and non-finite entries.
    pub fn new(mut terms: Vec<ExpansionTerm>, validity: Option<(f64, f64)>, diagnostics: SeriesDiagnostics) -> Result<Self> {
        if terms.iter().any(|t| !t.power.is_finite() || !t.coeff.is_finite()) {
            return Err(Error::Precondition("series terms must be finite".into()));
        }
        terms.sort_by(|a, b| key_order((a.power, a.logpow), (b.power, b.logpow)));
        if terms
            .windows(2)
            .any(|w| same_key((w[0].power, w[0].logpow), (w[1].power, w[1].logpow)))
        {
            return Err(Error::Precondition("duplicate (power, logpow) key in series".into()));
        }
        Ok(ExpansionSeries {
            terms,
            validity,
            diagnostics,
        })
    }

    /// Builds a series from possibly repeated keys by summing coefficients.
    pub fn collect(terms: impl IntoIterator<Item = ExpansionTerm>, validity: Option<(f64, f64)>, diagnostics: SeriesDiagnostics) -> Result<Self> {
        let mut out: Vec<ExpansionTerm> = Vec::new();
        for t in terms {
            match out.iter_mut().find(|o| same_key((o.power, o.logpow), (t.power, t.logpow))) {
                Some(o) => o.coeff += t.coeff,
                None => out.push(t),
            }
        }
        ExpansionSeries::new(out, validity, diagnostics)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, power: f64, logpow: u32) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| same_key((t.power, t.logpow), (power, logpow)))
            .map(|t| t.coeff)
    }

    /// Distinct powers in descending order.
    pub fn powers(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for t in &self.terms {
            if out.last().is_none_or(|&p| (p - t.power).abs() > POWER_EPS) {
                out.push(t.power);
            }
        }
        out
    }

    /// Σ c·z^p·log^ℓ z.
    pub fn eval(&self, z: f64) -> f64 {
        eval_terms(&self.terms, z)
    }

    /// Terms with power at least `p_min`.
    pub fn partial(&self, p_min: f64) -> Vec<ExpansionTerm> {
        self.terms
            .iter()
            .copied()
            .filter(|t| t.power >= p_min - POWER_EPS)
            .collect()
    }

    /// The series of f(cz): z^p log^ℓ(cz) expands binomially in log c.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::Domain(format!("rescaling factor must be positive, got {c}")));
        }
        let lc = c.ln();
        let mut out = Vec::new();
        for t in &self.terms {
            let base = t.coeff * c.powf(t.power);
            for i in 0..=t.logpow {
                out.push(ExpansionTerm {
                    power: t.power,
                    logpow: i,
                    coeff: base * binomial(t.logpow, i) * lc.powi((t.logpow - i) as i32),
                });
            }
        }
        ExpansionSeries::collect(out, self.validity.map(|v| (v.0 / c, v.1 / c)), self.diagnostics.clone())
    }

    /// a·self + b·other, termwise.
    pub fn combine(&self, a: f64, other: &ExpansionSeries, b: f64) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| ExpansionTerm { coeff: a * t.coeff, ..*t })
            .chain(other.terms.iter().map(|t| ExpansionTerm { coeff: b * t.coeff, ..*t }));
        ExpansionSeries::collect(terms, self.validity, self.diagnostics.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ExpansionSeries = serde_json::from_str(s)?;
        ExpansionSeries::new(raw.terms, raw.validity, raw.diagnostics)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }
}

pub fn eval_terms(terms: &[ExpansionTerm], z: f64) -> f64 {
    let lz = z.ln();
    terms
        .iter()
        .map(|t| t.coeff * z.powf(t.power) * lz.powi(t.logpow as i32))
        .sum()
}

pub fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
