//! Extraction of power and log-power coefficients from sampled traces by
//! weighted linear least squares, with window-stability probes and
//! comparison against predicted series.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::TraceSamples;
use crate::error::{Error, Result};
use crate::series::{key_order, same_key, ExpansionSeries, ExpansionTerm, SeriesDiagnostics};

/// Fits whose normalized design matrix has a larger condition estimate are
/// refused.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative drift below which a coefficient can count as detected.
pub const DEFAULT_DRIFT_THRESHOLD: f64 = 0.05;

/// Default z-window and density of the fitter.
pub const DEFAULT_WINDOW: (f64, f64) = (8.0, 512.0);
pub const DEFAULT_SAMPLES_PER_COEFF: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitBasis {
    /// (power, logpow) keys of the basis functions z^power·log^logpow z.
    pub terms: Vec<(f64, u32)>,
    pub z_window: (f64, f64),
    pub samples_per_coeff: usize,
}

impl FitBasis {
    pub fn new(terms: Vec<(f64, u32)>, z_window: (f64, f64), samples_per_coeff: usize) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Precondition("fit basis is empty".into()));
        }
        if samples_per_coeff < 3 {
            return Err(Error::Precondition("need at least 3 samples per coefficient".into()));
        }
        if !(z_window.0 > 0.0 && z_window.1 > z_window.0 && z_window.1.is_finite()) {
            return Err(Error::Precondition(format!("bad z window {z_window:?}")));
        }
        if terms.iter().any(|t| !t.0.is_finite()) {
            return Err(Error::Precondition("basis powers must be finite".into()));
        }
        let mut terms = terms;
        terms.sort_by(|a, b| key_order(*a, *b));
        if terms.windows(2).any(|w| same_key(w[0], w[1])) {
            return Err(Error::Precondition("duplicate basis term".into()));
        }
        Ok(FitBasis {
            terms,
            z_window,
            samples_per_coeff,
        })
    }

    /// As `new`, rejecting log powers above the stratification depth.
    pub fn for_depth(terms: Vec<(f64, u32)>, z_window: (f64, f64), samples_per_coeff: usize, depth: u32) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.1 > depth) {
            return Err(Error::Config {
                field: "fit.terms".into(),
                message: format!("log power {} at z^{} exceeds depth {depth}", t.1, t.0),
            });
        }
        FitBasis::new(terms, z_window, samples_per_coeff)
    }

    /// Powers `p0, p0−1, …` (count `orders`), each with log powers
    /// 0..=max_log(power).
    pub fn ladder(p0: f64, orders: u32, max_log: impl Fn(f64) -> u32, z_window: (f64, f64), samples_per_coeff: usize) -> Result<Self> {
        let mut terms = Vec::new();
        for i in 0..orders {
            let p = p0 - i as f64;
            for l in 0..=max_log(p) {
                terms.push((p, l));
            }
        }
        FitBasis::new(terms, z_window, samples_per_coeff)
    }

    /// Exponent lattice of a trace expansion on a stratified model of
    /// dimension `dim`: powers z^{dim−2m−j} for j < `orders`, and for each
    /// singular stratum (dim_y, depth) the terms z^{dim_y−2m−j}·log^ℓ z,
    /// 1 ≤ ℓ ≤ depth, for j < `log_orders`. No strata gives a pure power
    /// basis.
    pub fn theorem(
        dim: u32,
        m: u32,
        strata: &[(u32, u32)],
        orders: u32,
        log_orders: u32,
        z_window: (f64, f64),
        samples_per_coeff: usize,
    ) -> Result<Self> {
        let top = dim as f64 - 2.0 * m as f64;
        let mut terms: Vec<(f64, u32)> = (0..orders).map(|j| (top - j as f64, 0)).collect();
        for &(dim_y, depth) in strata {
            for j in 0..log_orders {
                let p = dim_y as f64 - 2.0 * m as f64 - j as f64;
                for l in 1..=depth {
                    if !terms.iter().any(|t| same_key(*t, (p, l))) {
                        terms.push((p, l));
                    }
                }
            }
        }
        FitBasis::new(terms, z_window, samples_per_coeff)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn with_window(&self, z_window: (f64, f64)) -> Result<Self> {
        FitBasis::new(self.terms.clone(), z_window, self.samples_per_coeff)
    }

    pub fn with_term(&self, term: (f64, u32)) -> Result<Self> {
        let mut t = self.terms.clone();
        t.push(term);
        FitBasis::new(t, self.z_window, self.samples_per_coeff)
    }

    pub fn without_term(&self, term: (f64, u32)) -> Result<Self> {
        let t = self.terms.iter().copied().filter(|k| !same_key(*k, term)).collect();
        FitBasis::new(t, self.z_window, self.samples_per_coeff)
    }
}

/// Raw least-squares outcome on explicit points.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub coeffs: Vec<f64>,
    /// RMS of the relative residuals (f − v)/v.
    pub residual_norm: f64,
    pub condition: f64,
}

/// Least squares of v ≈ Σ c_i z^{p_i} log^{ℓ_i} z with weights 1/|v|,
/// unit-norm columns and an SVD solve.
pub fn fit_points(z: &[f64], v: &[f64], terms: &[(f64, u32)]) -> Result<FitOutcome> {
    let n = z.len();
    let k = terms.len();
    if n != v.len() || n < k || k == 0 {
        return Err(Error::Precondition(format!("{n} points cannot determine {k} coefficients")));
    }
    if v.iter().any(|x| *x == 0.0 || !x.is_finite()) || z.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::Precondition("fit data must be finite, nonzero, at z > 0".into()));
    }
    let mut a = DMatrix::from_fn(n, k, |i, j| {
        let (p, l) = terms[j];
        z[i].powf(p) * z[i].ln().powi(l as i32) / v[i].abs()
    });
    let rhs = DVector::from_fn(n, |i, _| v[i] / v[i].abs());
    let mut scale = vec![0.0; k];
    for (j, s) in scale.iter_mut().enumerate() {
        let norm = a.column(j).norm();
        if norm == 0.0 {
            return Err(Error::IllConditioned {
                cond: f64::INFINITY,
                limit: MAX_CONDITION,
            });
        }
        *s = norm;
        a.column_mut(j).scale_mut(1.0 / norm);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            cond,
            limit: MAX_CONDITION,
        });
    }
    let y = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Precondition(format!("least-squares solve failed: {e}")))?;
    let r = &a * &y - &rhs;
    Ok(FitOutcome {
        coeffs: (0..k).map(|j| y[j] / scale[j]).collect(),
        residual_norm: r.norm() / (n as f64).sqrt(),
        condition: cond,
    })
}

fn in_window(samples: &TraceSamples, window: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let tol = 1e-12;
    samples
        .z_grid
        .iter()
        .zip(&samples.values)
        .filter(|(z, _)| **z >= window.0 * (1.0 - tol) && **z <= window.1 * (1.0 + tol))
        .map(|(z, v)| (*z, *v))
        .unzip()
}

/// Fits `basis` to the samples inside its window.
pub fn fit_expansion(samples: &TraceSamples, basis: &FitBasis) -> Result<ExpansionSeries> {
    let (z, v) = in_window(samples, basis.z_window);
    let need = basis.samples_per_coeff * basis.len();
    if z.len() < need {
        return Err(Error::Precondition(format!(
            "{} samples in window {:?}, need {need}",
            z.len(),
            basis.z_window
        )));
    }
    let out = fit_points(&z, &v, &basis.terms)?;
    let terms = basis
        .terms
        .iter()
        .zip(&out.coeffs)
        .map(|(&(power, logpow), &coeff)| ExpansionTerm { power, logpow, coeff })
        .collect();
    ExpansionSeries::new(
        terms,
        Some(basis.z_window),
        SeriesDiagnostics {
            route: format!("fit:{}", samples.route.tag()),
            residual_norm: Some(out.residual_norm),
            condition: Some(out.condition),
            samples: Some(z.len()),
            ..Default::default()
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDrift {
    pub power: f64,
    pub logpow: u32,
    /// Coefficient on each subwindow.
    pub coeffs: Vec<f64>,
    /// (max − min)/|mean| over the subwindows.
    pub drift: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub windows: Vec<(f64, f64)>,
    pub threshold: f64,
    pub terms: Vec<TermDrift>,
}

impl DriftReport {
    pub fn term(&self, power: f64, logpow: u32) -> Option<&TermDrift> {
        self.terms.iter().find(|t| same_key((t.power, t.logpow), (power, logpow)))
    }
}

/// `count` overlapping log-subwindows of `window`, each spanning 2/(count+1)
/// of its log-length.
pub fn subwindows(window: (f64, f64), count: usize) -> Vec<(f64, f64)> {
    let (a, b) = (window.0.ln(), window.1.ln());
    let step = (b - a) / (count + 1) as f64;
    (0..count)
        .map(|i| {
            let lo = if i == 0 { window.0 } else { (a + step * i as f64).exp() };
            let hi = if i + 1 == count { window.1 } else { (a + step * (i + 2) as f64).exp() };
            (lo, hi)
        })
        .collect()
}

/// Refits on overlapping subwindows; a coefficient is detected when its
/// drift is below `threshold` and its magnitude exceeds its spread.
pub fn stability_probe(samples: &TraceSamples, basis: &FitBasis, count: usize, threshold: f64) -> Result<DriftReport> {
    if count < 2 {
        return Err(Error::Precondition("stability probe needs at least 2 subwindows".into()));
    }
    let windows = subwindows(basis.z_window, count);
    let fits: Vec<Vec<f64>> = windows
        .par_iter()
        .map(|&w| {
            let (z, v) = in_window(samples, w);
            fit_points(&z, &v, &basis.terms).map(|o| o.coeffs)
        })
        .collect::<Result<_>>()?;
    let terms = basis
        .terms
        .iter()
        .enumerate()
        .map(|(j, &(power, logpow))| {
            let coeffs: Vec<f64> = fits.iter().map(|c| c[j]).collect();
            let max = coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = coeffs.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
            let spread = max - min;
            let drift = if mean != 0.0 { spread / mean.abs() } else if spread == 0.0 { 0.0 } else { f64::INFINITY };
            TermDrift {
                power,
                logpow,
                detected: drift < threshold && mean.abs() > spread,
                coeffs,
                drift,
            }
        })
        .collect();
    Ok(DriftReport {
        windows,
        threshold,
        terms,
    })
}

/// Leading two coefficients by sequential elimination on the two largest
/// samples: v·z^{-p0} = c0 + c1·z^{p1−p0} + …; an independent check on the
/// joint fit.
pub fn peel_leading_two(samples: &TraceSamples, p0: f64, p1: f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 || !(p1 < p0) {
        return Err(Error::Precondition("peeling needs two samples and p1 < p0".into()));
    }
    let (z1, z2) = (samples.z_grid[n - 2], samples.z_grid[n - 1]);
    let g1 = samples.values[n - 2] * z1.powf(-p0);
    let g2 = samples.values[n - 1] * z2.powf(-p0);
    let d = p1 - p0;
    let c1 = (g1 - g2) / (z1.powf(d) - z2.powf(d));
    Ok((g2 - c1 * z2.powf(d), c1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyComparison {
    pub power: f64,
    pub logpow: u32,
    pub predicted: f64,
    pub fitted: f64,
    /// |fitted − predicted|/|predicted|, absolute when predicted is 0.
    pub rel_diff: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tolerance: f64,
    pub matched: Vec<KeyComparison>,
    pub only_predicted: Vec<(f64, u32)>,
    pub only_fitted: Vec<(f64, u32)>,
}

impl ComparisonReport {
    pub fn all_within(&self) -> bool {
        self.matched.iter().all(|m| m.within)
    }
}

/// Per-key comparison of two series; independent of term order.
pub fn sal_vs_fit(predicted: &ExpansionSeries, fitted: &ExpansionSeries, tolerance: f64) -> ComparisonReport {
    let mut matched = Vec::new();
    let mut only_predicted = Vec::new();
    for p in &predicted.terms {
        match fitted.coeff(p.power, p.logpow) {
            Some(f) => {
                let diff = (f - p.coeff).abs();
                let rel_diff = if p.coeff != 0.0 { diff / p.coeff.abs() } else { diff };
                matched.push(KeyComparison {
                    power: p.power,
                    logpow: p.logpow,
                    predicted: p.coeff,
                    fitted: f,
                    rel_diff,
                    within: rel_diff <= tolerance,
                });
            }
            None => only_predicted.push((p.power, p.logpow)),
        }
    }
    let only_fitted = fitted
        .terms
        .iter()
        .filter(|f| predicted.coeff(f.power, f.logpow).is_none())
        .map(|f| (f.power, f.logpow))
        .collect();
    matched.sort_by(|a, b| key_order((a.power, a.logpow), (b.power, b.logpow)));
    only_predicted.sort_by(|a, b| key_order(*a, *b));
    ComparisonReport {
        tolerance,
        matched,
        only_predicted,
        only_fitted,
    }
}
