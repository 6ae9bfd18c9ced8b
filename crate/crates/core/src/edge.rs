//! Resolvent traces on the flat model edge T^b × Cone(F), with T^b the
//! torus of side L, by reduction to cone traces at the shifted parameters
//! √(|σ|² + z²), σ ∈ (2π/L)ℤ^b.
//!
//! The lattice sum is evaluated in its Poisson-dual form:
//! Σ_σ F(|σ|²) = (L/2π)^b [∫ F(|σ|²) dσ + Σ_{x ∈ Lℤ^b∖0} F̂(x)], where per
//! eigenvalue a = j² + z² the transform of (a + |σ|²)^{-m} is
//! (2π)^{b/2} 2^{1−m}/Γ(m)·(|x|/√a)^{m−b/2} K_{m−b/2}(√a|x|). The continuum
//! part is a σ-quadrature of the closed-form mode traces; the dual part is
//! summed over the Bessel zeros with √a·|x| below a cutoff.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{
    cone_trace, eigensum_zeros, euler_maclaurin_tail, mode_sum, mode_trace_closed, weyl_tail_bound, ConeProblem,
    ModeTail, Route, TraceSamples, TraceValue,
};
use crate::error::{Error, Result};
use crate::fit::{fit_expansion, FitBasis};
use crate::quadrature::{gauss_legendre, Neumaier};
use crate::special::gamma::{gamma, ln_gamma};
use crate::special::{global_zero_cache, ln_bessel_k};
use crate::series::ExpansionSeries;
use crate::spectra::sha256_hex;

/// Dual terms with √a·|x| above this are dropped (e^{-46} < 1e-19).
const DUAL_CUTOFF: f64 = 46.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeProblem {
    pub cone: ConeProblem,
    pub b: u32,
    /// Torus side length L.
    pub length: f64,
    pub m: u32,
}

impl EdgeProblem {
    pub fn new(cone: ConeProblem, b: u32, length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Domain(format!("torus length must be positive, got {length}")));
        }
        crate::cone::check_trace_class(cone.m, cone.dim + b)?;
        Ok(EdgeProblem {
            m: cone.m,
            cone,
            b,
            length,
        })
    }

    pub fn dim(&self) -> u32 {
        self.cone.dim + self.b
    }

    pub fn model_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("serializable").as_bytes())
    }

    fn check(&self) -> Result<()> {
        if self.m != self.cone.m {
            return Err(Error::Precondition("edge and cone resolvent powers differ".into()));
        }
        crate::cone::check_trace_class(self.m, self.dim())
    }

    /// (L/2π)^b·π^{b/2}·Γ(m − b/2)/Γ(m): continuum weight of T_{m−b/2}.
    fn continuum_factor(&self) -> f64 {
        let b = self.b as f64;
        let m = self.m as f64;
        ((self.length / (2.0 * PI)).ln() * b + 0.5 * b * PI.ln() + ln_gamma(m - 0.5 * b) - ln_gamma(m)).exp()
    }
}

fn check_z(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("need z > 0, got {z}")))
    }
}

/// (L/2π)^b ∫_{ℝ^b} T_m(ν, √(|σ|² + z²)) dσ by radial Gauss–Legendre
/// quadrature with r = c·t/(1−t), c = √(z² + (ν+1)²).
pub fn mode_continuum(nu: f64, z: f64, m: u32, b: u32, length: f64) -> Result<f64> {
    check_z(z)?;
    if b == 0 {
        return mode_trace_closed(nu, z, m);
    }
    let w = z * z;
    let c = (w + (nu + 1.0) * (nu + 1.0)).sqrt();
    let bf = b as f64;
    let rule = gauss_legendre(20);
    let breaks = [0.0, 0.2, 0.4, 0.6, 0.75, 0.875, 0.95, 1.0];
    let mut acc = Neumaier::default();
    for p in breaks.windows(2) {
        let mut nodes = Vec::with_capacity(rule.len());
        rule.push_mapped(p[0], p[1], &mut nodes);
        for (t, wt) in nodes {
            let r = c * t / (1.0 - t);
            let jac = c / ((1.0 - t) * (1.0 - t));
            let v = mode_trace_closed(nu, (r * r + w).sqrt(), m)?;
            acc.add(wt * jac * r.powf(bf - 1.0) * v);
        }
    }
    let sphere = 2.0 * PI.powf(0.5 * bf) / gamma(0.5 * bf);
    Ok((length / (2.0 * PI)).powf(bf) * sphere * acc.sum())
}

/// Nonzero points of Lℤ^b with |x| ≤ rmax, as (|x|, count) sorted by |x|.
fn dual_shells(b: u32, length: f64, rmax: f64) -> Vec<(f64, u64)> {
    let kmax = (rmax / length).floor() as i64;
    if kmax < 1 {
        return Vec::new();
    }
    let mut shells: std::collections::BTreeMap<u64, u64> = std::collections::BTreeMap::new();
    let mut idx = vec![-kmax; b as usize];
    'outer: loop {
        let n2: i64 = idx.iter().map(|i| i * i).sum();
        if n2 > 0 && (n2 as f64).sqrt() * length <= rmax {
            *shells.entry(n2 as u64).or_insert(0) += 1;
        }
        for d in 0..idx.len() {
            if idx[d] < kmax {
                idx[d] += 1;
                continue 'outer;
            }
            idx[d] = -kmax;
        }
        break;
    }
    shells
        .into_iter()
        .map(|(n2, count)| ((n2 as f64).sqrt() * length, count))
        .collect()
}

/// (L/2π)^b Σ_{x ∈ Lℤ^b∖0} Σ_k F̂_k(x) for one mode, F_k = (j_{ν,k}² + z² + |σ|²)^{-m}.
pub fn mode_dual(nu: f64, z: f64, m: u32, b: u32, length: f64) -> Result<f64> {
    check_z(z)?;
    if b == 0 {
        return Ok(0.0);
    }
    let w = z * z;
    let rmax = DUAL_CUTOFF / z;
    let shells = dual_shells(b, length, rmax);
    if shells.is_empty() {
        return Ok(0.0);
    }
    let jmax2 = (DUAL_CUTOFF / shells[0].0).powi(2) - w;
    if jmax2 <= nu * nu {
        return Ok(0.0);
    }
    let jmax = jmax2.sqrt();
    let list = global_zero_cache().zeros(nu, jmax)?;
    let bf = b as f64;
    let order = m as f64 - 0.5 * bf;
    let ln_pref = bf * (length / (2.0 * PI)).ln() + 0.5 * bf * (2.0 * PI).ln() + (1.0 - m as f64) * 2f64.ln()
        - ln_gamma(m as f64);
    let mut terms = Vec::new();
    for &j in list.zeros.iter().take_while(|&&j| j <= jmax) {
        let sa = (j * j + w).sqrt();
        for &(x, count) in &shells {
            let arg = sa * x;
            if arg > DUAL_CUTOFF {
                break;
            }
            let ln_t = ln_pref + order * (x / sa).ln() + ln_bessel_k(order, arg)?;
            terms.push(count as f64 * ln_t.exp());
        }
    }
    let mut acc = Neumaier::default();
    for t in terms.iter().rev() {
        acc.add(*t);
    }
    Ok(acc.sum())
}

/// Modes of the problem (ν, multiplicity) below `numax`, including circle
/// family modes beyond the explicit list; the flag reports whether modes
/// below `numax` may be missing.
fn modes_below(problem: &ConeProblem, numax: f64) -> (Vec<(f64, f64)>, bool) {
    let mut out: Vec<(f64, f64)> = problem
        .spectrum
        .entries
        .iter()
        .take_while(|e| e.nu < numax)
        .map(|e| (e.nu, e.mult as f64))
        .collect();
    let mut missing = false;
    match problem.tail {
        ModeTail::Circle { family, first_n } => {
            let mut n = first_n as f64;
            while family.nu(n) < numax {
                out.push((family.nu(n), 2.0));
                n += 1.0;
            }
        }
        ModeTail::WeylBound => missing = problem.spectrum.max_nu() < numax,
    }
    (out, missing)
}

/// Edge trace Σ_σ cone_trace(cone, √(|σ|² + z²)) with route tag `lattice`.
pub fn edge_trace(problem: &EdgeProblem, z: f64) -> Result<TraceValue> {
    problem.check()?;
    check_z(z)?;
    if problem.b == 0 {
        return cone_trace(&problem.cone, z, Route::Lattice);
    }
    let (m, b, length) = (problem.m, problem.b, problem.length);
    let power = m as f64 - 0.5 * b as f64;
    let bound = problem.continuum_factor() * weyl_tail_bound(&problem.cone.spectrum, power);
    let cont = mode_sum(&problem.cone, z, |nu| mode_continuum(nu, z, m, b, length), bound)?;

    // Dual terms only involve zeros with √(j² + z²)·L < cutoff.
    let numax = if z * length < DUAL_CUTOFF {
        ((DUAL_CUTOFF / length).powi(2) - z * z).sqrt()
    } else {
        0.0
    };
    let (modes, missing) = modes_below(&problem.cone, numax);
    let duals: Vec<f64> = modes
        .par_iter()
        .map(|&(nu, mult)| mode_dual(nu, z, m, b, length).map(|v| v * mult))
        .collect::<Result<_>>()?;
    let mut acc = Neumaier::default();
    for v in duals.iter().rev() {
        acc.add(*v);
    }
    let mut tail_bound = cont.tail_bound;
    if missing {
        // Each missing mode has j > Λ; bound the count by the Weyl law.
        let lam = problem.cone.spectrum.max_nu();
        let count = problem.cone.spectrum.weyl_coefficient() * numax.powi(problem.cone.spectrum.f_dim as i32);
        tail_bound += count * mode_dual_bound(lam, z, m, b, length);
    }
    Ok(TraceValue {
        value: cont.value + acc.sum(),
        tail_bound,
    })
}

/// Dual sum for a single eigenvalue a = Λ² + z², times the number of zeros
/// below the cutoff; an upper estimate for any mode with ν ≥ Λ.
fn mode_dual_bound(lam: f64, z: f64, m: u32, b: u32, length: f64) -> f64 {
    let w = z * z;
    let sa = (lam * lam + w).sqrt();
    let shells = dual_shells(b, length, DUAL_CUTOFF / z);
    let bf = b as f64;
    let order = m as f64 - 0.5 * bf;
    let ln_pref = bf * (length / (2.0 * PI)).ln() + 0.5 * bf * (2.0 * PI).ln() + (1.0 - m as f64) * 2f64.ln()
        - ln_gamma(m as f64);
    let zeros_below = DUAL_CUTOFF / (PI * length) + 1.0;
    shells
        .iter()
        .map(|&(x, count)| {
            let ln_k = ln_bessel_k(order, sa * x).unwrap_or(f64::NEG_INFINITY);
            count as f64 * (ln_pref + order * (x / sa).ln() + ln_k).exp()
        })
        .sum::<f64>()
        * zeros_below
}

/// Continuum part only, through T_{m−b/2} = Σ_k (j_{ν,k}² + z²)^{-(m−b/2)}
/// summed over Bessel zeros; an independent check of the σ-quadrature.
pub fn edge_continuum_eigensum(problem: &EdgeProblem, z: f64) -> Result<TraceValue> {
    problem.check()?;
    check_z(z)?;
    let power = problem.m as f64 - 0.5 * problem.b as f64;
    let factor = problem.continuum_factor();
    let bound = factor * weyl_tail_bound(&problem.cone.spectrum, power);
    mode_sum(&problem.cone, z, |nu| eigensum_zeros(nu, z, power).map(|v| v * factor), bound)
}

/// Continuum part by the σ-quadrature route.
pub fn edge_continuum(problem: &EdgeProblem, z: f64) -> Result<TraceValue> {
    problem.check()?;
    check_z(z)?;
    let (m, b, length) = (problem.m, problem.b, problem.length);
    let power = m as f64 - 0.5 * b as f64;
    let bound = problem.continuum_factor() * weyl_tail_bound(&problem.cone.spectrum, power);
    mode_sum(&problem.cone, z, |nu| mode_continuum(nu, z, m, b, length), bound)
}

/// Direct lattice sum for b = 1: |j| ≤ `j_max` summed term by term in the
/// order |σ| then σ, the rest by midpoint Euler–Maclaurin in j.
pub fn edge_trace_naive(problem: &EdgeProblem, z: f64, j_max: u32) -> Result<TraceValue> {
    problem.check()?;
    check_z(z)?;
    match problem.b {
        0 => return cone_trace(&problem.cone, z, Route::ClosedForm),
        1 => {}
        b => return Err(Error::Capability(format!("naive lattice sum supports b <= 1, got {b}"))),
    }
    let step = 2.0 * PI / problem.length;
    let at = |j: f64| cone_trace(&problem.cone, (j * j * step * step + z * z).sqrt(), Route::ClosedForm);
    let mut order: Vec<i64> = vec![0];
    for j in 1..=j_max as i64 {
        order.push(-j);
        order.push(j);
    }
    let values: Vec<TraceValue> = order.par_iter().map(|&j| at(j as f64)).collect::<Result<_>>()?;
    let mut acc = Neumaier::default();
    let mut bound = 0.0f64;
    for v in values.iter().rev() {
        acc.add(v.value);
        bound += v.tail_bound;
    }
    let (tail, last) = euler_maclaurin_tail(|j| at(j).map(|v| v.value), j_max + 1, z / step)?;
    acc.add(2.0 * tail);
    Ok(TraceValue {
        value: acc.sum(),
        tail_bound: bound + 2.0 * last,
    })
}

/// edge_trace on every grid point.
pub fn sample_edge_trace(problem: &EdgeProblem, z_grid: &[f64]) -> Result<TraceSamples> {
    let values = z_grid
        .iter()
        .map(|&z| edge_trace(problem, z))
        .collect::<Result<Vec<_>>>()?;
    TraceSamples::new(z_grid.to_vec(), values, Route::Lattice, problem.m, problem.model_hash())
}

/// Fits edge samples on the basis prescribed by the expansion theorem for
/// a depth-1 edge: powers z^{dim−2m−j} and single logs z^{b−2m−j}·log z.
pub fn edge_expansion_shape(
    problem: &EdgeProblem,
    samples: &TraceSamples,
    orders: u32,
    log_orders: u32,
    z_window: (f64, f64),
    samples_per_coeff: usize,
) -> Result<ExpansionSeries> {
    let dim = problem.cone.dim + problem.b;
    let basis = FitBasis::theorem(dim, problem.m, &[(problem.b, 1)], orders, log_orders, z_window, samples_per_coeff)?;
    fit_expansion(samples, &basis)
}

/// Weyl coefficient of z^{dim−2m}: (4π)^{-n/2}Γ(m − n/2)/Γ(m)·vol with
/// vol = L^b·πβ for a circle cross-section of scale β.
pub fn weyl_edge_coefficient(beta: f64, b: u32, length: f64, m: u32) -> f64 {
    let n = 2.0 + b as f64;
    let m = m as f64;
    (4.0 * PI).powf(-0.5 * n) * gamma(m - 0.5 * n) / gamma(m) * length.powi(b as i32) * PI * beta
}
