//! Resolvent traces tr(Δ + z²)^{-m} on the truncated model cone (0,1] × F
//! with Dirichlet condition at x = 1.

pub mod closed_form;
pub mod eigensum;
pub mod kernel;
pub mod samples;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, geometric_breaks, Neumaier};
use crate::special::bessel_ik::{check_args, ik_scaled_ln};
use crate::spectra::{circle_scalar_spectrum, shift_spectrum, CrossSectionSpectrum};

pub use closed_form::mode_trace_closed;
pub use eigensum::{eigensum_zeros, mode_trace_eigensum, rayleigh_mode};
pub use kernel::{kernel_stencil_error, mode_kernel, mode_trace, mode_trace_kernel};
pub use samples::{log_grid, sample_cone_trace, TraceSamples};

/// Computational route for a trace value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Quadrature of the Bessel kernel diagonal.
    Kernel,
    /// Sums over squared Bessel zeros.
    Eigensum,
    /// The ratio I_{ν+1}/I_ν formulas.
    ClosedForm,
    /// Lattice (Fourier) reduction of an edge to shifted cone traces.
    Lattice,
}

impl Route {
    pub fn tag(self) -> &'static str {
        match self {
            Route::Kernel => "kernel",
            Route::Eigensum => "eigensum",
            Route::ClosedForm => "closed-form",
            Route::Lattice => "lattice",
        }
    }
}

/// tr(ℓ_ν + z²)^{-m} by the requested per-mode route.
pub fn mode_value(route: Route, nu: f64, z: f64, m: u32) -> Result<f64> {
    match route {
        Route::Kernel => mode_trace_kernel(nu, z, m),
        Route::Eigensum => mode_trace_eigensum(nu, z, m),
        Route::ClosedForm | Route::Lattice => mode_trace_closed(nu, z, m),
    }
}

/// Half-width of the Chebyshev stencil in w = z² around w0. T_1 is
/// analytic for w > −j_{ν,1}² > −(ν+1)², so the stencil may widen up to
/// 0.9·w0 when that singularity is far, which tames the amplification of
/// rounding noise by the differentiation.
pub(crate) fn stencil_half_width(nu: f64, w0: f64) -> f64 {
    (0.9 * w0).min(0.3 * (w0 + (nu + 1.0) * (nu + 1.0)))
}

/// Circle modes ν_n = √(n²/β² + c), multiplicity 2 for n ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleFamily {
    pub beta: f64,
    pub shift: f64,
}

impl CircleFamily {
    pub fn nu(&self, n: f64) -> f64 {
        (n * n / (self.beta * self.beta) + self.shift).sqrt()
    }
}

/// How modes beyond the explicit spectrum are accounted for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ModeTail {
    /// Added by midpoint Euler–Maclaurin over the analytic family, from
    /// index `first_n` on.
    Circle { family: CircleFamily, first_n: u32 },
    /// Not added; bounded through the fitted Weyl law of the spectrum.
    WeylBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeProblem {
    pub spectrum: CrossSectionSpectrum,
    pub m: u32,
    pub dim: u32,
    pub tail: ModeTail,
}

/// A trace value together with its mode-truncation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceValue {
    pub value: f64,
    pub tail_bound: f64,
}

pub(crate) fn check_trace_class(m: u32, dim: u32) -> Result<()> {
    if 2 * m > dim {
        Ok(())
    } else {
        Err(Error::TraceClass { two_m: 2 * m, dim })
    }
}

impl ConeProblem {
    /// Cone over a cross-section with an explicit spectrum; modes beyond it
    /// are bounded, not added.
    pub fn new(spectrum: CrossSectionSpectrum, m: u32) -> Result<Self> {
        let dim = spectrum.f_dim + 1;
        check_trace_class(m, dim)?;
        if spectrum.is_empty() {
            return Err(Error::Precondition("spectrum must be nonempty".into()));
        }
        Ok(ConeProblem {
            spectrum,
            m,
            dim,
            tail: ModeTail::WeylBound,
        })
    }

    /// Cone over a circle of circumference 2πβ with modes √(n²/β² + shift):
    /// n < `explicit_n` summed directly, the rest by Euler–Maclaurin.
    pub fn circle(beta: f64, shift: f64, m: u32, explicit_n: u32) -> Result<Self> {
        if explicit_n < 3 {
            return Err(Error::Domain("explicit_n must be >= 3".into()));
        }
        let base = circle_scalar_spectrum(beta, explicit_n - 1)?;
        let spectrum = if shift == 0.0 { base } else { shift_spectrum(&base, shift)? };
        let mut p = ConeProblem::new(spectrum, m)?;
        p.tail = ModeTail::Circle {
            family: CircleFamily { beta, shift },
            first_n: explicit_n,
        };
        Ok(p)
    }
}

/// Midpoint Euler–Maclaurin sum Σ_{n ≥ first} f(n) for a smooth decaying f
/// of the form c·n^{1−2m}(1 + O(n^{-2})) at infinity. Returns (sum, size of
/// the last correction applied).
pub fn euler_maclaurin_tail<F>(f: F, first: u32, scale: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let a = first as f64 - 0.5;
    let n1 = (8.0 * scale).max(4.0 * a);
    let rule12 = gauss_legendre(12);
    let rule16 = gauss_legendre(16);
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    for w in geometric_breaks(a, n1, 2.0).windows(2) {
        rule12.push_mapped(w[0], w[1], &mut nodes);
    }
    // [n1, ∞) with n = n1/s.
    let mut far: Vec<(f64, f64)> = Vec::new();
    rule16.push_mapped(0.0, 0.5, &mut far);
    rule16.push_mapped(0.5, 1.0, &mut far);
    nodes.extend(far.into_iter().map(|(s, w)| (n1 / s, w * n1 / (s * s))));
    let h = 0.5;
    let stencil = [a - 2.0 * h, a - h, a + h, a + 2.0 * h];
    let points: Vec<f64> = nodes.iter().map(|p| p.0).chain(stencil).collect();
    let values: Vec<f64> = points.par_iter().map(|&n| f(n)).collect::<Result<_>>()?;
    let mut integral = Neumaier::default();
    for (&(_, w), v) in nodes.iter().zip(&values) {
        integral.add(w * v);
    }
    let g = &values[nodes.len()..];
    let d1 = (g[0] - 8.0 * g[1] + 8.0 * g[2] - g[3]) / (12.0 * h);
    let d3 = (g[3] - 2.0 * g[2] + 2.0 * g[1] - g[0]) / (2.0 * h * h * h);
    let last = 7.0 * d3 / 5760.0;
    Ok((integral.sum() + d1 / 24.0 - last, last.abs()))
}

/// Σ mult·T(ν) over explicit entries plus the tail, with any per-mode
/// function T; `weyl_bound` is reported when the spectrum has no analytic
/// continuation.
pub(crate) fn mode_sum<F>(problem: &ConeProblem, z: f64, per_mode: F, weyl_bound: f64) -> Result<TraceValue>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let values: Vec<f64> = problem
        .spectrum
        .entries
        .par_iter()
        .map(|e| per_mode(e.nu).map(|v| v * e.mult as f64))
        .collect::<Result<_>>()?;
    let mut acc = Neumaier::default();
    for v in values.iter().rev() {
        acc.add(*v);
    }
    let tail_bound = match problem.tail {
        ModeTail::Circle { family, first_n } => {
            let (tail, bound) = euler_maclaurin_tail(
                |n| per_mode(family.nu(n)).map(|v| 2.0 * v),
                first_n,
                family.beta * z,
            )?;
            acc.add(tail);
            bound
        }
        ModeTail::WeylBound => weyl_bound,
    };
    Ok(TraceValue {
        value: acc.sum(),
        tail_bound,
    })
}

/// Bound on Σ_{ν ≥ Λ} mult·T_p(ν, z), T_p = Σ_k (j_{ν,k}² + z²)^{-p} with
/// real p ≥ 1 and N(ν) ≈ Cν^f, using T_p ≤ σ_1·ν^{-2(p−1)} ≤ ν^{1−2p}/4,
/// so the tail is at most ∫_Λ^∞ Cfν^{f−1}·ν^{1−2p}/4 dν
/// = Cf/(4(2p−f−1))·Λ^{f+1−2p}.
pub fn weyl_tail_bound(spectrum: &CrossSectionSpectrum, power: f64) -> f64 {
    let f = spectrum.f_dim as f64;
    let c = spectrum.weyl_coefficient();
    let lambda = spectrum.max_nu();
    let p = 2.0 * power - f;
    if !(p > 1.0) || !(lambda > 0.0) {
        return f64::INFINITY;
    }
    c * f / (4.0 * (p - 1.0)) * lambda.powf(1.0 - p)
}

/// tr(Δ + z²)^{-m} on the model cone by the requested route.
pub fn cone_trace(problem: &ConeProblem, z: f64, route: Route) -> Result<TraceValue> {
    check_trace_class(problem.m, problem.dim)?;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("need z > 0, got {z}")));
    }
    let bound = weyl_tail_bound(&problem.spectrum, problem.m as f64);
    mode_sum(problem, z, |nu| mode_value(route, nu, z, problem.m), bound)
}

fn ln_abs_kernel(nu: f64, z: f64, x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    let (liz, lkz) = ik_scaled_ln(nu, z);
    let (li_hi, lk_hi) = ik_scaled_ln(nu, hi * z);
    let (li_lo, _) = ik_scaled_ln(nu, lo * z);
    let a = lk_hi + li_lo - (hi - lo) * z;
    let b = lkz - liz + li_hi + li_lo - (2.0 - hi - lo) * z;
    0.5 * (hi * lo).ln() + a + (-(b - a).exp_m1()).ln()
}

/// Log-log slope against z of sup |ν²·G(x, y)| over x ∈ `near`, y ∈ `far`.
pub fn offdiag_decay_probe(nu: f64, z_grid: &[f64], near: (f64, f64), far: (f64, f64)) -> Result<f64> {
    let (a1, b1) = near;
    let (a2, b2) = far;
    if !(0.0 <= a2 && a2 < b2 && b2 < a1 && a1 < b1 && b1 <= 1.0) {
        return Err(Error::Precondition(format!(
            "supports must be disjoint with [{a2}, {b2}] strictly below [{a1}, {b1}] in [0, 1]"
        )));
    }
    if z_grid.len() < 2 || z_grid.windows(2).any(|w| !(w[1] > w[0])) || z_grid[0] <= 0.0 {
        return Err(Error::Precondition("z grid must be positive and increasing".into()));
    }
    check_args(nu, 1.0)?;
    let samples = 16;
    let pick = |a: f64, b: f64, i: usize| {
        let v = a + (b - a) * i as f64 / samples as f64;
        v.max(1e-6 * b)
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &z in z_grid {
        let mut best = f64::NEG_INFINITY;
        for i in 0..=samples {
            for j in 0..=samples {
                let v = ln_abs_kernel(nu, z, pick(a1, b1, i), pick(a2, b2, j));
                best = best.max(v);
            }
        }
        xs.push(z.ln());
        ys.push(best + 2.0 * nu.max(1e-300).ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
