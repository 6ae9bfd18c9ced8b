//! Σ_k (j_{ν,k}² + z²)^{-p} from Bessel zeros, with a phase-density tail,
//! and the Rayleigh-sum series for large orders.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, Neumaier};
use crate::special::{debye_phase_derivative, debye_phase_inverse, global_zero_cache};

/// The Rayleigh series is used for ν ≥ RAYLEIGH_RATIO·z.
pub const RAYLEIGH_RATIO: f64 = 1.42;

/// Σ_r C(m+r−1, r)(−w)^r σ_{m+r}(ν), with the Rayleigh sums σ_n from
/// (ν+n)σ_n = Σ_{k=1}^{n−1} σ_k σ_{n−k}, σ_1 = 1/(4(ν+1)), carried as
/// t_n = σ_n·a^n with a = 4(ν+1)(ν+2) to stay in range. Converges
/// geometrically for z ≤ ν/RAYLEIGH_RATIO.
pub fn rayleigh_mode(nu: f64, z: f64, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("power must be >= 1".into()));
    }
    let a = 4.0 * (nu + 1.0) * (nu + 2.0);
    let q = -z * z / a;
    let mut t = vec![0.0, nu + 2.0];
    let next_t = |t: &mut Vec<f64>| {
        let n = t.len();
        let s: f64 = (1..n).map(|k| t[k] * t[n - k]).sum();
        t.push(s / (nu + n as f64));
    };
    while t.len() <= m as usize {
        next_t(&mut t);
    }
    let mut acc = Neumaier::default();
    let mut coef = 1.0;
    for r in 0..2000u32 {
        let term = coef * t[m as usize + r as usize];
        acc.add(term);
        if r > 2 && term.abs() < 1e-18 * acc.sum().abs() {
            return Ok(acc.sum() * a.powi(-(m as i32)));
        }
        coef *= q * (m + r) as f64 / (r + 1) as f64;
        next_t(&mut t);
    }
    Err(Error::Quadrature { nu, z })
}

/// Explicit-zero bound used by the eigenvalue route.
pub(crate) fn explicit_bound(nu: f64, z: f64) -> f64 {
    (nu + 8.0 * nu.cbrt() + 12.0).max(3.0 * z + 100.0)
}

/// Σ_k (j_{ν,k}² + z²)^{-p} for real p > ½: explicit zeros up to a bound,
/// then a midpoint Euler–Maclaurin tail in the zero index driven by the
/// Debye phase, g(k) = f(x_k) with Θ(x_k) = (k − ½)π.
pub fn eigensum_zeros(nu: f64, z: f64, p: f64) -> Result<f64> {
    if !(p > 0.5) {
        return Err(Error::Domain(format!("power must exceed 1/2, got {p}")));
    }
    let w = z * z;
    let f = |x: f64| (x * x + w).powf(-p);
    let bound = explicit_bound(nu, z);
    let list = global_zero_cache().zeros(nu, bound)?;
    let zeros: Vec<f64> = list.zeros.iter().copied().take_while(|&j| j <= bound).collect();
    let k = zeros.len();
    if k < 3 {
        return Err(Error::RootFinder {
            nu,
            k,
            reason: "too few zeros below the explicit bound".into(),
        });
    }
    // Sum small terms first.
    let mut acc = Neumaier::default();
    for &j in zeros.iter().rev() {
        acc.add(f(j));
    }

    // Tail Σ_{k' > K} g(k') = ∫_{K+½}^∞ g + g'(K+½)/24 − 7g'''(K+½)/5760.
    let last = zeros[k - 1];
    let xk = |idx: f64, guess: f64| debye_phase_inverse(nu, (idx - 0.5) * PI, guess);
    let c = k as f64 + 0.5;
    let x_half = xk(c, last + 1.5);
    // ∫_{x_half}^∞ f(x) Θ'(x)/π dx with x = x_half/s.
    let rule = gauss_legendre(16);
    let mut integral = 0.0;
    for (lo, hi) in [(0.0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1.0)] {
        integral += rule.integrate(lo, hi, |s| {
            if s == 0.0 {
                return 0.0;
            }
            let x = x_half / s;
            f(x) * debye_phase_derivative(nu, x) / PI * x_half / (s * s)
        });
    }
    let h = 0.5;
    let g: Vec<f64> = [-2.0, -1.0, 1.0, 2.0]
        .iter()
        .map(|o| f(xk(c + o * h, x_half)))
        .collect();
    let d1 = (g[0] - 8.0 * g[1] + 8.0 * g[2] - g[3]) / (12.0 * h);
    let d3 = (g[3] - 2.0 * g[2] + 2.0 * g[1] - g[0]) / (2.0 * h * h * h);
    acc.add(integral + d1 / 24.0 - 7.0 * d3 / 5760.0);
    let v = acc.sum();
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Quadrature { nu, z })
    }
}

/// tr(ℓ_ν + z²)^{-m} by the eigenvalue route.
pub fn mode_trace_eigensum(nu: f64, z: f64, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("resolvent power must be >= 1".into()));
    }
    if nu >= RAYLEIGH_RATIO * z {
        rayleigh_mode(nu, z, m)
    } else {
        eigensum_zeros(nu, z, m as f64)
    }
}
