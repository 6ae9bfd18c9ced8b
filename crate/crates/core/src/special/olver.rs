//! Uniform large-order expansions of I_ν(νt) and K_ν(νt).
//!
//! The polynomials U_k(p) are generated once with exact rational arithmetic
//! from U_{k+1} = ½p²(1−p²)U_k' + ⅛∫₀^p (1−5s²)U_k(s) ds, then rounded to f64.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Highest U_k index available.
pub const K_MAX: usize = 24;

/// Exact U_k coefficients, index = power of p.
pub fn u_polynomials_exact(max_k: usize) -> Result<Vec<Vec<BigRational>>> {
    if max_k > K_MAX {
        return Err(Error::Capability(format!(
            "requested U_{max_k}, highest available is U_{K_MAX}"
        )));
    }
    let one = BigRational::from_integer(BigInt::from(1));
    let mut out = vec![vec![one]];
    for _ in 0..max_k {
        let next = olver_step(out.last().expect("nonempty"));
        out.push(next);
    }
    Ok(out)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn olver_step(u: &[BigRational]) -> Vec<BigRational> {
    let deg = u.len() - 1;
    let mut next = vec![BigRational::zero(); deg + 4];
    // ½ p² (1 − p²) U'(p)
    for (i, c) in u.iter().enumerate().skip(1) {
        let d = c * rat(i as i64, 2);
        next[i + 1] += &d;
        next[i + 3] -= &d;
    }
    // ⅛ ∫₀^p (1 − 5 s²) U(s) ds
    for (i, c) in u.iter().enumerate() {
        next[i + 1] += c * rat(1, 8 * (i as i64 + 1));
        next[i + 3] -= c * rat(5, 8 * (i as i64 + 3));
    }
    while next.len() > 1 && next.last().is_some_and(|c| c.is_zero()) {
        next.pop();
    }
    next
}

/// U_0..U_{max_k} as f64 coefficient vectors.
pub fn u_polynomials(max_k: usize) -> Result<Vec<Vec<f64>>> {
    if max_k > K_MAX {
        return Err(Error::Capability(format!(
            "requested U_{max_k}, highest available is U_{K_MAX}"
        )));
    }
    Ok(u_table()[..=max_k].to_vec())
}

pub(crate) fn u_table() -> &'static [Vec<f64>] {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        u_polynomials_exact(K_MAX)
            .expect("K_MAX is available")
            .iter()
            .map(|poly| {
                poly.iter()
                    .map(|c| c.to_f64().expect("finite rational"))
                    .collect()
            })
            .collect()
    })
}

pub(crate) fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)
}

/// Which Bessel function the expansion approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OlverKind {
    I,
    K,
}

/// Phase and amplitude variables of the uniform expansion at scaled argument t.
#[derive(Debug, Clone)]
pub struct OlverFrame {
    pub t: f64,
    pub eta: f64,
    pub p: f64,
    pub u_coeffs: Vec<Vec<f64>>,
}

impl OlverFrame {
    pub fn new(t: f64, max_k: usize) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("t must be positive and finite, got {t}")));
        }
        let s = t.hypot(1.0);
        Ok(OlverFrame {
            t,
            eta: s - (1.0 / t).asinh(),
            p: 1.0 / s,
            u_coeffs: u_polynomials(max_k)?,
        })
    }
}

/// η(t) − t, evaluated without cancellation for large t.
pub(crate) fn eta_minus_t(t: f64) -> f64 {
    let s = t.hypot(1.0);
    1.0 / (s + t) - (1.0 / t).asinh()
}

/// Truncated uniform expansion with `terms` summands of the U-series.
pub fn olver_uniform(kind: OlverKind, nu: f64, t: f64, terms: usize) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Domain(format!("order must be positive, got {nu}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if terms == 0 || terms > K_MAX + 1 {
        return Err(Error::Capability(format!(
            "terms must lie in 1..={}, got {terms}",
            K_MAX + 1
        )));
    }
    let s = t.hypot(1.0);
    let p = 1.0 / s;
    let eta = s - (1.0 / t).asinh();
    let table = u_table();
    let mut sum = 0.0;
    let mut scale = 1.0;
    for (k, u) in table.iter().take(terms).enumerate() {
        let sign = if kind == OlverKind::K && k % 2 == 1 { -1.0 } else { 1.0 };
        sum += sign * poly_eval(u, p) * scale;
        scale /= nu;
    }
    let ln_val = match kind {
        OlverKind::I => nu * eta - 0.5 * (2.0 * PI * nu).ln() - 0.5 * s.ln(),
        OlverKind::K => -nu * eta + 0.5 * (PI / (2.0 * nu)).ln() - 0.5 * s.ln(),
    };
    let v = ln_val.exp() * sum;
    if v.is_finite() && v != 0.0 {
        Ok(v)
    } else {
        Err(Error::Range {
            what: "olver_uniform",
            nu,
            x: nu * t,
        })
    }
}

/// Logarithm of the scaled truncated expansion, ln(e^{−νt}·value) for I and
/// ln(e^{νt}·value) for K; finite where [`olver_uniform`] would overflow.
pub fn olver_uniform_scaled_ln(kind: OlverKind, nu: f64, t: f64, terms: usize) -> Result<f64> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Domain(format!("order must be positive, got {nu}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if terms == 0 || terms > K_MAX + 1 {
        return Err(Error::Capability(format!(
            "terms must lie in 1..={}, got {terms}",
            K_MAX + 1
        )));
    }
    let s = t.hypot(1.0);
    let p = 1.0 / s;
    let em = eta_minus_t(t);
    let mut sum = 0.0;
    let mut scale = 1.0;
    for (k, u) in u_table().iter().take(terms).enumerate() {
        let sign = if kind == OlverKind::K && k % 2 == 1 { -1.0 } else { 1.0 };
        sum += sign * poly_eval(u, p) * scale;
        scale /= nu;
    }
    if sum <= 0.0 {
        return Err(Error::Range {
            what: "olver_uniform_scaled_ln",
            nu,
            x: nu * t,
        });
    }
    let base = match kind {
        OlverKind::I => nu * em - 0.5 * (2.0 * PI * nu).ln(),
        OlverKind::K => -nu * em + 0.5 * (PI / (2.0 * nu)).ln(),
    };
    Ok(base - 0.5 * s.ln() + sum.ln())
}

/// U-series sums (Σ U_k/ν^k, Σ (−1)^k U_k/ν^k) at t = x/ν, truncated once
/// terms fall below double precision, with s = √(1+t²) and η(t) − t.
fn olver_sums(nu: f64, x: f64) -> (f64, f64, f64, f64) {
    let t = x / nu;
    let s = t.hypot(1.0);
    let p = 1.0 / s;
    let em = eta_minus_t(t);
    let mut si = 1.0;
    let mut sk = 1.0;
    let mut scale = 1.0;
    let mut small = 0;
    for (k, u) in u_table().iter().enumerate().skip(1) {
        scale /= nu;
        let term = poly_eval(u, p) * scale;
        si += term;
        sk += if k % 2 == 1 { -term } else { term };
        if term.abs() < 1e-17 {
            small += 1;
            if small == 2 {
                break;
            }
        } else {
            small = 0;
        }
    }
    (s, em, si, sk)
}

/// ln(e^{−x} I_ν(x)) and ln(e^{x} K_ν(x)) from the uniform expansion.
pub(crate) fn olver_ik_scaled_ln(nu: f64, x: f64) -> (f64, f64) {
    let (s, em, si, sk) = olver_sums(nu, x);
    let common = -0.5 * s.ln();
    let ln_i = nu * em - 0.5 * (2.0 * PI * nu).ln() + common + si.ln();
    let ln_k = -nu * em + 0.5 * (PI / (2.0 * nu)).ln() + common + sk.ln();
    (ln_i, ln_k)
}

/// ln(I_ν(x)K_ν(x)) = −ln(2ν√(1+t²)) + ln(Σ U_k/ν^k · Σ (−1)^k U_k/ν^k),
/// free of the ±νη terms that cancel in the sum of the separate logs.
pub(crate) fn olver_ik_product_ln(nu: f64, x: f64) -> f64 {
    let (s, _, si, sk) = olver_sums(nu, x);
    -(2.0 * nu * s).ln() + (si * sk).ln()
}
