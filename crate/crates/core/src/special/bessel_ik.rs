//! Modified Bessel functions I_ν and K_ν of real order ν ≥ 0 and argument
//! x > 0.
//!
//! The canonical representation is the pair of logarithms of the scaled
//! functions e^{−x}I_ν(x) and e^{x}K_ν(x). Unscaled values are derived from
//! it and fail with a range error instead of overflowing.
//!
//! Regimes:
//! * ν ≥ [`OLVER_MIN_ORDER`]: uniform large-order expansion.
//! * x ≥ [`HANKEL_MIN_X`] and x ≥ 2ν²: large-argument expansion.
//! * otherwise: Temme series (x ≤ 2) or Steed's continued fraction (x > 2)
//!   for K_μ, K_{μ+1} with |μ| ≤ ½, a continued fraction for I_{ν+1}/I_ν, and
//!   ratio-form recurrences between μ and ν. I comes from the Wronskian.

use std::f64::consts::PI;

use super::gamma::{ln_gamma, temme_gammas};
use super::olver::{olver_ik_product_ln, olver_ik_scaled_ln};
use super::ratio::lentz_ratio;
use crate::error::{Error, Result};

/// Orders at or above this use the uniform expansion.
pub const OLVER_MIN_ORDER: f64 = 20.0;
/// Arguments at or above this (and above 2ν²) use the large-argument series.
pub const HANKEL_MIN_X: f64 = 1000.0;

const EPS: f64 = 2.5e-16;
const MAXIT: usize = 1_000_000;
const TINY_X: f64 = 1e-280;

pub(crate) fn check_args(nu: f64, x: f64) -> Result<()> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::Domain(format!("order must be finite and >= 0, got {nu}")));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("argument must be finite and > 0, got {x}")));
    }
    Ok(())
}

/// (ln(e^{−x}I_ν(x)), ln(e^{x}K_ν(x))) without argument checks.
pub(crate) fn ik_scaled_ln(nu: f64, x: f64) -> (f64, f64) {
    if nu >= OLVER_MIN_ORDER {
        olver_ik_scaled_ln(nu, x)
    } else if x >= HANKEL_MIN_X && x >= 2.0 * nu * nu {
        hankel_ik_scaled_ln(nu, x)
    } else if x < TINY_X {
        tiny_ik_scaled_ln(nu, x)
    } else {
        temme_steed_ik_scaled_ln(nu, x)
    }
}

/// ln(I_ν(x)K_ν(x)), accurate to rounding even where the separate scaled
/// logs are large and of opposite sign.
pub(crate) fn ik_product_ln(nu: f64, x: f64) -> f64 {
    if nu >= OLVER_MIN_ORDER {
        olver_ik_product_ln(nu, x)
    } else {
        let (li, lk) = ik_scaled_ln(nu, x);
        li + lk
    }
}

/// Same as `ik_scaled_ln` but always through the Temme/Steed path; used to
/// pin the regime crossovers.
pub fn ik_scaled_ln_recurrence(nu: f64, x: f64) -> Result<(f64, f64)> {
    check_args(nu, x)?;
    Ok(temme_steed_ik_scaled_ln(nu, x))
}

/// Same as `ik_scaled_ln` but always through the uniform expansion.
pub fn ik_scaled_ln_uniform(nu: f64, x: f64) -> Result<(f64, f64)> {
    check_args(nu, x)?;
    if nu <= 0.0 {
        return Err(Error::Domain("uniform expansion needs nu > 0".into()));
    }
    Ok(olver_ik_scaled_ln(nu, x))
}

/// Same as `ik_scaled_ln` but always through the large-argument series.
pub fn ik_scaled_ln_hankel(nu: f64, x: f64) -> Result<(f64, f64)> {
    check_args(nu, x)?;
    Ok(hankel_ik_scaled_ln(nu, x))
}

fn tiny_ik_scaled_ln(nu: f64, x: f64) -> (f64, f64) {
    let lx2 = (0.5 * x).ln();
    let ln_i = nu * lx2 - ln_gamma(nu + 1.0) - x;
    let ln_k = if nu == 0.0 {
        (-lx2 - 0.577_215_664_901_532_9).ln()
    } else {
        ln_gamma(nu) - std::f64::consts::LN_2 - nu * lx2
    } + x;
    (ln_i, ln_k)
}

fn hankel_ik_scaled_ln(nu: f64, x: f64) -> (f64, f64) {
    let mu4 = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut si = 1.0;
    let mut sk = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu4 - odd * odd) / (8.0 * kf * x);
        if term.abs() >= prev {
            break;
        }
        prev = term.abs();
        si += if k % 2 == 1 { -term } else { term };
        sk += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    let ln_i = -0.5 * (2.0 * PI * x).ln() + si.ln();
    let ln_k = 0.5 * (PI / (2.0 * x)).ln() + sk.ln();
    (ln_i, ln_k)
}

fn temme_steed_ik_scaled_ln(nu: f64, x: f64) -> (f64, f64) {
    let nl = (nu + 0.5).floor() as usize;
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    // r_ν = I_{ν+1}/I_ν by continued fraction, then downward to r_μ through
    // r_{λ−1} = 1/(2λ/x + r_λ); every step adds positive terms.
    let mut r = lentz_ratio(nu, x);
    let mut ln_i_nu_over_mu = 0.0;
    for l in (1..=nl).rev() {
        let lf = xmu + l as f64;
        r = 1.0 / (lf * xi2 + r);
        ln_i_nu_over_mu += r.ln();
    }

    // ln(e^{x}K_μ) and q = K_{μ+1}/K_μ.
    let (ln_kmu_scaled, q) = if x <= 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut qq = 0.5 / (ee * gammi);
        let mut cc = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + qq) / (fi * fi - xmu2);
            cc *= dd / fi;
            p /= fi - xmu;
            qq /= fi + xmu;
            let del = cc * ff;
            sum += del;
            sum1 += cc * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum.ln() + x, sum1 * xi2 / sum)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - xmu2;
        let mut qs = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + qs * delh;
        for i in 1..MAXIT {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            qs += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = qs * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        let ln_k = 0.5 * (PI / (2.0 * x)).ln() - s.ln();
        (ln_k, (xmu + x + 0.5 - h) * xi)
    };

    // Wronskian: x(I_μ K_{μ+1} + I_{μ+1} K_μ) = 1.
    let denom = r + q;
    let ln_imu_scaled = -x.ln() - ln_kmu_scaled - denom.ln();
    let ln_i = ln_imu_scaled + ln_i_nu_over_mu;

    // Upward from μ to ν in ratio form for K.
    let mut ln_k = ln_kmu_scaled;
    let mut ratio = q;
    for i in 1..=nl {
        ln_k += ratio.ln();
        let order = xmu + i as f64;
        ratio = order * xi2 + 1.0 / ratio;
    }
    (ln_i, ln_k)
}

fn finish(what: &'static str, nu: f64, x: f64, ln_v: f64) -> Result<f64> {
    let v = ln_v.exp();
    if v.is_finite() && v > 0.0 && v >= f64::MIN_POSITIVE {
        Ok(v)
    } else {
        Err(Error::Range { what, nu, x })
    }
}

/// ln I_ν(x).
pub fn ln_bessel_i(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    Ok(ik_scaled_ln(nu, x).0 + x)
}

/// ln K_ν(x).
pub fn ln_bessel_k(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    Ok(ik_scaled_ln(nu, x).1 - x)
}

/// I_ν(x).
pub fn bessel_i(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    finish("bessel_i", nu, x, ik_scaled_ln(nu, x).0 + x)
}

/// e^{−x} I_ν(x).
pub fn bessel_i_scaled(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    finish("bessel_i_scaled", nu, x, ik_scaled_ln(nu, x).0)
}

/// K_ν(x).
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    finish("bessel_k", nu, x, ik_scaled_ln(nu, x).1 - x)
}

/// e^{x} K_ν(x).
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    finish("bessel_k_scaled", nu, x, ik_scaled_ln(nu, x).1)
}

/// I_ν(x)·K_ν(x), which stays O(1/x) for all arguments.
pub fn bessel_ik_product(nu: f64, x: f64) -> Result<f64> {
    check_args(nu, x)?;
    Ok(ik_product_ln(nu, x).exp())
}
