//! The ratio r_ν(x) = I_{ν+1}(x)/I_ν(x).
//!
//! For moderate arguments the continued fraction
//! r_ν = 1/(2(ν+1)/x + 1/(2(ν+2)/x + ...)) is evaluated by the modified Lentz
//! method. For very large arguments the ratio is taken from the large-order
//! or large-argument expansions of the scaled I.

use super::bessel_ik::{ik_scaled_ln, HANKEL_MIN_X, OLVER_MIN_ORDER};

const LENTZ_MAX_X: f64 = 4000.0;

pub(crate) fn lentz_ratio(nu: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let xi2 = 2.0 / x;
    let mut f = tiny;
    let mut c = f;
    let mut d = 0.0;
    let mut k = 1.0;
    loop {
        let b = (nu + k) * xi2;
        d = b + d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + 1.0 / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < 3e-16 || k > 1e7 {
            break;
        }
        k += 1.0;
    }
    f
}

fn asymptotic_ratio(nu: f64, x: f64) -> f64 {
    let (a, _) = ik_scaled_ln(nu, x);
    let (b, _) = ik_scaled_ln(nu + 1.0, x);
    (b - a).exp()
}

fn use_asymptotic(nu: f64, x: f64) -> bool {
    x > LENTZ_MAX_X && (nu >= OLVER_MIN_ORDER || (x >= HANKEL_MIN_X && x >= 2.0 * (nu + 3.0).powi(2)))
}

/// r_ν(x) = I_{ν+1}(x)/I_ν(x) for ν ≥ 0, x > 0.
pub fn bessel_i_ratio(nu: f64, x: f64) -> f64 {
    if use_asymptotic(nu, x) {
        asymptotic_ratio(nu, x)
    } else {
        lentz_ratio(nu, x)
    }
}

/// [r_ν, r_{ν+1}, r_{ν+2}] at the same argument, computed by one continued
/// fraction for r_{ν+2} and the stable backward relation r_ν = 1/(2(ν+1)/x + r_{ν+1}).
pub fn bessel_i_ratio_triple(nu: f64, x: f64) -> [f64; 3] {
    if use_asymptotic(nu, x) {
        let l0 = ik_scaled_ln(nu, x).0;
        let l1 = ik_scaled_ln(nu + 1.0, x).0;
        let l2 = ik_scaled_ln(nu + 2.0, x).0;
        let l3 = ik_scaled_ln(nu + 3.0, x).0;
        return [(l1 - l0).exp(), (l2 - l1).exp(), (l3 - l2).exp()];
    }
    let r2 = lentz_ratio(nu + 2.0, x);
    let r1 = 1.0 / (2.0 * (nu + 2.0) / x + r2);
    let r0 = 1.0 / (2.0 * (nu + 1.0) / x + r1);
    [r0, r1, r2]
}
