//! Ratio inequalities for K_ν used in kernel estimates, as checkable
//! predicates.

use super::bessel_ik::{check_args, ik_scaled_ln};
use crate::error::{Error, Result};

/// Relative slack applied to every predicate.
pub const BOUND_SLACK: f64 = 1e-12;

/// Outcome of the two ratio bounds for K_ν(yz)/K_ν(xz) with x > y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioBounds {
    /// e^{z(x−y)} < K_ν(yz)/K_ν(xz)
    pub exponential: bool,
    /// (x/y)^ν < K_ν(yz)/K_ν(xz)
    pub power: bool,
    /// ln(K_ν(yz)/K_ν(xz)), for reporting margins.
    pub ln_ratio: f64,
}

fn validate(nu: f64, x: f64, y: f64, z: f64) -> Result<()> {
    if !(x > y && y > 0.0) {
        return Err(Error::Precondition(format!("need x > y > 0, got x={x}, y={y}")));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Precondition(format!("need z > 0, got {z}")));
    }
    check_args(nu, x * z)
}

fn ln_k(nu: f64, arg: f64) -> f64 {
    ik_scaled_ln(nu, arg).1 - arg
}

/// Both ratio predicates with [`BOUND_SLACK`] relative slack.
pub fn baricz_ratio_bounds(nu: f64, x: f64, y: f64, z: f64) -> Result<RatioBounds> {
    validate(nu, x, y, z)?;
    let ln_ratio = ln_k(nu, y * z) - ln_k(nu, x * z);
    let slack = BOUND_SLACK * (1.0 + ln_ratio.abs());
    Ok(RatioBounds {
        exponential: z * (x - y) < ln_ratio + slack,
        power: nu * (x / y).ln() < ln_ratio + slack,
        ln_ratio,
    })
}

/// K_ν(xz) < K_ν(yz)·(y/x)^{2ν/3}·e^{−z(x−y)/3}, with relative slack.
pub fn composite_bound(nu: f64, x: f64, y: f64, z: f64) -> Result<bool> {
    validate(nu, x, y, z)?;
    let lhs = ln_k(nu, x * z);
    let rhs = ln_k(nu, y * z) + (2.0 * nu / 3.0) * (y / x).ln() - z * (x - y) / 3.0;
    Ok(lhs < rhs + BOUND_SLACK * (1.0 + lhs.abs().max(rhs.abs())))
}

/// y·K_ν(yz)·I_ν(yz), whose supremum times z is the empirical constant in
/// the diagonal kernel bound.
pub fn diagonal_product(nu: f64, y: f64, z: f64) -> Result<f64> {
    check_args(nu, y * z)?;
    let (li, lk) = ik_scaled_ln(nu, y * z);
    Ok(y * (li + lk).exp())
}
