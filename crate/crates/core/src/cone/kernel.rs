//! Dirichlet Green kernel of ℓ_ν + z² on (0, 1] and its diagonal trace by
//! quadrature.

use crate::error::{Error, Result};
use crate::quadrature::{chebyshev_center_derivative, chebyshev_lobatto, gauss_legendre, geometric_breaks};
use crate::special::bessel_ik::{check_args, ik_product_ln, ik_scaled_ln};
use crate::special::gamma::factorial;

/// Lower end of the x-quadrature; the dropped piece is O(x_min²/ν).
const X_MIN: f64 = 1e-9;
/// Gauss–Legendre order per panel.
const PANEL_ORDER: usize = 16;
/// Chebyshev stencil size in w = z².
const STENCIL_POINTS: usize = 16;

fn check_z(z: f64) -> Result<()> {
    if z > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("resolvent parameter must satisfy z > 0, got {z}")))
    }
}

/// √(xy)·[K_ν(xz) − (K_ν(z)/I_ν(z))·I_ν(xz)]·I_ν(yz) for y ≤ x, extended
/// symmetrically.
pub fn mode_kernel(nu: f64, z: f64, x: f64, y: f64) -> Result<f64> {
    check_z(z)?;
    check_args(nu, 1.0)?;
    if !(x > 0.0 && x <= 1.0 && y > 0.0 && y <= 1.0) {
        return Err(Error::Domain(format!("need x, y in (0, 1], got x={x}, y={y}")));
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    let (liz, lkz) = ik_scaled_ln(nu, z);
    let (li_hi, lk_hi) = ik_scaled_ln(nu, hi * z);
    let (li_lo, _) = ik_scaled_ln(nu, lo * z);
    // Scaled logs: I(t) = e^{li+t}, K(t) = e^{lk−t}.
    let direct = (lk_hi + li_lo - (hi - lo) * z).exp();
    let reflected = (lkz - liz + li_hi + li_lo - (2.0 - hi - lo) * z).exp();
    Ok((hi * lo).sqrt() * (direct - reflected))
}

/// Diagonal value G(x, x) from precomputed scaled logs at z.
#[inline]
fn diagonal(nu: f64, z: f64, x: f64, liz: f64, lkz: f64) -> f64 {
    let (li, _) = ik_scaled_ln(nu, x * z);
    let direct = ik_product_ln(nu, x * z).exp();
    let reflected = (lkz - liz + 2.0 * li - 2.0 * (1.0 - x) * z).exp();
    x * (direct - reflected)
}

/// Quadrature nodes on (0, 1]: geometric panels towards 0 and panels
/// halving towards the boundary layer of width 1/max(z, ν) at x = 1.
pub(crate) fn kernel_nodes(nu: f64, z: f64) -> Vec<(f64, f64)> {
    let scale = z.max(nu).max(1.0);
    let mut breaks = geometric_breaks(X_MIN, 0.5, std::f64::consts::E);
    let mut d = 0.25;
    while d > 0.125 / scale {
        breaks.push(1.0 - d);
        d *= 0.5;
    }
    breaks.push(1.0);
    let rule = gauss_legendre(PANEL_ORDER);
    let mut out = Vec::with_capacity(breaks.len() * PANEL_ORDER);
    for w in breaks.windows(2) {
        rule.push_mapped(w[0], w[1], &mut out);
    }
    out
}

fn t1_on_nodes(nu: f64, z: f64, nodes: &[(f64, f64)]) -> f64 {
    let (liz, lkz) = ik_scaled_ln(nu, z);
    let mut acc = crate::quadrature::Neumaier::default();
    for &(x, w) in nodes {
        acc.add(w * diagonal(nu, z, x, liz, lkz));
    }
    acc.sum()
}

/// tr(ℓ_ν + z²)^{-1} = ∫₀¹ G(x, x) dx.
pub fn mode_trace(nu: f64, z: f64) -> Result<f64> {
    check_z(z)?;
    check_args(nu, z)?;
    let v = t1_on_nodes(nu, z, &kernel_nodes(nu, z));
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Quadrature { nu, z })
    }
}

/// Relative error of the stencil derivative per unit of amplification
/// (n·(w0 + (ν+1)²)/h)^{m−1}, calibrated against the eigenvalue route.
const NOISE_PER_AMPLIFICATION: f64 = 5e-14;
/// Estimated relative error above which the stencil result is refused.
const MAX_STENCIL_ERROR: f64 = 1e-2;

/// Estimated relative error of the order m−1 stencil derivative. The kernel
/// trace exists only for w > 0, so the stencil cannot reach the scale
/// (ν+1)² on which T_1 varies when ν ≫ z; rounding noise is amplified by
/// about (n·(w0 + (ν+1)²)/h)^{m−1} for an n-point stencil.
pub fn kernel_stencil_error(nu: f64, z: f64, m: u32) -> f64 {
    let w0 = z * z;
    let h = super::stencil_half_width(nu, w0);
    let a = STENCIL_POINTS as f64 * (w0 + (nu + 1.0) * (nu + 1.0)) / h;
    NOISE_PER_AMPLIFICATION * a.powi(m.saturating_sub(1) as i32)
}

/// tr(ℓ_ν + z²)^{-m} through (−1)^{m−1}/(m−1)!·d^{m−1}/dw^{m−1} of the
/// kernel trace, differentiated on a Chebyshev stencil in w = z² with the
/// x-nodes held fixed. Refused with a capability error when
/// `kernel_stencil_error` exceeds 1e−2.
pub fn mode_trace_kernel(nu: f64, z: f64, m: u32) -> Result<f64> {
    check_z(z)?;
    check_args(nu, z)?;
    if m == 0 {
        return Err(Error::Domain("resolvent power must be >= 1".into()));
    }
    if m == 1 {
        return mode_trace(nu, z);
    }
    let est = kernel_stencil_error(nu, z, m);
    if est > MAX_STENCIL_ERROR {
        return Err(Error::Capability(format!(
            "kernel stencil for m={m} at nu={nu}, z={z} is ill-conditioned (estimated error {est:.1e})"
        )));
    }
    let nodes = kernel_nodes(nu, z);
    let w0 = z * z;
    let half = super::stencil_half_width(nu, w0);
    let values: Vec<f64> = chebyshev_lobatto(STENCIL_POINTS)
        .iter()
        .map(|s| t1_on_nodes(nu, (w0 + half * s).sqrt(), &nodes))
        .collect();
    let order = (m - 1) as usize;
    let d = chebyshev_center_derivative(&values, order, half);
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    let v = sign * d / factorial(m - 1);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Quadrature { nu, z })
    }
}
