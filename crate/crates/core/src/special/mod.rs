//! Bessel functions, their zeros, uniform asymptotics and kernel bounds.

pub mod bessel_ik;
pub mod bessel_jy;
pub mod bounds;
pub mod gamma;
pub mod olver;
pub mod ratio;
pub mod zeros;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bessel_ik::{
    ik_scaled_ln_hankel, ik_scaled_ln_recurrence, ik_scaled_ln_uniform, bessel_i, bessel_i_scaled, bessel_ik_product, bessel_k, bessel_k_scaled, ln_bessel_i,
    ln_bessel_k, HANKEL_MIN_X, OLVER_MIN_ORDER,
};
pub use bessel_jy::{bessel_j, bessel_j_with_derivative};
pub use bounds::{baricz_ratio_bounds, composite_bound, diagonal_product, RatioBounds};
pub use olver::{olver_uniform, olver_uniform_scaled_ln, u_polynomials, OlverFrame, OlverKind, K_MAX};
pub use ratio::{bessel_i_ratio, bessel_i_ratio_triple};
pub use zeros::{
    bessel_j_zero, bessel_j_zeros_resolved, debye_phase_inverse, bessel_j_zeros_up_to, debye_phase, debye_phase_derivative, global_zero_cache,
    robin_zeros_up_to, ZeroCache, ZeroList,
};

/// A validated Bessel order ν ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BesselOrder(f64);

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if nu >= 0.0 && nu.is_finite() {
            Ok(BesselOrder(nu))
        } else {
            Err(Error::Domain(format!("Bessel order must be finite and >= 0, got {nu}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for BesselOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        BesselOrder::new(v)
    }
}

impl From<BesselOrder> for f64 {
    fn from(o: BesselOrder) -> f64 {
        o.0
    }
}
