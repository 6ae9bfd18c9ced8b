//! Resolvent traces of Laplace-type operators on model cones and edges.
//!
//! Three independent routes compute the same traces: quadrature of explicit
//! Bessel kernels, sums over Bessel-zero eigenvalues, and a closed form built
//! on the ratio I_{ν+1}/I_ν. A singular-asymptotics engine predicts the large-z
//! expansion of parameter-dependent integrals, and a least-squares fitter
//! extracts power and logarithmic coefficients from sampled traces.

pub mod cache;
pub mod cone;
pub mod edge;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod io;
pub mod quadrature;
pub mod sal;
pub mod series;
pub mod special;
pub mod spectra;

pub use error::{Error, Result};
