//! Sampled trace functions and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::spectra::{fmt17, sha256_hex};

use super::{cone_trace, ConeProblem, Route, TraceValue};

/// Trace values on a z-grid with the route and per-sample tail bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSamples {
    pub z_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub tail_bound: Vec<f64>,
    pub route: Route,
    pub m: u32,
    pub model_hash: String,
}

/// n points log-spaced on [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(Error::Domain(format!("bad log grid [{lo}, {hi}] with {n} points")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

impl ConeProblem {
    /// SHA-256 of the canonical JSON form of the problem.
    pub fn model_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("serializable").as_bytes())
    }
}

impl TraceSamples {
    /// Assembles samples and checks the invariants: positive values,
    /// strictly decreasing in z, strictly increasing grid.
    pub fn new(z_grid: Vec<f64>, values: Vec<TraceValue>, route: Route, m: u32, model_hash: String) -> Result<Self> {
        if z_grid.len() != values.len() || z_grid.is_empty() {
            return Err(Error::Precondition("grid and values must have equal nonzero length".into()));
        }
        if z_grid[0] <= 0.0 || z_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("z grid must be positive and strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.value > 0.0)) || values.windows(2).any(|w| !(w[1].value < w[0].value)) {
            return Err(Error::Precondition("trace samples must be positive and decreasing".into()));
        }
        Ok(TraceSamples {
            z_grid,
            tail_bound: values.iter().map(|v| v.tail_bound).collect(),
            values: values.iter().map(|v| v.value).collect(),
            route,
            m,
            model_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.z_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_grid.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# model_hash={}\n# route={}\n# m={}\nz,value,tail_bound\n",
            self.model_hash,
            self.route.tag(),
            self.m
        );
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt17(self.z_grid[i]),
                fmt17(self.values[i]),
                fmt17(self.tail_bound[i])
            ));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// cone_trace on every grid point.
pub fn sample_cone_trace(problem: &ConeProblem, z_grid: &[f64], route: Route) -> Result<TraceSamples> {
    let values = z_grid
        .iter()
        .map(|&z| cone_trace(problem, z, route))
        .collect::<Result<Vec<_>>>()?;
    TraceSamples::new(z_grid.to_vec(), values, route, problem.m, problem.model_hash())
}
