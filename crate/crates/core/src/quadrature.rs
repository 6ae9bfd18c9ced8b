//! Fixed-order Gauss–Legendre rules, composite integration over explicit
//! breakpoints, and Chebyshev differentiation on a local stencil.
//!
//! Everything here is non-adaptive on purpose: node sets are a pure function
//! of the inputs, so results are bit-reproducible across runs and thread
//! counts.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// A Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Maps the rule onto [a, b], appending (node, weight) pairs.
    pub fn push_mapped(&self, a: f64, b: f64, out: &mut Vec<(f64, f64)>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            out.push((mid + half * x, w * half));
        }
    }

    /// Composite rule over consecutive breakpoints.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        let mut acc = Neumaier::default();
        for pair in breaks.windows(2) {
            acc.add(self.integrate(pair[0], pair[1], &mut f));
        }
        acc.sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared rules for the orders used throughout the crate.
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static G8: OnceLock<GaussLegendre> = OnceLock::new();
    static G12: OnceLock<GaussLegendre> = OnceLock::new();
    static G16: OnceLock<GaussLegendre> = OnceLock::new();
    static G20: OnceLock<GaussLegendre> = OnceLock::new();
    static G32: OnceLock<GaussLegendre> = OnceLock::new();
    let cell = match n {
        8 => &G8,
        12 => &G12,
        16 => &G16,
        20 => &G20,
        32 => &G32,
        _ => panic!("no shared Gauss-Legendre rule of order {n}"),
    };
    cell.get_or_init(|| GaussLegendre::new(n))
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Sums a slice with compensation, in slice order.
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<Neumaier>().sum()
}

/// Chebyshev–Lobatto points cos(iπ/(n−1)) on [-1, 1], i = 0..n.
pub fn chebyshev_lobatto(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| (PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Chebyshev coefficients of the interpolant through values at
/// `chebyshev_lobatto(n)` points.
pub fn chebyshev_coefficients(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let nm = (n - 1) as f64;
    let mut c = vec![0.0; n];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, v) in values.iter().enumerate() {
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            s += w * v * (PI * (j * k) as f64 / nm).cos();
        }
        *ck = 2.0 * s / nm;
    }
    c[0] *= 0.5;
    c[n - 1] *= 0.5;
    c
}

/// Coefficients of the derivative series of a Chebyshev expansion.
pub fn chebyshev_derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n];
    for k in (0..n - 1).rev() {
        let next = if k + 2 < n { d[k + 2] } else { 0.0 };
        d[k] = next + 2.0 * (k + 1) as f64 * c[k + 1];
    }
    d[0] *= 0.5;
    d.truncate(n - 1);
    d
}

/// Evaluates a Chebyshev series at s ∈ [-1, 1] (Clenshaw).
pub fn chebyshev_eval(c: &[f64], s: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * s * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    s * b1 - b2 + c.first().copied().unwrap_or(0.0)
}

/// The `order`-th derivative at the stencil centre of the interpolant through
/// samples taken at `center + half_width * chebyshev_lobatto(n)`.
pub fn chebyshev_center_derivative(values: &[f64], order: usize, half_width: f64) -> f64 {
    let mut c = chebyshev_coefficients(values);
    for _ in 0..order {
        c = chebyshev_derivative(&c);
    }
    chebyshev_eval(&c, 0.0) / half_width.powi(order as i32)
}

/// Geometric breakpoints from `a` to `b` (both > 0) with ratio at most `ratio`.
pub fn geometric_breaks(a: f64, b: f64, ratio: f64) -> Vec<f64> {
    assert!(a > 0.0 && b > a && ratio > 1.0);
    let n = ((b / a).ln() / ratio.ln()).ceil().max(1.0) as usize;
    let q = (b / a).powf(1.0 / n as f64);
    let mut out = Vec::with_capacity(n + 1);
    let mut x = a;
    out.push(a);
    for _ in 1..n {
        x *= q;
        out.push(x);
    }
    out.push(b);
    out
}
