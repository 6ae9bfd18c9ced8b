//! Singular asymptotics: the large-z expansion of ∫₀^∞ σ(x, xz) dx from the
//! ζ → ∞ expansion σ ~ Σ σ_{αj}(x) ζ^α log^j ζ and the x-jets of σ at 0.
//!
//! Three families of terms are emitted:
//!   z^{-k-1} ∫reg ζ^k/k! ∂_x^kσ(0, ζ) dζ,
//!   ∫reg σ_{αj}(x) (xz)^α log^j(xz) dx,
//!   ∂_x^kσ_{αj}(0)/((j+1)·k!) · z^α log^{j+1} z  for α = −k−1, k ∈ ℕ.
//! Regularized integrals continue ∫₁^∞ ζ^α log^j ζ dζ to (−1)^{j+1} j!/(α+1)^{j+1}
//! and take the finite part 0 at α = −1; the same convention applies to
//! ∫₀^1 x^α log^i x dx at x → 0.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, geometric_breaks, Neumaier};
use crate::series::{binomial, eval_terms, ExpansionSeries, ExpansionTerm, SeriesDiagnostics, POWER_EPS};
use crate::special::gamma::factorial;

pub type XFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// (k, x) ↦ k-th x-derivative.
pub type XJet = Arc<dyn Fn(u32, f64) -> f64 + Send + Sync>;
pub type SymbolFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// (k, x, ζ) ↦ ∂_x^k σ(x, ζ).
pub type SymbolJet = Arc<dyn Fn(u32, f64, f64) -> f64 + Send + Sync>;

/// Finite part of ∫₁^∞ ζ^{-1} log^j ζ dζ and of ∫₀^1 x^{-1} log^j x dx.
pub const FINITE_PART_AT_MINUS_ONE: f64 = 0.0;

const GL_ORDER: usize = 20;
/// Radius of the x-Taylor region for analytic jets.
const TAYLOR_RADIUS: f64 = 0.5;
/// Radius of the x-Taylor region for finite-difference jets.
const TAYLOR_RADIUS_FD: f64 = 0.05;
const MAX_JET_ORDER: u32 = 60;
/// Slope tolerance of verify_sal.
pub const SLOPE_TOLERANCE: f64 = 0.2;
/// Remainders below this fraction of the integral count as exact.
pub const EXACT_REMAINDER: f64 = 1e-12;

/// One term σ_{αj}(x) ζ^α log^j ζ of the ζ → ∞ expansion.
#[derive(Clone)]
pub struct ZetaTerm {
    pub alpha: f64,
    pub j: u32,
    pub sigma: XFn,
    /// Analytic x-derivatives of σ_{αj}; finite differences otherwise.
    pub jet: Option<XJet>,
}

impl ZetaTerm {
    pub fn new(alpha: f64, j: u32, sigma: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ZetaTerm {
            alpha,
            j,
            sigma: Arc::new(sigma),
            jet: None,
        }
    }

    pub fn with_jet(mut self, jet: impl Fn(u32, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.jet = Some(Arc::new(jet));
        self
    }

    /// k-th derivative at x with an error estimate (0 when analytic).
    fn derivative(&self, k: u32, x: f64) -> (f64, f64) {
        match &self.jet {
            Some(d) => (d(k, x), 0.0),
            None => finite_difference(|t| (self.sigma)(t), x, k),
        }
    }
}

/// A symbol σ(x, ζ) with its ζ → ∞ expansion. Every exponent above
/// `complete_above` is listed in `zeta_expansion`.
#[derive(Clone)]
pub struct SymbolProvider {
    pub eval: SymbolFn,
    pub dx: Option<SymbolJet>,
    pub zeta_expansion: Vec<ZetaTerm>,
    pub complete_above: f64,
    /// The σ_{αj} are negligible beyond x_max.
    pub x_max: f64,
    /// Points in x > 0 where σ may fail to be smooth.
    pub breakpoints: Vec<f64>,
    /// |ξ| of the integrability probe.
    pub c0: f64,
}

impl fmt::Debug for SymbolProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let keys: Vec<(f64, u32)> = self.zeta_expansion.iter().map(|t| (t.alpha, t.j)).collect();
        f.debug_struct("SymbolProvider")
            .field("expansion", &keys)
            .field("complete_above", &self.complete_above)
            .field("analytic_dx", &self.dx.is_some())
            .field("x_max", &self.x_max)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl SymbolProvider {
    pub fn new(
        eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        mut zeta_expansion: Vec<ZetaTerm>,
        complete_above: f64,
    ) -> Self {
        zeta_expansion.sort_by(|a, b| b.alpha.total_cmp(&a.alpha).then(a.j.cmp(&b.j)));
        SymbolProvider {
            eval: Arc::new(eval),
            dx: None,
            zeta_expansion,
            complete_above,
            x_max: 60.0,
            breakpoints: Vec::new(),
            c0: 1.0,
        }
    }

    pub fn with_dx(mut self, dx: impl Fn(u32, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dx = Some(Arc::new(dx));
        self
    }

    pub fn with_x_max(mut self, x_max: f64) -> Self {
        self.x_max = x_max;
        self
    }

    pub fn with_breakpoints(mut self, mut b: Vec<f64>) -> Self {
        b.retain(|x| *x > 0.0);
        b.sort_by(f64::total_cmp);
        self.breakpoints = b;
        self
    }

    /// Σ σ_{αj}(x) ζ^α log^j ζ over the listed terms.
    pub fn expansion_at(&self, x: f64, zeta: f64) -> f64 {
        let lz = zeta.ln();
        self.zeta_expansion
            .iter()
            .map(|t| (t.sigma)(x) * zeta.powf(t.alpha) * lz.powi(t.j as i32))
            .sum()
    }

    fn dx_at(&self, k: u32, x: f64, zeta: f64) -> (f64, f64) {
        match &self.dx {
            Some(d) => (d(k, x, zeta), 0.0),
            None if k == 0 => ((self.eval)(x, zeta), 0.0),
            None => finite_difference(|t| (self.eval)(t, zeta), x, k),
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self
            .zeta_expansion
            .windows(2)
            .any(|w| (w[0].alpha - w[1].alpha).abs() <= POWER_EPS && w[0].j == w[1].j)
        {
            return Err(Error::Precondition("duplicate (alpha, j) in the zeta expansion".into()));
        }
        if self.zeta_expansion.iter().any(|t| !t.alpha.is_finite()) {
            return Err(Error::Precondition("expansion exponents must be finite".into()));
        }
        if !(self.x_max > 1.0) || !(self.c0 > 0.0) {
            return Err(Error::Precondition("need x_max > 1 and c0 > 0".into()));
        }
        Ok(())
    }
}

/// k-th derivative by central differences with two Richardson levels; the
/// step is picked from a sweep by the smallest level difference, which is
/// also returned as the error estimate.
pub fn finite_difference<F: Fn(f64) -> f64>(f: F, x: f64, k: u32) -> (f64, f64) {
    if k == 0 {
        return (f(x), 0.0);
    }
    let central = |h: f64| {
        let mut s = 0.0;
        for i in 0..=k {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binomial(k, i) * f(x + (0.5 * k as f64 - i as f64) * h);
        }
        s / h.powi(k as i32)
    };
    let mut best = (f64::NAN, f64::INFINITY);
    for &h in &[0.8, 0.4, 0.2, 0.1, 0.05, 0.025] {
        let d = [central(h), central(0.5 * h), central(0.25 * h)];
        let r1 = [(4.0 * d[1] - d[0]) / 3.0, (4.0 * d[2] - d[1]) / 3.0];
        let r2 = (16.0 * r1[1] - r1[0]) / 15.0;
        let err = (r2 - r1[1]).abs();
        if err < best.1 {
            best = (r2, err);
        }
    }
    best
}

/// A term c·ζ^α·log^j ζ of an expansion at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLog {
    pub alpha: f64,
    pub j: u32,
    pub coeff: f64,
}

/// Continuation of ∫₁^∞ ζ^α log^j ζ dζ.
pub fn continued_upper(alpha: f64, j: u32) -> f64 {
    if (alpha + 1.0).abs() <= POWER_EPS {
        return FINITE_PART_AT_MINUS_ONE;
    }
    let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
    sign * factorial(j) / (alpha + 1.0).powi(j as i32 + 1)
}

/// Continuation of ∫₀^a x^s log^i x dx.
pub fn continued_lower(s: f64, i: u32, a: f64) -> f64 {
    let la = a.ln();
    if (s + 1.0).abs() <= POWER_EPS {
        return la.powi(i as i32 + 1) / (i + 1) as f64 + FINITE_PART_AT_MINUS_ONE;
    }
    let mut acc = 0.0;
    for r in 0..=i {
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * factorial(i) / factorial(i - r) * la.powi((i - r) as i32) / (s + 1.0).powi(r as i32 + 1);
    }
    a.powf(s + 1.0) * acc
}

fn integrate_breaks<F: Fn(f64) -> f64>(breaks: &[f64], f: F) -> Result<f64> {
    let v = gauss_legendre(GL_ORDER).integrate_panels(breaks, f);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain("integrand is not finite on the quadrature nodes".into()))
    }
}

/// ∫₀^1 f for f integrable at 0, on geometric panels reaching 1e-90.
fn integrate_unit<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let mut breaks = vec![0.0];
    breaks.extend(geometric_breaks(1e-90, 1.0, 8.0));
    integrate_breaks(&breaks, f)
}

/// ∫₁^∞ of a decaying remainder r on doubling panels; stops once a panel
/// contributes below 1e-17 of the total or below the rounding level of the
/// subtraction, reported through `scale`.
fn integrate_remainder<R, S>(r: R, scale: S) -> Result<f64>
where
    R: Fn(f64) -> f64,
    S: Fn(f64) -> f64,
{
    let rule = gauss_legendre(GL_ORDER);
    let mut acc = Neumaier::default();
    for i in 0..400 {
        let (a, b) = (2f64.powi(i), 2f64.powi(i + 1));
        let d = rule.integrate(a, b, &r);
        let noise = 64.0 * f64::EPSILON * rule.integrate(a, b, &scale);
        if !d.is_finite() {
            return Err(Error::Domain("regularized remainder is not finite".into()));
        }
        acc.add(d);
        if i >= 4 && (d.abs() <= 1e-17 * acc.sum().abs() || d.abs() <= noise) {
            return Ok(acc.sum());
        }
    }
    Err(Error::Capability("regularized remainder does not decay".into()))
}

/// ∫₀^1 f + ∫₁^∞ (f − Σ terms) + Σ coeff·∫₁^∞ ζ^α log^j ζ (continued).
/// Every exponent above `complete_above` must be listed, and the remainder
/// must be integrable: complete_above < −1.
pub fn regularized_integral<F: Fn(f64) -> f64>(f: F, expansion: &[PowerLog], complete_above: f64) -> Result<f64> {
    regularized_integral_noisy(f, expansion, complete_above, 0.0)
}

/// As [`regularized_integral`] for an integrand known only to relative
/// accuracy `rel_noise`: the tail stops once panels fall to that level.
fn regularized_integral_noisy<F: Fn(f64) -> f64>(
    f: F,
    expansion: &[PowerLog],
    complete_above: f64,
    rel_noise: f64,
) -> Result<f64> {
    if !(complete_above < -1.0) {
        return Err(Error::Capability(format!(
            "expansion complete only above {complete_above}; the remainder need not be integrable"
        )));
    }
    let lower = integrate_unit(&f)?;
    let sum = |z: f64| {
        let lz = z.ln();
        expansion.iter().map(|t| t.coeff * z.powf(t.alpha) * lz.powi(t.j as i32)).sum::<f64>()
    };
    let abs_sum = |z: f64| {
        let lz = z.ln();
        f(z).abs()
            + expansion
                .iter()
                .map(|t| (t.coeff * z.powf(t.alpha) * lz.powi(t.j as i32)).abs())
                .sum::<f64>()
    };
    let upper = integrate_remainder(|z| f(z) - sum(z), |z| (1.0 + rel_noise / (64.0 * f64::EPSILON)) * abs_sum(z))?;
    let closed: f64 = expansion.iter().map(|t| t.coeff * continued_upper(t.alpha, t.j)).sum();
    Ok(lower + upper + closed)
}

/// ∫reg₀^∞ σ_{αj}(x) x^α log^i x dx with (value, derivative error).
fn x_regularized(term: &ZetaTerm, i: u32, symbol: &SymbolProvider) -> Result<(f64, f64)> {
    let alpha = term.alpha;
    let g = &term.sigma;
    let weight = |x: f64| x.powf(alpha) * x.ln().powi(i as i32);
    // [1, ∞): panels to x_max, then x = x_max/t.
    let mut breaks = vec![1.0];
    breaks.extend(symbol.breakpoints.iter().copied().filter(|b| *b > 1.0 && *b < symbol.x_max));
    breaks.push(symbol.x_max);
    let mut fine = vec![breaks[0]];
    for w in breaks.windows(2) {
        fine.extend(geometric_breaks(w[0], w[1], 2.0).into_iter().skip(1));
    }
    let mut upper = integrate_breaks(&fine, |x| {
        let v = g(x);
        if v == 0.0 {
            0.0
        } else {
            v * weight(x)
        }
    })?;
    let xm = symbol.x_max;
    upper += integrate_unit(|t| {
        if t == 0.0 {
            return 0.0;
        }
        let x = xm / t;
        let v = g(x);
        if v == 0.0 {
            0.0
        } else {
            v * weight(x) * xm / (t * t)
        }
    })?;

    // [0, a]: Taylor series with continued monomial integrals; [a, 1]: direct.
    let first_break = symbol.breakpoints.first().copied().unwrap_or(f64::INFINITY);
    let (radius, max_order) = match term.jet {
        Some(_) => (TAYLOR_RADIUS, MAX_JET_ORDER),
        None => {
            let needed = (-1.0 - alpha + POWER_EPS).floor().max(-1.0) as i64 + 1;
            (TAYLOR_RADIUS_FD, (needed.max(0) as u32 + 3).min(8))
        }
    };
    let a = radius.min(0.5 * first_break);
    let mut series = Neumaier::default();
    let mut jet_err = 0.0f64;
    let mut last = f64::INFINITY;
    for n in 0..=max_order {
        let (d, e) = term.derivative(n, 0.0);
        jet_err = jet_err.max(e / factorial(n) * a.powi(n as i32));
        let t = d / factorial(n) * continued_lower(n as f64 + alpha, i, a);
        series.add(t);
        let mag = (d / factorial(n)).abs() * a.powi(n as i32);
        if term.jet.is_some() && n > 4 && mag <= 1e-18 * series.sum().abs().max(1e-300) && last <= 1e-18 * series.sum().abs().max(1e-300) {
            break;
        }
        last = mag;
        if term.jet.is_none() && n == max_order {
            jet_err = jet_err.max(mag);
        }
    }
    let mid = if a < 1.0 {
        let mut b = vec![a];
        b.extend(symbol.breakpoints.iter().copied().filter(|x| *x > a && *x < 1.0));
        b.push(1.0);
        let mut fine = vec![b[0]];
        for w in b.windows(2) {
            fine.extend(geometric_breaks(w[0], w[1], 2.0).into_iter().skip(1));
        }
        integrate_breaks(&fine, |x| g(x) * weight(x))?
    } else {
        0.0
    };
    Ok((upper + series.sum() + mid, jet_err))
}

/// Output window: powers down to `power_min`, x-jets up to `k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SalOrders {
    pub k_max: u32,
    pub power_min: f64,
}

impl SalOrders {
    /// The smallest jet order that reaches `power_min`.
    pub fn through(power_min: f64) -> Self {
        SalOrders {
            k_max: jets_needed(power_min),
            power_min,
        }
    }
}

fn jets_needed(power_min: f64) -> u32 {
    if power_min <= -1.0 + POWER_EPS {
        (-1.0 - power_min + POWER_EPS).floor() as u32
    } else {
        0
    }
}

/// Is α = −k−1 for an integer k ≥ 0?
fn interaction_order(alpha: f64) -> Option<u32> {
    let k = -1.0 - alpha;
    (k > -POWER_EPS && (k - k.round()).abs() <= POWER_EPS).then(|| k.round() as u32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityProbe {
    pub j: u32,
    pub theta: f64,
    /// ∫₀^1∫₀^1 y^j |σ^{(j)}(θyt, yξ)| dy dt with the y-integral cut at 1e-9.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    /// Growth of |σ − expansion|·ζ^{-complete_above} from ζ ≤ 64 to ζ ≥ 256.
    pub remainder_growth: f64,
    pub integrability: Vec<IntegrabilityProbe>,
}

const PROBE_X: [f64; 6] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];

/// Assumption (a): the expansion remainder decays like ζ^{complete_above}
/// and the σ_{αj} decay in x.
fn probe_expansion(symbol: &SymbolProvider) -> Result<f64> {
    let mut early: f64 = 0.0;
    let mut late: f64 = 0.0;
    for e in 3..=13 {
        let zeta = 2f64.powi(e);
        let mut rem: f64 = 0.0;
        for &x in PROBE_X.iter().filter(|&&x| x <= zeta / symbol.c0) {
            let s = (symbol.eval)(x, zeta);
            let lz = zeta.ln();
            let mut scale = s.abs();
            let mut sum = 0.0;
            for t in &symbol.zeta_expansion {
                let v = (t.sigma)(x) * zeta.powf(t.alpha) * lz.powi(t.j as i32);
                sum += v;
                scale += v.abs();
            }
            if !s.is_finite() || !sum.is_finite() {
                return Err(Error::Hypothesis {
                    assumption: "a) differentiable expansion",
                    detail: format!("symbol or expansion not finite at x={x}, zeta={zeta}"),
                });
            }
            rem = rem.max(((s - sum).abs() - 1e-13 * scale).max(0.0));
        }
        let q = if symbol.complete_above == f64::NEG_INFINITY {
            rem
        } else {
            rem * zeta.powf(-symbol.complete_above)
        };
        if e <= 6 {
            early = early.max(q);
        } else if e >= 8 {
            late = late.max(q);
        }
    }
    let growth = if late == 0.0 { 0.0 } else { late / early.max(1e-300) };
    if growth > 1e3 {
        return Err(Error::Hypothesis {
            assumption: "a) differentiable expansion",
            detail: format!(
                "remainder does not decay like zeta^{}: growth factor {growth:.3e}",
                symbol.complete_above
            ),
        });
    }
    for t in &symbol.zeta_expansion {
        let peak = PROBE_X.iter().map(|&x| (t.sigma)(x).abs()).fold(0.0, f64::max);
        let tail = (t.sigma)(symbol.x_max).abs() * symbol.x_max.powf(t.alpha.max(0.0) + 2.0);
        if !(tail <= 1e-10 * peak.max(1e-300)) && peak > 0.0 {
            return Err(Error::Hypothesis {
                assumption: "a) differentiable expansion",
                detail: format!("sigma_({}, {}) is not negligible at x_max = {}", t.alpha, t.j, symbol.x_max),
            });
        }
    }
    Ok(growth)
}

/// Assumption (b) for j ≤ k_max and θ ∈ {0, ½, 1}: the y-integral is cut at
/// δ = 1e-3, 1e-6, 1e-9 and must settle.
fn probe_integrability(symbol: &SymbolProvider, k_max: u32) -> Result<Vec<IntegrabilityProbe>> {
    let rule = gauss_legendre(8);
    let mut t_nodes = Vec::new();
    rule.push_mapped(0.0, 1e-6, &mut t_nodes);
    for w in geometric_breaks(1e-6, 1.0, 4.0).windows(2) {
        rule.push_mapped(w[0], w[1], &mut t_nodes);
    }
    let xi = symbol.c0;
    let deriv = |j: u32, x: f64, zeta: f64| match &symbol.dx {
        Some(d) => d(j, x, zeta),
        None if j == 0 => (symbol.eval)(x, zeta),
        None => {
            let h = 1e-3;
            let mut s = 0.0;
            for i in 0..=j {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * binomial(j, i) * (symbol.eval)(x + (0.5 * j as f64 - i as f64) * h, zeta);
            }
            s / h.powi(j as i32)
        }
    };
    let mut out = Vec::new();
    for j in 0..=k_max {
        for &theta in &[0.0, 0.5, 1.0] {
            let inner = |y: f64| {
                if theta == 0.0 {
                    y.powi(j as i32) * deriv(j, 0.0, y * xi).abs()
                } else {
                    t_nodes
                        .iter()
                        .map(|&(t, w)| w * y.powi(j as i32) * deriv(j, theta * y * t, y * xi).abs())
                        .sum()
                }
            };
            let cuts = [1.0, 1e-3, 1e-6, 1e-9];
            let mut pieces = Vec::new();
            for w in cuts.windows(2) {
                let b = geometric_breaks(w[1], w[0], 4.0);
                let v: f64 = b.windows(2).map(|p| rule.integrate(p[0], p[1], inner)).sum();
                if !v.is_finite() {
                    return Err(Error::Hypothesis {
                        assumption: "b) integrability",
                        detail: format!("y^{j}|sigma^({j})| not finite for theta={theta}"),
                    });
                }
                pieces.push(v);
            }
            let total: f64 = pieces.iter().sum();
            if pieces[2] > 0.7 * pieces[1] && pieces[2] > 1e-9 * total {
                return Err(Error::Hypothesis {
                    assumption: "b) integrability",
                    detail: format!("y^{j}|sigma^({j})| is not integrable at y = 0 for theta={theta}"),
                });
            }
            out.push(IntegrabilityProbe { j, theta, bound: total });
        }
    }
    Ok(out)
}

/// Runs both hypothesis probes.
pub fn probe_hypotheses(symbol: &SymbolProvider, orders: SalOrders) -> Result<HypothesisReport> {
    symbol.check_shape()?;
    Ok(HypothesisReport {
        remainder_growth: probe_expansion(symbol)?,
        integrability: probe_integrability(symbol, orders.k_max)?,
    })
}

/// Probes a parameter family σ(·, s, ·) at every sample s; reports the
/// largest probe constants, i.e. the observed uniformity in s.
pub fn probe_uniformity<F>(family: F, s_samples: &[Vec<f64>], orders: SalOrders) -> Result<HypothesisReport>
where
    F: Fn(&[f64]) -> SymbolProvider,
{
    let mut worst: Option<HypothesisReport> = None;
    for s in s_samples {
        let r = probe_hypotheses(&family(s), orders)?;
        worst = Some(match worst {
            None => r,
            Some(w) => HypothesisReport {
                remainder_growth: w.remainder_growth.max(r.remainder_growth),
                integrability: w
                    .integrability
                    .iter()
                    .zip(&r.integrability)
                    .map(|(a, b)| IntegrabilityProbe {
                        bound: a.bound.max(b.bound),
                        ..a.clone()
                    })
                    .collect(),
            },
        });
    }
    worst.ok_or_else(|| Error::Precondition("no parameter samples".into()))
}

/// The three term families down to `orders.power_min`.
pub fn sal_expand(symbol: &SymbolProvider, orders: SalOrders) -> Result<ExpansionSeries> {
    symbol.check_shape()?;
    let need = jets_needed(orders.power_min);
    if orders.k_max < need {
        return Err(Error::Precondition(format!(
            "window down to z^{} needs x-jets to order {need}, got {}",
            orders.power_min, orders.k_max
        )));
    }
    if !(symbol.complete_above < orders.power_min - POWER_EPS) {
        return Err(Error::Capability(format!(
            "expansion complete only above {}, window reaches {}",
            symbol.complete_above, orders.power_min
        )));
    }
    probe_hypotheses(symbol, orders)?;

    let ks: Vec<u32> = (0..=need).filter(|k| -(*k as f64) - 1.0 >= orders.power_min - POWER_EPS).collect();
    let family1: Vec<(ExpansionTerm, f64)> = ks
        .par_iter()
        .map(|&k| {
            let kf = factorial(k);
            let mut err: f64 = 0.0;
            let expansion: Vec<PowerLog> = symbol
                .zeta_expansion
                .iter()
                .map(|t| {
                    let (d, e) = t.derivative(k, 0.0);
                    err = err.max(e);
                    PowerLog {
                        alpha: t.alpha + k as f64,
                        j: t.j,
                        coeff: d / kf,
                    }
                })
                .collect();
            // Relative accuracy of finite-difference jets, probed on a few ζ.
            let mut noise: f64 = 0.0;
            for zeta in [0.5, 4.0, 32.0, 256.0] {
                let (d, e) = symbol.dx_at(k, 0.0, zeta);
                if e > 0.0 && d != 0.0 {
                    noise = noise.max(e / d.abs());
                }
            }
            let max_fd = std::sync::Mutex::new(noise);
            let f = |zeta: f64| {
                let (d, e) = symbol.dx_at(k, 0.0, zeta);
                if e > 0.0 {
                    let mut m = max_fd.lock().expect("unpoisoned");
                    *m = m.max(e / d.abs().max(1e-300));
                }
                if d == 0.0 {
                    0.0
                } else {
                    zeta.powi(k as i32) / kf * d
                }
            };
            let rel_noise = if err > 0.0 || noise > 0.0 { noise.max(err) } else { 0.0 };
            let v = regularized_integral_noisy(f, &expansion, symbol.complete_above + k as f64, rel_noise)?;
            let fd = *max_fd.lock().expect("unpoisoned");
            Ok((
                ExpansionTerm {
                    power: -(k as f64) - 1.0,
                    logpow: 0,
                    coeff: v,
                },
                err.max(fd),
            ))
        })
        .collect::<Result<_>>()?;

    let window: Vec<(usize, u32)> = symbol
        .zeta_expansion
        .iter()
        .enumerate()
        .filter(|(_, t)| t.alpha >= orders.power_min - POWER_EPS)
        .flat_map(|(n, t)| (0..=t.j).map(move |i| (n, i)))
        .collect();
    let family2: Vec<(ExpansionTerm, f64)> = window
        .par_iter()
        .map(|&(n, i)| {
            let t = &symbol.zeta_expansion[n];
            let (x, err) = x_regularized(t, i, symbol)?;
            Ok((
                ExpansionTerm {
                    power: t.alpha,
                    logpow: t.j - i,
                    coeff: binomial(t.j, i) * x,
                },
                err,
            ))
        })
        .collect::<Result<_>>()?;

    let mut family3 = Vec::new();
    for t in symbol.zeta_expansion.iter().filter(|t| t.alpha >= orders.power_min - POWER_EPS) {
        if let Some(k) = interaction_order(t.alpha) {
            let (d, err) = t.derivative(k, 0.0);
            family3.push((
                ExpansionTerm {
                    power: t.alpha,
                    logpow: t.j + 1,
                    coeff: d / ((t.j + 1) as f64 * factorial(k)),
                },
                err,
            ));
        }
    }

    let all: Vec<(ExpansionTerm, f64)> = family1.into_iter().chain(family2).chain(family3).collect();
    let derivative_error = all.iter().map(|p| p.1).fold(0.0, f64::max);
    ExpansionSeries::collect(
        all.into_iter().map(|p| p.0),
        None,
        SeriesDiagnostics {
            route: "sal".into(),
            derivative_error: Some(derivative_error),
            ..Default::default()
        },
    )
}

/// ∫₀^∞ σ(x, xz) dx on geometric panels around the scale 1/z.
pub fn direct_integral(symbol: &SymbolProvider, z: f64) -> Result<f64> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Domain(format!("need z > 0, got {z}")));
    }
    let xm = symbol.x_max.max(64.0 / z);
    let mut breaks: Vec<f64> = vec![0.0];
    let mut x = 2f64.powi(-60) / z;
    while x < xm {
        breaks.push(x);
        x *= 2.0;
    }
    breaks.extend(symbol.breakpoints.iter().copied().filter(|b| *b < xm));
    breaks.push(xm);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let body = integrate_breaks(&breaks, |x| (symbol.eval)(x, x * z))?;
    let tail = integrate_unit(|t| {
        if t == 0.0 {
            return 0.0;
        }
        let x = xm / t;
        let v = (symbol.eval)(x, x * z);
        if v == 0.0 {
            0.0
        } else {
            v * xm / (t * t)
        }
    })?;
    Ok(body + tail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCheck {
    /// Number of distinct powers subtracted.
    pub order: usize,
    pub through_power: f64,
    pub next_power: f64,
    /// Log-log slope of the next power's own terms on the grid: the exponent
    /// shifted by its log factors, or the bare exponent when undefined.
    pub expected_slope: f64,
    /// Least-squares log-log slope of |remainder|; None when the remainder
    /// is exact or changes sign.
    pub slope: Option<f64>,
    pub max_rel_remainder: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalVerification {
    /// Hypothesis or capability rejection surfaced by sal_expand.
    pub rejection: Option<String>,
    pub series: Option<ExpansionSeries>,
    pub z_grid: Vec<f64>,
    pub direct: Vec<f64>,
    pub orders: Vec<OrderCheck>,
    pub slope_tolerance: f64,
}

impl SalVerification {
    pub fn passed(&self) -> bool {
        self.rejection.is_none() && !self.orders.is_empty() && self.orders.iter().all(|o| o.pass)
    }
}

fn loglog_slope(z: &[f64], r: &[f64]) -> Option<f64> {
    let sign = r[0].signum();
    if r.iter().any(|v| v.signum() != sign || *v == 0.0) {
        return None;
    }
    let xs: Vec<f64> = z.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = r.iter().map(|v| v.abs().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Some(sxy / sxx)
}

/// Direct quadrature on `z_grid` against the partial sums of sal_expand:
/// after subtracting the powers down to the n-th, the remainder's log-log
/// slope must match that of the (n+1)-th power's terms (its exponent, moved
/// by any log factors) within SLOPE_TOLERANCE, or the remainder must be
/// exact. Always returns diagnostics.
pub fn verify_sal(symbol: &SymbolProvider, orders: SalOrders, z_grid: &[f64]) -> SalVerification {
    let mut out = SalVerification {
        rejection: None,
        series: None,
        z_grid: z_grid.to_vec(),
        direct: Vec::new(),
        orders: Vec::new(),
        slope_tolerance: SLOPE_TOLERANCE,
    };
    if z_grid.len() < 2 {
        out.rejection = Some("verification grid needs at least two points".into());
        return out;
    }
    let mut series = match sal_expand(symbol, orders) {
        Ok(s) => s,
        Err(e) => {
            out.rejection = Some(e.to_string());
            return out;
        }
    };
    let direct: Result<Vec<f64>> = z_grid.par_iter().map(|&z| direct_integral(symbol, z)).collect();
    let direct = match direct {
        Ok(d) => d,
        Err(e) => {
            out.rejection = Some(e.to_string());
            return out;
        }
    };
    let powers = series.powers();
    for n in 1..powers.len() {
        let partial = series.partial(powers[n - 1]);
        let rem: Vec<f64> = z_grid
            .iter()
            .zip(&direct)
            .map(|(&z, &d)| d - eval_terms(&partial, z))
            .collect();
        let max_rel = rem
            .iter()
            .zip(&direct)
            .map(|(r, d)| (r / d).abs())
            .fold(0.0, f64::max);
        let exact = max_rel <= EXACT_REMAINDER;
        let slope = if exact { None } else { loglog_slope(z_grid, &rem) };
        let next: Vec<ExpansionTerm> = series
            .terms
            .iter()
            .copied()
            .filter(|t| (t.power - powers[n]).abs() <= POWER_EPS)
            .collect();
        let own: Vec<f64> = z_grid.iter().map(|&z| eval_terms(&next, z)).collect();
        let expected_slope = loglog_slope(z_grid, &own).unwrap_or(powers[n]);
        let pass = exact || slope.is_some_and(|s| (s - expected_slope).abs() <= SLOPE_TOLERANCE);
        out.orders.push(OrderCheck {
            order: n,
            through_power: powers[n - 1],
            next_power: powers[n],
            expected_slope,
            slope,
            max_rel_remainder: max_rel,
            pass,
        });
    }
    series.validity = Some((z_grid[0], z_grid[z_grid.len() - 1]));
    series.diagnostics.residual_slope = out.orders.last().and_then(|o| o.slope);
    out.series = Some(series);
    out.direct = direct;
    out
}

/// x-profile φ of a separable symbol component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum XProfile {
    /// e^{-rate·x}.
    Exp { rate: f64 },
    /// Σ c_n x^n on [0, 1], zero beyond; extended polynomially to x < 0.
    PolyOnUnit { coeffs: Vec<f64> },
    /// x^{-power} on (0, 1], zero beyond.
    InversePower { power: f64 },
}

impl XProfile {
    fn derivative(&self, k: u32, x: f64) -> f64 {
        match self {
            XProfile::Exp { rate } => (-rate).powi(k as i32) * (-rate * x).exp(),
            XProfile::PolyOnUnit { coeffs } => {
                if x > 1.0 {
                    return 0.0;
                }
                coeffs
                    .iter()
                    .enumerate()
                    .skip(k as usize)
                    .map(|(n, c)| c * factorial(n as u32) / factorial(n as u32 - k) * x.powi((n as u32 - k) as i32))
                    .sum()
            }
            XProfile::InversePower { power } => {
                if x > 1.0 {
                    return 0.0;
                }
                let mut c = 1.0;
                for i in 0..k {
                    c *= -power - i as f64;
                }
                c * x.powf(-power - k as f64)
            }
        }
    }

    fn x_max(&self) -> f64 {
        match self {
            XProfile::Exp { rate } => (60.0 / rate).max(2.0),
            _ => 2.0,
        }
    }

    fn breakpoint(&self) -> Option<f64> {
        match self {
            XProfile::Exp { .. } => None,
            _ => Some(1.0),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match self {
            XProfile::Exp { rate } => *rate > 0.0 && rate.is_finite(),
            XProfile::PolyOnUnit { coeffs } => !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()),
            XProfile::InversePower { power } => power.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("symbol.x", format!("invalid x-profile {self:?}")))
        }
    }
}

/// ζ-profile g of a separable symbol component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ZetaProfile {
    Constant,
    /// (1 + ζ²)^{-power}.
    RationalSquare { power: u32 },
    /// (1 + ζ)^{-power}.
    InverseLinear { power: u32 },
    /// log(1 + ζ)·(1 + ζ)^{-power}.
    LogInverseLinear { power: u32 },
}

impl ZetaProfile {
    fn eval(&self, zeta: f64) -> f64 {
        match self {
            ZetaProfile::Constant => 1.0,
            ZetaProfile::RationalSquare { power } => (1.0 + zeta * zeta).powi(-(*power as i32)),
            ZetaProfile::InverseLinear { power } => (1.0 + zeta).powi(-(*power as i32)),
            ZetaProfile::LogInverseLinear { power } => zeta.ln_1p() * (1.0 + zeta).powi(-(*power as i32)),
        }
    }

    /// Expansion terms (α, j, c) at ζ → ∞ with α > floor.
    fn expansion(&self, floor: f64) -> Vec<(f64, u32, f64)> {
        let neg_binom = |p: u32, n: u32| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(p + n - 1, n)
        };
        let mut out = Vec::new();
        match self {
            ZetaProfile::Constant => out.push((0.0, 0, 1.0)),
            ZetaProfile::RationalSquare { power } => {
                let mut n = 0;
                while -2.0 * (*power + n) as f64 > floor {
                    out.push((-2.0 * (*power + n) as f64, 0, neg_binom(*power, n)));
                    n += 1;
                }
            }
            ZetaProfile::InverseLinear { power } => {
                let mut n = 0;
                while -((*power + n) as f64) > floor {
                    out.push((-((*power + n) as f64), 0, neg_binom(*power, n)));
                    n += 1;
                }
            }
            ZetaProfile::LogInverseLinear { power } => {
                // log(1+ζ) = log ζ + Σ_{m≥1} (−1)^{m+1} ζ^{-m}/m.
                let mut n = 0;
                while -((*power + n) as f64) > floor {
                    let alpha = -((*power + n) as f64);
                    out.push((alpha, 1, neg_binom(*power, n)));
                    let mut c = 0.0;
                    for m in 1..=n {
                        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                        c += sign / m as f64 * neg_binom(*power, n - m);
                    }
                    if n > 0 {
                        out.push((alpha, 0, c));
                    }
                    n += 1;
                }
            }
        }
        out
    }
}

/// weight·φ(x)·g(scale·ζ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparableComponent {
    #[serde(default = "one")]
    pub weight: f64,
    pub x: XProfile,
    pub zeta: ZetaProfile,
    #[serde(default = "one")]
    pub zeta_scale: f64,
}

fn one() -> f64 {
    1.0
}

/// A symbol given as a finite sum of separable components; the JSON form
/// read by the command-line front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSpec {
    pub components: Vec<SeparableComponent>,
}

impl SymbolSpec {
    /// Builds the provider with every expansion term above `floor`.
    pub fn build(&self, floor: f64) -> Result<SymbolProvider> {
        if self.components.is_empty() {
            return Err(Error::config("symbol.components", "at least one component is required"));
        }
        for (i, c) in self.components.iter().enumerate() {
            c.x.check()?;
            if !(c.zeta_scale > 0.0 && c.weight.is_finite()) {
                return Err(Error::config(
                    format!("symbol.components[{i}]"),
                    "zeta_scale must be positive and weight finite",
                ));
            }
        }
        // Group expansion coefficients by (α, j): Σ_c w_c·coef·φ_c.
        let mut groups: Vec<(f64, u32, Vec<(f64, XProfile)>)> = Vec::new();
        for c in &self.components {
            let lc = c.zeta_scale.ln();
            for (alpha, j, coef) in c.zeta.expansion(floor) {
                // (cζ)^α log^j(cζ) = c^α ζ^α Σ_i C(j,i) log^{j−i}c log^i ζ
                for i in 0..=j {
                    let w = c.weight * coef * c.zeta_scale.powf(alpha) * binomial(j, i) * lc.powi((j - i) as i32);
                    if w == 0.0 {
                        continue;
                    }
                    match groups.iter_mut().find(|g| (g.0 - alpha).abs() <= POWER_EPS && g.1 == i) {
                        Some(g) => g.2.push((w, c.x.clone())),
                        None => groups.push((alpha, i, vec![(w, c.x.clone())])),
                    }
                }
            }
        }
        let terms = groups
            .into_iter()
            .map(|(alpha, j, parts)| {
                let parts = Arc::new(parts);
                let p2 = parts.clone();
                ZetaTerm::new(alpha, j, move |x| parts.iter().map(|(w, p)| w * p.derivative(0, x)).sum())
                    .with_jet(move |k, x| p2.iter().map(|(w, p)| w * p.derivative(k, x)).sum())
            })
            .collect();
        let comps = Arc::new(self.components.clone());
        let c2 = comps.clone();
        let eval = move |x: f64, zeta: f64| {
            comps
                .iter()
                .map(|c| c.weight * c.x.derivative(0, x) * c.zeta.eval(c.zeta_scale * zeta))
                .sum()
        };
        let dx = move |k: u32, x: f64, zeta: f64| {
            c2.iter()
                .map(|c| c.weight * c.x.derivative(k, x) * c.zeta.eval(c.zeta_scale * zeta))
                .sum()
        };
        let x_max = self.components.iter().map(|c| c.x.x_max()).fold(2.0, f64::max);
        let breaks = self.components.iter().filter_map(|c| c.x.breakpoint()).collect();
        Ok(SymbolProvider::new(eval, terms, floor)
            .with_dx(dx)
            .with_x_max(x_max)
            .with_breakpoints(breaks))
    }

    /// Builds with a floor deep enough for `orders`.
    pub fn provider_for(&self, orders: SalOrders) -> Result<SymbolProvider> {
        let floor = orders.power_min.min(-1.0 - orders.k_max as f64) - 6.0;
        self.build(floor)
    }
}
