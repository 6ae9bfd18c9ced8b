//! Batch experiments: a JSON configuration names a model, a z-grid and a fit;
//! running it builds (or reuses) the spectrum, samples the trace, checks it
//! against an independent route, fits the expansion prescribed by the
//! model's stratification and writes hashed, byte-reproducible reports.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cache::{CacheOutcome, SpectrumCache};
use crate::cone::{cone_trace, log_grid, CircleFamily, ConeProblem, ModeTail, Route, TraceSamples, TraceValue};
use crate::edge::{edge_trace, edge_trace_naive, EdgeProblem};
use crate::error::{Error, Result};
use crate::fit::{
    fit_expansion, stability_probe, FitBasis, DEFAULT_DRIFT_THRESHOLD, DEFAULT_SAMPLES_PER_COEFF, DEFAULT_WINDOW,
};
use crate::io::write_atomic;
use crate::series::ExpansionSeries;
use crate::special::gamma::gamma;
use crate::spectra::{
    circle_scalar_spectrum, fmt17, iterated_cone_spectrum, sha256_hex, shift_spectrum, witt_check,
    CrossSectionSpectrum, DoubleBc, WittReport,
};

/// Lattice radius of the naive edge oracle.
const NAIVE_EDGE_J_MAX: u32 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Cone over a circle of circumference 2πβ, modes √(n²/β² + shift).
    Cone {
        beta: f64,
        m: u32,
        #[serde(default)]
        shift: f64,
        #[serde(default = "default_explicit_modes")]
        explicit_modes: u32,
    },
    /// T^b of side `length` times the cone over a circle.
    Edge {
        beta: f64,
        m: u32,
        b: u32,
        length: f64,
        #[serde(default)]
        shift: f64,
        #[serde(default = "default_explicit_modes")]
        explicit_modes: u32,
    },
    /// Cone over the spindle: the double of the truncated cone over a
    /// circle, with ν-cutoff `cutoff` on the spindle spectrum.
    IteratedCone {
        beta: f64,
        m: u32,
        #[serde(default)]
        inner_shift: f64,
        bc: DoubleBc,
        cutoff: f64,
    },
}

fn default_explicit_modes() -> u32 {
    48
}

impl ModelSpec {
    pub fn m(&self) -> u32 {
        match self {
            ModelSpec::Cone { m, .. } | ModelSpec::Edge { m, .. } | ModelSpec::IteratedCone { m, .. } => *m,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            ModelSpec::Cone { beta, .. } | ModelSpec::Edge { beta, .. } | ModelSpec::IteratedCone { beta, .. } => *beta,
        }
    }

    /// Total dimension of the model space.
    pub fn dim(&self) -> u32 {
        match self {
            ModelSpec::Cone { .. } => 2,
            ModelSpec::Edge { b, .. } => 2 + b,
            ModelSpec::IteratedCone { .. } => 3,
        }
    }

    /// Stratification depth.
    pub fn depth(&self) -> u32 {
        match self {
            ModelSpec::IteratedCone { .. } => 2,
            _ => 1,
        }
    }

    /// Singular strata as (dimension, depth).
    pub fn strata(&self) -> Vec<(u32, u32)> {
        match self {
            ModelSpec::Cone { .. } => vec![(0, 1)],
            ModelSpec::Edge { b, .. } => vec![(*b, 1)],
            // Edge ray through the spindle tips, and the apex.
            ModelSpec::IteratedCone { .. } => vec![(1, 1), (0, 2)],
        }
    }

    /// Riemannian volume of the truncated model.
    pub fn volume(&self) -> f64 {
        match self {
            ModelSpec::Cone { beta, .. } => PI * beta,
            ModelSpec::Edge { beta, b, length, .. } => length.powi(*b as i32) * PI * beta,
            // ∫₀^1 x² dx times the spindle area 2πβ.
            ModelSpec::IteratedCone { beta, .. } => 2.0 * PI * beta / 3.0,
        }
    }

    /// (power, coefficient) of the Weyl term (4π)^{-n/2}Γ(m−n/2)/Γ(m)·vol·z^{n−2m}.
    pub fn weyl_term(&self) -> (f64, f64) {
        let n = self.dim() as f64;
        let m = self.m() as f64;
        (n - 2.0 * m, (4.0 * PI).powf(-0.5 * n) * gamma(m - 0.5 * n) / gamma(m) * self.volume())
    }

    pub fn primary_route(&self) -> Route {
        match self {
            ModelSpec::Edge { .. } => Route::Lattice,
            _ => Route::ClosedForm,
        }
    }

    /// Tag of the independent route used as oracle.
    pub fn oracle_tag(&self) -> &'static str {
        match self {
            ModelSpec::Edge { .. } => "naive-lattice",
            _ => Route::Eigensum.tag(),
        }
    }

    fn shift(&self) -> f64 {
        match self {
            ModelSpec::Cone { shift, .. } | ModelSpec::Edge { shift, .. } => *shift,
            ModelSpec::IteratedCone { inner_shift, .. } => *inner_shift,
        }
    }

    /// Spectrum family key (everything but the cutoff) and the ν-cutoff.
    pub fn spectrum_key(&self) -> (String, f64) {
        let beta = self.beta();
        let shift = self.shift();
        match self {
            ModelSpec::Cone { explicit_modes, .. } | ModelSpec::Edge { explicit_modes, .. } => {
                let family = CircleFamily { beta, shift };
                (
                    format!("circle;beta={};shift={}", fmt17(beta), fmt17(shift)),
                    family.nu(*explicit_modes as f64),
                )
            }
            ModelSpec::IteratedCone { bc, cutoff, .. } => (
                format!(
                    "spindle;beta={};inner_shift={};bc={}",
                    fmt17(beta),
                    fmt17(shift),
                    serde_json::to_value(bc).expect("serializable").as_str().unwrap_or("")
                ),
                *cutoff,
            ),
        }
    }

    /// Builds the spectrum below `cutoff` from scratch.
    pub fn build_spectrum(&self, cutoff: f64) -> Result<CrossSectionSpectrum> {
        let beta = self.beta();
        let shift = self.shift();
        let shifted = |s: CrossSectionSpectrum| if shift == 0.0 { Ok(s) } else { shift_spectrum(&s, shift) };
        match self {
            ModelSpec::Cone { .. } | ModelSpec::Edge { .. } => {
                // n/β < cutoff for every kept mode.
                let count = (beta * cutoff).ceil() as u32 + 1;
                Ok(shifted(circle_scalar_spectrum(beta, count)?)?.truncated(cutoff))
            }
            ModelSpec::IteratedCone { bc, .. } => {
                // Inner modes with ν ≥ cutoff cannot contribute.
                let inner = shifted(circle_scalar_spectrum(beta, (beta * cutoff).ceil() as u32 + 2)?)?;
                iterated_cone_spectrum(&inner, *bc, cutoff)
            }
        }
    }

    fn check(&self) -> Result<()> {
        let beta = self.beta();
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config("model.beta", format!("must be positive, got {beta}")));
        }
        if !(self.shift() >= 0.0 && self.shift().is_finite()) {
            return Err(Error::config("model.shift", "must be finite and >= 0"));
        }
        if 2 * self.m() <= self.dim() {
            return Err(Error::config(
                "model.m",
                format!(
                    "trace-class violation: 2m = {} does not exceed dim = {}",
                    2 * self.m(),
                    self.dim()
                ),
            ));
        }
        match self {
            ModelSpec::Cone { explicit_modes, .. } | ModelSpec::Edge { explicit_modes, .. } if *explicit_modes < 3 => {
                Err(Error::config("model.explicit_modes", "must be at least 3"))
            }
            ModelSpec::Edge { length, .. } if !(*length > 0.0 && length.is_finite()) => {
                Err(Error::config("model.length", "must be positive"))
            }
            ModelSpec::IteratedCone { cutoff, .. } if !(*cutoff >= 4.0 && cutoff.is_finite()) => {
                Err(Error::config("model.cutoff", "must be at least 4"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default = "default_spacing")]
    pub spacing: String,
}

fn default_spacing() -> String {
    "log".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    /// Number of pure powers z^{dim−2m−j}.
    pub orders: u32,
    /// Highest log power on the strata; at most the depth.
    pub max_log: u32,
    /// Number of log-augmented powers per stratum.
    #[serde(default = "one_u32")]
    pub log_orders: u32,
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    #[serde(default = "default_spc")]
    pub samples_per_coeff: usize,
    /// Additional (power, logpow) basis terms.
    #[serde(default)]
    pub extra_terms: Vec<(f64, u32)>,
    /// Plain powers absorbing smooth systematic errors, e.g. mode truncation.
    #[serde(default)]
    pub nuisance_powers: Vec<f64>,
    #[serde(default = "default_drift")]
    pub drift_threshold: f64,
    #[serde(default = "two_usize")]
    pub subwindows: usize,
    #[serde(default = "default_weyl_tol")]
    pub weyl_tolerance: f64,
}

fn one_u32() -> u32 {
    1
}
fn two_usize() -> usize {
    2
}
fn default_window() -> (f64, f64) {
    DEFAULT_WINDOW
}
fn default_spc() -> usize {
    DEFAULT_SAMPLES_PER_COEFF
}
fn default_drift() -> f64 {
    DEFAULT_DRIFT_THRESHOLD
}
fn default_weyl_tol() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// Grid points checked against the oracle route; 0 disables the check.
    pub points: usize,
    pub tolerance: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        OracleSpec {
            points: 4,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSpec,
    pub z_grid: GridSpec,
    pub fit: FitSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Worker threads; None uses every available core.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

impl ExperimentConfig {
    /// Parses and validates; every failure is a config error.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config("name", "must be a nonempty plain name"));
        }
        self.model.check()?;
        let g = &self.z_grid;
        if g.spacing != "log" {
            return Err(Error::config("z_grid.spacing", format!("only \"log\" is supported, got {:?}", g.spacing)));
        }
        if !(g.min > 0.0 && g.max > g.min && g.max.is_finite()) || g.count < 2 {
            return Err(Error::config("z_grid", "need 0 < min < max and count >= 2"));
        }
        let f = &self.fit;
        if f.max_log > self.model.depth() {
            return Err(Error::config(
                "fit.max_log",
                format!(
                    "log power {} exceeds the stratification depth {}",
                    f.max_log,
                    self.model.depth()
                ),
            ));
        }
        if f.orders == 0 {
            return Err(Error::config("fit.orders", "must be at least 1"));
        }
        if !(f.window.0 >= g.min && f.window.1 <= g.max && f.window.0 < f.window.1) {
            return Err(Error::config("fit.window", "must lie inside the z-grid"));
        }
        if f.subwindows < 2 || !(f.drift_threshold > 0.0) || !(f.weyl_tolerance > 0.0) {
            return Err(Error::config("fit", "need subwindows >= 2 and positive thresholds"));
        }
        if self.oracle.points > g.count || !(self.oracle.tolerance > 0.0) {
            return Err(Error::config("oracle", "points must not exceed the grid and tolerance must be positive"));
        }
        if self.parallelism == Some(0) {
            return Err(Error::config("parallelism", "must be at least 1"));
        }
        let basis = self.basis()?;
        let need = basis.terms.len() * f.samples_per_coeff;
        let have = log_grid(g.min, g.max, g.count)?
            .iter()
            .filter(|z| **z >= f.window.0 && **z <= f.window.1)
            .count();
        if have < need {
            return Err(Error::config(
                "z_grid.count",
                format!("{have} grid points fall in the fit window, the basis needs {need}"),
            ));
        }
        Ok(())
    }

    /// Fit basis: the stratified exponent lattice capped at `max_log`, plus
    /// extra and nuisance terms.
    pub fn basis(&self) -> Result<FitBasis> {
        let f = &self.fit;
        let strata: Vec<(u32, u32)> = self
            .model
            .strata()
            .into_iter()
            .map(|(d, depth)| (d, depth.min(f.max_log)))
            .filter(|s| s.1 > 0)
            .collect();
        let base = FitBasis::theorem(
            self.model.dim(),
            self.model.m(),
            &strata,
            f.orders,
            f.log_orders,
            f.window,
            f.samples_per_coeff,
        )
        .map_err(|e| Error::config("fit", e.to_string()))?;
        let mut terms = base.terms;
        for &t in &f.extra_terms {
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
        for &p in &f.nuisance_powers {
            if !terms.contains(&(p, 0)) {
                terms.push((p, 0));
            }
        }
        FitBasis::for_depth(terms, f.window, f.samples_per_coeff, self.model.depth()).map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config("fit", other.to_string()),
        })
    }

    /// Hash of the scientific content: model, grid, fit and oracle.
    pub fn science_hash(&self) -> String {
        let v = serde_json::json!({
            "model": self.model,
            "z_grid": self.z_grid,
            "fit": self.fit,
            "oracle": self.oracle,
        });
        sha256_hex(v.to_string().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub builder: String,
    pub entries: usize,
    pub max_nu: f64,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub z: f64,
    pub primary: f64,
    pub oracle: f64,
    pub rel_diff: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub primary_route: String,
    pub oracle_route: String,
    pub points: Vec<OraclePoint>,
    pub max_rel_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTerm {
    pub power: f64,
    pub logpow: u32,
    pub coeff: f64,
    pub drift: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub route: String,
    pub window: (f64, f64),
    pub residual_norm: f64,
    pub condition: f64,
    pub subwindows: Vec<(f64, f64)>,
    pub terms: Vec<ReportTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylVerdict {
    pub power: f64,
    pub predicted: f64,
    pub fitted: f64,
    pub rel_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Residual with and without one log term of the basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub power: f64,
    pub logpow: u32,
    pub residual_without: f64,
    pub residual_with: f64,
    pub reduces_residual: bool,
    pub drift: f64,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub science_hash: String,
    pub model_hash: String,
    pub dim: u32,
    pub depth: u32,
    pub spectrum: SpectrumSummary,
    pub witt: WittReport,
    pub samples: usize,
    pub max_tail_bound: f64,
    pub oracle: Option<OracleVerdict>,
    pub fit: FitSummary,
    pub weyl: WeylVerdict,
    pub ablation: Vec<Ablation>,
    /// SHA-256 of every other file written, by name.
    pub files: BTreeMap<String, String>,
    pub pass: bool,
}

/// What a run produced; cache provenance and warnings stay out of the
/// report so that cold and warm runs write identical bytes.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: ExperimentReport,
    pub report_path: PathBuf,
    pub report_hash: String,
    pub cache: CacheOutcome,
    pub warnings: Vec<String>,
}

enum Model {
    Cone(ConeProblem),
    Edge(EdgeProblem),
}

impl Model {
    fn hash(&self) -> String {
        match self {
            Model::Cone(p) => p.model_hash(),
            Model::Edge(p) => p.model_hash(),
        }
    }

    fn primary(&self, z: f64) -> Result<TraceValue> {
        match self {
            Model::Cone(p) => cone_trace(p, z, Route::ClosedForm),
            Model::Edge(p) => edge_trace(p, z),
        }
    }

    fn oracle(&self, z: f64) -> Result<TraceValue> {
        match self {
            Model::Cone(p) => cone_trace(p, z, Route::Eigensum),
            Model::Edge(p) => edge_trace_naive(p, z, NAIVE_EDGE_J_MAX),
        }
    }
}

fn build_model(spec: &ModelSpec, spectrum: CrossSectionSpectrum) -> Result<Model> {
    let mut cone = ConeProblem::new(spectrum, spec.m())?;
    match spec {
        ModelSpec::Cone { beta, shift, explicit_modes, .. } | ModelSpec::Edge { beta, shift, explicit_modes, .. } => {
            cone.tail = ModeTail::Circle {
                family: CircleFamily {
                    beta: *beta,
                    shift: *shift,
                },
                first_n: *explicit_modes,
            };
        }
        ModelSpec::IteratedCone { .. } => {}
    }
    Ok(match spec {
        ModelSpec::Edge { b, length, .. } => Model::Edge(EdgeProblem::new(cone, *b, *length)?),
        _ => Model::Cone(cone),
    })
}

/// Evenly spread indices into a grid of length n.
fn spread(n: usize, k: usize) -> Vec<usize> {
    match k {
        0 => Vec::new(),
        1 => vec![n - 1],
        _ => (0..k).map(|i| (i * (n - 1)) / (k - 1)).collect(),
    }
}

/// Runs the experiment on a pool of `config.parallelism` workers with the
/// given cache; see [`run_experiment`].
pub fn run_experiment_with(config: &ExperimentConfig, cache: &SpectrumCache) -> Result<RunSummary> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.parallelism {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("parallelism", e.to_string()))?;
    pool.install(|| run_inner(config, cache))
}

/// Validates, opens the configured cache and runs.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let cache = SpectrumCache::open(config.cache_dir.as_deref());
    run_experiment_with(config, &cache)
}

fn write_hashed(dir: &Path, name: &str, bytes: &[u8], files: &mut BTreeMap<String, String>) -> Result<()> {
    write_atomic(&dir.join(name), bytes)?;
    files.insert(name.to_string(), sha256_hex(bytes));
    Ok(())
}

fn run_inner(config: &ExperimentConfig, cache: &SpectrumCache) -> Result<RunSummary> {
    let spec = &config.model;
    let out = &config.output_dir;
    std::fs::create_dir_all(out)?;
    let mut files = BTreeMap::new();

    let (family, cutoff) = spec.spectrum_key();
    let (spectrum, cache_outcome) = cache.get_or_build(&family, cutoff, |c| spec.build_spectrum(c))?;
    let witt = witt_check(&spectrum)?;
    write_hashed(out, "spectrum.txt", spectrum.to_text().as_bytes(), &mut files)?;
    let spectrum_summary = SpectrumSummary {
        builder: spectrum.builder.clone(),
        entries: spectrum.len(),
        max_nu: spectrum.max_nu(),
        content_hash: spectrum.content_hash(),
    };
    let model = build_model(spec, spectrum)?;
    let model_hash = model.hash();

    let g = &config.z_grid;
    let grid = log_grid(g.min, g.max, g.count)?;
    let values = grid.iter().map(|&z| model.primary(z)).collect::<Result<Vec<_>>>()?;
    let route = spec.primary_route();
    let samples = TraceSamples::new(grid.clone(), values, route, spec.m(), model_hash.clone())?;
    write_hashed(out, &format!("samples-{}.csv", route.tag()), samples.to_csv().as_bytes(), &mut files)?;

    let oracle = if config.oracle.points == 0 {
        None
    } else {
        let idx = spread(grid.len(), config.oracle.points);
        let mut points = Vec::new();
        let mut csv = format!("# model_hash={model_hash}\n# route={}\nz,value,tail_bound\n", spec.oracle_tag());
        for &i in &idx {
            let o = model.oracle(grid[i])?;
            csv.push_str(&format!("{},{},{}\n", fmt17(grid[i]), fmt17(o.value), fmt17(o.tail_bound)));
            points.push(OraclePoint {
                z: grid[i],
                primary: samples.values[i],
                oracle: o.value,
                rel_diff: (samples.values[i] - o.value).abs() / o.value.abs(),
                tail_bound: samples.tail_bound[i].max(o.tail_bound),
            });
        }
        write_hashed(out, &format!("oracle-{}.csv", spec.oracle_tag()), csv.as_bytes(), &mut files)?;
        let max_rel_diff = points.iter().map(|p| p.rel_diff).fold(0.0, f64::max);
        Some(OracleVerdict {
            primary_route: route.tag().into(),
            oracle_route: spec.oracle_tag().into(),
            points,
            max_rel_diff,
            tolerance: config.oracle.tolerance,
            pass: max_rel_diff <= config.oracle.tolerance,
        })
    };

    let basis = config.basis()?;
    let fitted: ExpansionSeries = fit_expansion(&samples, &basis)?;
    write_hashed(out, "fit.json", fitted.to_json().as_bytes(), &mut files)?;
    let drift = stability_probe(&samples, &basis, config.fit.subwindows, config.fit.drift_threshold)?;
    let terms = fitted
        .terms
        .iter()
        .map(|t| {
            let d = drift.term(t.power, t.logpow);
            ReportTerm {
                power: t.power,
                logpow: t.logpow,
                coeff: t.coeff,
                drift: d.map_or(f64::INFINITY, |d| d.drift),
                detected: d.is_some_and(|d| d.detected),
            }
        })
        .collect();
    let fit_summary = FitSummary {
        route: fitted.diagnostics.route.clone(),
        window: basis.z_window,
        residual_norm: fitted.diagnostics.residual_norm.unwrap_or(f64::NAN),
        condition: fitted.diagnostics.condition.unwrap_or(f64::NAN),
        subwindows: drift.windows.clone(),
        terms,
    };

    let (wp, wc) = spec.weyl_term();
    let wf = fitted.coeff(wp, 0).unwrap_or(0.0);
    let wrel = (wf - wc).abs() / wc.abs();
    let weyl = WeylVerdict {
        power: wp,
        predicted: wc,
        fitted: wf,
        rel_diff: wrel,
        tolerance: config.fit.weyl_tolerance,
        pass: wrel <= config.fit.weyl_tolerance,
    };

    let mut ablation = Vec::new();
    for &(p, l) in basis.terms.iter().filter(|t| t.1 > 0) {
        let reduced = basis.without_term((p, l))?;
        let without = fit_expansion(&samples, &reduced)?;
        let d = drift.term(p, l);
        ablation.push(Ablation {
            power: p,
            logpow: l,
            residual_without: without.diagnostics.residual_norm.unwrap_or(f64::NAN),
            residual_with: fit_summary.residual_norm,
            reduces_residual: fit_summary.residual_norm < without.diagnostics.residual_norm.unwrap_or(f64::NAN),
            drift: d.map_or(f64::INFINITY, |d| d.drift),
            detected: d.is_some_and(|d| d.detected),
        });
    }

    let pass = oracle.as_ref().is_none_or(|o| o.pass) && weyl.pass;
    let report = ExperimentReport {
        name: config.name.clone(),
        science_hash: config.science_hash(),
        model_hash,
        dim: spec.dim(),
        depth: spec.depth(),
        spectrum: spectrum_summary,
        witt,
        samples: samples.len(),
        max_tail_bound: samples.tail_bound.iter().copied().fold(0.0, f64::max),
        oracle,
        fit: fit_summary,
        weyl,
        ablation,
        files,
        pass,
    };
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    let report_path = out.join("report.json");
    write_atomic(&report_path, text.as_bytes())?;
    Ok(RunSummary {
        report,
        report_path,
        report_hash: sha256_hex(text.as_bytes()),
        cache: cache_outcome,
        warnings: cache.warnings(),
    })
}
