//! rtrace: batch front end for resolvent-trace experiments.
//!
//! Exit codes: 0 pass, 1 verification failure (or runtime error), 2 config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use rtrace_core::experiment::{run_experiment, ExperimentConfig};
use rtrace_core::io::write_atomic;
use rtrace_core::sal::{verify_sal, SalOrders, SymbolSpec};
use rtrace_core::special;
use rtrace_core::spectra::fmt17;
use rtrace_core::Error;

/// Overrides `cache_dir` of experiment configs.
const CACHE_ENV: &str = "RTRACE_CACHE_DIR";

#[derive(Parser)]
#[command(name = "rtrace", version, about = "Resolvent traces on model cones and edges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment configuration and write its report bundle.
    Run { config: PathBuf },
    /// Check a symbol's singular-asymptotics expansion against quadrature.
    VerifySal { config: PathBuf },
    /// Tabulate a special function over (ν, x) as CSV.
    DumpSpecial { config: PathBuf },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SalConfig {
    symbol: SymbolSpec,
    power_min: f64,
    z_grid: Vec<f64>,
    /// Report path; stdout when absent.
    #[serde(default)]
    output: Option<PathBuf>,
}

#[derive(Deserialize, Clone, Copy)]
#[serde(rename_all = "kebab-case")]
enum SpecialFunction {
    BesselI,
    BesselK,
    BesselIScaled,
    BesselKScaled,
    BesselIkProduct,
    BesselIRatio,
    BesselJ,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableConfig {
    function: SpecialFunction,
    nu: Vec<f64>,
    x: Vec<f64>,
    #[serde(default)]
    output: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Verification(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::TraceClass { .. } => Failure::Config(e.to_string()),
            other => Failure::Verification(other.to_string()),
        }
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(Failure::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(path: &Path) -> Result<bool, Failure> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
        config.cache_dir = Some(PathBuf::from(dir));
    }
    let summary = run_experiment(&config)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    let r = &summary.report;
    eprintln!("cache: {}", serde_json::to_string(&summary.cache).unwrap_or_default());
    if let Some(o) = &r.oracle {
        eprintln!(
            "oracle {} vs {}: max rel diff {:.3e} (tol {:.1e}) {}",
            o.primary_route,
            o.oracle_route,
            o.max_rel_diff,
            o.tolerance,
            verdict(o.pass)
        );
    }
    eprintln!(
        "weyl z^{}: fitted {:.6e}, predicted {:.6e}, rel {:.3e} {}",
        r.weyl.power,
        r.weyl.fitted,
        r.weyl.predicted,
        r.weyl.rel_diff,
        verdict(r.weyl.pass)
    );
    println!("{} sha256={}", summary.report_path.display(), summary.report_hash);
    Ok(r.pass)
}

fn verify(path: &Path) -> Result<bool, Failure> {
    let cfg: SalConfig = read_config(path)?;
    if cfg.z_grid.len() < 3 || cfg.z_grid.iter().any(|z| !(*z > 0.0 && z.is_finite())) {
        return Err(Failure::Config("z_grid: need at least 3 positive points".into()));
    }
    let orders = SalOrders::through(cfg.power_min);
    let symbol = cfg.symbol.provider_for(orders)?;
    let v = verify_sal(&symbol, orders, &cfg.z_grid);
    let text = serde_json::to_string_pretty(&v).map_err(|e| Failure::Verification(e.to_string()))? + "\n";
    emit(cfg.output.as_deref(), &text)?;
    if let Some(r) = &v.rejection {
        eprintln!("rejected: {r}");
    }
    for o in &v.orders {
        eprintln!(
            "through z^{}: remainder slope {:?}, expected {:.3} {}",
            o.through_power,
            o.slope,
            o.expected_slope,
            verdict(o.pass)
        );
    }
    Ok(v.passed())
}

fn evaluate(f: SpecialFunction, nu: f64, x: f64) -> rtrace_core::Result<f64> {
    match f {
        SpecialFunction::BesselI => special::bessel_i(nu, x),
        SpecialFunction::BesselK => special::bessel_k(nu, x),
        SpecialFunction::BesselIScaled => special::bessel_i_scaled(nu, x),
        SpecialFunction::BesselKScaled => special::bessel_k_scaled(nu, x),
        SpecialFunction::BesselIkProduct => special::bessel_ik_product(nu, x),
        SpecialFunction::BesselIRatio => special::BesselOrder::new(nu).map(|_| special::bessel_i_ratio(nu, x)),
        SpecialFunction::BesselJ => special::BesselOrder::new(nu).map(|_| special::bessel_j(nu, x)),
    }
}

fn dump(path: &Path) -> Result<bool, Failure> {
    let cfg: TableConfig = read_config(path)?;
    if cfg.nu.is_empty() || cfg.x.is_empty() {
        return Err(Failure::Config("nu and x must be nonempty".into()));
    }
    let mut csv = String::from("nu,x,value\n");
    for &nu in &cfg.nu {
        for &x in &cfg.x {
            let v = match evaluate(cfg.function, nu, x) {
                Ok(v) => v,
                Err(e @ (Error::Domain(_) | Error::Range { .. })) => return Err(Failure::Config(e.to_string())),
                Err(e) => return Err(e.into()),
            };
            csv.push_str(&format!("{},{},{}\n", fmt17(nu), fmt17(x), fmt17(v)));
        }
    }
    emit(cfg.output.as_deref(), &csv)?;
    Ok(true)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config } => run(config),
        Command::VerifySal { config } => verify(config),
        Command::DumpSpecial { config } => dump(config),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
    }
}
