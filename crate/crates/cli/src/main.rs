//! Deterministic CLI over the verification library. Data goes to stdout (or
//! `--out`), diagnostics go to stderr. Exit codes: 0 all gates pass, 1 a
//! numerical gate failed, 2 invalid parameters or configuration.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use qduffing::coeff_flow::{self, Mode};
use qduffing::forge;
use qduffing::jsonfmt::f64_repr;
use qduffing::meanfield::{solve_omega, Convention, PhysParams};
use qduffing::oracle;
use qduffing::verify::{self, Suite, VerifyConfig};
use qduffing::CoreError;

#[derive(Parser)]
#[command(
    name = "qduffing",
    about = "Mean-field verification suite for the quantum Duffing oscillator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PaperLiteral,
    EngineDerived,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Literal,
    MNormalized,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Mass (hbar = 1 units)
    #[arg(long, allow_hyphen_values = true)]
    m: Option<f64>,
    /// Bare angular frequency
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<f64>,
    /// Quartic coupling
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
    /// Fock-space truncation size
    #[arg(long)]
    nfock: Option<usize>,
    /// Coefficient-system variant
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Formula convention for m != 1
    #[arg(long, value_enum)]
    convention: Option<ConventionArg>,
    /// Density-operator exponent (defaults to the dressed frequency)
    #[arg(long)]
    omega0: Option<f64>,
    /// Write data here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format where a command supports more than one
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// JSON file mirroring these keys; command-line flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    m: Option<f64>,
    omega: Option<f64>,
    lambda: Option<f64>,
    nfock: Option<usize>,
    mode: Option<String>,
    convention: Option<String>,
    omega0: Option<f64>,
    out_path: Option<PathBuf>,
    format: Option<String>,
}

/// Fully resolved run configuration (flags > config file > defaults).
struct RunConfig {
    params: PhysParams,
    nfock: usize,
    mode: Mode,
    omega0: Option<f64>,
    out: Option<PathBuf>,
    format: Option<FormatArg>,
}

fn resolve(opts: &CommonOpts) -> Result<RunConfig, CoreError> {
    let file: FileConfig = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CoreError::InvalidParams(format!("config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CoreError::InvalidParams(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let m = opts.m.or(file.m).unwrap_or(1.0);
    let omega = opts.omega.or(file.omega).unwrap_or(1.0);
    let lambda = opts.lambda.or(file.lambda).unwrap_or(0.0);
    let nfock = opts.nfock.or(file.nfock).unwrap_or(64);
    let mode = match opts.mode {
        Some(ModeArg::PaperLiteral) => Mode::PaperLiteral,
        Some(ModeArg::EngineDerived) => Mode::EngineDerived,
        None => match file.mode.as_deref() {
            Some(s) => Mode::from_str(s)?,
            None => Mode::PaperLiteral,
        },
    };
    let convention = match opts.convention {
        Some(ConventionArg::Literal) => Convention::Literal,
        Some(ConventionArg::MNormalized) => Convention::MNormalized,
        None => match file.convention.as_deref() {
            Some(s) => Convention::from_str(s)?,
            None => Convention::MNormalized,
        },
    };
    let format = opts.format.or(match file.format.as_deref() {
        Some("csv") => Some(FormatArg::Csv),
        Some("json") => Some(FormatArg::Json),
        Some(other) => {
            return Err(CoreError::InvalidParams(format!(
                "unknown format '{other}'"
            )))
        }
        None => None,
    });
    if nfock < 32 || nfock > 512 {
        return Err(CoreError::InvalidParams(format!(
            "nfock must lie in [32, 512], got {nfock}"
        )));
    }
    let omega0 = opts.omega0.or(file.omega0);
    if let Some(o0) = omega0 {
        if !(o0 > 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "omega0 must be positive, got {o0}"
            )));
        }
    }
    Ok(RunConfig {
        params: PhysParams::new(m, omega, lambda, convention)?,
        nfock,
        mode,
        omega0,
        out: opts.out.clone().or(file.out_path),
        format,
    })
}

#[derive(Subcommand)]
enum Command {
    /// Solve the gap cubic both ways and report the dressed frequency
    Omega {
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Sweep the coefficient-flow spectrum over alpha and locate alpha_c
    Stability {
        #[command(flatten)]
        opts: CommonOpts,
        #[arg(long, default_value_t = 0.0)]
        alpha_min: f64,
        #[arg(long, default_value_t = 0.3)]
        alpha_max: f64,
        #[arg(long, default_value_t = 301)]
        steps: usize,
    },
    /// Run a named invariant suite and emit the verification report
    Verify {
        #[command(flatten)]
        opts: CommonOpts,
        #[arg(long, default_value = "all")]
        suite: String,
        /// Enable the lambda-halving ratio gates (frozen-coefficient bookkeeping)
        #[arg(long)]
        alpha_fixed: bool,
    },
    /// Exact diagonalization in the bare basis plus the classical comparison
    Exact {
        #[command(flatten)]
        opts: CommonOpts,
        /// Comma-separated increasing truncation sizes
        #[arg(long, default_value = "128,256,384", value_delimiter = ',')]
        dims: Vec<usize>,
    },
    /// Density operator: purity and quadrature cumulants
    Rho {
        #[command(flatten)]
        opts: CommonOpts,
    },
}

fn emit(cfg: &RunConfig, data: &str) -> Result<(), CoreError> {
    match &cfg.out {
        Some(path) => {
            fs::write(path, data)?;
            Ok(())
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(data.as_bytes())?;
            Ok(())
        }
    }
}

fn reject_format(cfg: &RunConfig, supported: FormatArg, what: &str) -> Result<(), CoreError> {
    match (cfg.format, supported) {
        (Some(FormatArg::Csv), FormatArg::Json) => Err(CoreError::InvalidParams(format!(
            "{what} emits JSON; --format csv is not available here"
        ))),
        (Some(FormatArg::Json), FormatArg::Csv) => Err(CoreError::InvalidParams(format!(
            "{what} emits CSV; --format json is not available here"
        ))),
        _ => Ok(()),
    }
}

/// exit 0: gates pass; exit 1: a gate failed; exit 2: bad input.
fn run() -> Result<u8, CoreError> {
    match Cli::parse().command {
        Command::Omega { opts } => {
            let cfg = resolve(&opts)?;
            reject_format(&cfg, FormatArg::Json, "omega")?;
            let sol = solve_omega(cfg.params)?;
            let residual_ok = sol.gap.cubic_residual.abs() < 1e-10 * sol.omega_big.powi(3).max(1.0);
            let agree = (sol.gap.omega_closed - sol.gap.omega_bisect).abs() < 1e-9;
            let pass = residual_ok && agree;
            let json = format!(
                "{{\"agreement\":{agree},\"cubic_residual\":{},\"e0\":{},\"omega_bisect\":{},\"omega_closed\":{},\"pass\":{pass}}}\n",
                f64_repr(sol.gap.cubic_residual),
                f64_repr(sol.e0),
                f64_repr(sol.gap.omega_bisect),
                f64_repr(sol.gap.omega_closed),
            );
            emit(&cfg, &json)?;
            Ok(if pass { 0 } else { 1 })
        }
        Command::Stability {
            opts,
            alpha_min,
            alpha_max,
            steps,
        } => {
            let cfg = resolve(&opts)?;
            reject_format(&cfg, FormatArg::Csv, "stability")?;
            let report = coeff_flow::stability_sweep(cfg.mode, alpha_min, alpha_max, steps)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            emit(&cfg, &String::from_utf8_lossy(&csv))?;
            eprintln!("# reading: {}", report.reading_note);
            match report.alpha_crit {
                Some(ac) => {
                    eprintln!("alpha_crit mode={} {}", cfg.mode.as_str(), f64_repr(ac));
                    if cfg.mode == Mode::EngineDerived {
                        let d = coeff_flow::compare_modes(1e-4)?;
                        eprintln!("discrepancy {}", d.to_json());
                    }
                    Ok(0)
                }
                None => {
                    eprintln!(
                        "no transition in range [{alpha_min}, {alpha_max}] for mode={}",
                        cfg.mode.as_str()
                    );
                    if cfg.mode == Mode::EngineDerived {
                        let d = coeff_flow::compare_modes(1e-4)?;
                        eprintln!("discrepancy {}", d.to_json());
                    }
                    Ok(1)
                }
            }
        }
        Command::Verify {
            opts,
            suite,
            alpha_fixed,
        } => {
            let cfg = resolve(&opts)?;
            reject_format(&cfg, FormatArg::Json, "verify")?;
            let suite = Suite::from_str(&suite)?;
            let sol = solve_omega(cfg.params)?;
            let outcome = verify::run_suite(
                suite,
                &VerifyConfig {
                    sol,
                    dim: cfg.nfock,
                    omega0: cfg.omega0,
                    mode: cfg.mode,
                    alpha_fixed,
                },
            )?;
            emit(&cfg, &format!("{}\n", outcome.to_json()))?;
            for c in outcome.checks.iter().filter(|c| !c.pass) {
                eprintln!("FAIL {}: value {}", c.name, f64_repr(c.value));
            }
            Ok(if outcome.all_pass() { 0 } else { 1 })
        }
        Command::Exact { opts, dims } => {
            let cfg = resolve(&opts)?;
            reject_format(&cfg, FormatArg::Json, "exact")?;
            let sol = solve_omega(cfg.params)?;
            let spec = oracle::exact_diagonalize(&cfg.params, &dims)?;
            let comparison = oracle::classical_comparison(&sol)?;
            let variational_ok = sol.e0 >= spec.ground_energy();
            let json = format!(
                "{{\"classical\":{},\"mean_field_e0\":{},\"spectrum\":{},\"variational_bound_ok\":{}}}\n",
                comparison.to_json(),
                f64_repr(sol.e0),
                spec.to_json(),
                variational_ok,
            );
            emit(&cfg, &json)?;
            if !spec.converged[0] {
                eprintln!("ground level not converged at dims {dims:?}");
                return Ok(1);
            }
            Ok(if variational_ok { 0 } else { 1 })
        }
        Command::Rho { opts } => {
            let cfg = resolve(&opts)?;
            reject_format(&cfg, FormatArg::Json, "rho")?;
            let sol = solve_omega(cfg.params)?;
            let b3 = forge::driven_b3(&sol, Mode::EngineDerived, 0.0)?;
            let gen = forge::build_generators(&sol, &b3, 0.0)?;
            let omega0 = cfg.omega0.unwrap_or(sol.omega_big);
            let spec = forge::DensitySpec::new(omega0, cfg.nfock, true)?;
            let rho = forge::density_operator(&gen, &spec)?;
            let cum = forge::quadrature_cumulants(&rho, &sol, 0.0)?;
            let herm = rho.hermiticity_defect();
            let pass = herm < 1e-12;
            let json = format!(
                "{{\"hermiticity_defect\":{},\"kurtosis_excess\":{},\"omega0\":{},\"pass\":{pass},\"purity\":{},\"q2\":{},\"q4\":{},\"q_mean\":{}}}\n",
                f64_repr(herm),
                f64_repr(cum.kurtosis_excess),
                f64_repr(omega0),
                f64_repr(forge::purity(&rho)),
                f64_repr(cum.q2),
                f64_repr(cum.q4),
                f64_repr(cum.q_mean),
            );
            emit(&cfg, &json)?;
            Ok(if pass { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                CoreError::InvalidParams(_) | CoreError::Io(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
