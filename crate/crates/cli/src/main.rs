//! Batch front-end: validates experiment configurations, runs moment
//! estimators, fits growth exponents, and evaluates the special functions
//! directly. Exit codes: 0 ok, 1 domain error, 2 usage/parse error.

mod config;
mod csvio;
mod runner;

use clap::{Parser, Subcommand, ValueEnum};
use config::ExperimentConfig;
use runner::{CliError, FitMode, MomentMethod, SpecfunRequest};
use spde_moments::model::EquationKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spdemom", version, about = "Moment estimation and growth-exponent fitting for noise-driven heat and wave equations")]
struct Cli {
    /// Number of worker threads (0 = all cores). Never affects output bytes.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration against the admissibility conditions.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Re-emit the parsed configuration as canonical JSON.
        #[arg(long)]
        emit_config: Option<PathBuf>,
    },
    /// Estimate moments over the configured (t, n) grid.
    Moment {
        #[arg(long)]
        config: PathBuf,
        /// Estimation route.
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Output CSV path (defaults to the config's output.csv, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-replica trace records next to the output.
        #[arg(long)]
        trace: bool,
        /// Dump lattice snapshots (fieldsim method).
        #[arg(long)]
        dump_fields: bool,
        /// Re-emit the parsed configuration as canonical JSON.
        #[arg(long)]
        emit_config: Option<PathBuf>,
    },
    /// Fit growth exponents from a moment CSV.
    Fit {
        /// Moment CSV produced by the moment subcommand.
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Compare fits against the closed-form predictions.
        #[arg(long)]
        predicted: bool,
        /// Tolerance for the predicted comparison.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        /// Output CSV path for the fit rows.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a special function directly.
    Specfun {
        #[command(subcommand)]
        which: SpecfunCmd,
    },
    /// Print the version string.
    Version,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Poisson,
    Fk,
    Oracle,
    Fieldsim,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Time,
    Order,
}

#[derive(Subcommand)]
enum SpecfunCmd {
    /// Scaled incomplete gamma function gamma*(nu, z).
    #[command(allow_negative_numbers = true)]
    GammaStar {
        #[arg(long)]
        nu: f64,
        #[arg(long)]
        z: f64,
    },
    /// Euler Beta function B(x, y).
    #[command(allow_negative_numbers = true)]
    Beta {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
    /// Discounted kernel-weighted growth integral.
    #[command(allow_negative_numbers = true)]
    Upsilon {
        #[arg(long, value_enum)]
        equation: EquationArg,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        hurst: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma_exp: f64,
        #[arg(long)]
        t: f64,
    },
    /// Exact double time integral of the generalized covariance.
    #[command(allow_negative_numbers = true)]
    GammaTimeIntegral {
        #[arg(long)]
        a1: f64,
        #[arg(long)]
        a2: f64,
        #[arg(long)]
        t: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EquationArg {
    Heat,
    Wave,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        // Global pool; parallelism level must not change any output byte.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_json(&text).map_err(CliError::Usage)
}

fn emit_config_if_requested(
    cfg: &ExperimentConfig,
    path: &Option<PathBuf>,
) -> Result<(), CliError> {
    if let Some(p) = path {
        std::fs::write(p, cfg.to_canonical_json())
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, content)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { config, emit_config } => {
            let cfg = load_config(&config)?;
            emit_config_if_requested(&cfg, &emit_config)?;
            let report = runner::cmd_validate(&cfg)?;
            for line in &report.lines {
                println!("{line}");
            }
            if report.ok {
                println!("configuration admissible");
                Ok(())
            } else {
                Err(CliError::Domain("validation failed".to_string()))
            }
        }
        Command::Moment { config, method, out, trace, dump_fields, emit_config } => {
            let cfg = load_config(&config)?;
            emit_config_if_requested(&cfg, &emit_config)?;
            let method = match method {
                MethodArg::Poisson => MomentMethod::Poisson,
                MethodArg::Fk => MomentMethod::Fk,
                MethodArg::Oracle => MomentMethod::Oracle,
                MethodArg::Fieldsim => MomentMethod::Fieldsim,
            };
            let trace = trace || cfg.output.trace;
            let dump = dump_fields || cfg.output.dump_fields;
            let output = runner::cmd_moment(&cfg, method, trace, dump)?;
            let out_path: Option<PathBuf> =
                out.or_else(|| cfg.output.csv.as_ref().map(PathBuf::from));
            // A .dat target switches to (x y) column pairs for plotting.
            let rendered = match out_path.as_deref().and_then(|p| p.extension()) {
                Some(ext) if ext == "dat" => output.to_dat(),
                _ => output.to_csv(),
            };
            write_or_print(out_path.as_deref(), &rendered)?;
            if let (Some(trace_csv), Some(base)) = (&output.trace_csv, &out_path) {
                let p = base.with_extension("trace.csv");
                std::fs::write(&p, trace_csv)
                    .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
            }
            if let (Some(dump_csv), Some(base)) = (&output.dump_csv, &out_path) {
                let p = base.with_extension("fields.csv");
                std::fs::write(&p, dump_csv)
                    .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))?;
            }
            Ok(())
        }
        Command::Fit { csv, mode, predicted, tol, out } => {
            let text = std::fs::read_to_string(&csv)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", csv.display())))?;
            let rows = csvio::parse_moment_csv(&text).map_err(CliError::Usage)?;
            let mode = match mode {
                ModeArg::Time => FitMode::Time,
                ModeArg::Order => FitMode::Order,
            };
            let output = runner::cmd_fit(&rows, mode, predicted, tol)?;
            for line in &output.report {
                println!("{line}");
            }
            write_or_print(out.as_deref(), &output.csv)?;
            if predicted && !output.all_pass {
                return Err(CliError::Domain(
                    "fitted exponents disagree with predictions".to_string(),
                ));
            }
            Ok(())
        }
        Command::Specfun { which } => {
            let req = match which {
                SpecfunCmd::GammaStar { nu, z } => SpecfunRequest::GammaStar { nu, z },
                SpecfunCmd::Beta { x, y } => SpecfunRequest::Beta { x, y },
                SpecfunCmd::Upsilon { equation, alpha, hurst, beta, gamma_exp, t } => {
                    SpecfunRequest::Upsilon {
                        kind: match equation {
                            EquationArg::Heat => EquationKind::Heat,
                            EquationArg::Wave => EquationKind::Wave,
                        },
                        alpha,
                        hurst,
                        beta,
                        gamma_exp,
                        t,
                    }
                }
                SpecfunCmd::GammaTimeIntegral { a1, a2, t } => {
                    SpecfunRequest::GammaTimeIntegral { a1, a2, t }
                }
            };
            println!("{}", runner::cmd_specfun(&req)?);
            Ok(())
        }
        Command::Version => {
            println!("spdemom {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}
