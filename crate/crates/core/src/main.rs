use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use weak_transfer::corpus::{derive_seed, rng_for, CorpusSpec};
use weak_transfer::deleeuw::{convergence_monitor, staircase_deviations, staircase_from_kernel, MonitoredSymbol};
use weak_transfer::fourier::symbol_to_kernel;
use weak_transfer::lattice::{
    coset_representatives, parse_matrix, reduce_support_affine, verify_symbol_intertwining, IntertwiningConfig,
};
use weak_transfer::multiplier::apply_kernel_symbol;
use weak_transfer::report::{random_symbols, run_norm_report, NormReportConfig};
use weak_transfer::suite::{check_catalog, run_verification_suite, SuiteConfig};
use weak_transfer::transfer::{exact_u_grid_size, periodize_on_line, TransferCoupleConfig, TransferredOperator};
use weak_transfer::weak::Operator;
use weak_transfer::{DiscreteSymbol, Domain, Error, GridFunction, KernelSpec, LineModel, Result, TorusGrid, C64};

#[derive(Parser)]
#[command(name = "weak-transfer", version, about = "Weak-type Fourier multiplier laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Master seed; every consumer derives its own stream from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the named verification checks and report each one.
    Suite {
        #[command(flatten)]
        common: Common,
        /// JSON configuration; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replace every check's tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Run only checks of this module (repeatable).
        #[arg(long = "module")]
        modules: Vec<String>,
        /// Run only this check (repeatable).
        #[arg(long = "check")]
        checks: Vec<String>,
        /// List check names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Norm-ratio table for periodized multipliers.
    Norms {
        #[command(flatten)]
        common: Common,
        /// Symbol files (repeatable).
        #[arg(long = "phi")]
        phi: Vec<PathBuf>,
        /// Kernel files (repeatable); the triangle when absent.
        #[arg(long = "kernel")]
        kernels: Vec<PathBuf>,
        /// Add this many random symbols.
        #[arg(long, default_value_t = 0)]
        random: usize,
        /// Radius of the random symbols' window.
        #[arg(long, default_value_t = 4)]
        radius: i64,
        #[arg(long, value_delimiter = ',', default_value = "2")]
        p: Vec<f64>,
        /// Torus points per axis.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 16)]
        period: usize,
        /// Line samples per period.
        #[arg(long, default_value_t = 512)]
        samples: usize,
    },
    /// Coset representatives of Z^N / A^T Z^N.
    Coset {
        #[command(flatten)]
        common: Common,
        /// Integer matrix, rows separated by ';', entries by ','.
        #[arg(long)]
        matrix: String,
    },
    /// Compare H_k with T_W on random inputs.
    TransferCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Line samples per period.
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[arg(long, default_value_t = 16)]
        period: usize,
        /// Symbol file; random on [-5, 5]^N when absent.
        #[arg(long)]
        phi: Option<PathBuf>,
        /// Kernel file supported in [1/4, 3/4]^N; the reduced triangle when absent.
        #[arg(long)]
        kernel: Option<PathBuf>,
        /// u-grid points per axis; the smallest exact size when absent.
        #[arg(long)]
        u_grid: Option<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Intertwining, histogram, isometry and W checks for one matrix.
    LatticeVerify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        matrix: String,
        /// Torus points per axis.
        #[arg(long, default_value_t = 24)]
        grid: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Symbol file; random on [-3, 3]^N when absent.
        #[arg(long)]
        phi: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Staircase extensions of a kernel and their weak-norm sequence.
    Deleeuw {
        #[command(flatten)]
        common: Common,
        /// One-dimensional kernel file.
        #[arg(long)]
        phi_family: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Line samples per period.
        #[arg(long, default_value_t = 1024)]
        grid: usize,
        #[arg(long, default_value_t = 16)]
        period: usize,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        /// Same as --out.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Flattens the scalar fields of a JSON object into `key,value` lines.
fn flat_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, out);
                }
            }
            Value::String(s) => out.push_str(&format!("{prefix},\"{}\"\n", s.replace('"', "'"))),
            other => out.push_str(&format!("{prefix},{other}\n")),
        }
    }
    let mut out = String::from("key,value\n");
    walk("", v, &mut out);
    out
}

fn emit(common: &Common, json: String, csv: String) -> Result<()> {
    let text = match common.format {
        Format::Json => json + "\n",
        Format::Csv => csv,
    };
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => write_stdout(&text)?,
    }
    Ok(())
}

/// Writes to stdout; a closed pipe is not an error.
fn write_stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Prefixes load errors with the offending path.
fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn emit_value(common: &Common, value: &impl Serialize) -> Result<()> {
    let v = serde_json::to_value(value)?;
    emit(common, serde_json::to_string_pretty(&v)?, flat_csv(&v))
}

fn random_symbol(dim: usize, radius: i64, seed: u64) -> Result<DiscreteSymbol> {
    let mut rng = rng_for(seed, "phi");
    DiscreteSymbol::from_fn(vec![(-radius, radius); dim], |_| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn label(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

#[derive(Serialize)]
struct CosetOutput {
    matrix: Vec<Vec<i64>>,
    det: i64,
    q: u64,
    representatives: Vec<Vec<i64>>,
}

#[derive(Serialize)]
struct TransferOutput {
    dim: usize,
    period: usize,
    samples_per_period: usize,
    u_grid: usize,
    trials: usize,
    seed: u64,
    max_error: f64,
    tolerance: f64,
    passed: bool,
}

#[derive(Serialize)]
struct DeleeuwOutput {
    eps: Vec<f64>,
    sup_deviation: Vec<f64>,
    monitor: weak_transfer::deleeuw::ConvergenceReport,
}

/// Returns whether the run counts as a success.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Suite {
            common,
            config,
            tolerance,
            modules,
            checks,
            list,
        } => {
            if list {
                let text: String = check_catalog()
                    .into_iter()
                    .map(|(name, module, criterion)| format!("{name}\t{module}\t{criterion}\n"))
                    .collect();
                write_stdout(&text)?;
                return Ok(true);
            }
            let mut cfg = match config {
                Some(path) => with_path(&path, SuiteConfig::load(&path))?,
                None => SuiteConfig::default(),
            };
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if tolerance.is_some() {
                cfg.tolerance = tolerance;
                cfg.tolerances.clear();
            }
            if !modules.is_empty() {
                cfg.modules = Some(modules);
            }
            if !checks.is_empty() {
                cfg.checks = Some(checks);
            }
            let report = run_verification_suite(&cfg)?;
            for line in report.summary_lines() {
                eprintln!("{line}");
            }
            emit(&common, report.to_json()?, report.to_csv())?;
            Ok(report.passed)
        }
        Command::Norms {
            common,
            phi,
            kernels,
            random,
            radius,
            p,
            grid,
            period,
            samples,
        } => {
            let seed = common.seed.unwrap_or(0);
            let kernels: Vec<(String, KernelSpec)> = if kernels.is_empty() {
                vec![("triangle".into(), KernelSpec::triangle(1))]
            } else {
                kernels.iter().map(|k| Ok((label(k), with_path(k, KernelSpec::load(k))?))).collect::<Result<_>>()?
            };
            let mut symbols: Vec<(String, DiscreteSymbol)> =
                phi.iter().map(|f| Ok((label(f), with_path(f, DiscreteSymbol::load(f))?))).collect::<Result<_>>()?;
            if random > 0 {
                symbols.extend(random_symbols(random, kernels[0].1.dim(), radius, seed)?);
            }
            let cfg = NormReportConfig {
                p,
                grid,
                period,
                samples_per_period: samples,
                seed,
            };
            let report = run_norm_report(&symbols, &kernels, &cfg)?;
            emit(&common, report.to_json()?, report.to_csv())?;
            Ok(true)
        }
        Command::Coset { common, matrix } => {
            let a = parse_matrix(&matrix)?;
            let l = coset_representatives(&a)?;
            emit_value(
                &common,
                &CosetOutput {
                    matrix: a,
                    det: l.det(),
                    q: l.q(),
                    representatives: l.cosets().to_vec(),
                },
            )?;
            Ok(true)
        }
        Command::TransferCheck {
            common,
            dim,
            grid,
            period,
            phi,
            kernel,
            u_grid,
            trials,
            tol,
            p,
        } => {
            let seed = common.seed.unwrap_or(0);
            let line = LineModel::new(dim, period, grid)?;
            let phi = match phi {
                Some(path) => with_path(&path, DiscreteSymbol::load(&path))?,
                None => random_symbol(dim, 5, seed)?,
            };
            let kernel = match kernel {
                Some(path) => with_path(&path, KernelSpec::load(&path))?,
                None => reduce_support_affine(&KernelSpec::triangle(dim), 1.0)?,
            };
            if phi.dim() != dim || kernel.dim() != dim {
                return Err(Error::DomainMismatch(format!("--dim {dim} disagrees with the inputs")));
            }
            let m_u = u_grid.unwrap_or_else(|| exact_u_grid_size(&kernel, &line, phi.max_abs_coord() as usize));
            let cfg = TransferCoupleConfig::new(kernel.clone(), line.clone(), TorusGrid::new(dim, m_u)?, p)?;
            let k = symbol_to_kernel(&phi, cfg.u_grid())?;
            let h = TransferredOperator::new(&cfg, &k)?;
            let w = periodize_on_line(&phi, &kernel, &line)?;
            let d: Domain = line.into();
            let mut rng = rng_for(seed, "inputs");
            let inputs: Vec<GridFunction> = (0..trials)
                .map(|_| {
                    GridFunction::new(
                        d.clone(),
                        (0..d.len())
                            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                            .collect(),
                    )
                })
                .collect::<Result<_>>()?;
            let max_error = inputs
                .par_iter()
                .map(|f| Ok(h.apply(f)?.max_abs_diff(&apply_kernel_symbol(&w, f)?)? / f.sup_norm()))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let passed = max_error <= tol;
            emit_value(
                &common,
                &TransferOutput {
                    dim,
                    period,
                    samples_per_period: grid,
                    u_grid: m_u,
                    trials,
                    seed,
                    max_error,
                    tolerance: tol,
                    passed,
                },
            )?;
            Ok(passed)
        }
        Command::LatticeVerify {
            common,
            matrix,
            grid,
            trials,
            phi,
            tol,
        } => {
            let seed = common.seed.unwrap_or(0);
            let a = parse_matrix(&matrix)?;
            let l = coset_representatives(&a)?;
            let phi = match phi {
                Some(path) => with_path(&path, DiscreteSymbol::load(&path))?,
                None => random_symbol(l.dim(), 3, seed)?,
            };
            let cfg = IntertwiningConfig {
                trials,
                seed: derive_seed(seed, "lattice-verify"),
                tolerance: tol,
                ..Default::default()
            };
            let report = verify_symbol_intertwining(&phi, &l, &TorusGrid::new(l.dim(), grid)?, &cfg)?;
            emit_value(&common, &report)?;
            Ok(report.passed)
        }
        Command::Deleeuw {
            mut common,
            phi_family,
            eps,
            p,
            grid,
            period,
            tolerance,
            report,
        } => {
            if common.out.is_none() {
                common.out = report;
            }
            let kernel = with_path(&phi_family, KernelSpec::load(&phi_family))?;
            let line = LineModel::new(kernel.dim(), period, grid)?;
            let d: Domain = line.clone().into();
            let sup_deviation = staircase_deviations(&kernel, &eps, &line)?;
            let symbols: Vec<MonitoredSymbol> = eps
                .iter()
                .map(|&e| Ok(MonitoredSymbol::Kernel(staircase_from_kernel(&kernel, e, &line)?)))
                .collect::<Result<_>>()?;
            let corpus = CorpusSpec::standard(derive_seed(common.seed.unwrap_or(0), "deleeuw")).generate(&d)?;
            let monitor = convergence_monitor(&symbols, &d, p, &corpus, tolerance)?;
            emit_value(
                &common,
                &DeleeuwOutput {
                    eps,
                    sup_deviation,
                    monitor,
                },
            )?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
