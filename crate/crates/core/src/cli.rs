//! Command-line front end.
//!
//! Exit codes: 0 success, 1 error, 2 window cap reached, 3 inner solver did
//! not converge, 4 comparison outside `--tv-tol`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dual::{distribution_from, minimize, SolverConfig};
use crate::error::{Error, Result};
use crate::io::{read_distribution, read_moments, write_distribution_csv, write_distribution_json, write_moments};
use crate::moments::{entropy, moments_of, total_variation, FiniteDistribution, MomentSequence, SupportWindow};
use crate::oracle::grid_maxent;
use crate::reconstruct::{reconstruct, ReconstructionResult};
use crate::support::{chebyshev_extent, chebyshev_window, initial_window, root_window, ChebyshevBound, Strategy, SupportConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_WINDOW_CAP: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_TOLERANCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "maxent-recon", version, about = "Maximum-entropy reconstruction of discrete distributions from raw moments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reconstruct a distribution from a moment file.
    Reconstruct {
        /// Moment file, `{"moments": [...]}`.
        input: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        support: SupportArgs,
        /// Emit diagnostics as JSON on standard error.
        #[arg(long)]
        json_diagnostics: bool,
    },
    /// Compute raw moments of a distribution file.
    Moments {
        /// Distribution file with header `x,p`.
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_order: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Show the initial support windows for a moment file.
    Support {
        input: PathBuf,
        #[command(flatten)]
        support: SupportArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare the dual solver with the primal oracle on a fixed window.
    Compare {
        input: PathBuf,
        /// Left edge of the window.
        #[arg(long)]
        left: u64,
        /// Right edge of the window.
        #[arg(long)]
        right: u64,
        #[arg(long, default_value_t = 1e-3)]
        tv_tol: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output path; standard output when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub output_format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub delta_lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub gamma0: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            delta_lambda: self.delta_lambda,
            gamma0: self.gamma0,
            max_iters: self.max_iters,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Incremental,
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundArg {
    /// z = μ₂/ξ
    Raw,
    /// z = sqrt(σ²/ξ)
    Standard,
}

#[derive(Debug, Args)]
pub struct SupportArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub delta_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    pub xi: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Incremental)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = 100_000)]
    pub max_window: usize,
    /// Apply the tail test at the left edge as well.
    #[arg(long)]
    pub both_ends_tail: bool,
    /// Keep the left edge fixed on even incremental steps.
    #[arg(long = "literal-eq9")]
    pub literal_eq9: bool,
    #[arg(long, value_enum, default_value_t = BoundArg::Raw)]
    pub chebyshev_bound: BoundArg,
}

impl SupportArgs {
    fn config(&self) -> Result<SupportConfig> {
        let cfg = SupportConfig {
            delta_prob: self.delta_prob,
            xi: self.xi,
            strategy: match self.strategy {
                StrategyArg::Incremental => Strategy::Incremental,
                StrategyArg::Chebyshev => Strategy::Chebyshev,
            },
            max_window: self.max_window,
            both_ends: self.both_ends_tail,
            literal_even_step: self.literal_eq9,
            chebyshev_bound: match self.chebyshev_bound {
                BoundArg::Raw => ChebyshevBound::Raw,
                BoundArg::Standard => ChebyshevBound::Standard,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open_output(args: &OutputArgs) -> Result<Box<dyn Write>> {
    Ok(match &args.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn load_moments(path: &PathBuf) -> Result<MomentSequence> {
    read_moments(BufReader::new(File::open(path)?))
}

fn write_distribution(args: &OutputArgs, dist: &FiniteDistribution) -> Result<()> {
    let mut out = open_output(args)?;
    match args.output_format {
        OutputFormat::Csv => write_distribution_csv(&mut out, dist)?,
        OutputFormat::Json => write_distribution_json(&mut out, dist)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    status: &'a str,
    window: SupportWindow,
    initial_window: SupportWindow,
    outer_iterations: usize,
    inner_iterations: usize,
    converged: bool,
    tail_ok: bool,
    final_gradient_norm: f64,
    lambda: &'a [f64],
    lambda0: f64,
    achieved_moments: &'a [f64],
    target_moments: &'a [f64],
}

fn report_reconstruction(
    res: &ReconstructionResult,
    mu: &MomentSequence,
    status: &str,
    json: bool,
    err: &mut dyn Write,
) -> Result<()> {
    let diag = Diagnostics {
        status,
        window: res.window,
        initial_window: res.initial_window,
        outer_iterations: res.outer_iterations,
        inner_iterations: res.report.iterations,
        converged: res.report.converged,
        tail_ok: res.tail_ok,
        final_gradient_norm: res.report.final_gradient_norm,
        lambda: res.multipliers.lambda(),
        lambda0: res.multipliers.lambda0(),
        achieved_moments: res.achieved_moments.values(),
        target_moments: mu.values(),
    };
    if json {
        serde_json::to_writer(&mut *err, &diag).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(err)?;
    } else {
        writeln!(err, "status: {status}")?;
        writeln!(err, "window: {} (initial {})", diag.window, diag.initial_window)?;
        writeln!(
            err,
            "iterations: {} outer, {} inner (last window)",
            diag.outer_iterations, diag.inner_iterations
        )?;
        writeln!(err, "converged: {}, tail test: {}", diag.converged, diag.tail_ok)?;
        writeln!(err, "gradient max-norm: {:e}", diag.final_gradient_norm)?;
        writeln!(err, "lambda0: {:.12e}", diag.lambda0)?;
        for (k, l) in diag.lambda.iter().enumerate() {
            writeln!(err, "lambda{}: {l:.12e}", k + 1)?;
        }
        for (k, (a, t)) in diag.achieved_moments.iter().zip(diag.target_moments).enumerate() {
            writeln!(err, "mu{k}: achieved {a:.12e} target {t:.12e}")?;
        }
    }
    Ok(())
}

fn cmd_reconstruct(
    input: &PathBuf,
    output: &OutputArgs,
    solver: &SolverArgs,
    support: &SupportArgs,
    json: bool,
    err: &mut dyn Write,
) -> Result<i32> {
    let mu = load_moments(input)?;
    let (scfg, dcfg) = (support.config()?, solver.config()?);
    if mu.order() == 0 {
        return Err(Error::TooFewMoments { needed: 1, got: 0 });
    }
    match reconstruct(&mu, &scfg, &dcfg) {
        Ok(res) => {
            let (status, code) = if res.report.converged {
                ("converged", EXIT_OK)
            } else {
                ("not converged", EXIT_NOT_CONVERGED)
            };
            write_distribution(output, &res.distribution)?;
            report_reconstruction(&res, &mu, status, json, err)?;
            Ok(code)
        }
        Err(Error::WindowCapReached(res)) => {
            write_distribution(output, &res.distribution)?;
            report_reconstruction(&res, &mu, "window cap reached", json, err)?;
            Ok(EXIT_WINDOW_CAP)
        }
        Err(e) => Err(e),
    }
}

fn cmd_moments(input: &PathBuf, max_order: usize, output: &OutputArgs) -> Result<i32> {
    let dist = read_distribution(BufReader::new(File::open(input)?))?;
    let mut out = open_output(output)?;
    write_moments(&mut out, &moments_of(&dist, max_order))?;
    out.flush()?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SupportReport {
    delta0_roots: Vec<f64>,
    delta1_roots: Vec<f64>,
    root_window: Option<SupportWindow>,
    root_error: Option<String>,
    chebyshev_z: f64,
    chebyshev_window: Option<SupportWindow>,
    initial_window: SupportWindow,
}

fn cmd_support(input: &PathBuf, support: &SupportArgs, output: &OutputArgs) -> Result<i32> {
    let mu = load_moments(input)?;
    let cfg = support.config()?;
    let roots = root_window(&mu, &cfg);
    let report = SupportReport {
        delta0_roots: roots.as_ref().map(|r| r.delta0_roots.clone()).unwrap_or_default(),
        delta1_roots: roots.as_ref().map(|r| r.delta1_roots.clone()).unwrap_or_default(),
        root_window: roots.as_ref().ok().map(|r| r.window),
        root_error: roots.as_ref().err().map(|e| e.to_string()),
        chebyshev_z: chebyshev_extent(&mu, &cfg),
        chebyshev_window: chebyshev_window(&mu, &cfg).ok(),
        initial_window: initial_window(&mu, &cfg),
    };
    let mut out = open_output(output)?;
    match output.output_format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(out)?;
        }
        OutputFormat::Csv => {
            let list = |v: &[f64]| v.iter().map(|r| format!("{r}")).collect::<Vec<_>>().join(", ");
            writeln!(out, "delta0 roots: [{}]", list(&report.delta0_roots))?;
            writeln!(out, "delta1 roots: [{}]", list(&report.delta1_roots))?;
            match (&report.root_window, &report.root_error) {
                (Some(w), _) => writeln!(out, "root window: {w}")?,
                (None, Some(e)) => writeln!(out, "root window: unavailable ({e})")?,
                (None, None) => writeln!(out, "root window: unavailable")?,
            }
            match report.chebyshev_window {
                Some(w) => writeln!(out, "chebyshev window: {w} (z = {})", report.chebyshev_z)?,
                None => writeln!(out, "chebyshev window: unavailable (needs μ₂)")?,
            }
            writeln!(out, "initial window: {}", report.initial_window)?;
        }
    }
    out.flush()?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Comparison {
    window: SupportWindow,
    total_variation: f64,
    entropy_solver: f64,
    entropy_oracle: f64,
    entropy_difference: f64,
    solver_converged: bool,
    solver_residuals: Vec<f64>,
    oracle_residuals: Vec<f64>,
    tv_tol: f64,
    within_tolerance: bool,
}

fn residuals(dist: &FiniteDistribution, mu: &MomentSequence) -> Vec<f64> {
    let got = moments_of(dist, mu.order());
    (1..=mu.order()).map(|k| got.get(k) - mu.get(k)).collect()
}

fn cmd_compare(
    input: &PathBuf,
    window: SupportWindow,
    tv_tol: f64,
    solver: &SolverArgs,
    output: &OutputArgs,
) -> Result<i32> {
    let mu = load_moments(input)?;
    let dcfg = solver.config()?;
    let oracle = grid_maxent(&mu, window)?;
    let (lm, report) = minimize(&mu, window, &dcfg)?;
    let solved = distribution_from(&lm, window)?;
    let tv = total_variation(&solved, &oracle);
    let cmp = Comparison {
        window,
        total_variation: tv,
        entropy_solver: entropy(&solved),
        entropy_oracle: entropy(&oracle),
        entropy_difference: entropy(&solved) - entropy(&oracle),
        solver_converged: report.converged,
        solver_residuals: residuals(&solved, &mu),
        oracle_residuals: residuals(&oracle, &mu),
        tv_tol,
        within_tolerance: tv <= tv_tol,
    };
    let mut out = open_output(output)?;
    match output.output_format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &cmp).map_err(|e| Error::Parse(e.to_string()))?;
            writeln!(out)?;
        }
        OutputFormat::Csv => {
            writeln!(out, "window: {}", cmp.window)?;
            writeln!(out, "total variation: {:e}", cmp.total_variation)?;
            writeln!(
                out,
                "entropy: solver {:.12} oracle {:.12} difference {:e}",
                cmp.entropy_solver, cmp.entropy_oracle, cmp.entropy_difference
            )?;
            writeln!(out, "solver converged: {}", cmp.solver_converged)?;
            for (k, (s, o)) in cmp.solver_residuals.iter().zip(&cmp.oracle_residuals).enumerate() {
                writeln!(out, "residual mu{}: solver {s:e} oracle {o:e}", k + 1)?;
            }
            writeln!(out, "within tolerance {:e}: {}", tv_tol, cmp.within_tolerance)?;
        }
    }
    out.flush()?;
    Ok(if cmp.within_tolerance { EXIT_OK } else { EXIT_TOLERANCE })
}

/// Runs a parsed command, writing diagnostics and errors to `err`.
pub fn run(cli: &Cli, err: &mut dyn Write) -> i32 {
    let outcome = match &cli.command {
        Command::Reconstruct {
            input,
            output,
            solver,
            support,
            json_diagnostics,
        } => cmd_reconstruct(input, output, solver, support, *json_diagnostics, err),
        Command::Moments {
            input,
            max_order,
            output,
        } => cmd_moments(input, *max_order, output),
        Command::Support { input, support, output } => cmd_support(input, support, output),
        Command::Compare {
            input,
            left,
            right,
            tv_tol,
            solver,
            output,
        } => SupportWindow::new(*left, *right)
            .and_then(|w| cmd_compare(input, w, *tv_tol, solver, output)),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
