use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use sos_cayley::boundary::enumerate_tisgms;
use sos_cayley::extremality::{verify_gamma_grid, GammaGridReport};
use sos_cayley::recon::{decay_curve, RNG_ALGORITHM};
use sos_cayley::recursion::{iterate_to_fixed_point, IterationSettings, TiLaw};
use sos_cayley::thresholds::{audit_thresholds, find_all_thresholds, phase_diagram, ThresholdAudit, ThresholdSet};
use sos_cayley::{Branch, Coupling, Error, Regime};

const THREADS_ENV: &str = "SOS_CAYLEY_THREADS";

#[derive(Parser)]
#[command(name = "sos-cayley", version, about = "Gibbs measures of the three-state SOS model on the binary Cayley tree")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print every translation-invariant boundary law at θ as JSON.
    Solve {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
    },
    /// Tabulate spectra, indicators and verdicts over an even θ grid (CSV).
    Scan {
        #[arg(long, allow_negative_numbers = true)]
        theta_min: f64,
        #[arg(long, allow_negative_numbers = true)]
        theta_max: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Write to a file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Locate the critical couplings.
    Thresholds {
        #[arg(long)]
        json: bool,
        /// Also report thresholds from the alternative indicator forms.
        #[arg(long)]
        audit: bool,
    },
    /// Monte Carlo census TV between root spins 0 and 2, depths 1..=depth (CSV).
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        branch: u8,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Grid check of the disagreement bound |f|, |g| ≤ |1−θ²|/(1+θ²).
    VerifyGamma {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        branch: u8,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        json: bool,
    },
    /// Damped fixed-point iteration of the general m-state, k-ary recursion (JSON).
    General {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        /// Starting law z₀,…,z_{m−1}, comma separated; m is its length.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        z0: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
    },
}

#[derive(Debug)]
enum CliError {
    Model(Error),
    Io(io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Json(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(Error::Domain(_)) => 3,
            CliError::Model(_) => 4,
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

impl CliError {
    fn is_broken_pipe(&self) -> bool {
        let io = match self {
            CliError::Io(e) => Some(e),
            CliError::Csv(e) => match e.kind() {
                csv::ErrorKind::Io(e) => Some(e),
                _ => None,
            },
            _ => None,
        };
        io.is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
            CliError::Csv(e) => write!(f, "CSV error: {e}"),
            CliError::Json(e) => write!(f, "JSON error: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// 17 significant digits.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer<'a>(path: Option<&PathBuf>, out: &'a mut dyn Write) -> CliResult<csv::Writer<Box<dyn Write + 'a>>> {
    let sink: Box<dyn Write + 'a> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(out),
    };
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink))
}

#[derive(Serialize)]
struct LawOut {
    x: f64,
    y: f64,
    z: [f64; 2],
}

#[derive(Serialize)]
struct SolveOut {
    theta: Coupling,
    regime: Regime,
    count: usize,
    laws: BTreeMap<String, LawOut>,
}

fn cmd_solve(out: &mut dyn Write, theta: f64) -> CliResult<()> {
    let catalog = enumerate_tisgms(Coupling::new(theta)?)?;
    let laws = catalog
        .laws
        .iter()
        .map(|l| (l.branch.id().to_string(), LawOut { x: l.x, y: l.y, z: l.z() }))
        .collect();
    let doc = SolveOut { theta: catalog.theta, regime: catalog.regime, count: catalog.len(), laws };
    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

/// One CSV row of `scan`.
#[derive(Debug, Clone, PartialEq)]
struct ScanRow {
    theta: f64,
    branch: u8,
    x: f64,
    y: f64,
    lambda1: f64,
    lambda2: f64,
    eta: f64,
    kappa: f64,
    u: f64,
    verdict: &'static str,
}

impl ScanRow {
    const HEADER: [&'static str; 10] = ["theta", "branch", "x", "y", "lambda1", "lambda2", "eta", "kappa", "u", "verdict"];

    fn record(&self) -> [String; 10] {
        [
            num(self.theta),
            self.branch.to_string(),
            num(self.x),
            num(self.y),
            num(self.lambda1),
            num(self.lambda2),
            num(self.eta),
            num(self.kappa),
            num(self.u),
            self.verdict.to_string(),
        ]
    }
}

fn cmd_scan(out: &mut dyn Write, theta_min: f64, theta_max: f64, steps: usize, output: Option<&PathBuf>) -> CliResult<()> {
    let rows = phase_diagram(theta_min, theta_max, steps)?;
    let mut w = csv_writer(output, out)?;
    w.write_record(ScanRow::HEADER)?;
    for row in &rows {
        for r in &row.reports {
            let sr = ScanRow {
                theta: row.theta.value(),
                branch: r.branch.id(),
                x: r.law.x,
                y: r.law.y,
                lambda1: r.lambda1,
                lambda2: r.lambda2,
                eta: r.eta,
                kappa: r.kappa,
                u: r.u,
                verdict: r.verdict.as_str(),
            };
            w.write_record(sr.record())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ThresholdsOut<'a> {
    #[serde(flatten)]
    set: &'a ThresholdSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    audit: Option<ThresholdAudit>,
}

fn cmd_thresholds(out: &mut dyn Write, json: bool, audit: bool) -> CliResult<()> {
    let set = find_all_thresholds()?;
    let audit = if audit { Some(audit_thresholds(&set)?) } else { None };
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&ThresholdsOut { set: &set, audit })?)?;
        return Ok(());
    }
    let names = ["theta_c", "theta_c_prime", "theta_star", "theta_double_star", "theta_bar", "theta_double_bar"];
    writeln!(out, "{:<18} {:>24} {:>11}  indicator", "threshold", "value", "residual")?;
    for (name, t) in names.iter().zip(set.all()) {
        writeln!(out, "{name:<18} {:>24} {:>11.3e}  {}", num(t.value), t.residual, t.indicator)?;
    }
    writeln!(out, "gap theta_double_bar - theta_bar   = {:.6}", set.bar_gap())?;
    writeln!(out, "gap theta_double_star - theta_star = {:.6}", set.star_gap())?;
    if let Some(a) = audit {
        writeln!(out)?;
        writeln!(out, "branch-1 indicator, numerator 2(1-θ²)²: root {}", num(set.theta_bar.value))?;
        match &a.theta_bar_printed {
            Some(t) => writeln!(out, "branch-1 indicator, numerator 2(1-θ)²:  root {}", num(t.value))?,
            None => writeln!(
                out,
                "branch-1 indicator, numerator 2(1-θ)²:  no sign change on (1, 4); value at {:.6} is {:.6}",
                set.theta_bar.value, a.u1_printed_at_theta_bar
            )?,
        }
        match &a.theta_double_star_general {
            Some(t) => writeln!(out, "theta_double_star with general kappa:   {}", num(t.value))?,
            None => writeln!(out, "theta_double_star with general kappa:   no sign change below theta_c_prime")?,
        }
    }
    Ok(())
}

fn cmd_simulate(
    out: &mut dyn Write,
    theta: f64,
    branch: u8,
    depth: usize,
    samples: usize,
    seed: u64,
    output: Option<&PathBuf>,
) -> CliResult<()> {
    let curve = decay_curve(Coupling::new(theta)?, Branch::new(branch)?, depth, samples, seed)?;
    eprintln!("rng: {RNG_ALGORITHM}");
    let mut w = csv_writer(output, out)?;
    w.write_record(["depth", "tv", "stderr", "n_samples", "seed"])?;
    for e in &curve {
        w.write_record([e.depth.to_string(), num(e.tv), num(e.stderr), e.n_samples.to_string(), e.seed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_verify_gamma(out: &mut dyn Write, theta: f64, branch: u8, grid: usize, json: bool) -> CliResult<()> {
    let theta = Coupling::new(theta)?;
    let catalog = enumerate_tisgms(theta)?;
    let report: GammaGridReport = verify_gamma_grid(theta, catalog.require(Branch::new(branch)?)?, grid)?;
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        let r = &report;
        writeln!(out, "theta      {}", num(r.theta.value()))?;
        writeln!(out, "branch     {}", r.branch)?;
        writeln!(out, "grid       {}", r.grid)?;
        writeln!(out, "max |f|    {}  at (t, u) = ({:.4}, {:.4})", num(r.max_abs_f), r.argmax_f.0, r.argmax_f.1)?;
        writeln!(out, "max |g|    {}  at (t, u) = ({:.4}, {:.4})", num(r.max_abs_g), r.argmax_g.0, r.argmax_g.1)?;
        writeln!(out, "bound      {}", num(r.bound))?;
        writeln!(out, "expected   (t, u) = ({:.4}, {:.4})", r.expected_argmax.0, r.expected_argmax.1)?;
        writeln!(out, "result     {}", if r.pass { "pass" } else { "FAIL" })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GeneralOut {
    theta: Coupling,
    m: usize,
    k: u32,
    converged: bool,
    iterations: usize,
    last_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
}

fn cmd_general(out: &mut dyn Write, theta: f64, z0: Vec<f64>, k: u32, settings: IterationSettings) -> CliResult<()> {
    let theta = Coupling::new(theta)?;
    let start = TiLaw::new(z0, k)?;
    let m = start.m();
    let doc = match iterate_to_fixed_point(&start, theta, settings) {
        Ok(fp) => GeneralOut {
            theta,
            m,
            k,
            converged: true,
            iterations: fp.iterations,
            last_step: fp.last_step,
            z: Some(fp.law.z),
            residual: Some(fp.residual),
        },
        Err(Error::NoConvergence { iterations, last_step }) => {
            GeneralOut { theta, m, k, converged: false, iterations, last_step, z: None, residual: None }
        }
        Err(e) => return Err(e.into()),
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        // Fails only if a global pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Solve { theta } => cmd_solve(out, theta),
        Command::Scan { theta_min, theta_max, steps, output } => cmd_scan(out, theta_min, theta_max, steps, output.as_ref()),
        Command::Thresholds { json, audit } => cmd_thresholds(out, json, audit),
        Command::Simulate { theta, branch, depth, samples, seed, output } => {
            cmd_simulate(out, theta, branch, depth, samples, seed, output.as_ref())
        }
        Command::VerifyGamma { theta, branch, grid, json } => cmd_verify_gamma(out, theta, branch, grid, json),
        Command::General { theta, z0, k, damping, tol, max_iter } => {
            cmd_general(out, theta, z0, k, IterationSettings { damping, tol, max_iter })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(cli, &mut out).and_then(|()| out.flush().map_err(CliError::from));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
