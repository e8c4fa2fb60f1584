//! Command-line front end of the `hsys` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::candidate::{build_candidate, verify_double_bounded, Rate};
use crate::criteria::{classify, Classification};
use crate::error::Error;
use crate::grid::{RadialFunction, RadialGrid};
use crate::kernel::{KernelMatrix, QuadratureOptions};
use crate::nonexistence::iterate_exponents;
use crate::params::Params;
use crate::pohozaev::{ibp_identity, normalized_bubble, pohozaev_scalar, pohozaev_system};
use crate::solver::{picard_solve, Init, SolveOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

/// Header of the sweep CSV.
pub const SWEEP_HEADER: [&str; 9] = [
    "p",
    "q",
    "theta1",
    "theta2",
    "M",
    "n_minus_alpha",
    "hyperbola_lhs",
    "general_verdict",
    "radial_verdict",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid arguments: {0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(e) if e.is_divergence() => EXIT_DIVERGENCE,
            CliError::Numeric(_) | CliError::Usage(_) => EXIT_DOMAIN,
            CliError::Io(_) | CliError::Json(_) | CliError::Csv(_) => EXIT_IO,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "hsys",
    version,
    about = "Radial weighted integral systems: criteria, candidates, identities and solves"
)]
pub struct Cli {
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, env = "HSYS_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a parameter point.
    Classify {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Classify a linear (p, q) grid and write CSV.
    Sweep(SweepArgs),
    /// Check that a candidate pair induces bounded coefficients.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = RateArg::Slow)]
        rate: RateArg,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evaluate the integral identities on the bubble or a candidate pair.
    Pohozaev {
        #[command(flatten)]
        params: ParamArgs,
        /// Use the normalized critical bubble (sigma = 0).
        #[arg(long)]
        bubble: bool,
        #[arg(long, value_enum, default_value_t = RateArg::Slow)]
        rate: RateArg,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Iterate the exponent recurrence and write `j,a_j,b_j`.
    Iterate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 40)]
        jmax: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Damped normalized Picard iteration.
    Solve {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = RateArg::Slow)]
        rate: RateArg,
        /// Start from the normalized critical bubble instead of a candidate.
        #[arg(long)]
        bubble: bool,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Weighted potential of `(1 + r²)^(-theta)`, or the unit-ball self-test.
    Potential {
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        theta: f64,
        /// Compare the unit-ball potential (n = 3, alpha = 2) with its closed form.
        #[arg(long)]
        newton_ball: bool,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma2: f64,
    #[arg(long)]
    pub p: f64,
    /// Defaults to `p`.
    #[arg(long)]
    pub q: Option<f64>,
}

impl ParamArgs {
    pub fn build(&self) -> CliResult<Params> {
        Ok(Params::new(
            self.n,
            self.alpha,
            self.sigma1,
            self.sigma2,
            self.p,
            self.q.unwrap_or(self.p),
        )?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 1e4)]
    pub grid_max: f64,
    #[arg(long, default_value_t = 256)]
    pub grid_points: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub quad_tol: f64,
}

impl GridArgs {
    pub fn grid(&self) -> CliResult<RadialGrid> {
        Ok(RadialGrid::log_spaced(self.grid_min, self.grid_max, self.grid_points)?)
    }

    pub fn options(&self) -> CliResult<QuadratureOptions> {
        Ok(QuadratureOptions::new(self.quad_tol)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateArg {
    Slow,
    Fast,
}

impl From<RateArg> for Rate {
    fn from(r: RateArg) -> Rate {
        match r {
            RateArg::Slow => Rate::Slow,
            RateArg::Fast => Rate::Fast,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Machine-readable output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma2: f64,
    #[arg(long)]
    pub p_min: f64,
    #[arg(long)]
    pub p_max: f64,
    #[arg(long)]
    pub p_count: usize,
    #[arg(long)]
    pub q_min: f64,
    #[arg(long)]
    pub q_max: f64,
    #[arg(long)]
    pub q_count: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Fixed parameters and the two linear axes of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub n: u32,
    pub alpha: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub p_range: (f64, f64, usize),
    pub q_range: (f64, f64, usize),
}

fn axis((lo, hi, count): (f64, f64, usize), name: &str) -> CliResult<Vec<f64>> {
    if count < 2 {
        return Err(CliError::Usage(format!("{name} count must be at least 2, got {count}")));
    }
    if !(lo < hi) || !(lo > 0.0) || !hi.is_finite() {
        return Err(CliError::Usage(format!(
            "{name} range needs 0 < min < max, got [{lo}, {hi}]"
        )));
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count)
        .map(|k| if k + 1 == count { hi } else { lo + step * k as f64 })
        .collect())
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One CSV record per `(p, q)` cell.
pub fn sweep_row(params: &Params, c: &Classification) -> [String; 9] {
    let e = c.exponents.as_ref();
    [
        fmt_num(params.p),
        fmt_num(params.q),
        fmt_opt(e.map(|e| fmt_num(e.theta1))),
        fmt_opt(e.map(|e| fmt_num(e.theta2))),
        fmt_opt(e.map(|e| fmt_num(e.m))),
        fmt_num(c.n_minus_alpha),
        fmt_num(c.hyperbola_lhs),
        fmt_opt(c.general_verdict),
        fmt_opt(c.radial_verdict),
    ]
}

/// Classifies every cell (p outer, q inner) and writes the CSV.
pub fn run_sweep<W: Write>(spec: &SweepSpec, out: W) -> CliResult {
    let ps = axis(spec.p_range, "p")?;
    let qs = axis(spec.q_range, "q")?;
    let cells: Vec<(f64, f64)> = ps.iter().flat_map(|&p| qs.iter().map(move |&q| (p, q))).collect();
    let rows = cells
        .par_iter()
        .map(|&(p, q)| {
            let params = Params::new(spec.n, spec.alpha, spec.sigma1, spec.sigma2, p, q)?;
            Ok(sweep_row(&params, &classify(&params)?))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for row in &rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn open_output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// JSON to `--output` if given, otherwise to standard output when JSON is
/// requested.
fn emit_json<T: Serialize>(out: &OutArgs, value: &T) -> CliResult {
    match &out.output {
        Some(p) => write_json(p, value),
        None if out.format == Some(Format::Json) => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
        None => Ok(()),
    }
}

fn cmd_classify(params: &ParamArgs, out: &OutArgs) -> CliResult {
    let params = params.build()?;
    let c = classify(&params)?;
    if out.format != Some(Format::Json) || out.output.is_some() {
        match &c.exponents {
            Some(e) => {
                println!("M = {}", e.m);
                println!("theta1 = {}", e.theta1);
                println!("theta2 = {}", e.theta2);
            }
            None => println!("M undefined (pq = 1)"),
        }
        println!("n - alpha = {}", c.n_minus_alpha);
        println!("hyperbola_lhs = {}", c.hyperbola_lhs);
        println!("general_verdict = {}", fmt_opt(c.general_verdict));
        println!("radial_verdict = {}", fmt_opt(c.radial_verdict));
    }
    emit_json(out, &c)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult {
    let spec = SweepSpec {
        n: args.n,
        alpha: args.alpha,
        sigma1: args.sigma1,
        sigma2: args.sigma2,
        p_range: (args.p_min, args.p_max, args.p_count),
        q_range: (args.q_min, args.q_max, args.q_count),
    };
    run_sweep(&spec, open_output(&args.output)?)
}

fn cmd_verify(params: &ParamArgs, rate: RateArg, grid: &GridArgs, out: &OutArgs) -> CliResult {
    let params = params.build()?;
    let report = verify_double_bounded(&params, rate.into(), &grid.grid()?, &grid.options()?)?;
    println!("verdict = {:?}", report.verdict);
    println!("theta1 = {}, theta2 = {}", report.theta1, report.theta2);
    println!("c1 in [{}, {}]", report.c1_min, report.c1_max);
    println!("c2 in [{}, {}]", report.c2_min, report.c2_max);
    println!("spread = {}", report.spread);
    emit_json(out, &report)
}

#[derive(Debug, Serialize)]
struct IdentitySummary {
    pohozaev: crate::pohozaev::IdentityReport,
    ibp: Vec<crate::pohozaev::IdentityReport>,
}

fn cmd_pohozaev(params: &ParamArgs, bubble: bool, rate: RateArg, grid: &GridArgs, out: &OutArgs) -> CliResult {
    let opts = grid.options()?;
    let g = grid.grid()?;
    let summary = if bubble {
        let params = ParamArgs {
            sigma1: 0.0,
            sigma2: 0.0,
            q: None,
            ..params.clone()
        }
        .build()?;
        let x = params.n_minus_alpha();
        let critical = (params.dim() + params.alpha) / x;
        if (params.p - critical).abs() > 1e-12 * critical {
            return Err(CliError::Usage(format!(
                "the bubble needs the critical exponent p = (n + alpha)/(n - alpha) = {critical}"
            )));
        }
        let u = normalized_bubble(params.n, params.alpha, &g, &opts)?;
        IdentitySummary {
            pohozaev: pohozaev_scalar(&u, &params, 0.0, &opts)?,
            ibp: vec![ibp_identity(&u, params.n, 0.0, params.p)?],
        }
    } else {
        let params = params.build()?;
        let (u, v) = build_candidate(&params, rate.into(), &g)?;
        IdentitySummary {
            pohozaev: pohozaev_system(&u, &v, &params, &opts)?,
            ibp: vec![
                ibp_identity(&u, params.n, params.sigma2, params.p)?,
                ibp_identity(&v, params.n, params.sigma1, params.q)?,
            ],
        }
    };
    println!("identity = {}", summary.pohozaev.identity_name);
    println!("lhs = {}", summary.pohozaev.lhs);
    println!("rhs = {}", summary.pohozaev.rhs);
    println!("residual = {}", summary.pohozaev.residual);
    for r in &summary.ibp {
        println!("integration_by_parts residual = {}", r.residual);
    }
    emit_json(out, &summary)
}

fn cmd_iterate(params: &ParamArgs, jmax: usize, out: &OutArgs) -> CliResult {
    let params = params.build()?;
    let trace = iterate_exponents(&params, jmax)?;
    if out.format == Some(Format::Json) {
        match &out.output {
            Some(p) => write_json(p, &trace)?,
            None => println!("{}", serde_json::to_string_pretty(&trace)?),
        }
        return Ok(());
    }
    match &out.output {
        Some(p) => {
            trace.write_csv(BufWriter::new(File::create(p)?))?;
            println!("verdict = {:?}", trace.verdict);
        }
        None => trace.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_solve(
    params: &ParamArgs,
    rate: RateArg,
    bubble: bool,
    settings: SolveOptions,
    grid: &GridArgs,
    out: &OutArgs,
) -> CliResult {
    let params = params.build()?;
    let g = grid.grid()?;
    let opts = grid.options()?;
    let init = if bubble {
        if !params.is_scalar() || params.sigma1 != 0.0 {
            return Err(CliError::Usage(
                "bubble start needs a scalar problem with sigma = 0".into(),
            ));
        }
        let u = normalized_bubble(params.n, params.alpha, &g, &opts)?;
        Init::Custom(u.clone(), u)
    } else {
        match rate {
            RateArg::Slow => Init::CandidateSlow,
            RateArg::Fast => Init::CandidateFast,
        }
    };
    let res = picard_solve(&params, init, &g, &settings, &opts)?;
    println!("status = {}", res.status);
    println!("iterations = {}", res.iterations);
    println!("final residual = {}", fmt_opt(res.final_residual()));
    match (out.format, &out.output) {
        (Some(Format::Csv), Some(p)) => res.write_csv(BufWriter::new(File::create(p)?))?,
        (Some(Format::Csv), None) => res.write_csv(io::stdout().lock())?,
        (_, Some(p)) => write_json(p, &res)?,
        (Some(Format::Json), None) => println!("{}", serde_json::to_string_pretty(&res)?),
        (None, None) => {}
    }
    Ok(())
}

/// Radii, computed and exact potential of the unit ball indicator
/// (n = 3, alpha = 2, sigma = 0) at 50 radii in `[0.05, 20]`.
pub fn newton_ball_table(opts: &QuadratureOptions) -> Result<Vec<(f64, f64, f64)>, Error> {
    let source = RadialGrid::log_spaced(1e-4, 1.0, 64)?;
    let ball = RadialFunction::from_fn(source.clone(), |_| 1.0, 0.0, f64::NEG_INFINITY)?;
    let target = RadialGrid::log_spaced(0.05, 20.0, 50)?;
    let m = KernelMatrix::assemble(&source, &target, 3, 2.0, 0.0, opts)?;
    let values = m.apply(&ball)?;
    let pi = std::f64::consts::PI;
    Ok(target
        .nodes()
        .iter()
        .zip(values)
        .map(|(&r, v)| {
            let exact = if r <= 1.0 {
                2.0 * pi * (1.0 - r * r / 3.0)
            } else {
                4.0 * pi / (3.0 * r)
            };
            (r, v, exact)
        })
        .collect())
}

fn cmd_potential(
    n: Option<u32>,
    alpha: Option<f64>,
    sigma: f64,
    theta: f64,
    newton_ball: bool,
    grid: &GridArgs,
    out: &OutArgs,
) -> CliResult {
    let opts = grid.options()?;
    let mut w = csv::Writer::from_writer(open_output(&out.output)?);
    if newton_ball {
        let table = newton_ball_table(&opts)?;
        let worst = table.iter().map(|(_, v, e)| (v / e - 1.0).abs()).fold(0.0, f64::max);
        if out.output.is_some() {
            w.write_record(["r", "computed", "exact"])?;
            for (r, v, e) in &table {
                w.write_record([fmt_num(*r), fmt_num(*v), fmt_num(*e)])?;
            }
        }
        println!("max relative error = {worst:e}");
        w.flush()?;
        return Ok(());
    }
    let (Some(n), Some(alpha)) = (n, alpha) else {
        return Err(CliError::Usage(
            "potential needs --n and --alpha unless --newton-ball is given".into(),
        ));
    };
    let params = Params::new(n, alpha, sigma, sigma, 1.0, 1.0)?;
    let g = grid.grid()?;
    let f = RadialFunction::from_fn(g.clone(), |r| (1.0 + r * r).powf(-theta), 0.0, -2.0 * theta)?;
    let pot = KernelMatrix::assemble(&g, &g, params.n, params.alpha, sigma, &opts)?.apply(&f)?;
    w.write_record(["r", "f", "potential"])?;
    for ((r, fv), pv) in g.nodes().iter().zip(f.values()).zip(&pot) {
        w.write_record([fmt_num(*r), fmt_num(*fv), fmt_num(*pv)])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> CliResult {
    if cli.threads > 0 {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match &cli.command {
        Command::Classify { params, out } => cmd_classify(params, out),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify {
            params,
            rate,
            grid,
            out,
        } => cmd_verify(params, *rate, grid, out),
        Command::Pohozaev {
            params,
            bubble,
            rate,
            grid,
            out,
        } => cmd_pohozaev(params, *bubble, *rate, grid, out),
        Command::Iterate { params, jmax, out } => cmd_iterate(params, *jmax, out),
        Command::Solve {
            params,
            rate,
            bubble,
            damping,
            tol,
            max_iter,
            grid,
            out,
        } => cmd_solve(
            params,
            *rate,
            *bubble,
            SolveOptions {
                damping: *damping,
                tol: *tol,
                max_iter: *max_iter,
            },
            grid,
            out,
        ),
        Command::Potential {
            n,
            alpha,
            sigma,
            theta,
            newton_ball,
            grid,
            out,
        } => cmd_potential(*n, *alpha, *sigma, *theta, *newton_ball, grid, out),
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_DOMAIN } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
