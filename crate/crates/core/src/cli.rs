//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::acceptance;
use crate::kernel::{AxisPoint, BallContext};
use crate::quadrature::DEFAULT_ORDER;
use crate::solver::{self, g_inf_closed};
use crate::verify;

pub const ORDER_ENV: &str = "HYPSCHWARZ_ORDER";
/// Largest relative sharpness gap `verify-sharpness` accepts.
pub const SHARPNESS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "hypschwarz", version, about = "Sharp Schwarz factors for hyperbolic harmonic mappings of the unit ball")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of G_p(r) and the optimal shift a*(r)
    Gp(Opts),
    /// The optimal shift a*(r)
    Astar(Opts),
    /// U_h(r e_n), the value of the half-sphere extremal (p = inf)
    Uh(Opts),
    /// Sharp gradient constant at the origin and the difference quotient G_p(h)/h
    Grad(Opts),
    /// Evaluate the extremal boundary data against G_p(r) ||phi||_p
    VerifySharpness(Opts),
    /// Check |u(r e_n)| <= G_p(r) ||phi||_p on seeded random zonal data
    VerifyBound(Opts),
    /// The p = 1 cap sequence u_i(r e_n) for i = 2, 4, ..., i_max
    VerifyCapseq(Opts),
    /// Run the acceptance suite
    Check(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// Dimension n >= 3
    #[arg(long)]
    pub n: Option<u32>,
    /// Exponent p in [1, inf]; `inf` for p = infinity
    #[arg(long, value_parser = parse_p, allow_hyphen_values = true)]
    pub p: Option<f64>,
    /// Single radius r in [0, 1)
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["r_min", "r_max", "steps"])]
    pub r: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires_all = ["r_max", "steps"])]
    pub r_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true, requires_all = ["r_min", "steps"])]
    pub r_max: Option<f64>,
    /// Number of equally spaced radii from r-min to r-max inclusive
    #[arg(long, requires_all = ["r_min", "r_max"])]
    pub steps: Option<usize>,
    /// Quadrature order (default 128, or $HYPSCHWARZ_ORDER)
    #[arg(long)]
    pub order: Option<usize>,
    /// Random draws for verify-bound
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Step for grad's difference quotient
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
    /// Last cap index for verify-capseq (powers of two from 2)
    #[arg(long, default_value_t = 64)]
    pub i_max: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write to this file instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_p(s: &str) -> Result<f64, String> {
    let v = match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => f64::INFINITY,
        other => other.parse::<f64>().map_err(|e| format!("invalid exponent `{s}`: {e}"))?,
    };
    if v.is_nan() || v < 1.0 {
        return Err(format!("exponent {s} must lie in [1, inf]"));
    }
    Ok(v)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numeric(#[from] crate::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

/// Whether a run found violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Clean,
    Violations,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Clean => 0,
            Status::Violations => 2,
        }
    }
}

/// `%.17g`-style rendering: 17 significant digits, trailing zeros removed.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_p(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        fmt_g17(p)
    }
}

#[derive(Debug, Clone)]
enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_g17(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

struct JsonRow<'a> {
    header: &'a [&'static str],
    cells: &'a [Cell],
}

impl Serialize for JsonRow<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.header.len()))?;
        for (key, cell) in self.header.iter().zip(self.cells) {
            match cell {
                Cell::Num(x) if x.is_finite() => {
                    let raw = RawValue::from_string(fmt_g17(*x)).map_err(serde::ser::Error::custom)?;
                    map.serialize_entry(key, &raw)?;
                }
                Cell::Num(_) => map.serialize_entry(key, &Option::<f64>::None)?,
                Cell::Int(i) => map.serialize_entry(key, i)?,
                Cell::Text(t) => map.serialize_entry(key, t)?,
            }
        }
        map.end()
    }
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    fn write(&self, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
                w.write_record(&self.header)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::render))?;
                }
                w.flush()?;
            }
            Format::Json => {
                let rows: Vec<JsonRow> = self.rows.iter().map(|cells| JsonRow { header: &self.header, cells }).collect();
                serde_json::to_writer_pretty(&mut *out, &rows)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

/// Validated configuration of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub n: Option<u32>,
    pub p: Option<f64>,
    pub radii: Vec<f64>,
    pub order: usize,
    pub count: usize,
    pub seed: u64,
    pub h: f64,
    pub i_max: usize,
    pub format: Format,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Gp,
    Astar,
    Uh,
    Grad,
    VerifySharpness,
    VerifyBound,
    VerifyCapseq,
    Check,
}

/// Radii `r_i = r_min + i (r_max - r_min)/(steps - 1)`.
pub fn radius_grid(r_min: f64, r_max: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![r_min];
    }
    let span = r_max - r_min;
    (0..steps).map(|i| r_min + i as f64 * span / (steps - 1) as f64).collect()
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let (command, o) = match cli.command {
            Command::Gp(o) => (CommandKind::Gp, o),
            Command::Astar(o) => (CommandKind::Astar, o),
            Command::Uh(o) => (CommandKind::Uh, o),
            Command::Grad(o) => (CommandKind::Grad, o),
            Command::VerifySharpness(o) => (CommandKind::VerifySharpness, o),
            Command::VerifyBound(o) => (CommandKind::VerifyBound, o),
            Command::VerifyCapseq(o) => (CommandKind::VerifyCapseq, o),
            Command::Check(o) => (CommandKind::Check, o),
        };
        let order = match o.order {
            Some(k) => k,
            None => match std::env::var(ORDER_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("${ORDER_ENV}: invalid order `{v}`")))?,
                Err(_) => DEFAULT_ORDER,
            },
        };
        if order < 2 {
            return usage(format!("--order: {order} must be at least 2"));
        }
        if let Some(n) = o.n {
            if n < 3 {
                return usage(format!("--n: dimension {n} must be at least 3"));
            }
        }
        let radii = match (o.r, o.r_min, o.r_max, o.steps) {
            (Some(r), ..) => vec![r],
            (None, Some(lo), Some(hi), Some(steps)) => {
                if steps == 0 {
                    return usage("--steps: must be at least 1");
                }
                if lo > hi {
                    return usage(format!("--r-min: {lo} exceeds --r-max {hi}"));
                }
                radius_grid(lo, hi, steps)
            }
            _ => Vec::new(),
        };
        if let Some(bad) = radii.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return usage(format!("--r: radius {bad} outside [0, 1)"));
        }
        if o.count == 0 {
            return usage("--count: must be at least 1");
        }
        if !(o.h > 0.0 && o.h <= 0.01) {
            return usage(format!("--h: step {} outside (0, 0.01]", o.h));
        }
        if o.i_max < 2 {
            return usage(format!("--i-max: {} must be at least 2", o.i_max));
        }
        let cfg = Self {
            command,
            n: o.n,
            p: o.p,
            radii,
            order,
            count: o.count,
            seed: o.seed,
            h: o.h,
            i_max: o.i_max,
            format: o.format,
            output: o.output,
        };
        cfg.require_inputs()?;
        Ok(cfg)
    }

    fn require_inputs(&self) -> Result<(), CliError> {
        use CommandKind::*;
        let needs_n = !matches!(self.command, Check);
        let needs_p = matches!(self.command, Gp | Astar | Grad | VerifySharpness | VerifyBound);
        let needs_r = matches!(self.command, Gp | Astar | Uh | VerifySharpness | VerifyBound | VerifyCapseq);
        if needs_n && self.n.is_none() {
            return usage("--n: required");
        }
        if needs_p && self.p.is_none() {
            return usage("--p: required");
        }
        if needs_r && self.radii.is_empty() {
            return usage("--r: required (or --r-min, --r-max and --steps)");
        }
        Ok(())
    }

    fn ctx(&self) -> Result<BallContext, CliError> {
        let n = self.n.expect("validated");
        Ok(BallContext::new(n, self.p.unwrap_or(f64::INFINITY))?)
    }
}

/// Execute a validated configuration, writing the report to `out`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<Status, CliError> {
    use CommandKind::*;
    let mut status = Status::Clean;
    let table = match cfg.command {
        Gp => {
            let mut t = Table::new(vec!["r", "a_star", "g_value", "method", "est_error"]);
            for g in solver::g_p_grid(&cfg.ctx()?, &cfg.radii, cfg.order)? {
                t.rows.push(vec![
                    Cell::Num(g.r),
                    Cell::Num(g.a_star),
                    Cell::Num(g.g_value),
                    Cell::Text(g.method.to_string()),
                    Cell::Num(g.est_error),
                ]);
            }
            t
        }
        Astar => {
            let ctx = cfg.ctx()?;
            let mut t = Table::new(vec!["r", "a_star"]);
            for g in solver::g_p_grid(&ctx, &cfg.radii, cfg.order)? {
                t.rows.push(vec![Cell::Num(g.r), Cell::Num(g.a_star)]);
            }
            t
        }
        Uh => {
            let n = cfg.n.expect("validated");
            let mut t = Table::new(vec!["r", "u_h"]);
            for &r in &cfg.radii {
                t.rows.push(vec![Cell::Num(r), Cell::Num(g_inf_closed(n, r)?.1)]);
            }
            t
        }
        Grad => {
            let ctx = cfg.ctx()?;
            let mut t = Table::new(vec!["n", "p", "grad_constant", "h", "gp_over_h"]);
            t.rows.push(vec![
                Cell::Int(u64::from(ctx.n())),
                Cell::Text(fmt_p(ctx.p())),
                Cell::Num(solver::grad_constant(&ctx)?),
                Cell::Num(cfg.h),
                Cell::Num(solver::gp_derivative_at_zero(&ctx, cfg.h, cfg.order)?),
            ]);
            t
        }
        VerifySharpness => {
            let ctx = cfg.ctx()?;
            let mut t = Table::new(vec!["r", "g_bound", "attained", "u_at_zero", "relative_gap"]);
            for &r in &cfg.radii {
                let rep = verify::verify_sharpness(&ctx, AxisPoint::new(r)?, cfg.order)?;
                // p = 1 is attained only in the limit of the cap sequence
                let gap_ok = ctx.p() == 1.0 || rep.relative_gap <= SHARPNESS_TOLERANCE;
                if !gap_ok || rep.attained > rep.g_bound * (1.0 + verify::BOUND_TOLERANCE) {
                    status = Status::Violations;
                }
                t.rows.push(vec![
                    Cell::Num(rep.r),
                    Cell::Num(rep.g_bound),
                    Cell::Num(rep.attained),
                    Cell::Num(rep.u_at_zero),
                    Cell::Num(rep.relative_gap),
                ]);
            }
            t
        }
        VerifyBound => {
            let ctx = cfg.ctx()?;
            let mut t = Table::new(vec!["r", "count", "seed", "violations", "max_ratio"]);
            for &r in &cfg.radii {
                let rep = verify::random_bound_check(&ctx, AxisPoint::new(r)?, cfg.count, cfg.seed, cfg.order)?;
                if rep.violations > 0 {
                    status = Status::Violations;
                }
                t.rows.push(vec![
                    Cell::Num(r),
                    Cell::Int(rep.count as u64),
                    Cell::Int(cfg.seed),
                    Cell::Int(rep.violations as u64),
                    Cell::Num(rep.max_ratio),
                ]);
            }
            t
        }
        VerifyCapseq => {
            let n = cfg.n.expect("validated");
            let mut t = Table::new(vec!["r", "i", "u_i", "g_1", "relative_gap"]);
            for &r in &cfg.radii {
                let g1 = solver::g_1_closed(n, r).1;
                let mut prev = f64::NEG_INFINITY;
                let mut i = 2;
                while i <= cfg.i_max {
                    let u = verify::minimizing_sequence_p1(n, AxisPoint::new(r)?, i)?;
                    if u > g1 * (1.0 + verify::BOUND_TOLERANCE) || u < prev - 1e-9 {
                        status = Status::Violations;
                    }
                    prev = u;
                    let gap = if g1 == 0.0 { u.abs() } else { (g1 - u) / g1 };
                    t.rows.push(vec![Cell::Num(r), Cell::Int(i as u64), Cell::Num(u), Cell::Num(g1), Cell::Num(gap)]);
                    i *= 2;
                }
            }
            t
        }
        Check => {
            let mut report = String::new();
            let mut failed = 0;
            for criterion in acceptance::CRITERIA {
                let outcome = criterion(cfg.order);
                if !outcome.passed {
                    failed += 1;
                }
                let _ = writeln!(report, "{outcome}");
            }
            let total = acceptance::CRITERIA.len();
            let _ = writeln!(report, "acceptance: {} of {total} criteria passed", total - failed);
            out.write_all(report.as_bytes())?;
            return Ok(if failed == 0 { Status::Clean } else { Status::Violations });
        }
    };
    table.write(cfg.format, out)?;
    Ok(status)
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = RunConfig::from_cli(cli).and_then(|cfg| {
        let status = match &cfg.output {
            Some(path) => {
                let mut w = BufWriter::new(File::create(path)?);
                let s = run(&cfg, &mut w)?;
                w.flush()?;
                s
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                let s = run(&cfg, &mut w)?;
                w.flush()?;
                s
            }
        };
        Ok(status)
    });
    match outcome {
        Ok(status) => status.exit_code(),
        Err(e) => {
            match e {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                other => eprintln!("error: {other}"),
            }
            1
        }
    }
}
