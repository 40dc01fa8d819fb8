//! Front end for the `aoi` binary.
//!
//! Every command writes a header (version, canonical command line, resolved parameters)
//! followed by data rows. Re-running the command from the header reproduces the output
//! byte for byte; the worker count never affects it.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use aoi_core::agecalc::{
    fractional_limit, fractional_mean_empirical, optimal_age_same_alphabet, AgeCalcError, Alpha, TimingSpec,
    Utilization,
};
use aoi_core::bdist::{CodeSpec, DistError};
use aoi_core::bounds::{
    age_report, default_n_max, optimal_blocklength, q_convergence_gap, sweep, AgeReport, AgeValue, BoundsError,
    Metric,
};
use aoi_core::galois::{prime_power, FieldError, FieldSpec};
use aoi_core::simkit::{
    integrate_trace, simulate_coded, simulate_same_alphabet, AgeStats, AgeTrace, CodedOptions, SimError, SimMode,
    DEFAULT_TRACE_CAP,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_integer::Integer;
use serde::Serialize;
use serde_json::json;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "AOI_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "aoi", version, about = "Age of information over erasure channels")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic average age.
    #[command(subcommand)]
    Age(AgeCmd),
    /// Every metric over a blocklength range.
    Sweep(SweepArgs),
    /// Optimal blocklength and minimum age for each erasure probability.
    Frontier(FrontierArgs),
    /// Monte Carlo simulation.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Numerical checks.
    #[command(subcommand)]
    Check(CheckCmd),
}

#[derive(Debug, Subcommand)]
enum AgeCmd {
    /// Same source and channel alphabet.
    Same(SameArgs),
    /// Random linear block code of length n.
    Coded(CodedArgs),
}

#[derive(Debug, Subcommand)]
enum SimCmd {
    Same(SimSameArgs),
    Coded(SimCodedArgs),
}

#[derive(Debug, Subcommand)]
enum CheckCmd {
    /// Mean of the fractional parts [i alpha].
    Equidist(EquidistArgs),
    /// Gap between the exact age and the lower bound as q grows.
    Qgap(QgapArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct RhoArgs {
    /// Utilization lambda/mu as an exact fraction M/L.
    #[arg(long, value_name = "M/L", conflicts_with = "irrational")]
    rational: Option<String>,
    /// Utilization lambda/mu declared irrational.
    #[arg(long, value_name = "R")]
    irrational: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SameArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    lambda: String,
    #[arg(long)]
    mu: String,
    #[command(flatten)]
    rho: RhoArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CodeArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    q: u64,
    #[arg(long)]
    k: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
struct CodedArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long)]
    n: usize,
    /// exact, lb, ub, star, hat or all.
    #[arg(long, default_value = "all")]
    metric: String,
    /// Channel period in seconds; ages are reported in channel uses when omitted.
    #[arg(long, value_name = "T_C")]
    time_scale: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Defaults to k.
    #[arg(long)]
    n_min: Option<usize>,
    /// Defaults to max(10k, ceil(3k/(1-eps))).
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct FrontierArgs {
    #[arg(long)]
    q: u64,
    #[arg(long)]
    k: u32,
    /// Comma-separated erasure probabilities.
    #[arg(long, value_delimiter = ',', required = true)]
    eps_grid: Vec<f64>,
    /// Largest blocklength scanned; defaults per eps to max(10k, ceil(3k/(1-eps))).
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SimSameArgs {
    #[command(flatten)]
    same: SameArgs,
    /// Channel uses to simulate.
    #[arg(long, default_value_t = 1_000_000)]
    horizon: u64,
    /// Random when omitted; always echoed in the header.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the age curve of the first batch to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SimCodedArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    cycles: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// matrix or chain.
    #[arg(long, default_value = "matrix")]
    mode: String,
    /// Write the age curve of the first cycles to this CSV file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write every renewal record (h, t, y, q) to this CSV file.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct EquidistArgs {
    /// M/L for an exact rational, otherwise a real number.
    #[arg(long)]
    alpha: String,
    #[arg(long, default_value_t = 1_000_000)]
    terms: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct QgapArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    eps: f64,
    /// Comma-separated alphabet sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    q_list: Vec<u64>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn diverged(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DIVERGED,
            message: message.into(),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        if e.is_divergence() {
            CliError::diverged(e.to_string())
        } else {
            CliError::usage(e.to_string())
        }
    }
}

impl From<DistError> for CliError {
    fn from(e: DistError) -> Self {
        BoundsError::from(e).into()
    }
}

impl From<AgeCalcError> for CliError {
    fn from(e: AgeCalcError) -> Self {
        match e {
            AgeCalcError::Diverges => CliError::diverged(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Age(e) => e.into(),
            SimError::Dist(e) => e.into(),
            SimError::CycleOverflow { .. } => CliError::diverged(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

fn named<E: std::fmt::Display>(param: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::usage(format!("{param}: {e}"))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
/// Data goes to `out` unless `--output` is given; diagnostics go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, &argv) {
        Ok(text) => {
            let written = match &cli.output {
                Some(path) => fs::write(path, text.as_bytes()).map_err(|e| format!("--output {}: {e}", path.display())),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(msg) => {
                    let _ = writeln!(err, "error: {msg}");
                    EXIT_USAGE
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

fn execute(cli: &Cli, argv: &[OsString]) -> Result<String, CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads: must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(named("--threads"))?;
    pool.install(|| dispatch(cli, argv))
}

fn dispatch(cli: &Cli, argv: &[OsString]) -> Result<String, CliError> {
    let fmt = cli.format;
    match &cli.command {
        Command::Age(AgeCmd::Same(a)) => age_same(a, fmt, argv),
        Command::Age(AgeCmd::Coded(a)) => age_coded(a, fmt, argv),
        Command::Sweep(a) => run_sweep(a, fmt, argv),
        Command::Frontier(a) => frontier(a, fmt, argv),
        Command::Sim(SimCmd::Same(a)) => sim_same(a, fmt, argv),
        Command::Sim(SimCmd::Coded(a)) => sim_coded(a, fmt, argv),
        Command::Check(CheckCmd::Equidist(a)) => equidist(a, fmt, argv),
        Command::Check(CheckCmd::Qgap(a)) => qgap(a, fmt, argv),
    }
}

// ---------------------------------------------------------------------------------
// Output helpers

/// `%.12g`: 12 significant digits, trailing zeros dropped, locale independent.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        return format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_age(v: AgeValue) -> String {
    match v {
        AgeValue::Finite(x) => fmt_num(x),
        AgeValue::Diverged => "diverged".into(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// Canonical command line: the original arguments minus `--output`/`--threads`, plus the
/// seed when it was drawn at random.
fn canonical_command(argv: &[OsString], seed: Option<u64>) -> String {
    let mut parts = vec!["aoi".to_string()];
    let mut skip_next = false;
    for a in argv.iter().skip(1) {
        let a = a.to_string_lossy();
        if skip_next {
            skip_next = false;
            continue;
        }
        if a == "--output" || a == "--threads" {
            skip_next = true;
            continue;
        }
        if a.starts_with("--output=") || a.starts_with("--threads=") {
            continue;
        }
        parts.push(a.into_owned());
    }
    if let Some(s) = seed {
        if !parts.iter().any(|p| p == "--seed" || p.starts_with("--seed=")) {
            parts.push("--seed".into());
            parts.push(s.to_string());
        }
    }
    parts.join(" ")
}

struct Output {
    format: Format,
    text: String,
}

impl Output {
    fn new<P: Serialize>(format: Format, argv: &[OsString], params: &P, seed: Option<u64>) -> Self {
        let command = canonical_command(argv, seed);
        let params = serde_json::to_value(params).expect("serializable parameters");
        let text = match format {
            Format::Csv => {
                let mut t = format!("# aoi {VERSION}\n# command: {command}\n# params: {params}\n");
                if let Some(s) = seed {
                    t.push_str(&format!("# seed: {s}\n"));
                }
                t
            }
            Format::Json => {
                let mut header = json!({ "aoi_version": VERSION, "command": command, "params": params });
                if let Some(s) = seed {
                    header["seed"] = json!(s);
                }
                format!("{header}\n")
            }
        };
        Self { format, text }
    }

    fn csv_row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let row: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&row.join(","));
        self.text.push('\n');
    }

    fn json_line<T: Serialize>(&mut self, value: &T) {
        self.text.push_str(&serde_json::to_string(value).expect("serializable row"));
        self.text.push('\n');
    }
}

// ---------------------------------------------------------------------------------
// Parameter parsing

fn check_eps(eps: f64) -> Result<(), CliError> {
    if eps == 1.0 {
        return Err(CliError::diverged("--eps: average age diverges at erasure probability 1"));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(CliError::usage(format!("--eps: {eps} is outside [0, 1)")));
    }
    Ok(())
}

fn check_code(c: &CodeArgs) -> Result<(), CliError> {
    check_eps(c.eps)?;
    if prime_power(c.q).is_none() {
        return Err(CliError::usage(format!("--q: {} is not a prime power", c.q)));
    }
    if c.k == 0 {
        return Err(CliError::usage("--k: must be at least 1"));
    }
    Ok(())
}

fn check_n(n: usize, k: u32) -> Result<(), CliError> {
    if n < k as usize {
        return Err(CliError::usage(format!("--n: {n} is smaller than k = {k}")));
    }
    Ok(())
}

/// Exact value of a plain decimal literal such as `2`, `0.25` or `3.`.
fn parse_decimal(s: &str) -> Option<(u128, u128)> {
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 || int.len() > 18 {
        return None;
    }
    let den = 10u128.pow(frac.len() as u32);
    let num = format!("{int}{frac}").parse::<u128>().ok()?;
    Some((num, den))
}

fn parse_fraction(s: &str) -> Option<(u64, u64)> {
    let (m, l) = s.split_once('/')?;
    Some((m.trim().parse().ok()?, l.trim().parse().ok()?))
}

fn resolve_same(a: &SameArgs) -> Result<(TimingSpec, Utilization), CliError> {
    check_eps(a.eps)?;
    let lambda: f64 = a.lambda.parse().map_err(named("--lambda"))?;
    let mu: f64 = a.mu.parse().map_err(named("--mu"))?;
    let timing = TimingSpec::new(lambda, mu).map_err(named("--lambda/--mu"))?;
    let rho = match (&a.rho.rational, a.rho.irrational) {
        (Some(r), _) => {
            let (m, l) = parse_fraction(r).ok_or_else(|| CliError::usage(format!("--rational: expected M/L, got '{r}'")))?;
            Utilization::rational(m, l).map_err(named("--rational"))?
        }
        (None, Some(v)) => Utilization::irrational(v).map_err(named("--irrational"))?,
        (None, None) => {
            // lambda/mu read exactly from the decimal literals
            let exact = parse_decimal(&a.lambda).zip(parse_decimal(&a.mu)).and_then(|((ln, ld), (mn, md))| {
                let (num, den) = (ln.checked_mul(md)?, ld.checked_mul(mn)?);
                let g = num.gcd(&den);
                let (num, den) = (num / g.max(1), den / g.max(1));
                Some((u64::try_from(num).ok()?, u64::try_from(den).ok()?))
            });
            let (m, l) = exact.ok_or_else(|| {
                CliError::usage("--rational/--irrational: lambda/mu is not an exact decimal ratio; declare it")
            })?;
            Utilization::rational(m, l).map_err(named("--lambda/--mu"))?
        }
    };
    rho.check_against(&timing).map_err(named("--rational/--irrational"))?;
    Ok((timing, rho))
}

fn rho_label(rho: &Utilization) -> String {
    match *rho {
        Utilization::Rational { m, l } => format!("{m}/{l}"),
        Utilization::DeclaredIrrational { value } => fmt_num(value),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn field_for(q: u64) -> Result<Arc<FieldSpec>, CliError> {
    let q32 = u32::try_from(q).map_err(|_| CliError::usage(format!("--q: {q} exceeds the field size cap")))?;
    FieldSpec::from_order(q32)
        .map(Arc::new)
        .map_err(|e: FieldError| CliError::usage(format!("--q: {e}")))
}

fn write_trace(path: &PathBuf, header: &str, trace: &AgeTrace) -> Result<(), CliError> {
    let mut text = String::from(header);
    text.push_str("t,age\n");
    for &(t, a) in &trace.points {
        text.push_str(&format!("{},{}\n", fmt_num(t), fmt_num(a)));
    }
    fs::write(path, text).map_err(|e| CliError::usage(format!("--trace {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------------
// Commands

fn age_same(a: &SameArgs, fmt: Format, argv: &[OsString]) -> Result<String, CliError> {
    let (timing, rho) = resolve_same(a)?;
    let age = optimal_age_same_alphabet(a.eps, &timing, &rho)?;
    let mut out = Output::new(fmt, argv, a, None);
    match fmt {
        Format::Csv => {
            out.csv_row(&["eps", "lambda", "mu", "rho", "age"]);
            out.csv_row(&[fmt_num(a.eps), fmt_num(timing.lambda), fmt_num(timing.mu), rho_label(&rho), fmt_num(age)]);
        }
        Format::Json => out.json_line(&json!({
            "eps": a.eps, "lambda": timing.lambda, "mu": timing.mu, "rho": rho, "age": age
        })),
    }
    Ok(out.text)
}

const REPORT_COLUMNS: [&str; 11] = ["n", "k", "q", "eps", "exact", "lb", "ub", "star", "hat", "eps_p", "mean_t"];

fn report_row(r: &AgeReport) -> Vec<String> {
    vec![
        r.n.to_string(),
        r.k.to_string(),
        r.q.to_string(),
        fmt_num(r.eps),
        fmt_age(r.exact),
        fmt_age(r.lb),
        fmt_age(r.ub),
        fmt_age(r.star),
        fmt_age(r.hat),
        fmt_num(r.eps_p),
        fmt_opt(r.mean_t),
    ]
}

fn age_coded(a: &CodedArgs, fmt: Format, argv: &[OsString]) -> Result<String, CliError> {
    check_code(&a.code)?;
    check_n(a.n, a.code.k)?;
    let metric: Option<Metric> = match a.metric.as_str() {
        "all" => None,
        m => Some(m.parse().map_err(named("--metric"))?),
    };
    if let Some(t) = a.time_scale {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::usage(format!("--time-scale: {t} must be positive")));
        }
    }
    let mut report = age_report(a.n, a.code.k, a.code.q, a.code.eps)?;
    if let Some(t) = a.time_scale {
        report = report.scale_time(t);
    }
    let requested: Vec<Metric> = metric.map_or(Metric::ALL.to_vec(), |m| vec![m]);
    if requested.iter().all(|&m| report.get(m) == AgeValue::Diverged) {
        return Err(CliError::diverged(format!(
            "--eps: every requested age diverges at n = {} (eps_p = {})",
            a.n,
            fmt_num(report.eps_p)
        )));
    }
    let mut out = Output::new(fmt, argv, a, None);
    match (fmt, metric) {
        (Format::Csv, None) => {
            out.csv_row(&REPORT_COLUMNS);
            out.csv_row(&report_row(&report));
        }
        (Format::Csv, Some(m)) => {
            out.csv_row(&["n", "k", "q", "eps", m.name()]);
            out.csv_row(&[
                report.n.to_string(),
                report.k.to_string(),
                report.q.to_string(),
                fmt_num(report.eps),
                fmt_age(report.get(m)),
            ]);
        }
        (Format::Json, None) => out.json_line(&report),
        (Format::Json, Some(m)) => out.json_line(&json!({
            "n": report.n, "k": report.k, "q": report.q, "eps": report.eps, m.name(): report.get(m)
        })),
    }
    Ok(out.text)
}

fn run_sweep(a: &SweepArgs, fmt: Format, argv: &[OsString]) -> Result<String, CliError> {
    let c = &a.code;
    check_code(c)?;
    let n_min = a.n_min.unwrap_or(c.k as usize);
    check_n(n_min, c.k).map_err(|_| CliError::usage(format!("--n-min: {n_min} is smaller than k = {}", c.k)))?;
    let n_max = a.n_max.unwrap_or_else(|| default_n_max(c.k, c.eps));
    if n_max < n_min {
        return Err(CliError::usage(format!("--n-max: {n_max} is smaller than --n-min {n_min}")));
    }
    let reports = sweep(c.k, c.q, c.eps, n_min, n_max)?;
    let mut out = Output::new(fmt, argv, a, None);
    if fmt == Format::Csv {
        out.csv_row(&["n", "exact", "lb", "ub", "star", "hat", "eps_p"]);
    }
    for r in &reports {
        match fmt {
            Format::Csv => out.csv_row(&[
                r.n.to_string(),
                fmt_age(r.exact),
                fmt_age(r.lb),
                fmt_age(r.ub),
                fmt_age(r.star),
                fmt_age(r.hat),
                fmt_num(r.eps_p),
            ]),
            Format::Json => out.json_line(r),
        }
    }
    Ok(out.text)
}

#[derive(Serialize)]
struct FrontierRow {
    eps: f64,
    n_max: usize,
    n_exact: Option<usize>,
    exact_min: AgeValue,
    n_lb: Option<usize>,
    lb_min: AgeValue,
}

fn frontier(a: &FrontierArgs, fmt: Format, argv: &[OsString]) -> Result<String, CliError> {
    for &eps in &a.eps_grid {
        check_code(&CodeArgs { eps, q: a.q, k: a.k }).map_err(|e| CliError {
            code: e.code,
            message: e.message.replace("--eps", "--eps-grid"),
        })?;
    }
    let mut rows = Vec::with_capacity(a.eps_grid.len());
    for &eps in &a.eps_grid {
        let n_max = a.n_max.unwrap_or_else(|| default_n_max(a.k, eps));
        let best = |metric| match optimal_blocklength(a.k, a.q, eps, metric, n_max) {
            Ok(o) => Ok((Some(o.n_star), AgeValue::Finite(o.value))),
            Err(BoundsError::AllDiverged { .. }) => Ok((None, AgeValue::Diverged)),
            Err(e) => Err(CliError::from(e)),
        };
        let (n_exact, exact_min) = best(Metric::Exact)?;
        let (n_lb, lb_min) = best(Metric::Lb)?;
        rows.push(FrontierRow {
            eps,
            n_max,
            n_exact,
            exact_min,
            n_lb,
            lb_min,
        });
    }
    let mut out = Output::new(fmt, argv, a, None);
    if fmt == Format::Csv {
        out.csv_row(&["eps", "n_exact", "exact_min", "n_lb", "lb_min"]);
    }
    for r in &rows {
        match fmt {
            Format::Csv => out.csv_row(&[
                fmt_num(r.eps),
                r.n_exact.map(|n| n.to_string()).unwrap_or_default(),
                fmt_age(r.exact_min),
                r.n_lb.map(|n| n.to_string()).unwrap_or_default(),
                fmt_age(r.lb_min),
            ]),
            Format::Json => out.json_line(r),
        }
    }
    Ok(out.text)
}

fn stats_columns() -> [&'static str; 8] {
    ["mode", "mean_age", "std_error", "cycle_count", "horizon", "eps_p_hat", "mean_t_hat", "seed"]
}

fn stats_row(s: &AgeStats) -> Vec<String> {
    vec![
        s.mode.to_string(),
        fmt_num(s.mean_age),
        fmt_num(s.std_error),
        s.cycle_count.map(|c| c.to_string()).unwrap_or_default(),
        s.horizon.map(|h| h.to_string()).unwrap_or_default(),
        fmt_num(s.eps_p_hat),
        fmt_opt(s.mean_t_hat),
        s.seed.to_string(),
    ]
}

fn emit_stats(out: &mut Output, stats: &AgeStats) {
    match out.format {
        Format::Csv => {
            out.csv_row(&stats_columns());
            out.csv_row(&stats_row(stats));
        }
        Format::Json => out.json_line(stats),
    }
}

fn sim_same(a: &SimSameArgs, fmt: Format, argv: &[OsString]) -> Result<String, CliError> {
    let (timing, rho) = resolve_same(&a.same)?;
    if a.horizon == 0 {
        return Err(CliError::usage("--horizon: must be at least 1"));
    }
    let seed = resolve_seed(a.seed);
    let cap = a.trace.as_ref().map(|_| DEFAULT_TRACE_CAP);
    let run = simulate_same_alphabet(a.same.eps, &timing, &rho, a.horizon, seed, cap)?;
    let resolved = SimSameArgs { seed: Some(seed), ..a.clone() };
    let mut out = Output::new(fmt, argv, &resolved, Some(seed));
    emit_stats(&mut out, &run.stats);
    if let (Some(path), Some(trace)) = (&a.trace, &run.trace) {
        let header = out.text.lines().take_while(|l| l.starts_with('#')).collect::<Vec<_>>().join("\n");
        write_trace(path, &format!("{header}\n"), trace)?;
    }
    Ok(out.text)
}

fn sim_coded(a: &SimCodedArgs, fmt: Format, argv: &[OsString]) -> Result<String, CliError> {
    let c = &a.code;
    check_code(c)?;
    check_n(a.n, c.k)?;
    if a.cycles == 0 {
        return Err(CliError::usage("--cycles: must be at least 1"));
    }
    let mode: SimMode = a.mode.parse().map_err(named("--mode"))?;
    let spec = CodeSpec::new(a.n, c.k as usize, field_for(c.q)?).map_err(named("--n"))?;
    let seed = resolve_seed(a.seed);
    let options = CodedOptions {
        keep_records: a.records.is_some(),
        trace_cap: a.trace.as_ref().map(|_| DEFAULT_TRACE_CAP),
        ..Default::default()
    };
    let run = simulate_coded(&spec, c.eps, a.cycles, seed, mode, &options)?;
    let resolved = SimCodedArgs { seed: Some(seed), ..a.clone() };
    let mut out = Output::new(fmt, argv, &resolved, Some(seed));
    emit_stats(&mut out, &run.stats);
    let header = out.text.lines().take_while(|l| l.starts_with('#')).collect::<Vec<_>>().join("\n");
    if let (Some(path), Some(trace)) = (&a.trace, &run.trace) {
        write_trace(path, &format!("{header}\n"), trace)?;
        debug_assert!(integrate_trace(trace).is_ok());
    }
    if let (Some(path), Some(records)) = (&a.records, &run.records) {
        let mut text = format!("{header}\nh,t,y,q\n");
        for r in records {
            text.push_str(&format!("{},{},{},{}\n", r.h, r.t, r.y, fmt_num(r.q)));
        }
        fs::write(path, text).map_err(|e| CliError::usage(format!("--records {}: {e}", path.display())))?;
    }
    Ok(out.text)
}

fn equidist(a: &EquidistArgs, fmt: Format, argv: &[OsString]) -> Result<String, CliError> {
    if a.terms == 0 {
        return Err(CliError::usage("--terms: must be at least 1"));
    }
    let (alpha, limit, bound) = match parse_fraction(&a.alpha) {
        Some((m, l)) => {
            if l == 0 {
                return Err(CliError::usage("--alpha: denominator must be positive"));
            }
            let l_red = l / m.gcd(&l).max(1);
            let limit = if m == 0 {
                0.0
            } else {
                fractional_limit(&Utilization::rational(m, l).map_err(named("--alpha"))?)
            };
            (Alpha::Rational { m, l }, limit, Some(l_red.max(1) as f64 / a.terms as f64))
        }
        None => {
            let v: f64 = a.alpha.parse().map_err(named("--alpha"))?;
            if !v.is_finite() {
                return Err(CliError::usage("--alpha: must be finite"));
            }
            (Alpha::Real(v), 0.5, None)
        }
    };
    let result = fractional_mean_empirical(alpha, a.terms);
    let deviation = (result.mean - limit).abs();
    let mut out = Output::new(fmt, argv, a, None);
    match fmt {
        Format::Csv => {
            out.csv_row(&["alpha", "terms", "mean", "limit", "abs_error", "bound"]);
            out.csv_row(&[
                a.alpha.clone(),
                a.terms.to_string(),
                fmt_num(result.mean),
                fmt_num(limit),
                fmt_num(deviation),
                fmt_opt(bound),
            ]);
        }
        Format::Json => out.json_line(&json!({
            "alpha": a.alpha, "terms": a.terms, "mean": result.mean, "limit": limit,
            "abs_error": deviation, "bound": bound, "histogram": result.histogram
        })),
    }
    Ok(out.text)
}

fn qgap(a: &QgapArgs, fmt: Format, argv: &[OsString]) -> Result<String, CliError> {
    check_eps(a.eps)?;
    if a.k == 0 {
        return Err(CliError::usage("--k: must be at least 1"));
    }
    check_n(a.n, a.k)?;
    if let Some(bad) = a.q_list.iter().find(|&&q| prime_power(q).is_none()) {
        return Err(CliError::usage(format!("--q-list: {bad} is not a prime power")));
    }
    let gaps = q_convergence_gap(a.n, a.k, a.eps, &a.q_list)?;
    let mut out = Output::new(fmt, argv, a, None);
    if fmt == Format::Csv {
        out.csv_row(&["q", "gap"]);
    }
    for (q, gap) in gaps {
        match fmt {
            Format::Csv => out.csv_row(&[q.to_string(), fmt_num(gap)]),
            Format::Json => out.json_line(&json!({ "q": q, "gap": gap })),
        }
    }
    Ok(out.text)
}
