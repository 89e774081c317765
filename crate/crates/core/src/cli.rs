//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage, parse or validation errors, 3 when a
//! statistic is undefined for the given table, 1 on I/O failure.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::asymptotics::{linspace, size_curve, ClassicTest, DEFAULT_LAMBDA_RANGE};
use crate::datasets::EmbeddedDataset;
use crate::error::UspError;
use crate::perm::{run_test, Method, Mode, PermutationConfig, TiePolicy};
use crate::sim::{
    dhat_samples, parse_test_list, power_curve, subsample_study_with, AlternativeFamily,
    FamilyKind, PowerCurvePoint, SamplingScheme, TestRate, TestSpec,
};
use crate::table::ContingencyTable;

pub const POWER_CSV_HEADER: &str = "epsilon,n,reps,method,mode,rejection_rate,std_err";
pub const DHAT_CSV_HEADER: &str = "epsilon,n,rep,dhat";
pub const SUBSAMPLE_CSV_HEADER: &str = "m,reps,method,mode,rejection_rate,std_err";
pub const ASYMSIZE_CSV_HEADER: &str = "lambda,alpha,test,asymptotic_size";

#[derive(Debug, Parser)]
#[command(name = "usp", version, about = "Independence tests for two-way contingency tables")]
pub struct Cli {
    /// Worker threads (defaults to all cores). Never changes results.
    #[arg(long, global = true, env = "USP_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test independence on one table and print a JSON report.
    Test(TestArgs),
    /// Monte Carlo power curve over an alternative family (CSV).
    Power(PowerArgs),
    /// Limiting size of the classic tests over a λ grid (CSV).
    Asymsize(AsymsizeArgs),
    /// Rejection proportions on random subsamples of a table (CSV).
    Subsample(SubsampleArgs),
    /// Samples of the unbiased dependence estimator (CSV).
    Dhat(DhatArgs),
}

#[derive(Debug, Args)]
pub struct TableSource {
    /// CSV file of non-negative integer counts, one table row per line.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    pub input: Option<PathBuf>,
    /// Built-in table: marital or eyecolour.
    #[arg(long)]
    pub dataset: Option<EmbeddedDataset>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub source: TableSource,
    #[arg(long, default_value = "usp")]
    pub method: Method,
    #[arg(long, default_value = "permutation")]
    pub mode: Mode,
    #[arg(long = "B", default_value_t = 999)]
    pub permutations: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tie handling: randomized or conservative.
    #[arg(long, default_value = "randomized")]
    pub ties: TiePolicy,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub family: FamilyKind,
    #[arg(long = "I")]
    pub rows: Option<usize>,
    #[arg(long = "J")]
    pub cols: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long = "B", default_value_t = 99)]
    pub permutations: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// ε grid as lo:hi:k (k evenly spaced points).
    #[arg(long = "eps-grid")]
    pub eps_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "usp,pearson-perm,g-perm")]
    pub tests: String,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AsymsizeArgs {
    #[arg(long, default_value = "pearson")]
    pub test: ClassicTest,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// λ grid as lo:hi:k.
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[command(flatten)]
    pub source: TableSource,
    #[arg(long)]
    pub m: u64,
    /// Draw with replacement (bootstrap) instead of without.
    #[arg(long)]
    pub replace: bool,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long = "B", default_value_t = 99)]
    pub permutations: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "usp,pearson-perm,g-perm")]
    pub tests: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DhatArgs {
    #[arg(long)]
    pub family: FamilyKind,
    #[arg(long = "I")]
    pub rows: Option<usize>,
    #[arg(long = "J")]
    pub cols: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub n: u64,
    /// One or more ε values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Stat(UspError),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stat(UspError::UndefinedStatistic(_)) => 3,
            CliError::Stat(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Stat(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<UspError> for CliError {
    fn from(e: UspError) -> Self {
        CliError::Stat(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

/// Parses a CSV table: comma-separated non-negative integers, no header,
/// blank lines and lines starting with `#` ignored. Errors name the line and
/// column of the offending cell.
pub fn parse_table_csv(text: &str) -> Result<ContingencyTable, CliError> {
    let mut rows: Vec<Vec<i64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (col, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let at = format!("line {}, column {}", lineno + 1, col + 1);
            let value: i64 = cell
                .parse()
                .map_err(|_| CliError::Usage(format!("{at}: `{cell}` is not an integer")))?;
            if value < 0 {
                return Err(CliError::Usage(format!("{at}: negative count {value}")));
            }
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Usage(format!(
                    "line {}: {} entries, expected {}",
                    lineno + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Usage("input contains no table rows".into()));
    }
    Ok(ContingencyTable::from_rows(&rows)?)
}

/// Parses `lo:hi:k` into `k` evenly spaced points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("invalid grid `{s}`, expected lo:hi:k"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let k: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !lo.is_finite() || !hi.is_finite() || hi < lo || k == 0 {
        return Err(bad());
    }
    Ok(linspace(lo, hi, k))
}

fn load_table(src: &TableSource) -> Result<ContingencyTable, CliError> {
    match (&src.input, src.dataset) {
        (_, Some(d)) => Ok(d.table()),
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read {}: {e}", path.display()))
            })?;
            parse_table_csv(&text)
        }
        (None, None) => Err(CliError::Usage("one of --input or --dataset is required".into())),
    }
}

fn check_reps(reps: u64) -> Result<(), CliError> {
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    Ok(())
}

fn check_config(cfg: &PermutationConfig, err: &mut dyn Write) -> Result<(), CliError> {
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if !cfg.can_reject() {
        writeln!(
            err,
            "warning: alpha * (B + 1) < 1, permutation tests cannot reject at this B"
        )?;
    }
    Ok(())
}

fn parse_tests(s: &str) -> Result<Vec<TestSpec>, CliError> {
    let tests = parse_test_list(s).map_err(CliError::Usage)?;
    if tests.is_empty() {
        return Err(CliError::Usage("--tests is empty".into()));
    }
    Ok(tests)
}

fn family_shape(kind: FamilyKind, rows: Option<usize>, cols: Option<usize>) -> (usize, usize) {
    let (r, c) = kind.default_shape();
    (rows.unwrap_or(r), cols.unwrap_or(c))
}

fn rate_fields(rate: &TestRate) -> String {
    format!(
        "{},{},{},{}",
        rate.test.method, rate.test.mode, rate.rejection_rate, rate.std_err
    )
}

pub fn write_power_csv(points: &[PowerCurvePoint], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{POWER_CSV_HEADER}")?;
    for p in points {
        for rate in &p.rates {
            writeln!(out, "{},{},{},{}", p.epsilon, p.n, p.reps, rate_fields(rate))?;
        }
    }
    Ok(())
}

pub fn write_subsample_csv(m: u64, reps: u64, rates: &[TestRate], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{SUBSAMPLE_CSV_HEADER}")?;
    for rate in rates {
        writeln!(out, "{m},{reps},{}", rate_fields(rate))?;
    }
    Ok(())
}

fn with_output<F>(path: &Option<PathBuf>, out: &mut dyn Write, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    match path {
        Some(p) => {
            let mut buf = Vec::new();
            body(&mut buf)?;
            fs::write(p, buf)?;
            Ok(())
        }
        None => body(out),
    }
}

fn cmd_test(args: &TestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let table = load_table(&args.source)?;
    let cfg = PermutationConfig {
        permutations: args.permutations,
        alpha: args.alpha,
        seed: args.seed,
        tie_policy: args.ties,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if args.mode == Mode::Permutation {
        check_config(&cfg, err)?;
    }
    let result = run_test(&table, args.method, args.mode, &cfg)?;
    let json = serde_json::to_string_pretty(&result).map_err(io::Error::other)?;
    writeln!(out, "{json}")?;
    Ok(())
}

fn cmd_power(args: &PowerArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    check_reps(args.reps)?;
    let tests = parse_tests(&args.tests)?;
    let cfg = PermutationConfig {
        permutations: args.permutations,
        alpha: args.alpha,
        seed: args.seed,
        ..Default::default()
    };
    check_config(&cfg, err)?;
    let (rows, cols) = family_shape(args.family, args.rows, args.cols);
    let grid = match &args.eps_grid {
        Some(s) => parse_grid(s)?,
        None => args.family.default_grid(rows, cols),
    };
    let family = AlternativeFamily::new(args.family, rows, cols, 0.0);
    let points = power_curve(family, &grid, args.n, args.reps, &tests, &cfg)?;
    with_output(&args.output, out, |w| Ok(write_power_csv(&points, w)?))
}

fn cmd_asymsize(args: &AsymsizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let grid = match &args.lambda {
        Some(s) => parse_grid(s)?,
        None => {
            let (lo, hi, k) = DEFAULT_LAMBDA_RANGE;
            linspace(lo, hi, k)
        }
    };
    let curve = size_curve(args.test, args.alpha, &grid)?;
    with_output(&args.output, out, |w| {
        writeln!(w, "{ASYMSIZE_CSV_HEADER}")?;
        for p in &curve {
            writeln!(w, "{},{},{},{}", p.lambda, p.alpha, p.test, p.asymptotic_size)?;
        }
        Ok(())
    })
}

fn cmd_subsample(args: &SubsampleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    check_reps(args.reps)?;
    let table = load_table(&args.source)?;
    let tests = parse_tests(&args.tests)?;
    let cfg = PermutationConfig {
        permutations: args.permutations,
        alpha: args.alpha,
        seed: args.seed,
        ..Default::default()
    };
    check_config(&cfg, err)?;
    let scheme = if args.replace {
        SamplingScheme::WithReplacement
    } else {
        SamplingScheme::WithoutReplacement
    };
    let rates = subsample_study_with(&table, args.m, args.reps, &tests, &cfg, scheme)?;
    with_output(&args.output, out, |w| Ok(write_subsample_csv(args.m, args.reps, &rates, w)?))
}

fn cmd_dhat(args: &DhatArgs, out: &mut dyn Write) -> Result<(), CliError> {
    check_reps(args.reps)?;
    let (rows, cols) = family_shape(args.family, args.rows, args.cols);
    let mut samples = Vec::with_capacity(args.eps.len());
    for &eps in &args.eps {
        let family = AlternativeFamily::new(args.family, rows, cols, eps);
        samples.push((eps, dhat_samples(family, args.n, args.reps, args.seed)?));
    }
    with_output(&args.output, out, |w| {
        writeln!(w, "{DHAT_CSV_HEADER}")?;
        for (eps, xs) in &samples {
            for (rep, x) in xs.iter().enumerate() {
                writeln!(w, "{eps},{},{rep},{x}", args.n)?;
            }
        }
        Ok(())
    })
}

/// Runs a parsed command, writing results to `out` and diagnostics to `err`.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let body = |out: &mut dyn Write, err: &mut dyn Write| match &cli.command {
        Command::Test(a) => cmd_test(a, out, err),
        Command::Power(a) => cmd_power(a, out, err),
        Command::Asymsize(a) => cmd_asymsize(a, out),
        Command::Subsample(a) => cmd_subsample(a, out, err),
        Command::Dhat(a) => cmd_dhat(a, out),
    };
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let (mut o, mut e) = (Vec::new(), Vec::new());
            let result = pool.install(|| body(&mut o, &mut e));
            out.write_all(&o)?;
            err.write_all(&e)?;
            result
        }
        None => body(out, err),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    match run(&cli, &mut out, &mut err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (Result<(), CliError>, String, String) {
        let cli = Cli::try_parse_from(std::iter::once("usp").chain(args.iter().copied())).unwrap();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let r = run(&cli, &mut out, &mut err);
        (r, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn csv_parsing() {
        let t = parse_table_csv("# header comment\n1, 2,3\n\n4,5,6\n").unwrap();
        assert_eq!(t.to_rows(), vec![vec![1, 2, 3], vec![4, 5, 6]]);
        let e = parse_table_csv("1,2\n3,-4\n").unwrap_err();
        assert!(e.to_string().contains("line 2, column 2"), "{e}");
        assert_eq!(e.exit_code(), 2);
        let e = parse_table_csv("1,2\n3,x\n").unwrap_err();
        assert!(e.to_string().contains("`x`"));
        assert!(parse_table_csv("1,2\n3\n").is_err());
        assert!(parse_table_csv("# nothing\n").is_err());
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1:1:1").unwrap(), vec![1.0]);
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        for bad in ["1:0:3", "0:1:0", "0:1", "a:1:2", "0:inf:2"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn classic_pearson_report() {
        let (r, out, _) = run_args(&["test", "--dataset", "marital", "--method", "pearson", "--mode", "classic"]);
        r.unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["p_value"].as_f64().unwrap() - 0.0235).abs() < 5e-4);
        assert_eq!(v["df"], 12);
        assert!(v["B"].is_null());
    }

    #[test]
    fn usp_report_has_lattice_p_value() {
        let (r, out, _) = run_args(&["test", "--dataset", "eyecolour", "--B", "99", "--seed", "5"]);
        r.unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let scaled = v["p_value"].as_f64().unwrap() * 100.0;
        assert!((scaled - scaled.round()).abs() < 1e-9);
        for key in ["method", "mode", "statistic", "p_value", "reject", "alpha", "B", "df", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn undefined_statistic_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "1,0\n2,0\n").unwrap();
        let (r, _, _) = run_args(&[
            "test", "--input", path.to_str().unwrap(), "--method", "pearson", "--mode", "classic",
        ]);
        assert_eq!(r.unwrap_err().exit_code(), 3);
    }

    #[test]
    fn unrejectable_config_warns() {
        let (r, _, err) = run_args(&["test", "--dataset", "marital", "--B", "9"]);
        r.unwrap();
        assert!(err.contains("warning"));
    }

    #[test]
    fn asymsize_single_point() {
        let (r, out, _) = run_args(&["asymsize", "--test", "pearson", "--alpha", "0.05", "--lambda", "1:1:1"]);
        r.unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], ASYMSIZE_CSV_HEADER);
        assert_eq!(lines.len(), 2);
        let size: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
        assert!((size - 0.0803).abs() < 1e-4);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_args(&["asymsize", "--alpha", "1.5"]).0.unwrap_err().exit_code(), 2);
        assert_eq!(
            run_args(&["power", "--family", "sparse", "--reps", "0"]).0.unwrap_err().exit_code(),
            2
        );
        assert_eq!(
            run_args(&["subsample", "--dataset", "eyecolour", "--m", "99999"]).0.unwrap_err().exit_code(),
            2
        );
        assert_eq!(main_with_args(["usp", "test", "--method", "nope", "--dataset", "marital"]), 2);
    }

    #[test]
    fn dhat_csv_shape() {
        let (r, out, _) = run_args(&[
            "dhat", "--family", "sparse", "--I", "5", "--J", "8", "--n", "100", "--eps", "0,0.05", "--reps", "10",
        ]);
        r.unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], DHAT_CSV_HEADER);
        assert_eq!(lines.len(), 21);
        assert!(lines[11].starts_with("0.05,100,0,"));
    }

    #[test]
    fn threads_do_not_change_output() {
        let args = ["power", "--family", "dense", "--reps", "20", "--B", "19", "--eps-grid", "0:0.02:2"];
        let one = run_args(&[&["--threads", "1"][..], &args[..]].concat()).1;
        let three = run_args(&[&["--threads", "3"][..], &args[..]].concat()).1;
        assert_eq!(one, three);
        assert!(one.starts_with(POWER_CSV_HEADER));
    }
}
