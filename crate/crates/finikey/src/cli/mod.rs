//! Command-line front end.
//!
//! Six subcommands expose the library operations: `rate`, `optimize`,
//! `critical-n`, `scan`, `rapid`, `simulate`. Every numeric flag accepts
//! scientific notation (`--N 1e6`). Output is a human-readable table by
//! default or machine-readable JSON/CSV via `--format`; table mode echoes
//! every resolved parameter, defaults included, so no run is ambiguous.
//!
//! A `key=value` config file (via `--config` or the `FINIKEY_CONFIG`
//! environment variable) supplies fallback values for any flag; explicit
//! flags always win. A zero-length key (`ell = 0`) is a valid result and
//! exits 0; domain errors exit 1 with a diagnostic on stderr; usage errors
//! exit 2.

mod config;
mod output;

use crate::entropy::{Protocol, ProtocolSpec};
use crate::finite_key::{key_length, ChannelObservation, EpsilonBudget, KeyRateResult, RunConfig};
use crate::optimizer::{critical_n, optimize_split, scan, OptimizationResult, CRITICAL_N_CAP};
use crate::rapid::{case_study_1, case_study_2, rapid_estimate};
use crate::simulator::{simulate_run, validate_delta_v, TrialSpec};
use clap::{Parser, Subcommand, ValueEnum};
use config::ConfigMap;
use output::{sig6, OutputFormat, Row, Table};
use serde_json::{json, Map, Value};
use std::ffi::OsString;
use std::io::Write;

const DELTA_N_FORMULA: &str = "delta_n(N) = 40/N + 7*sqrt(12/N)";
const DELTA_V_FORMULA: &str = "delta_v(N) = sqrt((9 + 2*ln(N))/N)";

#[derive(Debug, Parser)]
#[command(
    name = "finikey",
    version,
    about = "Finite-key secret-key lengths and rates for QKD protocols"
)]
struct Cli {
    /// key=value file supplying fallback values for omitted flags
    /// (also read from $FINIKEY_CONFIG)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<std::path::PathBuf>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Key length and rate for one fixed run configuration
    Rate {
        /// Total signals per run
        #[arg(long = "N", value_parser = parse_count)]
        total: Option<u64>,
        /// Raw-key length (estimation gets N - n)
        #[arg(long = "n", value_parser = parse_count)]
        raw: Option<u64>,
        /// Observed error rate
        #[arg(long, value_parser = parse_real)]
        qber: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_pa: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_bar: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_pe: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_ec: Option<f64>,
        #[command(flatten)]
        proto: ProtoArgs,
        /// Measured error-correction leak in bits, overriding the model
        #[arg(long, value_parser = parse_real)]
        measured_leak: Option<f64>,
    },
    /// Maximize the key length over the split and the budget allocation
    Optimize {
        #[arg(long = "N", value_parser = parse_count)]
        total: Option<u64>,
        #[arg(long, value_parser = parse_real)]
        qber: Option<f64>,
        /// Total failure probability to allocate
        #[arg(long, value_parser = parse_real)]
        eps_total: Option<f64>,
        #[command(flatten)]
        proto: ProtoArgs,
    },
    /// Smallest run size with a positive optimized key
    CriticalN {
        #[arg(long, value_parser = parse_real)]
        qber: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_total: Option<f64>,
        #[command(flatten)]
        proto: ProtoArgs,
    },
    /// Optimized rate over a log-spaced grid of run sizes
    Scan {
        #[arg(long, value_parser = parse_real)]
        qber: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_total: Option<f64>,
        #[arg(long, value_parser = parse_count)]
        n_min: Option<u64>,
        #[arg(long, value_parser = parse_count)]
        n_max: Option<u64>,
        #[arg(long, value_parser = parse_count)]
        points: Option<u64>,
        #[command(flatten)]
        proto: ProtoArgs,
    },
    /// Back-of-envelope overhead estimates and the two case studies
    Rapid {
        /// Case study to solve (1: overhead vs r_inf, 2: precision vs dV)
        #[arg(long, value_parser = clap::value_parser!(u32))]
        case: Option<u32>,
        /// Asymptotic rate for case 1
        #[arg(long, value_parser = parse_real)]
        r_inf: Option<f64>,
        /// Target fluctuation allowance for case 2
        #[arg(long, value_parser = parse_real)]
        target_dv: Option<f64>,
        /// Run size for the plain side-by-side estimate
        #[arg(long = "N", value_parser = parse_count)]
        total: Option<u64>,
    },
    /// Seeded Monte Carlo validation
    Simulate {
        #[arg(long, value_enum)]
        mode: Option<SimulateMode>,
        /// True channel error rate
        #[arg(long, value_parser = parse_real)]
        q_true: Option<f64>,
        /// Estimation sample size per trial (delta-v mode)
        #[arg(long = "m", value_parser = parse_count)]
        sample: Option<u64>,
        #[arg(long, value_parser = parse_count)]
        trials: Option<u64>,
        #[arg(long, value_parser = parse_real)]
        eps_pe: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_pa: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_bar: Option<f64>,
        #[arg(long, value_parser = parse_real)]
        eps_ec: Option<f64>,
        /// Total signals per run (run mode)
        #[arg(long = "N", value_parser = parse_count)]
        total: Option<u64>,
        #[arg(long, value_parser = parse_count)]
        seed: Option<u64>,
        #[command(flatten)]
        proto: ProtoArgs,
    },
}

/// Flags shared by every command that evaluates the bound.
#[derive(Debug, clap::Args)]
struct ProtoArgs {
    /// Protocol: bb84 or six-state
    #[arg(long)]
    protocol: Option<Protocol>,
    /// Error-correction inefficiency factor
    #[arg(long = "f", value_parser = parse_real)]
    ec_inefficiency: Option<f64>,
    /// POVM outcome count used for estimation
    #[arg(long = "d", value_parser = parse_count)]
    povm_outcomes: Option<u64>,
    /// Number of estimated parameters
    #[arg(long, value_parser = parse_count)]
    n_pe: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimulateMode {
    DeltaV,
    Run,
}

/// Failure modes of a CLI invocation, mapped to exit codes.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Domain(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(err: crate::Error) -> Self {
        CliError::Domain(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

/// Parse a count flag: a nonnegative integer, scientific notation allowed.
fn parse_count(text: &str) -> Result<u64, String> {
    if let Ok(value) = text.parse::<u64>() {
        return Ok(value);
    }
    let value: f64 = text
        .parse()
        .map_err(|_| format!("{text:?} is not a number"))?;
    if !value.is_finite() || value < 0.0 {
        return Err(format!("{text:?} is not a nonnegative count"));
    }
    if value > 9.007_199_254_740_992e15 {
        return Err(format!("{text:?} exceeds the exactly representable range"));
    }
    if value.fract() != 0.0 {
        return Err(format!("{text:?} is not an integer"));
    }
    Ok(value as u64)
}

/// Parse a real-valued flag, scientific notation allowed.
fn parse_real(text: &str) -> Result<f64, String> {
    let value: f64 = text
        .parse()
        .map_err(|_| format!("{text:?} is not a number"))?;
    if !value.is_finite() {
        return Err(format!("{text:?} is not finite"));
    }
    Ok(value)
}

/// Run the CLI against explicit arguments, writing results to `out`.
/// Returns the process exit code.
pub fn run<I, T, W>(args: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return err.exit_code();
        }
    };
    let cfg = match ConfigMap::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("finikey: {}", err.message());
            return err.exit_code();
        }
    };
    match dispatch(cli.command, &cfg, cli.format, out) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("finikey: {}", err.message());
            err.exit_code()
        }
    }
}

fn dispatch<W: Write>(
    command: Command,
    cfg: &ConfigMap,
    format: OutputFormat,
    out: &mut W,
) -> Result<(), CliError> {
    match command {
        Command::Rate {
            total,
            raw,
            qber,
            eps_pa,
            eps_bar,
            eps_pe,
            eps_ec,
            proto,
            measured_leak,
        } => cmd_rate(
            cfg,
            format,
            out,
            total,
            raw,
            qber,
            [eps_pa, eps_bar, eps_pe, eps_ec],
            proto,
            measured_leak,
        ),
        Command::Optimize {
            total,
            qber,
            eps_total,
            proto,
        } => cmd_optimize(cfg, format, out, total, qber, eps_total, proto),
        Command::CriticalN {
            qber,
            eps_total,
            proto,
        } => cmd_critical_n(cfg, format, out, qber, eps_total, proto),
        Command::Scan {
            qber,
            eps_total,
            n_min,
            n_max,
            points,
            proto,
        } => cmd_scan(
            cfg, format, out, qber, eps_total, n_min, n_max, points, proto,
        ),
        Command::Rapid {
            case,
            r_inf,
            target_dv,
            total,
        } => cmd_rapid(cfg, format, out, case, r_inf, target_dv, total),
        Command::Simulate {
            mode,
            q_true,
            sample,
            trials,
            eps_pe,
            eps_pa,
            eps_bar,
            eps_ec,
            total,
            seed,
            proto,
        } => cmd_simulate(
            cfg,
            format,
            out,
            mode,
            q_true,
            sample,
            trials,
            [eps_pa, eps_bar, eps_pe, eps_ec],
            total,
            seed,
            proto,
        ),
    }
}

struct ResolvedProto {
    protocol: Protocol,
    spec: ProtocolSpec,
    ec_inefficiency: f64,
}

fn resolve_proto(cfg: &ConfigMap, proto: &ProtoArgs) -> Result<ResolvedProto, CliError> {
    let protocol = match &proto.protocol {
        Some(p) => *p,
        None => match cfg.get("protocol") {
            Some(text) => text
                .parse()
                .map_err(|e: String| CliError::Usage(format!("config protocol: {e}")))?,
            None => Protocol::Bb84,
        },
    };
    let d = cfg
        .resolve("d", proto.povm_outcomes, parse_count)?
        .unwrap_or(2);
    let n_pe = cfg.resolve("n_pe", proto.n_pe, parse_count)?.unwrap_or(1);
    let f = cfg
        .resolve("f", proto.ec_inefficiency, parse_real)?
        .unwrap_or(1.2);
    let d: u32 = d
        .try_into()
        .map_err(|_| CliError::Usage(format!("--d: {d} is out of range")))?;
    let n_pe: u32 = n_pe
        .try_into()
        .map_err(|_| CliError::Usage(format!("--n-pe: {n_pe} is out of range")))?;
    let spec = ProtocolSpec::new(protocol).with_d(d)?.with_n_pe(n_pe)?;
    Ok(ResolvedProto {
        protocol,
        spec,
        ec_inefficiency: f,
    })
}

fn key_rate_rows(result: &KeyRateResult) -> Vec<Row> {
    vec![
        Row::count("ell", result.ell),
        Row::real("r_N", result.rate),
        Row::real("q_pess", result.q_pess),
        Row::real("delta_v", result.delta_v),
        Row::real("delta_n", result.delta_n),
        Row::real("leak_per_bit", result.leak_per_bit),
        Row::real("h_ae_pess", result.h_ae_pess),
        Row::flag("q_pess_clamped", result.q_pess_clamped),
        Row::flag("d_warning", result.d_warning),
    ]
}

#[allow(clippy::too_many_arguments)]
fn cmd_rate<W: Write>(
    cfg: &ConfigMap,
    format: OutputFormat,
    out: &mut W,
    total: Option<u64>,
    raw: Option<u64>,
    qber: Option<f64>,
    eps: [Option<f64>; 4],
    proto: ProtoArgs,
    measured_leak: Option<f64>,
) -> Result<(), CliError> {
    let resolved = resolve_proto(cfg, &proto)?;
    let total = cfg.require("N", total, parse_count)?;
    let raw = cfg.require("n", raw, parse_count)?;
    let qber = cfg.require("qber", qber, parse_real)?;
    let [eps_pa, eps_bar, eps_pe, eps_ec] = resolve_epsilons(cfg, eps)?;
    let measured_leak = cfg.resolve("measured_leak", measured_leak, parse_real)?;

    let budget = EpsilonBudget::new(eps_pa, eps_bar, eps_pe, eps_ec, resolved.spec.n_pe)?;
    let config = RunConfig::new(total, raw, resolved.ec_inefficiency, resolved.spec, budget)?;
    let obs = ChannelObservation::new(qber, config.estimation_len(), resolved.spec.d)?;
    let result = key_length(&config, &obs, measured_leak)?;

    let mut inputs = vec![
        Row::text("protocol", resolved.protocol.name()),
        Row::count("N", total),
        Row::count("n", raw),
        Row::count("m", config.estimation_len()),
        Row::real("qber", qber),
        Row::real("eps_pa", eps_pa),
        Row::real("eps_bar", eps_bar),
        Row::real("eps_pe", eps_pe),
        Row::real("eps_ec", eps_ec),
        Row::count("d", resolved.spec.d as u64),
        Row::count("n_pe", resolved.spec.n_pe as u64),
        Row::real("f", resolved.ec_inefficiency),
    ];
    if let Some(leak) = measured_leak {
        inputs.push(Row::real("measured_leak", leak));
    }

    let mut json = Map::new();
    for row in inputs.iter().chain(key_rate_rows(&result).iter()) {
        json.insert(row.key.clone(), row.json.clone());
    }

    match format {
        OutputFormat::Table => {
            let mut table = Table::new();
            table.section("inputs", inputs);
            table.section("result", key_rate_rows(&result));
            if result.d_warning {
                table.note("fluctuation bound is imprecise for d > 2");
            }
            if result.q_pess_clamped {
                table.note("worst-case error rate clamped at q_max; no key is provable");
            }
            table.write(out)?;
        }
        OutputFormat::Json => writeln!(out, "{}", Value::Object(json))?,
        OutputFormat::Csv => {
            let rows: Vec<Row> = inputs.into_iter().chain(key_rate_rows(&result)).collect();
            output::write_csv_row(out, &rows)?;
        }
    }
    Ok(())
}

fn resolve_epsilons(cfg: &ConfigMap, eps: [Option<f64>; 4]) -> Result<[f64; 4], CliError> {
    let [pa, bar, pe, ec] = eps;
    Ok([
        cfg.resolve("eps_pa", pa, parse_real)?.unwrap_or(1e-3),
        cfg.resolve("eps_bar", bar, parse_real)?.unwrap_or(1e-3),
        cfg.resolve("eps_pe", pe, parse_real)?.unwrap_or(1e-3),
        cfg.resolve("eps_ec", ec, parse_real)?.unwrap_or(1e-3),
    ])
}

fn optimum_rows(protocol: Protocol, opt: &OptimizationResult) -> (Vec<Row>, Vec<Row>) {
    let budget = &opt.best_budget;
    let found = vec![
        Row::count("best_n", opt.best_n),
        Row::real("eps_pa", budget.eps_pa()),
        Row::real("eps_bar", budget.eps_bar()),
        Row::real("eps_pe", budget.eps_pe()),
        Row::real("eps_ec", budget.eps_ec()),
        Row::count("evaluations", opt.evaluations),
        Row::text("protocol", protocol.name()),
    ];
    (found, key_rate_rows(&opt.result))
}

fn cmd_optimize<W: Write>(
    cfg: &ConfigMap,
    format: OutputFormat,
    out: &mut W,
    total: Option<u64>,
    qber: Option<f64>,
    eps_total: Option<f64>,
    proto: ProtoArgs,
) -> Result<(), CliError> {
    let resolved = resolve_proto(cfg, &proto)?;
    let total = cfg.require("N", total, parse_count)?;
    let qber = cfg.require("qber", qber, parse_real)?;
    let eps_total = cfg
        .resolve("eps_total", eps_total, parse_real)?
        .unwrap_or(4e-3);

    let opt = optimize_split(
        total,
        qber,
        eps_total,
        &resolved.spec,
        resolved.ec_inefficiency,
    )?;

    let inputs = vec![
        Row::text("protocol", resolved.protocol.name()),
        Row::count("N", total),
        Row::real("qber", qber),
        Row::real("eps_total", eps_total),
        Row::count("d", resolved.spec.d as u64),
        Row::count("n_pe", resolved.spec.n_pe as u64),
        Row::real("f", resolved.ec_inefficiency),
    ];
    let (found, result_rows) = optimum_rows(resolved.protocol, &opt);

    match format {
        OutputFormat::Table => {
            let mut table = Table::new();
            table.section("inputs", inputs);
            table.section("optimum", found);
            table.section("result", result_rows);
            table.write(out)?;
        }
        OutputFormat::Json => {
            let mut json = Map::new();
            for row in inputs.iter().chain(found.iter()).chain(result_rows.iter()) {
                json.insert(row.key.clone(), row.json.clone());
            }
            writeln!(out, "{}", Value::Object(json))?;
        }
        OutputFormat::Csv => {
            let rows: Vec<Row> = inputs.into_iter().chain(found).chain(result_rows).collect();
            output::write_csv_row(out, &rows)?;
        }
    }
    Ok(())
}

fn cmd_critical_n<W: Write>(
    cfg: &ConfigMap,
    format: OutputFormat,
    out: &mut W,
    qber: Option<f64>,
    eps_total: Option<f64>,
    proto: ProtoArgs,
) -> Result<(), CliError> {
    let resolved = resolve_proto(cfg, &proto)?;
    let qber = cfg.require("qber", qber, parse_real)?;
    let eps_total = cfg
        .resolve("eps_total", eps_total, parse_real)?
        .unwrap_or(4e-3);

    let outcome = critical_n(qber, eps_total, &resolved.spec, resolved.ec_inefficiency);
    let (found, n_star) = match outcome {
        Ok(n_star) => (true, Some(n_star)),
        Err(crate::Error::CriticalNotFoundBelowCap { .. }) => (false, None),
        Err(other) => return Err(other.into()),
    };

    let inputs = vec![
        Row::text("protocol", resolved.protocol.name()),
        Row::real("qber", qber),
        Row::real("eps_total", eps_total),
        Row::count("d", resolved.spec.d as u64),
        Row::count("n_pe", resolved.spec.n_pe as u64),
        Row::real("f", resolved.ec_inefficiency),
        Row::count("cap", CRITICAL_N_CAP),
    ];
    let result = match n_star {
        Some(n) => Row::count("critical_n", n),
        None => Row::null("critical_n"),
    };

    match format {
        OutputFormat::Table => {
            let mut table = Table::new();
            table.section("inputs", inputs);
            table.section("result", vec![result, Row::flag("found", found)]);
            if !found {
                table.note("no positive key below the search cap");
            }
            table.write(out)?;
        }
        OutputFormat::Json => {
            let mut json = Map::new();
            for row in inputs.iter() {
                json.insert(row.key.clone(), row.json.clone());
            }
            json.insert("critical_n".into(), result.json.clone());
            json.insert("found".into(), Value::Bool(found));
            writeln!(out, "{}", Value::Object(json))?;
        }
        OutputFormat::Csv => {
            let mut rows = inputs;
            rows.push(result);
            rows.push(Row::flag("found", found));
            output::write_csv_row(out, &rows)?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_scan<W: Write>(
    cfg: &ConfigMap,
    format: OutputFormat,
    out: &mut W,
    qber: Option<f64>,
    eps_total: Option<f64>,
    n_min: Option<u64>,
    n_max: Option<u64>,
    points: Option<u64>,
    proto: ProtoArgs,
) -> Result<(), CliError> {
    let resolved = resolve_proto(cfg, &proto)?;
    let qber = cfg.require("qber", qber, parse_real)?;
    let eps_total = cfg
        .resolve("eps_total", eps_total, parse_real)?
        .unwrap_or(4e-3);
    let n_min = cfg.resolve("n_min", n_min, parse_count)?.unwrap_or(1_000);
    let n_max = cfg
        .resolve("n_max", n_max, parse_count)?
        .unwrap_or(1_000_000_000);
    let points = cfg.resolve("points", points, parse_count)?.unwrap_or(25);
    if n_min < 2 {
        return Err(CliError::Usage("--n-min: must be at least 2".into()));
    }
    if n_max < n_min {
        return Err(CliError::Usage("--n-max: must not be below --n-min".into()));
    }
    if points < 1 {
        return Err(CliError::Usage("--points: must be at least 1".into()));
    }

    let grid = log_grid(n_min, n_max, points);
    let results = scan(
        &resolved.spec,
        qber,
        eps_total,
        resolved.ec_inefficiency,
        &grid,
    )?;

    let point_rows = |total: u64, opt: &OptimizationResult| -> Vec<Row> {
        vec![
            Row::count("N", total),
            Row::count("n_opt", opt.best_n),
            Row::real("eps_pa", opt.best_budget.eps_pa()),
            Row::real("eps_bar", opt.best_budget.eps_bar()),
            Row::real("eps_pe", opt.best_budget.eps_pe()),
            Row::real("eps_ec", opt.best_budget.eps_ec()),
            Row::count("ell", opt.result.ell),
            Row::real("r_N", opt.result.rate),
        ]
    };

    match format {
        OutputFormat::Csv => {
            output::write_csv_header(
                out,
                &[
                    "N", "n_opt", "eps_pa", "eps_bar", "eps_pe", "eps_ec", "ell", "r_N",
                ],
            )?;
            for (total, opt) in &results {
                output::write_csv_values(out, &point_rows(*total, opt))?;
            }
        }
        OutputFormat::Json => {
            let array: Vec<Value> = results
                .iter()
                .map(|(total, opt)| {
                    let mut json = Map::new();
                    for row in point_rows(*total, opt) {
                        json.insert(row.key, row.json);
                    }
                    json.insert("evaluations".into(), json!(opt.evaluations));
                    Value::Object(json)
                })
                .collect();
            writeln!(out, "{}", Value::Array(array))?;
        }
        OutputFormat::Table => {
            let mut table = Table::new();
            table.section(
                "inputs",
                vec![
                    Row::text("protocol", resolved.protocol.name()),
                    Row::real("qber", qber),
                    Row::real("eps_total", eps_total),
                    Row::count("n_min", n_min),
                    Row::count("n_max", n_max),
                    Row::count("points", points),
                    Row::real("f", resolved.ec_inefficiency),
                ],
            );
            table.write(out)?;
            output::write_aligned_grid(
                out,
                &["N", "n_opt", "ell", "r_N"],
                results.iter().map(|(total, opt)| {
                    vec![
                        total.to_string(),
                        opt.best_n.to_string(),
                        opt.result.ell.to_string(),
                        sig6(opt.result.rate),
                    ]
                }),
            )?;
        }
    }
    Ok(())
}

/// Log-spaced integer grid, inclusive of both ends.
fn log_grid(n_min: u64, n_max: u64, points: u64) -> Vec<u64> {
    if points == 1 || n_min == n_max {
        return vec![n_min];
    }
    let lo = (n_min as f64).ln();
    let hi = (n_max as f64).ln();
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (lo + t * (hi - lo))
                .exp()
                .round()
                .clamp(n_min as f64, n_max as f64) as u64
        })
        .collect()
}

fn cmd_rapid<W: Write>(
    cfg: &ConfigMap,
    format: OutputFormat,
    out: &mut W,
    case: Option<u32>,
    r_inf: Option<f64>,
    target_dv: Option<f64>,
    total: Option<u64>,
) -> Result<(), CliError> {
    let case = match case {
        Some(c) => Some(c),
        None => cfg
            .resolve("case", None::<u64>, parse_count)?
            .map(|c| c as u32),
    };
    let rows = match case {
        Some(1) => {
            let r_inf = cfg.require("r_inf", r_inf, parse_real)?;
            let n_star = case_study_1(r_inf)?;
            vec![
                Row::count("case", 1),
                Row::real("r_inf", r_inf),
                Row::count("n_star", n_star),
                Row::text("formula", DELTA_N_FORMULA),
            ]
        }
        Some(2) => {
            let target = cfg.require("target_dv", target_dv, parse_real)?;
            let n_star = case_study_2(target)?;
            vec![
                Row::count("case", 2),
                Row::real("target_dv", target),
                Row::count("n_star", n_star),
                Row::text("formula", DELTA_V_FORMULA),
            ]
        }
        Some(other) => {
            return Err(CliError::Usage(format!(
                "--case: expected 1 or 2, got {other}"
            )));
        }
        None => {
            let total = cfg.require("N", total, parse_count)?;
            let est = rapid_estimate(total)?;
            vec![
                Row::count("N", est.total_signals),
                Row::real("delta_n_approx", est.delta_n_approx),
                Row::real("delta_v_approx", est.delta_v_approx),
                Row::real("delta_n_exact_sub", est.delta_n_exact_sub),
                Row::real("delta_v_exact_sub", est.delta_v_exact_sub),
                Row::text("formula_delta_n", DELTA_N_FORMULA),
                Row::text("formula_delta_v", DELTA_V_FORMULA),
            ]
        }
    };
    write_rows(format, out, rows)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate<W: Write>(
    cfg: &ConfigMap,
    format: OutputFormat,
    out: &mut W,
    mode: Option<SimulateMode>,
    q_true: Option<f64>,
    sample: Option<u64>,
    trials: Option<u64>,
    eps: [Option<f64>; 4],
    total: Option<u64>,
    seed: Option<u64>,
    proto: ProtoArgs,
) -> Result<(), CliError> {
    let mode = match mode {
        Some(m) => m,
        None => match cfg.get("mode") {
            Some("delta-v") => SimulateMode::DeltaV,
            Some("run") => SimulateMode::Run,
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "config mode: expected delta-v or run, got {other:?}"
                )));
            }
            None => SimulateMode::DeltaV,
        },
    };
    let q_true = cfg.require("q_true", q_true, parse_real)?;
    let seed = cfg.resolve("seed", seed, parse_count)?.unwrap_or(0);
    let resolved = resolve_proto(cfg, &proto)?;
    let [eps_pa, eps_bar, eps_pe, eps_ec] = resolve_epsilons(cfg, eps)?;

    let rows = match mode {
        SimulateMode::DeltaV => {
            let sample = cfg.require("m", sample, parse_count)?;
            let trials = cfg
                .resolve("trials", trials, parse_count)?
                .unwrap_or(100_000);
            let spec = TrialSpec::new(q_true, sample, trials, eps_pe, resolved.spec.d, seed)?;
            let report = validate_delta_v(&spec)?;
            vec![
                Row::text("mode", "delta-v"),
                Row::real("q_true", q_true),
                Row::count("m", sample),
                Row::count("trials", trials),
                Row::real("eps_pe", eps_pe),
                Row::count("d", resolved.spec.d as u64),
                Row::count("seed", seed),
                Row::count("violation_count", report.violation_count),
                Row::real("violation_fraction", report.violation_fraction),
                Row::real("delta_v_used", report.delta_v_used),
                Row::real("mean_qhat", report.mean_qhat),
                Row::real("max_abs_deviation", report.max_abs_deviation),
                Row::flag("d_warning", report.d_warning),
            ]
        }
        SimulateMode::Run => {
            let total = cfg.require("N", total, parse_count)?;
            let budget = EpsilonBudget::new(eps_pa, eps_bar, eps_pe, eps_ec, resolved.spec.n_pe)?;
            let result = simulate_run(
                total,
                q_true,
                &resolved.spec,
                &budget,
                resolved.ec_inefficiency,
                seed,
            )?;
            let mut rows = vec![
                Row::text("mode", "run"),
                Row::text("protocol", resolved.protocol.name()),
                Row::count("N", total),
                Row::real("q_true", q_true),
                Row::real("eps_pa", eps_pa),
                Row::real("eps_bar", eps_bar),
                Row::real("eps_pe", eps_pe),
                Row::real("eps_ec", eps_ec),
                Row::real("f", resolved.ec_inefficiency),
                Row::count("seed", seed),
            ];
            rows.extend(key_rate_rows(&result));
            rows
        }
    };
    write_rows(format, out, rows)
}

fn write_rows<W: Write>(format: OutputFormat, out: &mut W, rows: Vec<Row>) -> Result<(), CliError> {
    match format {
        OutputFormat::Table => {
            let mut table = Table::new();
            table.section("result", rows);
            table.write(out)?;
        }
        OutputFormat::Json => {
            let mut json = Map::new();
            for row in &rows {
                json.insert(row.key.clone(), row.json.clone());
            }
            writeln!(out, "{}", Value::Object(json))?;
        }
        OutputFormat::Csv => output::write_csv_row(out, &rows)?,
    }
    Ok(())
}
