//! Argument parsing and the `thprs` entry point.
//!
//! Exit codes: 0 success, 1 failed validation or IO error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thprs_core::channel::{draw_channel, draw_estimate_and_errors, DrawSeed, ErrorRegime};
use thprs_core::linalg::ComplexMatrix;
use thprs_core::precoder::SchemeTag;
use thprs_core::sweep::{default_split_grid, SweepAxis, SweepConfig};

use crate::output::{emit_results, write_csv, write_structured, ConfigEcho, Format};
use crate::parallel::run_sweep_parallel;
use crate::validate::{cross_check_sinr, validate_chain, ChainOptions, CrossCheckOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable overriding the default `--seed`.
pub const SEED_ENV: &str = "THPRS_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "thprs",
    version,
    about = "Sum-rate sweeps and checks for THP, rate-splitting and ZF-DPC precoding in the MISO downlink",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ergodic sum rate versus SNR; perfect CSIT unless --error-variance is set.
    SweepSnr(SweepArgs),
    /// Ergodic sum rate versus CSIT error variance at a fixed SNR.
    SweepErrorVariance(SweepArgs),
    /// Ergodic sum rate versus SNR with error variance E_tr^-alpha.
    SweepAlpha(SweepArgs),
    /// Modulo, encoding, power loss and cancellation checks.
    ValidateChain(ValidateArgs),
    /// Closed-form SINRs against a signal-level Monte-Carlo estimate.
    CrossCheckSinr(ValidateArgs),
    /// Seeded channel estimates and reference channels as JSON.
    DumpChannels(SweepArgs),
}

/// A value grid: `start:step:stop` or a comma separated list.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn round12(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, step, b] = parts[..] else {
            return Err("a range is start:step:stop".into());
        };
        let (a, step, b) = (num(a)?, num(step)?, num(b)?);
        if !(a.is_finite() && b.is_finite() && step.is_finite()) || step <= 0.0 || b < a {
            return Err("a range needs finite start <= stop and step > 0".into());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize + 1;
        if n > 10_000 {
            return Err("range has more than 10000 points".into());
        }
        Ok(Grid((0..n).map(|i| round12(a + i as f64 * step)).collect()))
    } else {
        let v = s.split(',').map(num).collect::<Result<Vec<f64>, String>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err("values must be finite".into());
        }
        Ok(Grid(v))
    }
}

fn parse_scheme(s: &str) -> Result<SchemeTag, String> {
    s.trim().parse().map_err(|_| {
        let tags: Vec<&str> = SchemeTag::ALL.iter().map(|t| t.tag()).collect();
        format!("unknown scheme '{s}', expected one of {}", tags.join(", "))
    })
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 4)]
    pub users: usize,
    #[arg(long, default_value_t = 4)]
    pub tx_antennas: usize,
    /// SNR grid in dB [default: 0:5:30, or 15 for sweep-error-variance]
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub snr_db: Option<Grid>,
    /// Comma separated scheme tags [default: all eight]
    #[arg(long, value_delimiter = ',', value_parser = parse_scheme)]
    pub schemes: Option<Vec<SchemeTag>>,
    /// CSIT error variance: one value, or the grid of sweep-error-variance [default: 0:0.05:0.5 there]
    #[arg(long, value_parser = parse_grid)]
    pub error_variance: Option<Grid>,
    /// Exponent of the SNR-scaled error variance [default: 0.6, sweep-alpha only]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Channel estimates per grid point
    #[arg(long, default_value_t = 50)]
    pub channels: usize,
    /// Error realizations per channel estimate
    #[arg(long, default_value_t = 100)]
    pub error_samples: usize,
    /// THP power loss factor
    #[arg(long, default_value_t = 0.75)]
    pub lambda: f64,
    /// Common power split grid for RS schemes [default: 0:0.05:0.95]
    #[arg(long, value_parser = parse_grid)]
    pub split_grid: Option<Grid>,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    /// Output file; a `.config.json` sidecar is written next to it. Results go to stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 4)]
    pub users: usize,
    #[arg(long, default_value_t = 4)]
    pub tx_antennas: usize,
    #[arg(long, default_value_t = 15.0, allow_hyphen_values = true)]
    pub snr_db: f64,
    /// Error variance of the imperfect-CSIT comparison
    #[arg(long, default_value_t = 0.2)]
    pub error_variance: f64,
    /// Seeded channels [default: 100 for validate-chain, 5 for cross-check-sinr]
    #[arg(long)]
    pub channels: Option<usize>,
    /// Monte-Carlo samples per comparison, or symbols of the power loss estimate
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.75)]
    pub lambda: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 1)]
    pub seed: u64,
    /// Relative error added to beta in the receivers (negative control)
    #[arg(long, hide = true, allow_hyphen_values = true)]
    pub inject_beta_error: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    Snr,
    ErrorVariance,
    Alpha,
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Snr => "sweep-snr",
            SweepKind::ErrorVariance => "sweep-error-variance",
            SweepKind::Alpha => "sweep-alpha",
        }
    }
}

/// A fully resolved invocation.
#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentSpec {
    Sweep {
        kind: SweepKind,
        config: SweepConfig,
        output: Option<PathBuf>,
        format: Format,
    },
    ValidateChain(ChainOptions),
    CrossCheckSinr(CrossCheckOptions),
    DumpChannels {
        config: SweepConfig,
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Parse failure, or help/version output.
    Clap(clap::Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

fn usage(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{flag}: {msg}"))
}

fn single(flag: &str, grid: &Grid) -> Result<f64, CliError> {
    match grid.0[..] {
        [x] => Ok(x),
        _ => Err(usage(flag, "expected a single value here")),
    }
}

fn sweep_config(kind: Option<SweepKind>, a: &SweepArgs) -> Result<SweepConfig, CliError> {
    if a.users < 2 || a.users > a.tx_antennas {
        return Err(usage(
            "--users",
            format_args!("need 2 <= users <= --tx-antennas ({})", a.tx_antennas),
        ));
    }
    if a.channels == 0 {
        return Err(usage("--channels", "must be at least 1"));
    }
    if a.error_samples == 0 {
        return Err(usage("--error-samples", "must be at least 1"));
    }
    if !(a.lambda > 0.0 && a.lambda <= 1.0) {
        return Err(usage("--lambda", "must lie in (0, 1]"));
    }
    let split = a.split_grid.as_ref().map_or_else(default_split_grid, |g| g.0.clone());
    if split.iter().any(|t| !(0.0..1.0).contains(t)) {
        return Err(usage("--split-grid", "values must lie in [0, 1)"));
    }
    if let Some(g) = &a.error_variance {
        if g.0.iter().any(|v| *v < 0.0) {
            return Err(usage("--error-variance", "values must be >= 0"));
        }
    }
    if a.alpha.is_some() && kind != Some(SweepKind::Alpha) {
        return Err(usage("--alpha", "only used by sweep-alpha"));
    }
    let snr_grid = || {
        a.snr_db
            .as_ref()
            .map_or_else(|| (0..=6).map(|i| 5.0 * i as f64).collect(), |g| g.0.clone())
    };
    let (axis, error_regime) = match kind {
        Some(SweepKind::ErrorVariance) => {
            let snr = a.snr_db.as_ref().map_or(Ok(15.0), |g| single("--snr-db", g))?;
            let variances = a
                .error_variance
                .as_ref()
                .map_or_else(|| (0..=10).map(|i| round12(0.05 * i as f64)).collect(), |g| g.0.clone());
            (
                SweepAxis::ErrorVariance { snr_db: snr, variances },
                ErrorRegime::Perfect,
            )
        }
        Some(SweepKind::Alpha) => {
            if a.error_variance.is_some() {
                return Err(usage(
                    "--error-variance",
                    "sweep-alpha derives the variance from --alpha",
                ));
            }
            let alpha = a.alpha.unwrap_or(0.6);
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(usage("--alpha", "must be finite and >= 0"));
            }
            (SweepAxis::SnrDb(snr_grid()), ErrorRegime::SnrScaled { alpha })
        }
        Some(SweepKind::Snr) | None => {
            let regime = match &a.error_variance {
                Some(g) => ErrorRegime::FixedVariance(single("--error-variance", g)?),
                None => ErrorRegime::Perfect,
            };
            (SweepAxis::SnrDb(snr_grid()), regime)
        }
    };
    let config = SweepConfig {
        users: a.users,
        tx_antennas: a.tx_antennas,
        axis,
        error_regime,
        schemes: a.schemes.clone().unwrap_or_else(|| SchemeTag::ALL.to_vec()),
        n_channels: a.channels,
        n_error_samples: a.error_samples,
        lambda: a.lambda,
        noise_variance: 1.0,
        power_split_grid: split,
        master_seed: a.seed,
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    Ok(config)
}

fn validate_common(a: &ValidateArgs) -> Result<(), CliError> {
    if a.users < 2 || a.users > a.tx_antennas {
        return Err(usage(
            "--users",
            format_args!("need 2 <= users <= --tx-antennas ({})", a.tx_antennas),
        ));
    }
    if a.channels == Some(0) {
        return Err(usage("--channels", "must be at least 1"));
    }
    if a.samples == 0 {
        return Err(usage("--samples", "must be at least 1"));
    }
    if !(a.lambda > 0.0 && a.lambda <= 1.0) {
        return Err(usage("--lambda", "must lie in (0, 1]"));
    }
    if !(a.error_variance.is_finite() && a.error_variance >= 0.0) {
        return Err(usage("--error-variance", "must be finite and >= 0"));
    }
    if !a.snr_db.is_finite() {
        return Err(usage("--snr-db", "must be finite"));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        Ok(match cli.command {
            Command::SweepSnr(a) => Self::sweep(SweepKind::Snr, a)?,
            Command::SweepErrorVariance(a) => Self::sweep(SweepKind::ErrorVariance, a)?,
            Command::SweepAlpha(a) => Self::sweep(SweepKind::Alpha, a)?,
            Command::ValidateChain(a) => {
                validate_common(&a)?;
                ExperimentSpec::ValidateChain(ChainOptions {
                    users: a.users,
                    tx_antennas: a.tx_antennas,
                    snr_db: a.snr_db,
                    lambda: a.lambda,
                    channels: a.channels.unwrap_or(100),
                    symbols: a.samples,
                    seed: a.seed,
                    beta_error: a.inject_beta_error,
                    ..ChainOptions::default()
                })
            }
            Command::CrossCheckSinr(a) => {
                validate_common(&a)?;
                if a.inject_beta_error.is_some() {
                    return Err(usage("--inject-beta-error", "only used by validate-chain"));
                }
                ExperimentSpec::CrossCheckSinr(CrossCheckOptions {
                    users: a.users,
                    tx_antennas: a.tx_antennas,
                    snr_db: a.snr_db,
                    lambda: a.lambda,
                    error_variance: a.error_variance,
                    channels: a.channels.unwrap_or(5),
                    samples: a.samples,
                    seed: a.seed,
                    ..CrossCheckOptions::default()
                })
            }
            Command::DumpChannels(a) => {
                let config = sweep_config(None, &a)?;
                ExperimentSpec::DumpChannels { config, output: a.out }
            }
        })
    }

    fn sweep(kind: SweepKind, a: SweepArgs) -> Result<Self, CliError> {
        let config = sweep_config(Some(kind), &a)?;
        Ok(ExperimentSpec::Sweep {
            kind,
            config,
            output: a.out,
            format: a.format,
        })
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<ExperimentSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    ExperimentSpec::from_cli(cli)
}

#[derive(Serialize)]
struct DumpedChannel {
    index: usize,
    /// Rows of `Ĥ` as interleaved re, im pairs.
    h_est: Vec<Vec<f64>>,
    h_true: Vec<Vec<f64>>,
    sigma_e2: f64,
}

#[derive(Serialize)]
struct Dump {
    seed: u64,
    users: usize,
    tx_antennas: usize,
    snr_db: f64,
    channels: Vec<DumpedChannel>,
}

fn rows(m: &ComplexMatrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|r| m.row(r).iter().flat_map(|z| [z.re, z.im]).collect())
        .collect()
}

fn dump_channels(config: &SweepConfig) -> thprs_core::Result<Dump> {
    let point = config.points()[0];
    let snr_db = match &config.axis {
        SweepAxis::SnrDb(g) => g[0],
        SweepAxis::ErrorVariance { snr_db, .. } => *snr_db,
    };
    let channels = (0..config.n_channels)
        .map(|ch| {
            let seed = DrawSeed::new(config.master_seed, ch as u64);
            let h = draw_channel(config.users, config.tx_antennas, seed)?;
            let set = draw_estimate_and_errors(&h, point.regime, point.e_tr, 1, seed)?;
            Ok(DumpedChannel {
                index: ch,
                h_est: rows(&set.h_est),
                h_true: rows(&set.h_true),
                sigma_e2: set.sigma_e2,
            })
        })
        .collect::<thprs_core::Result<Vec<_>>>()?;
    Ok(Dump {
        seed: config.master_seed,
        users: config.users,
        tx_antennas: config.tx_antennas,
        snr_db,
        channels,
    })
}

fn write_or_print(output: Option<&PathBuf>, bytes: &[u8], out: &mut dyn Write) -> std::io::Result<()> {
    match output {
        Some(p) => std::fs::write(p, bytes),
        None => out.write_all(bytes),
    }
}

/// Runs a resolved spec, writing reports to `out` and diagnostics to `err`.
pub fn execute(spec: &ExperimentSpec, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let res: Result<i32, String> = (|| match spec {
        ExperimentSpec::Sweep {
            kind,
            config,
            output,
            format,
        } => {
            let result = run_sweep_parallel(config).map_err(|e| e.to_string())?;
            let echo = ConfigEcho::new(kind.name(), config, *format);
            match output {
                Some(path) => {
                    let sidecar = emit_results(&result, config, &echo, *format, path)
                        .map_err(|e| format!("{}: {e}", path.display()))?;
                    let _ = writeln!(
                        err,
                        "wrote {} rows to {} (config in {})",
                        result.cells.len(),
                        path.display(),
                        sidecar.display()
                    );
                }
                None => {
                    let mut buf = Vec::new();
                    match format {
                        Format::Csv => write_csv(&result, config, &mut buf),
                        Format::Structured => write_structured(&result, &echo, &mut buf),
                    }
                    .and_then(|_| out.write_all(&buf))
                    .map_err(|e| e.to_string())?;
                }
            }
            Ok(EXIT_OK)
        }
        ExperimentSpec::ValidateChain(opts) => report_exit(validate_chain(opts), out),
        ExperimentSpec::CrossCheckSinr(opts) => report_exit(cross_check_sinr(opts), out),
        ExperimentSpec::DumpChannels { config, output } => {
            let dump = dump_channels(config).map_err(|e| e.to_string())?;
            let mut json = serde_json::to_vec_pretty(&dump).map_err(|e| e.to_string())?;
            json.push(b'\n');
            write_or_print(output.as_ref(), &json, out).map_err(|e| e.to_string())?;
            Ok(EXIT_OK)
        }
    })();
    match res {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn report_exit(report: thprs_core::Result<crate::validate::Report>, out: &mut dyn Write) -> Result<i32, String> {
    let report = report.map_err(|e| e.to_string())?;
    report.write_to(&mut *out).map_err(|e| e.to_string())?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
}

/// Parses `argv` and runs it. Returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(argv) {
        Ok(spec) => execute(&spec, out, err),
        Err(CliError::Clap(e)) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            e.exit_code()
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
    }
}
