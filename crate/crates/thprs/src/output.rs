//! CSV and structured (JSON) result files plus the config sidecar.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thprs_core::channel::ErrorRegime;
use thprs_core::sweep::{CellResult, SweepAxis, SweepConfig, SweepResult};

pub const CSV_HEADER: [&str; 7] = [
    "scheme",
    "x_value",
    "x_kind",
    "esr_bps_hz",
    "ci_halfwidth",
    "chosen_split_mean",
    "seed",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Structured,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Structured => "structured",
        }
    }
}

#[derive(Debug, Serialize, PartialEq)]
pub struct RegimeEcho {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Every parameter that affects the numbers of a sweep.
#[derive(Debug, Serialize, PartialEq)]
pub struct ConfigEcho {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub users: usize,
    pub tx_antennas: usize,
    pub x_kind: &'static str,
    pub x_values: Vec<f64>,
    /// Fixed SNR of an error variance sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub error_regime: RegimeEcho,
    pub schemes: Vec<&'static str>,
    pub channels: usize,
    pub error_samples: usize,
    pub effective_error_samples: usize,
    pub lambda: f64,
    pub noise_variance: f64,
    pub split_grid: Vec<f64>,
    pub seed: u64,
    pub format: &'static str,
}

impl ConfigEcho {
    pub fn new(subcommand: &str, config: &SweepConfig, format: Format) -> Self {
        let (x_values, snr_db) = match &config.axis {
            SweepAxis::SnrDb(g) => (g.clone(), None),
            SweepAxis::ErrorVariance { snr_db, variances } => (variances.clone(), Some(*snr_db)),
        };
        let error_regime = match (&config.axis, config.error_regime) {
            (SweepAxis::ErrorVariance { .. }, _) => RegimeEcho {
                kind: "fixed_variance_grid",
                error_variance: None,
                alpha: None,
            },
            (_, ErrorRegime::Perfect) => RegimeEcho {
                kind: "perfect",
                error_variance: None,
                alpha: None,
            },
            (_, ErrorRegime::FixedVariance(v)) => RegimeEcho {
                kind: "fixed_variance",
                error_variance: Some(v),
                alpha: None,
            },
            (_, ErrorRegime::SnrScaled { alpha }) => RegimeEcho {
                kind: "snr_scaled",
                error_variance: None,
                alpha: Some(alpha),
            },
        };
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            users: config.users,
            tx_antennas: config.tx_antennas,
            x_kind: config.x_kind().as_str(),
            x_values,
            snr_db,
            error_regime,
            schemes: config.schemes.iter().map(|s| s.tag()).collect(),
            channels: config.n_channels,
            error_samples: config.n_error_samples,
            effective_error_samples: config.effective_error_samples(),
            lambda: config.lambda,
            noise_variance: config.noise_variance,
            split_grid: config.power_split_grid.clone(),
            seed: config.master_seed,
            format: format.as_str(),
        }
    }
}

/// Cells ordered by scheme tag, then x.
pub fn sorted_cells(result: &SweepResult) -> Vec<&CellResult> {
    let mut cells: Vec<&CellResult> = result.cells.iter().collect();
    cells.sort_by(|a, b| a.scheme.tag().cmp(b.scheme.tag()).then(a.x.total_cmp(&b.x)));
    cells
}

pub fn write_csv<W: Write>(result: &SweepResult, config: &SweepConfig, writer: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    let kind = result.x_kind.as_str();
    let seed = config.master_seed.to_string();
    for c in sorted_cells(result) {
        w.write_record([
            c.scheme.tag(),
            &c.x.to_string(),
            kind,
            &c.esr.to_string(),
            &c.ci_halfwidth.to_string(),
            &c.chosen_split_mean.to_string(),
            &seed,
        ])?;
    }
    w.flush()
}

#[derive(Serialize)]
struct StructuredCell<'a> {
    scheme: &'static str,
    x_value: f64,
    esr_bps_hz: f64,
    ci_halfwidth: f64,
    chosen_split_mean: f64,
    per_channel_asr: &'a [f64],
    per_channel_split: &'a [f64],
}

#[derive(Serialize)]
struct Structured<'a> {
    config: &'a ConfigEcho,
    x_kind: &'static str,
    cells: Vec<StructuredCell<'a>>,
}

/// Config echo plus every cell with its per-channel ASRs.
pub fn write_structured<W: Write>(result: &SweepResult, echo: &ConfigEcho, mut writer: W) -> io::Result<()> {
    let doc = Structured {
        config: echo,
        x_kind: result.x_kind.as_str(),
        cells: sorted_cells(result)
            .into_iter()
            .map(|c| StructuredCell {
                scheme: c.scheme.tag(),
                x_value: c.x,
                esr_bps_hz: c.esr,
                ci_halfwidth: c.ci_halfwidth,
                chosen_split_mean: c.chosen_split_mean,
                per_channel_asr: &c.per_channel_asr,
                per_channel_split: &c.per_channel_split,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut writer, &doc)?;
    writer.write_all(b"\n")
}

/// `results.csv` -> `results.config.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("config.json")
}

/// Writes the results to `out` and the config echo next to it. Returns the
/// sidecar path.
pub fn emit_results(
    result: &SweepResult,
    config: &SweepConfig,
    echo: &ConfigEcho,
    format: Format,
    out: &Path,
) -> io::Result<PathBuf> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(result, config, &mut buf)?,
        Format::Structured => write_structured(result, echo, &mut buf)?,
    }
    fs::write(out, buf)?;
    let sidecar = sidecar_path(out);
    let mut json = serde_json::to_vec_pretty(echo)?;
    json.push(b'\n');
    fs::write(&sidecar, json)?;
    Ok(sidecar)
}
