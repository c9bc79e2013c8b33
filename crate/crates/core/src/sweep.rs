//! Sample-average sum rates and sweep orchestration.
//!
//! For one channel estimate the average sum rate (ASR) is the mean sum rate
//! over `M` error realizations. The ergodic sum rate (ESR) is the mean ASR
//! over independent estimates. RS schemes pick their common power split per
//! estimate by grid search, with every split seeing the same realizations.
//!
//! A sweep is a grid of pure cells keyed by (grid point, channel index);
//! [`evaluate_channel`] computes one and [`assemble`] reduces them in a fixed
//! order, so any evaluation order gives bit-identical results.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{draw_channel, snr_db_to_power, unit_error, DrawSeed, ErrorRegime};
use crate::linalg::ComplexMatrix;
use crate::precoder::{ChannelFactors, SchemeTag};
use crate::rates::{evaluate_sinr, rates_from_sinr};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Transmit power, THP power loss and noise level of one evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkParams {
    pub e_tr: f64,
    pub lambda: f64,
    pub noise_variance: f64,
}

/// Error realizations seen by every scheme and split of one estimate.
#[derive(Clone, Debug, PartialEq)]
pub enum ErrorSamples {
    Perfect,
    Realizations(Vec<ComplexMatrix>),
}

impl ErrorSamples {
    /// Realizations `sqrt(σ_e²) Z_m` for `regime` at power `e_tr`.
    pub fn draw(
        users: usize,
        tx_antennas: usize,
        regime: ErrorRegime,
        e_tr: f64,
        samples: usize,
        seed: DrawSeed,
    ) -> Result<Self> {
        if regime.is_perfect() {
            return Ok(ErrorSamples::Perfect);
        }
        let sigma_e = regime.variance(e_tr)?.sqrt();
        Ok(ErrorSamples::Realizations(
            (0..samples as u64)
                .map(|m| unit_error(users, tx_antennas, seed, m).scale(sigma_e))
                .collect(),
        ))
    }

    fn scaled(units: &[ComplexMatrix], variance: f64) -> Self {
        let sigma_e = variance.sqrt();
        ErrorSamples::Realizations(units.iter().map(|u| u.scale(sigma_e)).collect())
    }
}

/// Sum rate of each realization, in order.
pub fn sum_rate_log(
    factors: &ChannelFactors,
    scheme: SchemeTag,
    link: LinkParams,
    power_split: f64,
    errors: &ErrorSamples,
) -> Result<Vec<f64>> {
    let set = factors.build(scheme, link.e_tr, link.lambda, power_split)?;
    let eval = |err: Option<&ComplexMatrix>, m: usize| -> Result<f64> {
        Ok(rates_from_sinr(&evaluate_sinr(&set, &factors.h_est, err, link.noise_variance, m)?).sum_rate)
    };
    match errors {
        ErrorSamples::Perfect => Ok(vec![eval(None, 0)?]),
        ErrorSamples::Realizations(errs) => errs.iter().enumerate().map(|(m, e)| eval(Some(e), m)).collect(),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn asr_of(
    factors: &ChannelFactors,
    scheme: SchemeTag,
    link: LinkParams,
    power_split: f64,
    errors: &ErrorSamples,
) -> Result<f64> {
    Ok(mean(&sum_rate_log(factors, scheme, link, power_split, errors)?))
}

/// ASR of `scheme` on the estimate `h_est`. The perfect regime evaluates a
/// single deterministic sum rate.
pub fn average_sum_rate(
    h_est: &ComplexMatrix,
    scheme: SchemeTag,
    link: LinkParams,
    power_split: f64,
    regime: ErrorRegime,
    samples: usize,
    seed: DrawSeed,
) -> Result<f64> {
    let factors = ChannelFactors::new(h_est)?;
    let errors = ErrorSamples::draw(h_est.rows(), h_est.cols(), regime, link.e_tr, samples, seed)?;
    asr_of(&factors, scheme, link, power_split, &errors)
}

/// Chosen common power split and its ASR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub split: f64,
    pub asr: f64,
}

fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(&bad) = grid.iter().find(|t| !(0.0..1.0).contains(*t)) {
        return Err(Error::InvalidPowerSplit(bad));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

fn best_split(
    factors: &ChannelFactors,
    scheme: SchemeTag,
    link: LinkParams,
    errors: &ErrorSamples,
    grid: &[f64],
) -> Result<SplitChoice> {
    let mut best: Option<SplitChoice> = None;
    for &t in grid {
        let asr = asr_of(factors, scheme, link, t, errors)?;
        if best.is_none_or(|b| asr > b.asr) {
            best = Some(SplitChoice { split: t, asr });
        }
    }
    best.ok_or(Error::EmptyGrid)
}

/// Grid search over the common power split; ties go to the smaller split.
pub fn optimize_power_split(
    h_est: &ComplexMatrix,
    scheme: SchemeTag,
    link: LinkParams,
    regime: ErrorRegime,
    samples: usize,
    grid: &[f64],
    seed: DrawSeed,
) -> Result<SplitChoice> {
    if !scheme.rs {
        return Err(Error::SchemeMismatch(scheme.tag()));
    }
    let grid = sorted_grid(grid)?;
    let factors = ChannelFactors::new(h_est)?;
    let errors = ErrorSamples::draw(h_est.rows(), h_est.cols(), regime, link.e_tr, samples, seed)?;
    best_split(&factors, scheme, link, &errors, &grid)
}

/// What a sweep varies along its x axis.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepAxis {
    /// SNR grid in dB; errors follow the config's regime.
    SnrDb(Vec<f64>),
    /// Fixed SNR, varying fixed error variance.
    ErrorVariance { snr_db: f64, variances: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum XKind {
    SnrDb,
    ErrorVariance,
    SnrDbAlpha,
}

impl XKind {
    pub const fn as_str(&self) -> &'static str {
        match self {
            XKind::SnrDb => "snr_db",
            XKind::ErrorVariance => "error_variance",
            XKind::SnrDbAlpha => "snr_db_alpha",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub users: usize,
    pub tx_antennas: usize,
    pub axis: SweepAxis,
    /// Error model along an SNR axis; ignored by the error variance axis.
    pub error_regime: ErrorRegime,
    pub schemes: Vec<SchemeTag>,
    pub n_channels: usize,
    pub n_error_samples: usize,
    pub lambda: f64,
    pub noise_variance: f64,
    pub power_split_grid: Vec<f64>,
    pub master_seed: u64,
}

/// `0, 0.05, ..., 0.95`.
pub fn default_split_grid() -> Vec<f64> {
    (0..20).map(|i| i as f64 / 20.0).collect()
}

impl Default for SweepConfig {
    /// Four users, four antennas, 50 estimates with 100 error realizations
    /// each, λ = 0.75, unit noise, perfect CSIT over 0 to 30 dB.
    fn default() -> Self {
        Self {
            users: 4,
            tx_antennas: 4,
            axis: SweepAxis::SnrDb((0..=6).map(|i| 5.0 * i as f64).collect()),
            error_regime: ErrorRegime::Perfect,
            schemes: SchemeTag::ALL.to_vec(),
            n_channels: 50,
            n_error_samples: 100,
            lambda: 0.75,
            noise_variance: 1.0,
            power_split_grid: default_split_grid(),
            master_seed: 1,
        }
    }
}

/// One x-axis position with its resolved power and error regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub e_tr: f64,
    pub regime: ErrorRegime,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users < 2 || self.users > self.tx_antennas {
            return Err(Error::DimensionMismatch("need 2 <= users <= tx antennas"));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidParameter("scheme list is empty"));
        }
        if self.n_channels == 0 || self.n_error_samples == 0 {
            return Err(Error::InvalidParameter("channel and error sample counts must be >= 1"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidParameter("power loss factor must lie in (0, 1]"));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(Error::InvalidParameter("noise variance must be positive"));
        }
        sorted_grid(&self.power_split_grid)?;
        let grid = match &self.axis {
            SweepAxis::SnrDb(g) => g,
            SweepAxis::ErrorVariance { variances, .. } => variances,
        };
        if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("sweep grid must be nonempty and finite"));
        }
        for p in self.points() {
            p.regime.variance(p.e_tr)?;
        }
        Ok(())
    }

    /// Error realizations per estimate; always 1 under perfect CSIT.
    pub fn effective_error_samples(&self) -> usize {
        match (&self.axis, self.error_regime) {
            (SweepAxis::SnrDb(_), ErrorRegime::Perfect) => 1,
            _ => self.n_error_samples,
        }
    }

    pub fn x_kind(&self) -> XKind {
        match (&self.axis, self.error_regime) {
            (SweepAxis::ErrorVariance { .. }, _) => XKind::ErrorVariance,
            (SweepAxis::SnrDb(_), ErrorRegime::SnrScaled { .. }) => XKind::SnrDbAlpha,
            (SweepAxis::SnrDb(_), _) => XKind::SnrDb,
        }
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        match &self.axis {
            SweepAxis::SnrDb(grid) => grid
                .iter()
                .map(|&x| SweepPoint {
                    x,
                    e_tr: snr_db_to_power(x, self.noise_variance),
                    regime: self.error_regime,
                })
                .collect(),
            SweepAxis::ErrorVariance { snr_db, variances } => variances
                .iter()
                .map(|&v| SweepPoint {
                    x: v,
                    e_tr: snr_db_to_power(*snr_db, self.noise_variance),
                    regime: ErrorRegime::FixedVariance(v),
                })
                .collect(),
        }
    }

    fn link(&self, point: &SweepPoint) -> LinkParams {
        LinkParams {
            e_tr: point.e_tr,
            lambda: self.lambda,
            noise_variance: self.noise_variance,
        }
    }
}

/// Result of one scheme on one channel estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelOutcome {
    pub asr: f64,
    pub split: f64,
}

/// Evaluates every configured scheme on channel `channel` at `point`.
///
/// The estimate and the unit error draws depend only on
/// `(master_seed, channel)`, so all schemes, splits and grid points share
/// them.
pub fn evaluate_channel(config: &SweepConfig, point: &SweepPoint, channel: usize) -> Result<Vec<ChannelOutcome>> {
    evaluate_schemes(config, point, channel, &config.schemes)
}

fn evaluate_schemes(
    config: &SweepConfig,
    point: &SweepPoint,
    channel: usize,
    schemes: &[SchemeTag],
) -> Result<Vec<ChannelOutcome>> {
    let seed = DrawSeed::new(config.master_seed, channel as u64);
    let h_est = draw_channel(config.users, config.tx_antennas, seed)?;
    let factors = ChannelFactors::new(&h_est)?;
    let errors = if point.regime.is_perfect() {
        ErrorSamples::Perfect
    } else {
        let units: Vec<ComplexMatrix> = (0..config.effective_error_samples() as u64)
            .map(|m| unit_error(config.users, config.tx_antennas, seed, m))
            .collect();
        ErrorSamples::scaled(&units, point.regime.variance(point.e_tr)?)
    };
    let link = config.link(point);
    let grid = sorted_grid(&config.power_split_grid)?;
    schemes
        .iter()
        .map(|&scheme| {
            if scheme.rs {
                let c = best_split(&factors, scheme, link, &errors, &grid)?;
                Ok(ChannelOutcome {
                    asr: c.asr,
                    split: c.split,
                })
            } else {
                Ok(ChannelOutcome {
                    asr: asr_of(&factors, scheme, link, 0.0, &errors)?,
                    split: 0.0,
                })
            }
        })
        .collect()
}

/// ESR of one scheme at one grid point, with per-channel detail.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub scheme: SchemeTag,
    pub x: f64,
    pub esr: f64,
    /// 95% normal-approximation half-width of the ESR.
    pub ci_halfwidth: f64,
    pub chosen_split_mean: f64,
    pub per_channel_asr: Vec<f64>,
    pub per_channel_split: Vec<f64>,
    /// Number of closed-form sum-rate evaluations behind this cell.
    pub rate_evaluations: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub x_kind: XKind,
    /// Ordered by grid point, then by scheme as configured.
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cell(&self, scheme: SchemeTag, x: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.scheme == scheme && c.x == x)
    }

    /// Cells of one scheme in grid order.
    pub fn curve(&self, scheme: SchemeTag) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| c.scheme == scheme).collect()
    }
}

/// Mean and 95% half-width.
pub fn mean_and_halfwidth(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, Z95 * (var / n).sqrt())
}

fn make_cell(config: &SweepConfig, scheme: SchemeTag, x: f64, outcomes: &[ChannelOutcome]) -> CellResult {
    let per_channel_asr: Vec<f64> = outcomes.iter().map(|o| o.asr).collect();
    let per_channel_split: Vec<f64> = outcomes.iter().map(|o| o.split).collect();
    let (esr, ci_halfwidth) = mean_and_halfwidth(&per_channel_asr);
    let splits = if scheme.rs { config.power_split_grid.len() } else { 1 };
    CellResult {
        scheme,
        x,
        esr,
        ci_halfwidth,
        chosen_split_mean: mean(&per_channel_split),
        per_channel_asr,
        per_channel_split,
        rate_evaluations: (outcomes.len() * splits * config.effective_error_samples()) as u64,
    }
}

/// Builds the sweep result from `outcomes[point][channel][scheme]`.
pub fn assemble(config: &SweepConfig, outcomes: &[Vec<Vec<ChannelOutcome>>]) -> SweepResult {
    let mut cells = Vec::new();
    for (point, per_channel) in config.points().iter().zip(outcomes) {
        for (s, &scheme) in config.schemes.iter().enumerate() {
            let column: Vec<ChannelOutcome> = per_channel.iter().map(|o| o[s]).collect();
            cells.push(make_cell(config, scheme, point.x, &column));
        }
    }
    SweepResult {
        x_kind: config.x_kind(),
        cells,
    }
}

/// ESR of `scheme` at `point` over the configured channels.
pub fn ergodic_sum_rate(config: &SweepConfig, scheme: SchemeTag, point: &SweepPoint) -> Result<CellResult> {
    config.validate()?;
    let outcomes = (0..config.n_channels)
        .map(|c| Ok(evaluate_schemes(config, point, c, &[scheme])?[0]))
        .collect::<Result<Vec<_>>>()?;
    Ok(make_cell(config, scheme, point.x, &outcomes))
}

/// Serial sweep over every grid point, channel and scheme.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let outcomes = config
        .points()
        .iter()
        .map(|p| {
            (0..config.n_channels)
                .map(|c| evaluate_channel(config, p, c))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(config, &outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            axis: SweepAxis::SnrDb(vec![10.0]),
            n_channels: 3,
            n_error_samples: 5,
            error_regime: ErrorRegime::FixedVariance(0.1),
            ..SweepConfig::default()
        }
    }

    #[test]
    fn default_grid() {
        let g = default_split_grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[19], 0.95);
    }

    #[test]
    fn validation() {
        assert!(SweepConfig::default().validate().is_ok());
        let bad = SweepConfig {
            power_split_grid: vec![],
            ..SweepConfig::default()
        };
        assert_eq!(bad.validate(), Err(Error::EmptyGrid));
        let bad = SweepConfig {
            power_split_grid: vec![1.0],
            ..SweepConfig::default()
        };
        assert_eq!(bad.validate(), Err(Error::InvalidPowerSplit(1.0)));
        let bad = SweepConfig {
            n_channels: 0,
            ..SweepConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SweepConfig {
            axis: SweepAxis::SnrDb(vec![]),
            ..SweepConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn perfect_forces_single_sample() {
        assert_eq!(SweepConfig::default().effective_error_samples(), 1);
        assert_eq!(small().effective_error_samples(), 5);
    }

    #[test]
    fn x_kinds() {
        assert_eq!(SweepConfig::default().x_kind(), XKind::SnrDb);
        let c = SweepConfig {
            error_regime: ErrorRegime::SnrScaled { alpha: 0.6 },
            ..SweepConfig::default()
        };
        assert_eq!(c.x_kind(), XKind::SnrDbAlpha);
        let c = SweepConfig {
            axis: SweepAxis::ErrorVariance {
                snr_db: 15.0,
                variances: vec![0.1],
            },
            ..SweepConfig::default()
        };
        assert_eq!(c.x_kind(), XKind::ErrorVariance);
        assert_eq!(c.points()[0].regime, ErrorRegime::FixedVariance(0.1));
    }

    #[test]
    fn run_sweep_matches_ergodic_cells() {
        let cfg = small();
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.cells.len(), 8);
        let point = cfg.points()[0];
        for scheme in [SchemeTag::DTHP_RS, SchemeTag::ZF] {
            let cell = ergodic_sum_rate(&cfg, scheme, &point).unwrap();
            assert_eq!(&cell, res.cell(scheme, 10.0).unwrap());
        }
    }

    #[test]
    fn empty_grid_rejected() {
        let h = draw_channel(4, 4, DrawSeed::new(1, 0)).unwrap();
        let link = LinkParams {
            e_tr: 10.0,
            lambda: 0.75,
            noise_variance: 1.0,
        };
        let r = optimize_power_split(
            &h,
            SchemeTag::DTHP_RS,
            link,
            ErrorRegime::Perfect,
            1,
            &[],
            DrawSeed::new(1, 0),
        );
        assert_eq!(r, Err(Error::EmptyGrid));
    }
}
