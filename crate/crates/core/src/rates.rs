//! SINR and rate evaluation for every scheme.
//!
//! Closed forms assume Gaussian codebooks. The useful symbol power is taken
//! as 1 while the THP perturbed symbols `v` carry power `1/λ`; β already
//! contains `sqrt(λ)`, which is how λ shows up in every THP expression.
//!
//! For imperfect CSIT the THP error terms are evaluated on the β-free
//! private precoder (`F B^-1` for dTHP, `F G B^-1` for cTHP): the receiver
//! normalization by `1/β` cancels the β in the transmitted signal, as in
//! `r = v + G H_e F B^-1 v + G n / β`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{dot, ComplexMatrix};
use crate::precoder::{BaseScheme, PrecoderSet, SchemeTag, ThpStructure};
use crate::rng::{complex_normal, keyed_rng, Domain};
use crate::{Error, Result, C64};

/// Ceiling applied to SINRs whose interference-plus-noise power vanishes.
pub const SINR_CAP: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Csit {
    Perfect,
    /// Evaluated on error realization `m`.
    Imperfect(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinrReport {
    pub scheme: SchemeTag,
    /// `γ_{c,k}` per user, present only when a common stream is transmitted.
    pub common: Option<Vec<f64>>,
    /// `γ_k` (or `γ_{p,k}` after SIC) per user.
    pub private: Vec<f64>,
    pub csit: Csit,
    /// At least one SINR hit [`SINR_CAP`].
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    /// bps/Hz per user.
    pub private_rates: Vec<f64>,
    /// `R_{c,k}` per user when a common stream exists.
    pub common_per_user: Option<Vec<f64>>,
    /// `min_k R_{c,k}`, zero without a common stream.
    pub common_rate: f64,
    pub sum_rate: f64,
}

#[derive(Default)]
struct Ratio {
    saturated: bool,
}

impl Ratio {
    fn of(&mut self, num: f64, den: f64) -> f64 {
        if num <= 0.0 {
            return 0.0;
        }
        let r = num / den;
        if den <= 0.0 || r.is_nan() || r > SINR_CAP {
            self.saturated = true;
            SINR_CAP
        } else {
            r
        }
    }
}

fn check_noise(sigma_n2: f64) -> Result<()> {
    if sigma_n2.is_finite() && sigma_n2 >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter("noise variance must be finite and >= 0"))
    }
}

/// `E_tr - ||p_c||²`, computed from the split so it matches β exactly.
fn private_power(set: &PrecoderSet) -> f64 {
    set.e_tr - set.power_split * set.e_tr
}

fn thp_parts(set: &PrecoderSet) -> Result<(ThpStructure, &crate::linalg::LqFactors, f64)> {
    match (set.structure(), &set.lq, set.beta) {
        (Some(s), Some(lq), Some(beta)) => Ok((s, lq, beta)),
        _ => Err(Error::SchemeMismatch(set.scheme.tag())),
    }
}

/// Perfect-CSIT SINRs of the THP family (cTHP, dTHP, ZF-DPC).
///
/// Private: `λ E' l_kk² / (K σ²)` (dTHP) and `λ E' / (σ² Σ 1/l_ii²)` (cTHP),
/// with `E' = E_tr - ||p_c||²`. Common stream:
/// `K |h_k^H p_c|² / (λ l_kk² E' + K σ²)` (dTHP) and
/// `S |h_k^H p_c|² / (λ E' + σ² S)`, `S = Σ 1/l_ii²` (cTHP).
pub fn sinr_perfect_csit(set: &PrecoderSet, sigma_n2: f64) -> Result<SinrReport> {
    check_noise(sigma_n2)?;
    let (structure, lq, _) = thp_parts(set)?;
    let k = lq.users() as f64;
    let ep = private_power(set);
    let lambda = set.lambda;
    let s = lq.inverse_diag_energy();
    let mut ratio = Ratio::default();

    let private = lq
        .diag
        .iter()
        .map(|l| match structure {
            ThpStructure::Decentralized => ratio.of(lambda * ep * l * l, k * sigma_n2),
            ThpStructure::Centralized => ratio.of(lambda * ep, sigma_n2 * s),
        })
        .collect();

    let common = set.p_common.as_deref().map(|pc| {
        let gains = lq.reconstruct().mul_vec(pc);
        gains
            .iter()
            .zip(&lq.diag)
            .map(|(g, l)| match structure {
                ThpStructure::Decentralized => ratio.of(k * g.norm_sqr(), lambda * l * l * ep + k * sigma_n2),
                ThpStructure::Centralized => ratio.of(s * g.norm_sqr(), lambda * ep + sigma_n2 * s),
            })
            .collect()
    });

    Ok(SinrReport {
        scheme: set.scheme,
        common,
        private,
        csit: Csit::Perfect,
        saturated: ratio.saturated,
    })
}

/// Linear precoding SINRs from received powers on the channel `h_true`:
/// `γ_k = |h_k^H p_k|² / I_k` with `I_k = Σ_{i≠k} |h_k^H p_i|² + σ²` and
/// `γ_{c,k} = |h_k^H p_c|² / (|h_k^H p_k|² + I_k)`.
///
/// Pass `Ĥ + H_e` as `h_true` for imperfect CSIT.
pub fn sinr_perfect_csit_linear(set: &PrecoderSet, h_true: &ComplexMatrix, sigma_n2: f64) -> Result<SinrReport> {
    linear_sinr(set, h_true, sigma_n2, Csit::Perfect)
}

fn linear_sinr(set: &PrecoderSet, h_true: &ComplexMatrix, sigma_n2: f64, csit: Csit) -> Result<SinrReport> {
    check_noise(sigma_n2)?;
    if set.scheme.base != BaseScheme::ZfLinear {
        return Err(Error::SchemeMismatch(set.scheme.tag()));
    }
    let k = set.users();
    if h_true.rows() != k || h_true.cols() != set.p_private.rows() {
        return Err(Error::DimensionMismatch("channel does not match the precoder"));
    }
    let gains = h_true.matmul(&set.p_private);
    let mut ratio = Ratio::default();
    let mut private = Vec::with_capacity(k);
    let mut own = Vec::with_capacity(k);
    let mut interference = Vec::with_capacity(k);
    for u in 0..k {
        let desired = gains[(u, u)].norm_sqr();
        let inter: f64 = (0..k)
            .filter(|&i| i != u)
            .map(|i| gains[(u, i)].norm_sqr())
            .sum::<f64>()
            + sigma_n2;
        private.push(ratio.of(desired, inter));
        own.push(desired);
        interference.push(inter);
    }
    let common = set.p_common.as_deref().map(|pc| {
        h_true
            .mul_vec(pc)
            .iter()
            .enumerate()
            .map(|(u, g)| ratio.of(g.norm_sqr(), own[u] + interference[u]))
            .collect()
    });
    Ok(SinrReport {
        scheme: set.scheme,
        common,
        private,
        csit,
        saturated: ratio.saturated,
    })
}

/// Imperfect-CSIT SINRs of the THP family on the true channel `Ĥ + H_e`.
///
/// With `a_ki = h_{e,k}^H p̃_i` (β-free precoder columns):
///
/// * dTHP private: `|1 + a_kk / l_kk²|² / (Σ_{i≠k} |a_ki|² / l_kk² + K σ² / (λ E' l_kk²))`
/// * cTHP private: `|1 + a_kk|² / (Σ_{i≠k} |a_ki|² + σ² S / (λ E'))`
/// * dTHP common: `(|h_k^H p_c|² / β²) / (|l_kk + a_kk|² + Σ_{i≠k} |a_ki|² + σ² / β²)`
/// * cTHP common: `(|h_k^H p_c|² / β²) / (|1 + a_kk|² + Σ_{i≠k} |a_ki|² + σ² / β²)`
///
/// At `H_e = 0` this reproduces [`sinr_perfect_csit`].
pub fn sinr_imperfect_csit(
    set: &PrecoderSet,
    h_est: &ComplexMatrix,
    h_err: &ComplexMatrix,
    sigma_n2: f64,
    realization: usize,
) -> Result<SinrReport> {
    check_noise(sigma_n2)?;
    let (structure, lq, beta) = thp_parts(set)?;
    let unit = set.p_unit.as_ref().ok_or(Error::SchemeMismatch(set.scheme.tag()))?;
    let k = set.users();
    if h_err.rows() != k || h_err.cols() != unit.rows() || h_est.rows() != k || h_est.cols() != unit.rows() {
        return Err(Error::DimensionMismatch("error realization must be K x N_t"));
    }
    let kf = k as f64;
    let ep = private_power(set);
    let lambda = set.lambda;
    let s = lq.inverse_diag_energy();
    let a = h_err.matmul(unit);
    let cross = |u: usize| -> f64 { (0..k).filter(|&i| i != u).map(|i| a[(u, i)].norm_sqr()).sum() };
    let mut ratio = Ratio::default();

    let private = (0..k)
        .map(|u| {
            let l2 = lq.diag[u] * lq.diag[u];
            match structure {
                ThpStructure::Decentralized => {
                    let num = (C64::new(1.0, 0.0) + a[(u, u)] / l2).norm_sqr();
                    ratio.of(num, cross(u) / l2 + kf * sigma_n2 / (lambda * ep * l2))
                }
                ThpStructure::Centralized => {
                    let num = (C64::new(1.0, 0.0) + a[(u, u)]).norm_sqr();
                    ratio.of(num, cross(u) + sigma_n2 * s / (lambda * ep))
                }
            }
        })
        .collect();

    let common = set.p_common.as_deref().map(|pc| {
        let b2 = beta * beta;
        let true_channel = h_est.add(h_err);
        true_channel
            .mul_vec(pc)
            .iter()
            .enumerate()
            .map(|(u, g)| {
                let own = match structure {
                    ThpStructure::Decentralized => C64::new(lq.diag[u], 0.0) + a[(u, u)],
                    ThpStructure::Centralized => C64::new(1.0, 0.0) + a[(u, u)],
                };
                ratio.of(g.norm_sqr() / b2, own.norm_sqr() + cross(u) + sigma_n2 / b2)
            })
            .collect()
    });

    Ok(SinrReport {
        scheme: set.scheme,
        common,
        private,
        csit: Csit::Imperfect(realization),
        saturated: ratio.saturated,
    })
}

/// Dispatches to the closed form for the set's scheme. `h_err = None` means
/// perfect CSIT.
pub fn evaluate_sinr(
    set: &PrecoderSet,
    h_est: &ComplexMatrix,
    h_err: Option<&ComplexMatrix>,
    sigma_n2: f64,
    realization: usize,
) -> Result<SinrReport> {
    match (set.scheme.base, h_err) {
        (BaseScheme::ZfLinear, None) => linear_sinr(set, h_est, sigma_n2, Csit::Perfect),
        (BaseScheme::ZfLinear, Some(e)) => linear_sinr(set, &h_est.add(e), sigma_n2, Csit::Imperfect(realization)),
        (_, None) => sinr_perfect_csit(set, sigma_n2),
        (_, Some(e)) => sinr_imperfect_csit(set, h_est, e, sigma_n2, realization),
    }
}

/// `R_k = log2(1 + γ_k)`, `R_c = min_k log2(1 + γ_{c,k})`,
/// sum rate `R_c + Σ R_k`.
pub fn rates_from_sinr(report: &SinrReport) -> RateReport {
    let private_rates: Vec<f64> = report.private.iter().map(|g| (1.0 + g).log2()).collect();
    let common_per_user: Option<Vec<f64>> = report
        .common
        .as_ref()
        .map(|c| c.iter().map(|g| (1.0 + g).log2()).collect());
    let common_rate = common_per_user
        .as_ref()
        .map_or(0.0, |c| c.iter().copied().fold(f64::INFINITY, f64::min));
    let sum_rate = common_rate + private_rates.iter().sum::<f64>();
    RateReport {
        private_rates,
        common_per_user,
        common_rate,
        sum_rate,
    }
}

/// Signal-level SINR estimate with per-user relative standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct McSinrEstimate {
    pub report: SinrReport,
    pub private_rel_std_err: Vec<f64>,
    pub common_rel_std_err: Option<Vec<f64>>,
}

#[derive(Clone, Default)]
struct PowerAccumulator {
    des: f64,
    res: f64,
    des2: f64,
    res2: f64,
    cross: f64,
}

impl PowerAccumulator {
    fn push(&mut self, des: f64, res: f64) {
        self.des += des;
        self.res += res;
        self.des2 += des * des;
        self.res2 += res * res;
        self.cross += des * res;
    }

    /// Ratio of means and its delta-method relative standard error.
    fn finish(&self, n: f64, ratio: &mut Ratio) -> (f64, f64) {
        let (ma, mb) = (self.des / n, self.res / n);
        let va = self.des2 / n - ma * ma;
        let vb = self.res2 / n - mb * mb;
        let cov = self.cross / n - ma * mb;
        let sinr = ratio.of(ma, mb);
        let rel = if ma > 0.0 && mb > 0.0 {
            ((va / (ma * ma) + vb / (mb * mb) - 2.0 * cov / (ma * mb)).max(0.0) / n).sqrt()
        } else {
            0.0
        };
        (sinr, rel)
    }
}

/// Estimates SINRs by simulating the received signal.
///
/// Private symbols are `v = s + d` with `s ~ CN(0, 1)` (the data) and an
/// independent Gaussian perturbation `d ~ CN(0, 1/λ - 1)`, so `v` has
/// covariance `λ^-1 I`. The transmit signal is `x = p_c s_c + P v`, the
/// receivers see `(Ĥ + H_e) x + n` and apply `g_k / β` (dTHP), `1 / β`
/// (cTHP) or nothing (linear).
///
/// * private stream: desired term is the `s_k` contribution; the common
///   term (SIC) and `d_k` (receiver modulo) are removed; everything else
///   is interference plus noise.
/// * common stream: desired term is the `s_c` contribution; everything
///   else is interference plus noise.
pub fn estimate_sinr_monte_carlo(
    set: &PrecoderSet,
    h_est: &ComplexMatrix,
    h_err: Option<&ComplexMatrix>,
    sigma_n2: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McSinrEstimate> {
    check_noise(sigma_n2)?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample"));
    }
    let k = set.users();
    let nt = set.p_private.rows();
    if h_est.rows() != k || h_est.cols() != nt || h_err.is_some_and(|e| e.rows() != k || e.cols() != nt) {
        return Err(Error::DimensionMismatch("channel does not match the precoder"));
    }
    let h_true = match h_err {
        Some(e) => h_est.add(e),
        None => h_est.clone(),
    };
    let scale: Vec<f64> = match (set.structure(), set.beta, &set.g, set.scheme.base) {
        (_, _, _, BaseScheme::ZfLinear) => vec![1.0; k],
        (Some(ThpStructure::Decentralized), Some(beta), Some(g), _) => g.iter().map(|g| g / beta).collect(),
        (Some(ThpStructure::Centralized), Some(beta), _, _) => vec![1.0 / beta; k],
        _ => return Err(Error::SchemeMismatch(set.scheme.tag())),
    };
    let perturbation_std = if set.scheme.is_thp_family() {
        (1.0 / set.lambda - 1.0).max(0.0).sqrt()
    } else {
        0.0
    };
    let noise_std = sigma_n2.sqrt();

    let through = h_true.matmul(&set.p_private);
    let common_gain: Option<Vec<C64>> = set.p_common.as_deref().map(|pc| h_true.mul_vec(pc));
    let mut rng = keyed_rng(seed, Domain::MonteCarlo, 0, 0);
    let mut private_acc = vec![PowerAccumulator::default(); k];
    let mut common_acc = vec![PowerAccumulator::default(); k];
    let mut s = vec![C64::new(0.0, 0.0); k];
    let mut d = vec![C64::new(0.0, 0.0); k];
    let mut v = vec![C64::new(0.0, 0.0); k];

    for _ in 0..n_samples {
        let s_c = complex_normal(&mut rng);
        for u in 0..k {
            s[u] = complex_normal(&mut rng);
            d[u] = complex_normal(&mut rng) * perturbation_std;
            v[u] = s[u] + d[u];
        }
        for u in 0..k {
            let noise = complex_normal(&mut rng) * noise_std;
            let common_term = common_gain
                .as_ref()
                .map_or(C64::new(0.0, 0.0), |g| g[u] * s_c * scale[u]);
            let private_term = dot(through.row(u), &v) * scale[u];
            let r = common_term + private_term + noise * scale[u];

            let desired = through[(u, u)] * s[u] * scale[u];
            let removed = if set.scheme.is_thp_family() {
                d[u]
            } else {
                C64::new(0.0, 0.0)
            };
            let residual = r - common_term - desired - removed;
            private_acc[u].push(desired.norm_sqr(), residual.norm_sqr());
            if common_gain.is_some() {
                common_acc[u].push(common_term.norm_sqr(), (r - common_term).norm_sqr());
            }
        }
    }

    let n = n_samples as f64;
    let mut ratio = Ratio::default();
    let (private, private_rel_std_err): (Vec<f64>, Vec<f64>) =
        private_acc.iter().map(|a| a.finish(n, &mut ratio)).unzip();
    let (common, common_rel_std_err) = if common_gain.is_some() {
        let (c, e): (Vec<f64>, Vec<f64>) = common_acc.iter().map(|a| a.finish(n, &mut ratio)).unzip();
        (Some(c), Some(e))
    } else {
        (None, None)
    };
    let csit = if h_err.is_some() {
        Csit::Imperfect(0)
    } else {
        Csit::Perfect
    };
    Ok(McSinrEstimate {
        report: SinrReport {
            scheme: set.scheme,
            common,
            private,
            csit,
            saturated: ratio.saturated,
        },
        private_rel_std_err,
        common_rel_std_err,
    })
}

/// Closed form against Monte-Carlo, per user.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossCheck {
    /// `(closed - mc) / mc` per user.
    pub private_gap: Vec<f64>,
    pub common_gap: Option<Vec<f64>>,
    pub tolerance: f64,
    /// Some gap exceeded the tolerance.
    pub flagged: bool,
}

impl CrossCheck {
    pub fn max_abs_gap(&self) -> f64 {
        self.private_gap
            .iter()
            .chain(self.common_gap.iter().flatten())
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

pub fn cross_check(closed: &SinrReport, mc: &SinrReport, tolerance: f64) -> CrossCheck {
    let gap = |a: &[f64], b: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                if *y > 0.0 {
                    (x - y) / y
                } else if *x > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .collect()
    };
    let private_gap = gap(&closed.private, &mc.private);
    let common_gap = match (&closed.common, &mc.common) {
        (Some(a), Some(b)) => Some(gap(a, b)),
        _ => None,
    };
    let mut out = CrossCheck {
        private_gap,
        common_gap,
        tolerance,
        flagged: false,
    };
    let gap = out.max_abs_gap();
    out.flagged = gap.is_nan() || gap > tolerance;
    out
}
