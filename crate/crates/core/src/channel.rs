//! Rayleigh channel drops and CSIT error realizations.
//!
//! The transmitter only ever sees the estimate `Ĥ`; the channel a user
//! actually experiences in error realization `m` is `Ĥ + H_e^(m)`. Each
//! realization is drawn from its own keyed stream, so the first 50 of 100
//! realizations do not change when only 50 are requested.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::ComplexMatrix;
use crate::rng::{complex_normal, keyed_rng, Domain};
use crate::{Error, Result};

/// Identifies the random streams belonging to one channel drop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DrawSeed {
    pub master: u64,
    pub channel: u64,
}

impl DrawSeed {
    pub const fn new(master: u64, channel: u64) -> Self {
        Self { master, channel }
    }
}

/// How the CSIT error variance is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrorRegime {
    /// `Ĥ = H`.
    Perfect,
    /// Per-entry error variance independent of the SNR.
    FixedVariance(f64),
    /// `σ_e² = E_tr^(-alpha)`.
    SnrScaled { alpha: f64 },
}

impl ErrorRegime {
    /// Per-entry error variance at total transmit power `e_tr`.
    pub fn variance(&self, e_tr: f64) -> Result<f64> {
        match *self {
            ErrorRegime::Perfect => Ok(0.0),
            ErrorRegime::FixedVariance(v) => {
                if v.is_finite() && v >= 0.0 {
                    Ok(v)
                } else {
                    Err(Error::InvalidVariance(v))
                }
            }
            ErrorRegime::SnrScaled { alpha } => {
                if !(alpha.is_finite() && alpha >= 0.0) {
                    return Err(Error::InvalidParameter("alpha must be finite and >= 0"));
                }
                if !(e_tr.is_finite() && e_tr > 0.0) {
                    return Err(Error::InvalidParameter("transmit power must be positive"));
                }
                Ok(1.0 / e_tr.powf(alpha))
            }
        }
    }

    pub fn is_perfect(&self) -> bool {
        matches!(self, ErrorRegime::Perfect)
    }
}

/// Everything drawn for one channel estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    /// A reference realization `Ĥ + E_ref`, kept for fixtures and dumps.
    /// Rate evaluation uses `h_est + errors[m]` instead.
    pub h_true: ComplexMatrix,
    pub h_est: ComplexMatrix,
    pub errors: Vec<ComplexMatrix>,
    pub sigma_e2: f64,
}

/// Downlink matrix (row `k` is `h_k^H`) with i.i.d. CN(0, 1) entries.
pub fn draw_channel(users: usize, tx_antennas: usize, seed: DrawSeed) -> Result<ComplexMatrix> {
    if users < 2 || users > tx_antennas {
        return Err(Error::DimensionMismatch("need 2 <= users <= tx antennas"));
    }
    let mut rng = keyed_rng(seed.master, Domain::Channel, seed.channel, 0);
    let data = (0..users * tx_antennas).map(|_| complex_normal(&mut rng)).collect();
    ComplexMatrix::new(users, tx_antennas, data)
}

/// Unit-variance error draw for realization `index`. Scaling by `σ_e`
/// gives the realization at any variance, which keeps error variance sweeps
/// on common random numbers.
pub fn unit_error(users: usize, tx_antennas: usize, seed: DrawSeed, index: u64) -> ComplexMatrix {
    let mut rng = keyed_rng(seed.master, Domain::EvalError, seed.channel, index);
    let data = (0..users * tx_antennas).map(|_| complex_normal(&mut rng)).collect();
    ComplexMatrix::new(users, tx_antennas, data).expect("gaussian draws are finite")
}

/// Draws `samples` error realizations around the estimate `h_est`.
///
/// `h_est` is the primary random object (see [`draw_channel`]); the
/// returned `h_true` is one extra realization from an independent stream.
/// Under [`ErrorRegime::Perfect`] all errors are exact zeros and
/// `h_true == h_est`.
pub fn draw_estimate_and_errors(
    h_est: &ComplexMatrix,
    regime: ErrorRegime,
    e_tr: f64,
    samples: usize,
    seed: DrawSeed,
) -> Result<ChannelSet> {
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one error sample"));
    }
    let (k, nt) = (h_est.rows(), h_est.cols());
    let sigma_e2 = regime.variance(e_tr)?;
    if regime.is_perfect() {
        return Ok(ChannelSet {
            h_true: h_est.clone(),
            h_est: h_est.clone(),
            errors: (0..samples).map(|_| ComplexMatrix::zeros(k, nt)).collect(),
            sigma_e2: 0.0,
        });
    }
    let sigma_e = sigma_e2.sqrt();
    let errors = (0..samples as u64)
        .map(|m| unit_error(k, nt, seed, m).scale(sigma_e))
        .collect();
    let mut rng = keyed_rng(seed.master, Domain::ReferenceError, seed.channel, 0);
    let reference = ComplexMatrix::new(k, nt, (0..k * nt).map(|_| complex_normal(&mut rng) * sigma_e).collect())?;
    Ok(ChannelSet {
        h_true: h_est.add(&reference),
        h_est: h_est.clone(),
        errors,
        sigma_e2,
    })
}

/// `E_tr` for an SNR in dB at noise variance `noise_variance`.
pub fn snr_db_to_power(snr_db: f64, noise_variance: f64) -> f64 {
    noise_variance * 10f64.powf(snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_is_deterministic() {
        let a = draw_channel(4, 4, DrawSeed::new(11, 3)).unwrap();
        let b = draw_channel(4, 4, DrawSeed::new(11, 3)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, draw_channel(4, 4, DrawSeed::new(11, 4)).unwrap());
    }

    #[test]
    fn channel_dimension_checks() {
        assert!(draw_channel(5, 4, DrawSeed::new(0, 0)).is_err());
        assert!(draw_channel(1, 4, DrawSeed::new(0, 0)).is_err());
        assert!(draw_channel(2, 4, DrawSeed::new(0, 0)).is_ok());
    }

    #[test]
    fn channel_entry_statistics() {
        let mut sum = crate::C64::new(0.0, 0.0);
        let mut power = 0.0;
        let mut re2 = 0.0;
        let mut n = 0.0;
        for ch in 0..6250 {
            let h = draw_channel(4, 4, DrawSeed::new(5, ch)).unwrap();
            for z in h.as_slice() {
                sum += z;
                power += z.norm_sqr();
                re2 += z.re * z.re;
                n += 1.0;
            }
        }
        let mean = sum / n;
        let var = power / n - mean.norm_sqr();
        assert!(mean.norm() < 0.02, "mean {mean}");
        assert!((0.98..=1.02).contains(&var), "variance {var}");
        assert!((re2 / n - 0.5).abs() < 0.01);
    }

    #[test]
    fn perfect_regime_is_exact() {
        let h = draw_channel(4, 4, DrawSeed::new(1, 0)).unwrap();
        let set = draw_estimate_and_errors(&h, ErrorRegime::Perfect, 10.0, 3, DrawSeed::new(1, 0)).unwrap();
        assert_eq!(set.h_est, h);
        assert_eq!(set.h_true, h);
        assert_eq!(set.sigma_e2, 0.0);
        assert!(set
            .errors
            .iter()
            .all(|e| e.as_slice().iter().all(|z| z.re == 0.0 && z.im == 0.0)));
    }

    #[test]
    fn fixed_variance_errors() {
        let seed = DrawSeed::new(2024, 9);
        let h = draw_channel(4, 4, seed).unwrap();
        let set = draw_estimate_and_errors(&h, ErrorRegime::FixedVariance(0.2), 1.0, 100, seed).unwrap();
        let n = (100 * 16) as f64;
        let pooled: f64 = set.errors.iter().map(|e| e.frobenius_norm_sqr()).sum::<f64>() / n;
        assert!((0.17..=0.23).contains(&pooled), "pooled variance {pooled}");
        assert_eq!(set.errors.len(), 100);
        assert_eq!(set.sigma_e2, 0.2);
    }

    #[test]
    fn prefix_stability() {
        let seed = DrawSeed::new(3, 1);
        let h = draw_channel(4, 4, seed).unwrap();
        let big = draw_estimate_and_errors(&h, ErrorRegime::FixedVariance(0.2), 1.0, 100, seed).unwrap();
        let small = draw_estimate_and_errors(&h, ErrorRegime::FixedVariance(0.2), 1.0, 50, seed).unwrap();
        assert_eq!(&big.errors[..50], &small.errors[..]);
        assert_eq!(big.h_true, small.h_true);
    }

    #[test]
    fn snr_scaled_variance() {
        let e_tr = snr_db_to_power(15.0, 1.0);
        let v = ErrorRegime::SnrScaled { alpha: 0.6 }.variance(e_tr).unwrap();
        assert!((v - 10f64.powf(-0.9)).abs() < 1e-15);
        assert!((v - 0.1259).abs() < 1e-4);
        for snr in [0.0, 5.0, 12.5, 30.0] {
            let e = snr_db_to_power(snr, 1.0);
            let v = ErrorRegime::SnrScaled { alpha: 0.6 }.variance(e).unwrap();
            assert!((v * e.powf(0.6) - 1.0).abs() <= f64::EPSILON);
        }
    }

    #[test]
    fn negative_variance_is_rejected() {
        let h = draw_channel(2, 2, DrawSeed::new(0, 0)).unwrap();
        let r = draw_estimate_and_errors(&h, ErrorRegime::FixedVariance(-0.1), 1.0, 1, DrawSeed::new(0, 0));
        assert_eq!(r, Err(Error::InvalidVariance(-0.1)));
    }
}
