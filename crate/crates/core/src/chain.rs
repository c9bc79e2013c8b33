//! Symbol-level THP transmit/receive chain.
//!
//! The rate engine never consumes these outputs. The chain checks the filter
//! algebra end to end and measures the power loss factor λ empirically.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::linalg::{dot, ComplexMatrix};
use crate::precoder::{PrecoderSet, ThpStructure};
use crate::rng::{complex_normal, keyed_rng, Domain};
use crate::{Error, Result, C64};

/// Square modulo lattice `τ(Z + jZ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModuloLattice {
    tau: f64,
}

impl ModuloLattice {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(Self { tau })
        } else {
            Err(Error::InvalidParameter("modulo base must be positive"))
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Square QAM with unit average energy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qam4,
    Qam16,
    Qam64,
}

impl Constellation {
    pub const fn order(&self) -> usize {
        match self {
            Constellation::Qam4 => 4,
            Constellation::Qam16 => 16,
            Constellation::Qam64 => 64,
        }
    }

    fn side(&self) -> usize {
        match self {
            Constellation::Qam4 => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 8,
        }
    }

    /// Distance between neighbouring coordinates, `sqrt(6 / (M - 1))`.
    pub fn spacing(&self) -> f64 {
        (6.0 / (self.order() as f64 - 1.0)).sqrt()
    }

    /// Standard modulo base `τ = Δ sqrt(M)`.
    pub fn lattice(&self) -> ModuloLattice {
        ModuloLattice {
            tau: self.spacing() * self.side() as f64,
        }
    }

    /// Coordinate values `±Δ/2, ±3Δ/2, ...`.
    pub fn coordinates(&self) -> Vec<f64> {
        let d = self.spacing();
        let side = self.side() as f64;
        (0..self.side()).map(|i| (i as f64 - (side - 1.0) / 2.0) * d).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> C64 {
        let coords = self.coordinates();
        let side = coords.len();
        C64::new(coords[rng.random_range(0..side)], coords[rng.random_range(0..side)])
    }
}

fn reduce_component(x: f64, tau: f64) -> f64 {
    // `%` is exact; the corrections are exact by Sterbenz's lemma.
    let mut r = x % tau;
    if r >= tau / 2.0 {
        r -= tau;
    } else if r < -tau / 2.0 {
        r += tau;
    }
    r
}

/// Reduces real and imaginary parts independently into `[-τ/2, τ/2)`.
pub fn modulo_reduce(z: C64, lattice: ModuloLattice) -> C64 {
    C64::new(reduce_component(z.re, lattice.tau), reduce_component(z.im, lattice.tau))
}

/// Output of [`thp_encode`].
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    /// Feedback outputs.
    pub w: Vec<C64>,
    /// Lattice perturbation with `B w = s + d`.
    pub d: Vec<C64>,
}

/// Successive feedback encoding
/// `w_k = mod(s_k - Σ_{i<k} b_ki w_i)`.
///
/// The first stream has no feedback term and is passed through unreduced,
/// so `d_1 = 0`.
pub fn thp_encode(s: &[C64], b: &ComplexMatrix, lattice: ModuloLattice) -> Result<Encoded> {
    let k = s.len();
    if b.rows() != k || b.cols() != k {
        return Err(Error::DimensionMismatch("feedback filter must be K x K"));
    }
    if (0..k).any(|i| (b[(i, i)] - C64::new(1.0, 0.0)).norm() >= 1e-12) {
        return Err(Error::NonUnitDiagonal);
    }
    let tau = lattice.tau;
    let mut w = vec![C64::new(0.0, 0.0); k];
    let mut d = vec![C64::new(0.0, 0.0); k];
    for i in 0..k {
        if i == 0 {
            w[0] = s[0];
            continue;
        }
        let pre = s[i] - dot(&b.row(i)[..i], &w[..i]);
        w[i] = modulo_reduce(pre, lattice);
        let shift = w[i] - pre;
        d[i] = C64::new((shift.re / tau).round() * tau, (shift.im / tau).round() * tau);
    }
    Ok(Encoded { w, d })
}

/// Every intermediate signal of one chain run.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    pub s: Vec<C64>,
    pub v: Vec<C64>,
    pub d: Vec<C64>,
    pub w: Vec<C64>,
    pub x: Vec<C64>,
    /// Receiver outputs after the structure's scaling.
    pub received: Vec<C64>,
    /// The scaled noise the receivers should see: `G n / β` (dTHP) or
    /// `n / β` (cTHP).
    pub expected_noise: Vec<C64>,
}

impl ChainTrace {
    /// `max_k |received_k - v_k - expected_noise_k|`.
    pub fn cancellation_residual(&self) -> f64 {
        self.received
            .iter()
            .zip(&self.v)
            .zip(&self.expected_noise)
            .map(|((r, v), n)| (r - v - n).norm())
            .fold(0.0, f64::max)
    }
}

/// Runs private streams through `x = P v`, the channel and the receivers.
///
/// Only private streams are modelled; a common stream, if the set has one,
/// is not transmitted.
pub fn run_perfect_csit_chain(
    set: &PrecoderSet,
    h_true: &ComplexMatrix,
    noise: &[C64],
    s: &[C64],
    lattice: ModuloLattice,
) -> Result<ChainTrace> {
    let structure = match set.scheme.base {
        crate::precoder::BaseScheme::Cthp => ThpStructure::Centralized,
        crate::precoder::BaseScheme::Dthp => ThpStructure::Decentralized,
        _ => return Err(Error::SchemeMismatch(set.scheme.tag())),
    };
    let (b, g, beta) = match (&set.b, &set.g, set.beta) {
        (Some(b), Some(g), Some(beta)) => (b, g, beta),
        _ => return Err(Error::SchemeMismatch(set.scheme.tag())),
    };
    let k = set.users();
    if s.len() != k || noise.len() != k || h_true.rows() != k || h_true.cols() != set.p_private.rows() {
        return Err(Error::DimensionMismatch("chain inputs do not match the precoder"));
    }

    let Encoded { w, d } = thp_encode(s, b, lattice)?;
    let v: Vec<C64> = s.iter().zip(&d).map(|(a, b)| a + b).collect();
    let x = set.p_private.mul_vec(&v);
    let y: Vec<C64> = h_true.mul_vec(&x).iter().zip(noise).map(|(a, n)| a + n).collect();
    let (received, expected_noise) = match structure {
        ThpStructure::Decentralized => (
            y.iter().zip(g).map(|(y, g)| y * (g / beta)).collect(),
            noise.iter().zip(g).map(|(n, g)| n * (g / beta)).collect(),
        ),
        ThpStructure::Centralized => (
            y.iter().map(|y| y / beta).collect(),
            noise.iter().map(|n| n / beta).collect(),
        ),
    };
    Ok(ChainTrace {
        s: s.to_vec(),
        v,
        d,
        w,
        x,
        received,
        expected_noise,
    })
}

/// Empirical power loss `λ̂ = Σ|s_k|² / Σ|w_k|²` over the streams that carry
/// a feedback term (`k >= 2`), from `n_symbols` random symbols.
pub fn measure_power_loss(
    constellation: Constellation,
    b: &ComplexMatrix,
    lattice: ModuloLattice,
    n_symbols: usize,
    seed: u64,
) -> Result<f64> {
    let k = b.rows();
    let first = if k > 1 { 1 } else { 0 };
    let blocks = n_symbols.div_ceil(k).max(1);
    let mut rng = keyed_rng(seed, Domain::Symbols, 0, 0);
    let mut s = vec![C64::new(0.0, 0.0); k];
    let (mut s_pow, mut w_pow) = (0.0, 0.0);
    for _ in 0..blocks {
        for z in s.iter_mut() {
            *z = constellation.sample(&mut rng);
        }
        let enc = thp_encode(&s, b, lattice)?;
        s_pow += s[first..].iter().map(C64::norm_sqr).sum::<f64>();
        w_pow += enc.w[first..].iter().map(C64::norm_sqr).sum::<f64>();
    }
    Ok(s_pow / w_pow)
}

/// Random unit-diagonal lower-triangular feedback filter with i.i.d.
/// CN(0, 1) entries below the diagonal.
pub fn random_feedback_filter<R: Rng + ?Sized>(users: usize, rng: &mut R) -> ComplexMatrix {
    let mut data = vec![C64::new(0.0, 0.0); users * users];
    for i in 0..users {
        data[i * users + i] = C64::new(1.0, 0.0);
        for j in 0..i {
            data[i * users + j] = complex_normal(rng);
        }
    }
    ComplexMatrix::new(users, users, data).expect("gaussian draws are finite")
}

/// Like [`measure_power_loss`], but draws a fresh [`random_feedback_filter`]
/// for every block so the estimate does not depend on one particular `B`.
pub fn measure_power_loss_random_feedback(
    constellation: Constellation,
    users: usize,
    lattice: ModuloLattice,
    n_symbols: usize,
    seed: u64,
) -> Result<f64> {
    if users < 2 {
        return Err(Error::DimensionMismatch("need at least two streams"));
    }
    let blocks = n_symbols.div_ceil(users).max(1);
    let mut rng = keyed_rng(seed, Domain::Symbols, 1, 0);
    let mut s = vec![C64::new(0.0, 0.0); users];
    let (mut s_pow, mut w_pow) = (0.0, 0.0);
    for _ in 0..blocks {
        let b = random_feedback_filter(users, &mut rng);
        for z in s.iter_mut() {
            *z = constellation.sample(&mut rng);
        }
        let enc = thp_encode(&s, &b, lattice)?;
        s_pow += s[1..].iter().map(C64::norm_sqr).sum::<f64>();
        w_pow += enc.w[1..].iter().map(C64::norm_sqr).sum::<f64>();
    }
    Ok(s_pow / w_pow)
}
