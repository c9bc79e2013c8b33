//! Seed derivation. Every random draw is keyed by (master seed, domain,
//! index, index) so cells can be evaluated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub(crate) enum Domain {
    Channel = 1,
    EvalError = 2,
    ReferenceError = 3,
    MonteCarlo = 4,
    Symbols = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn keyed_rng(master: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(master);
    for (i, word) in [domain as u64, a, b, 0].into_iter().enumerate() {
        state = splitmix64(state ^ word);
        key[i * 8..(i + 1) * 8].copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Circularly symmetric complex Gaussian with unit variance.
pub(crate) fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}
