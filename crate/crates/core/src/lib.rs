//! Link-level models for multiuser MISO downlink precoding.
//!
//! The crate covers zero-forcing linear precoding, Tomlinson-Harashima
//! precoding in its centralized (cTHP) and decentralized (dTHP) forms, the
//! zero-forcing dirty-paper-coding rate approximation, and rate-splitting
//! (RS) variants of all of them where one user's message is split into a
//! common stream decoded by everyone and a private stream.
//!
//! Everything here is pure computation on `core` + `alloc`: channel and error
//! draws are keyed by explicit seeds, precoders are built from a channel
//! estimate, and SINRs and rates are evaluated in closed form (with a
//! signal-level Monte-Carlo estimator as a cross-check). File formats, the
//! command line and parallel sweep execution live in the `thprs` crate.
//!
//! ```
//! use thprs_core::channel::{draw_channel, DrawSeed};
//! use thprs_core::precoder::{build_precoder_set, SchemeTag};
//! use thprs_core::rates::{rates_from_sinr, sinr_perfect_csit};
//!
//! let h = draw_channel(4, 4, DrawSeed::new(7, 0)).unwrap();
//! let e_tr = 10f64.powf(1.5);
//! let set = build_precoder_set(&h, SchemeTag::DTHP_RS, e_tr, 0.75, 0.1).unwrap();
//! let rates = rates_from_sinr(&sinr_perfect_csit(&set, 1.0).unwrap());
//! assert!(rates.sum_rate > 0.0);
//! ```

#![no_std]

extern crate alloc;

pub mod chain;
pub mod channel;
mod error;
pub mod linalg;
pub mod precoder;
pub mod rates;
mod rng;
pub mod sweep;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
