//! Simulation library for statistical-physics based secure key exchange and
//! hardware key/lock authentication.
//!
//! The crate models three cooperating layers:
//!
//! * [`kljn`] — a two-resistor thermal-noise loop in which two parties agree
//!   on secret bits by publicly observing only noise statistics. Cycles where
//!   both parties chose the same resistor are discarded; mixed cycles keep one
//!   key bit each. A cross-comparison defense detects current injection.
//! * [`nbl`] — random telegraph-wave string verification: proving two bit
//!   strings are equal (or unequal) by exchanging products of ±1 telegraph
//!   waves instead of the strings themselves. A forged or mismatched string
//!   survives an m-step stream with probability 2^-m.
//! * [`puf`] — key/lock devices built on the two layers above, in three
//!   protocol variants with different tamper/cloning resistance, plus durable
//!   device state storage.
//!
//! Supporting layers: [`noise`] (telegraph and Johnson-noise sources),
//! [`stats`] (mean-square and variance-ratio tests), [`transport`] (in-memory
//! frame channel with fault injection), [`adversary`] (attack harness that
//! measures the claimed security probabilities), [`seed`] (deterministic seed
//! derivation), and [`bits`] (fixed-length bit strings).
//!
//! Everything is deterministic given a master seed: equal seeds produce
//! byte-identical transcripts regardless of thread count.

#![forbid(unsafe_code)]

pub mod adversary;
pub mod bits;
pub mod error;
pub mod kljn;
pub mod nbl;
pub mod noise;
pub mod puf;
pub mod seed;
pub mod stats;
pub mod transport;

pub use bits::BitString;
pub use error::{Error, Result};
