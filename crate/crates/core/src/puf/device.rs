//! Key and lock device state.
//!
//! A matched pair is provisioned by a manufacturer from a single seed: both
//! sides get the same initial secret and the same telegraph-wave generator
//! bank. Everything a device holds is reconstructible from the manufacturer
//! seed, which is what makes the manufacturer-replay and clone experiments
//! in the adversary harness meaningful.
//!
//! Variants differ in lifecycle, not in storage layout:
//! - `Simple`: the provisioned secret is used as-is, forever. The device is
//!   born `Active`.
//! - `Strong`: born `Provisioned`; the first recognition session replaces
//!   the manufacturer secret with a fresh exchanged key (phase `Active`),
//!   after which the manufacturer's knowledge is stale.
//! - `Ultra`: like `Strong`, plus every accepted session renews the key
//!   again, so each secret is used once.
//!
//! Renewal is two-phase: a freshly exchanged candidate is parked in
//! `pending` and only promoted to `stored` on commit. A device may therefore
//! hold two plausible secrets at once, and verifiers try both; that is what
//! keeps an interrupted renewal from bricking a pair.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::nbl::GeneratorBank;
use crate::puf::cipher;
use crate::seed::derive_seed;

/// Protocol family a device pair speaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Ultra,
    Strong,
    Simple,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Ultra => "ultra",
            Variant::Strong => "strong",
            Variant::Simple => "simple",
        }
    }
}

/// Which half of the pair this device is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Lock,
    Key,
}

/// Lifecycle phase.
///
/// `Provisioned` devices still hold the manufacturer secret; `Active`
/// devices have been through first recognition (or are `Simple`, which
/// never leaves the manufacturer secret behind).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Provisioned,
    Active,
}

/// Where the current secret came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyOrigin {
    Manufacturer,
    Exchanged,
}

/// A secret with provenance and a monotone generation counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretKey {
    pub bits: BitString,
    pub origin: KeyOrigin,
    pub generation: u32,
}

/// One side of a key/lock pair.
///
/// `Clone` is deliberate: the adversary harness snapshots devices to model
/// physical cloning, and tests fork state freely.
#[derive(Debug, Clone, PartialEq)]
pub struct PufDevice {
    pub role: Role,
    pub variant: Variant,
    pub phase: Phase,
    /// The committed secret.
    pub stored: SecretKey,
    /// An exchanged candidate awaiting commit (two-phase renewal).
    pub pending: Option<SecretKey>,
    /// Shared telegraph-wave generator bank (public-model assumption: the
    /// bank is not secret; only the bit assignment is).
    pub bank: GeneratorBank,
    /// Monotone counter feeding challenge-encryption keystreams.
    pub session_counter: u64,
    /// Consecutive failed verifications on this lock.
    pub failed_attempts: u32,
    /// `Some(t)`: refuse further sessions after `t` consecutive failures.
    /// `None` disables lockout, which the Monte Carlo forgery drivers need
    /// (they intentionally fail thousands of times in a row).
    pub lockout_threshold: Option<u32>,
}

impl PufDevice {
    /// True once `failed_attempts` has reached the lockout threshold.
    pub fn locked_out(&self) -> bool {
        match self.lockout_threshold {
            Some(t) => self.failed_attempts >= t,
            None => false,
        }
    }

    /// Clear the failure counter (an out-of-band administrative reset).
    pub fn reset_lockout(&mut self) {
        self.failed_attempts = 0;
    }

    /// The keystream counter to use for the next challenge, post-incremented.
    pub(crate) fn next_counter(&mut self) -> u64 {
        let c = self.session_counter;
        self.session_counter += 1;
        c
    }

    /// Promote the pending secret to stored, if any. Returns the new
    /// generation on success.
    pub(crate) fn commit_pending(&mut self) -> Option<u32> {
        let p = self.pending.take()?;
        let generation = p.generation;
        self.stored = p;
        if self.phase == Phase::Provisioned {
            self.phase = Phase::Active;
        }
        Some(generation)
    }
}

/// Output of provisioning: a matched lock/key pair sharing secret and bank.
#[derive(Debug, Clone)]
pub struct ProvisionedPair {
    pub lock: PufDevice,
    pub key: PufDevice,
}

/// Manufacture a matched pair from a single seed.
///
/// The secret is `n_bits` long; the generator bank holds `n_bits` seed
/// pairs. Knowing `manufacturer_seed` reconstructs the entire pair, which
/// the adversary harness uses to model an untrustworthy manufacturer.
pub fn provision(variant: Variant, n_bits: usize, manufacturer_seed: u64) -> Result<ProvisionedPair> {
    if n_bits == 0 {
        return Err(Error::InvalidParam("n_bits must be positive".into()));
    }
    let mut key_rng: ChaCha8Rng =
        crate::seed::seeded_rng(derive_seed(manufacturer_seed, 0, "puf.manufacturer.key"));
    let bits = BitString::random(&mut key_rng, n_bits);
    let secret = SecretKey { bits, origin: KeyOrigin::Manufacturer, generation: 0 };
    let bank = GeneratorBank::from_master(derive_seed(manufacturer_seed, 0, "puf.bank"), n_bits)?;
    let phase = match variant {
        Variant::Simple => Phase::Active,
        Variant::Ultra | Variant::Strong => Phase::Provisioned,
    };
    let template = PufDevice {
        role: Role::Lock,
        variant,
        phase,
        stored: secret,
        pending: None,
        bank,
        session_counter: 0,
        failed_attempts: 0,
        lockout_threshold: None,
    };
    let mut key = template.clone();
    key.role = Role::Key;
    Ok(ProvisionedPair { lock: template, key })
}

/// Fresh uniform secret for renewal fallbacks in tests.
#[allow(dead_code)]
pub(crate) fn random_secret(rng: &mut impl Rng, n_bits: usize, generation: u32) -> SecretKey {
    SecretKey { bits: BitString::random(rng, n_bits), origin: KeyOrigin::Exchanged, generation }
}

/// Expected masked response to an `n`-bit nonce under `key_bits`.
///
/// `raw` skips the masking pad and sends the stored secret in the clear;
/// that mode exists to reproduce the textbook accounting where the secret
/// itself crosses the wire once per use.
pub(crate) fn expected_ultra_response(key_bits: &BitString, nonce: &BitString, raw: bool) -> BitString {
    if raw {
        key_bits.clone()
    } else {
        key_bits
            .xor(&cipher::pad_from_nonce(key_bits, nonce))
            .expect("pad length equals key length by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provisioning_is_deterministic_and_matched() {
        let p1 = provision(Variant::Ultra, 64, 7).unwrap();
        let p2 = provision(Variant::Ultra, 64, 7).unwrap();
        assert_eq!(p1.lock.stored, p1.key.stored);
        assert_eq!(p1.lock.stored, p2.lock.stored);
        assert_eq!(p1.lock.bank.seeds_a(), p2.key.bank.seeds_a());
        assert_eq!(p1.lock.bank.seeds_b(), p2.key.bank.seeds_b());
        assert_eq!(p1.lock.role, Role::Lock);
        assert_eq!(p1.key.role, Role::Key);
        assert_eq!(p1.lock.stored.origin, KeyOrigin::Manufacturer);
        assert_eq!(p1.lock.stored.generation, 0);
        // Different manufacturer seeds give different secrets.
        let p3 = provision(Variant::Ultra, 64, 8).unwrap();
        assert_ne!(p1.lock.stored.bits, p3.lock.stored.bits);
    }

    #[test]
    fn phases_follow_variant() {
        assert_eq!(provision(Variant::Simple, 8, 1).unwrap().lock.phase, Phase::Active);
        assert_eq!(provision(Variant::Strong, 8, 1).unwrap().lock.phase, Phase::Provisioned);
        assert_eq!(provision(Variant::Ultra, 8, 1).unwrap().lock.phase, Phase::Provisioned);
        assert!(provision(Variant::Ultra, 0, 1).is_err());
    }

    #[test]
    fn lockout_counts_and_resets() {
        let mut d = provision(Variant::Ultra, 8, 2).unwrap().lock;
        assert!(!d.locked_out());
        d.lockout_threshold = Some(2);
        d.failed_attempts = 1;
        assert!(!d.locked_out());
        d.failed_attempts = 2;
        assert!(d.locked_out());
        d.reset_lockout();
        assert!(!d.locked_out());
    }

    #[test]
    fn commit_promotes_pending_and_activates() {
        let mut d = provision(Variant::Ultra, 16, 3).unwrap().lock;
        assert_eq!(d.commit_pending(), None);
        let mut rng = crate::seed::seeded_rng(1);
        d.pending = Some(random_secret(&mut rng, 16, 1));
        let expect = d.pending.clone().unwrap();
        assert_eq!(d.commit_pending(), Some(1));
        assert_eq!(d.stored, expect);
        assert_eq!(d.phase, Phase::Active);
        assert!(d.pending.is_none());
    }

    #[test]
    fn masked_response_hides_the_key_and_raw_does_not() {
        let mut rng = crate::seed::seeded_rng(5);
        let key = BitString::random(&mut rng, 64);
        let nonce = BitString::random(&mut rng, 64);
        let masked = expected_ultra_response(&key, &nonce, false);
        assert_ne!(masked, key);
        // Deterministic given (key, nonce): lock recomputes the same value.
        assert_eq!(masked, expected_ultra_response(&key, &nonce, false));
        assert_eq!(expected_ultra_response(&key, &nonce, true), key);
    }
}
