//! Keystream derivation for challenge encryption and response masking.
//!
//! Stand-in construction: a ChaCha8 stream seeded by SHA-256 over a domain
//! tag, the secret, and a tweak (counter or nonce). Deterministic, XOR-
//! involutive, with measured avalanche. This is computationally secure at
//! best — it is **not** information-theoretically secure, and is documented
//! as simulation plumbing, not a cryptographic recommendation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::bits::BitString;

/// ChaCha8 generator keyed by SHA-256 over length-delimited parts.
fn keyed_rng(domain: &str, parts: &[&[u8]]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update((domain.len() as u64).to_be_bytes());
    h.update(domain.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p);
    }
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

fn keystream_bits(domain: &str, secret: &BitString, tweak: &[u8], n_bits: usize) -> BitString {
    let mut rng = keyed_rng(
        domain,
        &[&(secret.len() as u64).to_be_bytes(), &secret.to_packed_bytes(), tweak],
    );
    BitString::random(&mut rng, n_bits)
}

/// Keystream for encrypting an N-bit challenge under `(secret, counter)`.
/// Same inputs give the same stream; encrypt and decrypt are both XOR.
pub fn cipher_stream(secret: &BitString, counter: u64) -> BitString {
    keystream_bits("cipher.stream", secret, &counter.to_be_bytes(), secret.len())
}

/// One-session pad for masking a stored key under a fresh nonce: the masked
/// response is `stored XOR pad_from_nonce(stored, nonce)`.
pub fn pad_from_nonce(secret: &BitString, nonce: &BitString) -> BitString {
    let mut tweak = (nonce.len() as u64).to_be_bytes().to_vec();
    tweak.extend_from_slice(&nonce.to_packed_bytes());
    keystream_bits("ultra.pad", secret, &tweak, secret.len())
}
