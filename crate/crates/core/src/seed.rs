//! Deterministic seed derivation.
//!
//! Every random stream in the workspace is pinned to a single `u64` master
//! seed through the functions here, so that a run is reproducible from one
//! number and independent streams never alias.
//!
//! The derivation rule is part of the external interface (a second
//! implementation must reproduce identical streams), so it is fixed exactly:
//!
//! * `mix64` is the SplitMix64 finalizer (Steele/Lea/Burke constants).
//! * `splitmix_at(seed, j) = mix64(seed + (j + 1) * GOLDEN_GAMMA)` with
//!   wrapping arithmetic. This is a pure counter-based stream: element `j`
//!   is computable without generating elements `0..j`.
//! * `derive_seed(master, index, label)` folds the label bytes into the
//!   state one byte at a time:
//!   ```text
//!   h = mix64(master XOR 0xA0761D6478BD642F)
//!   h = mix64(h XOR index)
//!   for each byte b of label (UTF-8, in order):
//!       h = mix64(rotl(h, 8) XOR b)
//!   result = mix64(h XOR len(label))
//!   ```

/// Weyl-sequence increment used by SplitMix64 (2^64 / golden ratio, odd).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Salt folded into the master seed before any derivation, so that
/// `derive_seed(m, ...)` never collides with `splitmix_at(m, ...)` streams.
const DERIVE_SALT: u64 = 0xA076_1D64_78BD_642F;

/// SplitMix64 finalizer: a fixed bijective mixing of 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Element `index` of the counter-based SplitMix64 stream for `seed`.
///
/// Random access: `splitmix_at(s, j)` for any `j` without sequential state.
#[inline]
pub fn splitmix_at(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Derive an independent sub-seed from `(master, index, label)`.
///
/// `index` separates numbered instances (trial number, generator number);
/// `label` separates purposes (`"kljn.alice.noise"`, `"puf.nonce"`, ...).
/// Distinct `(index, label)` pairs give statistically independent streams.
pub fn derive_seed(master: u64, index: u64, label: &str) -> u64 {
    let mut h = mix64(master ^ DERIVE_SALT);
    h = mix64(h ^ index);
    for &b in label.as_bytes() {
        h = mix64(h.rotate_left(8) ^ u64::from(b));
    }
    mix64(h ^ (label.len() as u64))
}

/// The workspace-standard generator (ChaCha8) seeded from a derived `u64`.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn mix64_is_deterministic_and_nontrivial() {
        assert_eq!(mix64(0x1234_5678), mix64(0x1234_5678));
        // 0 is the finalizer's only trivial fixed point; nearby inputs mix.
        assert_ne!(mix64(1), mix64(2));
        assert_ne!(mix64(1), 1);
    }

    // Golden values frozen from this implementation; a conforming second
    // implementation of the documented rule must reproduce them bit-exactly.
    #[test]
    fn golden_values_are_stable() {
        assert_eq!(mix64(0), 0);
        assert_eq!(mix64(1), 0x5692_161D_100B_05E5);
        assert_eq!(splitmix_at(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix_at(42, 7), splitmix_at(42, 7));
    }

    #[test]
    fn splitmix_at_matches_sequential_splitmix() {
        // Reference: sequential SplitMix64 advances state by GOLDEN_GAMMA
        // and finalizes. Element j must equal random access at j.
        let seed: u64 = 0xDEAD_BEEF_CAFE_F00D;
        let mut state = seed;
        for j in 0..100u64 {
            state = state.wrapping_add(GOLDEN_GAMMA);
            assert_eq!(splitmix_at(seed, j), mix64(state), "index {j}");
        }
    }

    #[test]
    fn derive_seed_separates_index_and_label() {
        let m = 7;
        let mut seen = HashSet::new();
        for index in 0..64 {
            for label in ["a", "b", "ab", "ba", "kljn.alice.noise", "kljn.bob.noise", ""] {
                assert!(seen.insert(derive_seed(m, index, label)), "collision at {index}/{label}");
            }
        }
        // Label byte order matters (rotation breaks commutativity).
        assert_ne!(derive_seed(m, 0, "xy"), derive_seed(m, 0, "yx"));
        // Different masters give different sub-seeds.
        assert_ne!(derive_seed(1, 0, "x"), derive_seed(2, 0, "x"));
    }

    #[test]
    fn derive_seed_is_not_length_extension_trivial() {
        // Appending a byte must not relate simply to the shorter label.
        let a = derive_seed(9, 0, "abc");
        let b = derive_seed(9, 0, "abcd");
        assert_ne!(a, b);
        assert_ne!(a ^ b, 0x64); // not a plain xor of the extra byte
    }

    #[test]
    fn splitmix_stream_bits_look_balanced() {
        // Cheap sanity check on the top bit used by telegraph generators:
        // over 1e5 indices the bias should be far below 1%.
        let n = 100_000u64;
        let ones: u64 = (0..n).map(|j| splitmix_at(0xABCD, j) >> 63).sum();
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "top-bit fraction {frac}");
    }
}
