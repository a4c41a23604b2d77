//! Probabilistic string verification over random telegraph waves.
//!
//! Both parties hold a public bank of `2N` telegraph generators — two per
//! bit position, labeled A and B — and a secret assignment saying which of
//! the pair represents the high bit value at each position. To prove it
//! holds a string without revealing it, a prover emits, for `m` consecutive
//! cycles, the *product* of the N generators its string selects (one per
//! position). The product of independent fair telegraph waves is itself a
//! fair telegraph wave, orthogonal to every factor, so the stream leaks
//! nothing about individual positions. A verifier recomputes the product
//! from its own string: any differing position flips the selected generator
//! at that position, decorrelating the two products completely, so each step
//! agrees with probability exactly 1/2 and a mismatched string survives `m`
//! steps with probability `2^-m`.
//!
//! Two computation routes are implemented independently and cross-checked:
//! `Product` multiplies ±1 amplitudes and rejects on a −1 product;
//! `Xor` works on logic bits under the canonical mapping `+1 <-> 0`,
//! `-1 <-> 1` and rejects on any XOR mismatch.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::noise::RtwGenerator;
use crate::seed::derive_seed;

/// Which verification route a stream uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RtwMode {
    /// ±1 amplitudes; verifier multiplies and rejects on −1.
    Product,
    /// 0/1 bits; verifier XORs and rejects on 1.
    Xor,
}

impl RtwMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RtwMode::Product => "product",
            RtwMode::Xor => "xor",
        }
    }

    fn wire_byte(self) -> u8 {
        match self {
            RtwMode::Product => 0x00,
            RtwMode::Xor => 0x01,
        }
    }

    fn from_wire_byte(b: u8) -> Result<Self> {
        match b {
            0x00 => Ok(RtwMode::Product),
            0x01 => Ok(RtwMode::Xor),
            other => Err(Error::WireFormat(format!("unknown stream mode byte 0x{other:02x}"))),
        }
    }
}

/// Public bank of `2N` telegraph generators: one A and one B per position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorBank {
    seeds_a: Vec<u64>,
    seeds_b: Vec<u64>,
}

impl GeneratorBank {
    /// Derive a bank deterministically from a master seed. The bank is
    /// public; only assignments made from it are secret.
    pub fn from_master(master: u64, n_bits: usize) -> Result<Self> {
        if n_bits == 0 {
            return Err(Error::InvalidParam("generator bank needs n_bits >= 1".into()));
        }
        let seeds_a = (0..n_bits).map(|i| derive_seed(master, i as u64, "bank.a")).collect();
        let seeds_b = (0..n_bits).map(|i| derive_seed(master, i as u64, "bank.b")).collect();
        Self::from_seeds(seeds_a, seeds_b)
    }

    /// Build from explicit seed lists; all `2N` seeds must be distinct.
    pub fn from_seeds(seeds_a: Vec<u64>, seeds_b: Vec<u64>) -> Result<Self> {
        if seeds_a.is_empty() || seeds_a.len() != seeds_b.len() {
            return Err(Error::LengthMismatch { expected: seeds_a.len(), actual: seeds_b.len() });
        }
        let mut seen = HashSet::new();
        for s in seeds_a.iter().chain(&seeds_b) {
            if !seen.insert(*s) {
                return Err(Error::InvalidParam(format!("duplicate generator seed {s:#x}")));
            }
        }
        Ok(Self { seeds_a, seeds_b })
    }

    pub fn n_bits(&self) -> usize {
        self.seeds_a.len()
    }

    pub fn seeds_a(&self) -> &[u64] {
        &self.seeds_a
    }

    pub fn seeds_b(&self) -> &[u64] {
        &self.seeds_b
    }

    /// Seed of the generator encoding value `bit` at `position` under
    /// `assignment`.
    fn seed_for(&self, assignment: &Assignment, position: usize, bit: bool) -> u64 {
        if assignment.selects_b(position, bit) {
            self.seeds_b[position]
        } else {
            self.seeds_a[position]
        }
    }
}

/// Secret per-position choice of which generator (A or B) represents the
/// high bit value. Derived bijectively from an N-bit secret: secret bit 0
/// keeps A as the high generator, secret bit 1 swaps in B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    high_is_b: Vec<bool>,
}

impl Assignment {
    pub fn n_bits(&self) -> usize {
        self.high_is_b.len()
    }

    /// Whether encoding value `bit` at `position` selects generator B.
    fn selects_b(&self, position: usize, bit: bool) -> bool {
        bit == self.high_is_b[position]
    }
}

/// Build the secret assignment from an N-bit secret.
pub fn assign_from_secret(bank: &GeneratorBank, secret: &BitString) -> Result<Assignment> {
    if secret.len() != bank.n_bits() {
        return Err(Error::LengthMismatch { expected: bank.n_bits(), actual: secret.len() });
    }
    Ok(Assignment { high_is_b: secret.as_bools().to_vec() })
}

/// ±1 product route: multiply the selected generators' amplitudes at cycle `j`.
pub fn hyperspace_product_amplitude(
    bank: &GeneratorBank,
    assignment: &Assignment,
    bits: &BitString,
    j: u64,
) -> Result<i8> {
    check_lengths(bank, assignment, bits)?;
    let mut w: i8 = 1;
    for (i, bit) in bits.iter().enumerate() {
        w *= RtwGenerator::new(bank.seed_for(assignment, i, bit)).amplitude_at(j);
    }
    Ok(w)
}

/// XOR logic route: fold the selected generators' logic bits at cycle `j`
/// under the canonical mapping `+1 <-> 0`, `-1 <-> 1`.
pub fn hyperspace_product_bit(
    bank: &GeneratorBank,
    assignment: &Assignment,
    bits: &BitString,
    j: u64,
) -> Result<bool> {
    check_lengths(bank, assignment, bits)?;
    let mut w = false;
    for (i, bit) in bits.iter().enumerate() {
        w ^= RtwGenerator::new(bank.seed_for(assignment, i, bit)).bit_at(j);
    }
    Ok(w)
}

fn check_lengths(bank: &GeneratorBank, assignment: &Assignment, bits: &BitString) -> Result<()> {
    if assignment.n_bits() != bank.n_bits() {
        return Err(Error::LengthMismatch { expected: bank.n_bits(), actual: assignment.n_bits() });
    }
    if bits.len() != bank.n_bits() {
        return Err(Error::LengthMismatch { expected: bank.n_bits(), actual: bits.len() });
    }
    Ok(())
}

/// An `m`-step verification stream starting at an absolute cycle index.
///
/// Values are stored in canonical bit form (`true <-> -1 <-> xor-1`); the
/// mode tag records which computation route produced them and which route a
/// verifier must use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtwStream {
    pub mode: RtwMode,
    pub start: u64,
    values: Vec<bool>,
}

impl RtwStream {
    /// Build a product-mode stream from ±1 amplitudes.
    pub fn from_amplitudes(start: u64, amplitudes: &[i8]) -> Result<Self> {
        let mut values = Vec::with_capacity(amplitudes.len());
        for &a in amplitudes {
            match a {
                1 => values.push(false),
                -1 => values.push(true),
                other => {
                    return Err(Error::InvalidParam(format!(
                        "telegraph amplitude must be +1 or -1, got {other}"
                    )))
                }
            }
        }
        Ok(Self { mode: RtwMode::Product, start, values })
    }

    /// Build an xor-mode stream from logic bits.
    pub fn from_bits(start: u64, bits: Vec<bool>) -> Self {
        Self { mode: RtwMode::Xor, start, values: bits }
    }

    pub fn len(&self) -> u32 {
        self.values.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Amplitude view (`+1`/`-1`) of step `idx`.
    pub fn amplitude(&self, idx: usize) -> i8 {
        if self.values[idx] {
            -1
        } else {
            1
        }
    }

    /// Bit view of step `idx`.
    pub fn bit(&self, idx: usize) -> bool {
        self.values[idx]
    }

    /// Wire format: `mode (1 byte) || m (u32 BE) || start (u64 BE) ||
    /// ceil(m/8) payload bytes`, bits packed most-significant-first, unused
    /// trailing bits zero.
    pub fn encode_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + self.values.len().div_ceil(8));
        out.push(self.mode.wire_byte());
        out.extend_from_slice(&self.len().to_be_bytes());
        out.extend_from_slice(&self.start.to_be_bytes());
        out.extend_from_slice(&BitString::new(self.values.clone()).to_packed_bytes());
        out
    }

    /// Parse the wire format; rejects unknown modes, zero-length streams,
    /// wrong byte counts, and nonzero padding bits.
    pub fn decode_wire(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 13 {
            return Err(Error::WireFormat(format!(
                "stream header needs 13 bytes, got {}",
                bytes.len()
            )));
        }
        let mode = RtwMode::from_wire_byte(bytes[0])?;
        let m = u32::from_be_bytes(bytes[1..5].try_into().expect("4 bytes"));
        if m == 0 {
            return Err(Error::WireFormat("stream length m must be >= 1".into()));
        }
        let start = u64::from_be_bytes(bytes[5..13].try_into().expect("8 bytes"));
        let payload = &bytes[13..];
        let expected = (m as usize).div_ceil(8);
        if payload.len() != expected {
            return Err(Error::WireFormat(format!(
                "stream payload needs {expected} bytes for m={m}, got {}",
                payload.len()
            )));
        }
        let values = BitString::from_packed_bytes(payload, m as usize)?;
        Ok(Self { mode, start, values: values.as_bools().to_vec() })
    }
}

/// Encode `m` steps of the hyperspace product of `bits`, starting at
/// absolute cycle `start`, using the route selected by `mode`.
pub fn encode_string(
    bank: &GeneratorBank,
    assignment: &Assignment,
    bits: &BitString,
    m: u32,
    start: u64,
    mode: RtwMode,
) -> Result<RtwStream> {
    if m == 0 {
        return Err(Error::InvalidParam("stream length m must be >= 1".into()));
    }
    check_lengths(bank, assignment, bits)?;
    match mode {
        RtwMode::Product => {
            let amps: Vec<i8> = (0..u64::from(m))
                .map(|k| hyperspace_product_amplitude(bank, assignment, bits, start + k))
                .collect::<Result<_>>()?;
            RtwStream::from_amplitudes(start, &amps)
        }
        RtwMode::Xor => {
            let bits_out: Vec<bool> = (0..u64::from(m))
                .map(|k| hyperspace_product_bit(bank, assignment, bits, start + k))
                .collect::<Result<_>>()?;
            Ok(RtwStream::from_bits(start, bits_out))
        }
    }
}

/// A plausible-looking but meaningless stream: a single fresh telegraph
/// wave. Emitted instead of a real response when a challenge is garbled, so
/// decryption failure is not observable to the challenger beyond a certain
/// reject.
pub fn decoy_stream(seed: u64, m: u32, start: u64, mode: RtwMode) -> Result<RtwStream> {
    if m == 0 {
        return Err(Error::InvalidParam("stream length m must be >= 1".into()));
    }
    let g = RtwGenerator::new(seed);
    let values: Vec<bool> = (0..u64::from(m)).map(|k| g.bit_at(start + k)).collect();
    Ok(RtwStream { mode, start, values })
}

/// Verdict of a stream verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accept,
    Reject,
}

/// Result of verifying an incoming stream against a local string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    /// Steps examined: `m` on accept; on reject, the count up to and
    /// including the first mismatch (verification short-circuits).
    pub steps_checked: u32,
    pub first_mismatch: Option<u32>,
    /// `2^-m` when accepted — the probability a mismatched string would
    /// have survived all `m` steps. Absent on reject.
    pub residual_false_accept: Option<f64>,
}

/// Verify an incoming stream against the locally recomputed product of
/// `local_bits`. The verifier's `mode` must match the stream's; product
/// mode rejects on any step where local x incoming = −1, xor mode on any
/// XOR mismatch — two independent routes to the same decision.
pub fn verify_stream(
    bank: &GeneratorBank,
    assignment: &Assignment,
    local_bits: &BitString,
    incoming: &RtwStream,
    mode: RtwMode,
) -> Result<VerifyReport> {
    if incoming.is_empty() {
        return Err(Error::InvalidParam("stream length m must be >= 1".into()));
    }
    if incoming.mode != mode {
        return Err(Error::ModeMismatch { expected: mode.as_str(), actual: incoming.mode.as_str() });
    }
    check_lengths(bank, assignment, local_bits)?;
    let m = incoming.len();
    let mut checked = 0u32;
    let mut first_mismatch = None;
    for k in 0..m {
        checked += 1;
        let j = incoming.start + u64::from(k);
        let mismatch = match mode {
            RtwMode::Product => {
                let local = hyperspace_product_amplitude(bank, assignment, local_bits, j)?;
                local * incoming.amplitude(k as usize) == -1
            }
            RtwMode::Xor => {
                let local = hyperspace_product_bit(bank, assignment, local_bits, j)?;
                local ^ incoming.bit(k as usize)
            }
        };
        if mismatch {
            first_mismatch = Some(k);
            break;
        }
    }
    Ok(match first_mismatch {
        Some(_) => VerifyReport {
            verdict: Verdict::Reject,
            steps_checked: checked,
            first_mismatch,
            residual_false_accept: None,
        },
        None => VerifyReport {
            verdict: Verdict::Accept,
            steps_checked: m,
            first_mismatch: None,
            residual_false_accept: Some(false_accept_probability(m)),
        },
    })
}

/// Probability that a string differing in at least one bit survives an
/// `m`-step verification: exactly `2^-m`.
pub fn false_accept_probability(m: u32) -> f64 {
    (-(f64::from(m))).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, seed: u64) -> (GeneratorBank, Assignment, BitString) {
        let bank = GeneratorBank::from_master(seed, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
        let secret = BitString::random(&mut rng, n);
        let assignment = assign_from_secret(&bank, &secret).unwrap();
        let bits = BitString::random(&mut rng, n);
        (bank, assignment, bits)
    }

    #[test]
    fn bank_seeds_are_distinct_and_checked() {
        let bank = GeneratorBank::from_master(1, 64).unwrap();
        assert_eq!(bank.n_bits(), 64);
        let mut all: Vec<u64> = bank.seeds_a().to_vec();
        all.extend_from_slice(bank.seeds_b());
        let unique: HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), 128);
        // Explicit duplicate is rejected.
        assert!(GeneratorBank::from_seeds(vec![1, 2], vec![3, 1]).is_err());
        assert!(GeneratorBank::from_seeds(vec![], vec![]).is_err());
        assert!(GeneratorBank::from_master(9, 0).is_err());
    }

    #[test]
    fn assignment_follows_secret_bits() {
        // All-zero secret keeps A as the high generator everywhere;
        // complementing the secret flips every position.
        let bank = GeneratorBank::from_master(2, 16).unwrap();
        let zero = assign_from_secret(&bank, &BitString::zeros(16)).unwrap();
        for i in 0..16 {
            assert!(!zero.selects_b(i, true), "position {i} should select A for high");
            assert!(zero.selects_b(i, false), "position {i} should select B for low");
        }
        let ones = assign_from_secret(&bank, &BitString::zeros(16).complement()).unwrap();
        for i in 0..16 {
            assert!(ones.selects_b(i, true));
            assert!(!ones.selects_b(i, false));
        }
        // Injectivity: distinct secrets give distinct assignments.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s1 = BitString::random(&mut rng, 16);
        let mut s2 = s1.clone();
        s2.set(7, !s2.get(7));
        assert_ne!(
            assign_from_secret(&bank, &s1).unwrap(),
            assign_from_secret(&bank, &s2).unwrap()
        );
        // Length mismatch rejected.
        assert!(assign_from_secret(&bank, &BitString::zeros(15)).is_err());
    }

    #[test]
    fn single_bit_product_equals_selected_generator() {
        // N = 1: the product is just the one selected generator.
        let bank = GeneratorBank::from_master(7, 1).unwrap();
        let asg = assign_from_secret(&bank, &BitString::zeros(1)).unwrap();
        // Secret 0 => A is high. Encoding bit true selects A.
        let ga = RtwGenerator::new(bank.seeds_a()[0]);
        let gb = RtwGenerator::new(bank.seeds_b()[0]);
        let high = BitString::new(vec![true]);
        let low = BitString::new(vec![false]);
        for j in 0..64 {
            assert_eq!(
                hyperspace_product_amplitude(&bank, &asg, &high, j).unwrap(),
                ga.amplitude_at(j)
            );
            assert_eq!(
                hyperspace_product_amplitude(&bank, &asg, &low, j).unwrap(),
                gb.amplitude_at(j)
            );
        }
    }

    #[test]
    fn product_is_orthogonal_to_factors_and_outsiders() {
        // <W * R_k> over 1e6 cycles within +/-4e-3, both
        // for a factor generator and an unrelated one.
        let (bank, asg, bits) = setup(8, 11);
        let factor = RtwGenerator::new(bank.seed_for(&asg, 0, bits.get(0)));
        let outsider = RtwGenerator::new(0xDDDD_0001);
        let j_total = 1_000_000u64;
        let mut sum_factor = 0i64;
        let mut sum_out = 0i64;
        for j in 0..j_total {
            let w = hyperspace_product_amplitude(&bank, &asg, &bits, j).unwrap();
            sum_factor += i64::from(w * factor.amplitude_at(j));
            sum_out += i64::from(w * outsider.amplitude_at(j));
        }
        let corr_factor = sum_factor as f64 / j_total as f64;
        let corr_out = sum_out as f64 / j_total as f64;
        assert!(corr_factor.abs() < 0.004, "factor correlation {corr_factor}");
        assert!(corr_out.abs() < 0.004, "outsider correlation {corr_out}");
    }

    #[test]
    fn identical_inputs_give_identical_streams() {
        // Determinism across devices.
        let (bank, asg, bits) = setup(16, 13);
        let s1 = encode_string(&bank, &asg, &bits, 200, 5000, RtwMode::Product).unwrap();
        let s2 = encode_string(&bank, &asg, &bits, 200, 5000, RtwMode::Product).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.encode_wire(), s2.encode_wire());
    }

    #[test]
    fn one_differing_bit_flips_steps_independently_with_prob_half() {
        // Per-step mismatch rate for strings differing in one bit:
        // 0.5 +/- 0.015 (3 sigma) over 1e4 steps.
        let (bank, asg, bits) = setup(16, 17);
        let mut other = bits.clone();
        other.set(3, !other.get(3));
        let m = 10_000u32;
        let sa = encode_string(&bank, &asg, &bits, m, 0, RtwMode::Product).unwrap();
        let sb = encode_string(&bank, &asg, &other, m, 0, RtwMode::Product).unwrap();
        let mismatches =
            (0..m as usize).filter(|&k| sa.amplitude(k) != sb.amplitude(k)).count();
        let frac = mismatches as f64 / f64::from(m);
        assert!((frac - 0.5).abs() < 0.015, "mismatch fraction {frac}");
    }

    #[test]
    fn adjacent_step_agreement_is_uniform() {
        // Lag-1 independence: over 1e5 steps, consecutive
        // (agree, agree) pair counts across the 4 categories pass a
        // chi-square uniformity test; critical value at p = 1e-3 with 3
        // degrees of freedom is 16.27.
        let (bank, asg, bits) = setup(12, 23);
        let mut other = bits.clone();
        other.set(0, !other.get(0));
        let m = 100_000u32;
        let sa = encode_string(&bank, &asg, &bits, m, 777, RtwMode::Xor).unwrap();
        let sb = encode_string(&bank, &asg, &other, m, 777, RtwMode::Xor).unwrap();
        let agree: Vec<bool> = (0..m as usize).map(|k| sa.bit(k) == sb.bit(k)).collect();
        let mut counts = [0u64; 4];
        for pair in agree.chunks_exact(2) {
            counts[usize::from(pair[0]) * 2 + usize::from(pair[1])] += 1;
        }
        let total: u64 = counts.iter().sum();
        let expect = total as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
        assert!(chi2 < 16.27, "chi-square {chi2}, counts {counts:?}");
    }

    #[test]
    fn matching_strings_always_accept() {
        // Completeness: zero false rejects, any m, both modes.
        let (bank, asg, bits) = setup(32, 29);
        for mode in [RtwMode::Product, RtwMode::Xor] {
            for m in [1u32, 2, 13, 83] {
                let stream = encode_string(&bank, &asg, &bits, m, 42, mode).unwrap();
                let rep = verify_stream(&bank, &asg, &bits, &stream, mode).unwrap();
                assert_eq!(rep.verdict, Verdict::Accept, "mode {mode:?} m {m}");
                assert_eq!(rep.steps_checked, m);
                assert_eq!(rep.first_mismatch, None);
                let residual = rep.residual_false_accept.unwrap();
                assert_eq!(residual, 0.5f64.powi(m as i32));
            }
        }
    }

    #[test]
    fn residual_at_m_83_matches_analytic_value() {
        // 2^-83 ~ 1.03e-25.
        let p = false_accept_probability(83);
        assert!((p - 1.033_975_765_691_284_6e-25).abs() / p < 1e-12);
        assert_eq!(false_accept_probability(0), 1.0);
        assert_eq!(false_accept_probability(1), 0.5);
    }

    #[test]
    fn differing_strings_are_rejected_quickly() {
        // At m = 20 a differing string survives with prob 2^-20;
        // over 1e6 trials the expected accept count is ~0.95, so measuring
        // the reject rate >= 1 - 2e-6 (at most 2 accepts) checks the bound
        // (fixed seed).
        let (bank, asg, _) = setup(8, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let mut accepts = 0u32;
        for trial in 0..1_000_000u64 {
            let a = BitString::random(&mut rng, 8);
            // Flip a random non-empty subset via a random nonzero mask.
            let b = loop {
                let mask = BitString::random(&mut rng, 8);
                if mask.iter().any(|x| x) {
                    break a.xor(&mask).unwrap();
                }
            };
            let stream = encode_string(&bank, &asg, &b, 20, trial * 1000, RtwMode::Product).unwrap();
            let rep = verify_stream(&bank, &asg, &a, &stream, RtwMode::Product).unwrap();
            if rep.verdict == Verdict::Accept {
                accepts += 1;
            } else {
                assert!(rep.first_mismatch.unwrap() < 20);
            }
        }
        assert!(accepts <= 2, "accepted {accepts} of 1e6 differing strings at m=20");
    }

    #[test]
    fn modes_compute_the_same_stream_bits() {
        // Dual-route equivalence: product and xor encoders agree under the
        // canonical mapping, step by step, for random inputs.
        let mut rng = ChaCha8Rng::seed_from_u64(600);
        for trial in 0..50u64 {
            let n = rng.gen_range(1..=24);
            let bank = GeneratorBank::from_master(trial, n).unwrap();
            let secret = BitString::random(&mut rng, n);
            let asg = assign_from_secret(&bank, &secret).unwrap();
            let bits = BitString::random(&mut rng, n);
            let start = rng.gen::<u64>() >> 1;
            let sp = encode_string(&bank, &asg, &bits, 64, start, RtwMode::Product).unwrap();
            let sx = encode_string(&bank, &asg, &bits, 64, start, RtwMode::Xor).unwrap();
            for k in 0..64usize {
                assert_eq!(sp.amplitude(k) == -1, sx.bit(k), "trial {trial} step {k}");
            }
        }
    }

    #[test]
    fn mode_mismatch_is_a_protocol_error() {
        let (bank, asg, bits) = setup(8, 37);
        let stream = encode_string(&bank, &asg, &bits, 16, 0, RtwMode::Product).unwrap();
        let err = verify_stream(&bank, &asg, &bits, &stream, RtwMode::Xor).unwrap_err();
        assert!(matches!(err, Error::ModeMismatch { expected: "xor", actual: "product" }));
    }

    #[test]
    fn wire_roundtrip_and_malformed_rejection() {
        let (bank, asg, bits) = setup(8, 41);
        for mode in [RtwMode::Product, RtwMode::Xor] {
            for m in [1u32, 7, 8, 9, 83] {
                let s = encode_string(&bank, &asg, &bits, m, 0xABCD_EF01_2345, mode).unwrap();
                let wire = s.encode_wire();
                assert_eq!(wire.len(), 13 + (m as usize).div_ceil(8));
                assert_eq!(RtwStream::decode_wire(&wire).unwrap(), s);
            }
        }
        let s = encode_string(&bank, &asg, &bits, 12, 9, RtwMode::Product).unwrap();
        let wire = s.encode_wire();
        // Truncated payload.
        assert!(RtwStream::decode_wire(&wire[..wire.len() - 1]).is_err());
        // Truncated header.
        assert!(RtwStream::decode_wire(&wire[..7]).is_err());
        // Unknown mode byte.
        let mut bad = wire.clone();
        bad[0] = 0x02;
        assert!(RtwStream::decode_wire(&bad).is_err());
        // Nonzero padding bit (m = 12, so low 4 bits of last byte must be 0).
        let mut bad = wire.clone();
        *bad.last_mut().unwrap() |= 0x01;
        assert!(RtwStream::decode_wire(&bad).is_err());
        // Zero-length stream.
        let mut bad = wire;
        bad[1..5].copy_from_slice(&0u32.to_be_bytes());
        assert!(RtwStream::decode_wire(&bad[..13]).is_err());
    }

    #[test]
    fn empty_stream_is_rejected_by_verifier_and_encoder() {
        // m = 0 violates the precondition everywhere.
        let (bank, asg, bits) = setup(4, 43);
        assert!(encode_string(&bank, &asg, &bits, 0, 0, RtwMode::Product).is_err());
        let empty = RtwStream { mode: RtwMode::Product, start: 0, values: vec![] };
        assert!(verify_stream(&bank, &asg, &bits, &empty, RtwMode::Product).is_err());
        assert!(decoy_stream(1, 0, 0, RtwMode::Product).is_err());
    }

    #[test]
    fn decoy_streams_look_valid_but_fail_verification() {
        let (bank, asg, bits) = setup(16, 47);
        let decoy = decoy_stream(0xFEED, 83, 1000, RtwMode::Product).unwrap();
        assert_eq!(decoy.len(), 83);
        let rep = verify_stream(&bank, &asg, &bits, &decoy, RtwMode::Product).unwrap();
        // A decoy survives all 83 steps with probability 2^-83.
        assert_eq!(rep.verdict, Verdict::Reject);
    }
}
