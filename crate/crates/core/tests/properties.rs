//! Randomized invariants: wire formats must round-trip and never panic on
//! garbage, the two verification routes must be the same decision function,
//! keystream masking must be self-inverse, and the arithmetic helpers must
//! satisfy their defining bounds for arbitrary inputs.

use proptest::prelude::*;

use kljn_puf_core::bits::BitString;
use kljn_puf_core::kljn::{
    authentication_budget, classify_state, expected_msq_voltage, KljnParams, StateClass,
};
use kljn_puf_core::nbl::{
    assign_from_secret, encode_string, verify_stream, GeneratorBank, RtwMode, RtwStream, Verdict,
};
use kljn_puf_core::puf::cipher::{cipher_stream, pad_from_nonce};
use kljn_puf_core::transport::{Frame, FrameType};

const FRAME_TYPES: [FrameType; 11] = [
    FrameType::ChallengeRequest,
    FrameType::UltraResponse,
    FrameType::StringChallenge,
    FrameType::StringResponse,
    FrameType::KljnStart,
    FrameType::CandidateVerify,
    FrameType::Commit,
    FrameType::CommitAck,
    FrameType::Close,
    FrameType::Abort,
    FrameType::Comparison,
];

fn mode_strategy() -> impl Strategy<Value = RtwMode> {
    prop_oneof![Just(RtwMode::Product), Just(RtwMode::Xor)]
}

proptest! {
    // --- bit strings ------------------------------------------------------

    #[test]
    fn packed_bytes_round_trip_any_bit_string(bits in prop::collection::vec(any::<bool>(), 0..300)) {
        let s = BitString::new(bits);
        let back = BitString::from_packed_bytes(&s.to_packed_bytes(), s.len()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn hex_round_trips_any_bit_string(bits in prop::collection::vec(any::<bool>(), 0..300)) {
        let s = BitString::new(bits);
        let back = BitString::from_hex(&s.to_hex(), s.len()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn hamming_distance_counts_the_ones_of_the_xor(
        pairs in prop::collection::vec(any::<(bool, bool)>(), 0..300),
    ) {
        let (a, b): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let (a, b) = (BitString::new(a), BitString::new(b));
        let ones = a.xor(&b).unwrap().iter().filter(|&x| x).count();
        prop_assert_eq!(a.hamming(&b).unwrap(), ones);
    }

    // --- framed transport wire format --------------------------------------

    #[test]
    fn frame_codec_round_trips_any_payload(
        session_id in any::<u64>(),
        sequence in any::<u32>(),
        type_idx in 0..FRAME_TYPES.len(),
        payload in prop::collection::vec(any::<u8>(), 0..200),
    ) {
        let frame = Frame { session_id, sequence, frame_type: FRAME_TYPES[type_idx], payload };
        let back = Frame::decode(&frame.encode()).unwrap();
        prop_assert_eq!(back, frame);
    }

    #[test]
    fn frame_decode_handles_arbitrary_bytes_without_panicking(
        bytes in prop::collection::vec(any::<u8>(), 0..64),
    ) {
        let _ = Frame::decode(&bytes);
    }

    // --- telegraph stream wire format ---------------------------------------

    #[test]
    fn stream_wire_codec_round_trips_both_modes(
        mode in mode_strategy(),
        start in any::<u64>(),
        bits in prop::collection::vec(any::<bool>(), 1..200),
    ) {
        let stream = match mode {
            RtwMode::Product => {
                let amps: Vec<i8> = bits.iter().map(|&b| if b { -1 } else { 1 }).collect();
                RtwStream::from_amplitudes(start, &amps).unwrap()
            }
            RtwMode::Xor => RtwStream::from_bits(start, bits),
        };
        let back = RtwStream::decode_wire(&stream.encode_wire()).unwrap();
        prop_assert_eq!(back, stream);
    }

    #[test]
    fn stream_decode_handles_arbitrary_bytes_without_panicking(
        bytes in prop::collection::vec(any::<u8>(), 0..64),
    ) {
        let _ = RtwStream::decode_wire(&bytes);
    }

    // --- keystream masking ---------------------------------------------------

    #[test]
    fn cipher_stream_is_a_self_inverse_mask(
        secret_bits in prop::collection::vec(any::<bool>(), 1..256),
        plain_bits in prop::collection::vec(any::<bool>(), 1..256),
        counter in any::<u64>(),
    ) {
        let secret = BitString::new(secret_bits);
        let ks = cipher_stream(&secret, counter);
        prop_assert_eq!(ks.len(), secret.len(), "keystream covers the secret's width");
        prop_assert_eq!(&cipher_stream(&secret, counter), &ks, "same inputs, same stream");

        let plain = BitString::new(plain_bits[..plain_bits.len().min(secret.len())].to_vec());
        let ks_cut = BitString::new(ks.as_bools()[..plain.len()].to_vec());
        let cipher = plain.xor(&ks_cut).unwrap();
        prop_assert_eq!(cipher.xor(&ks_cut).unwrap(), plain, "masking twice is the identity");
    }

    #[test]
    fn nonce_pads_are_deterministic_and_match_the_secret_width(
        secret_bits in prop::collection::vec(any::<bool>(), 1..256),
        nonce_bits in prop::collection::vec(any::<bool>(), 1..256),
    ) {
        let secret = BitString::new(secret_bits);
        let nonce = BitString::new(nonce_bits);
        let pad = pad_from_nonce(&secret, &nonce);
        prop_assert_eq!(pad.len(), secret.len());
        prop_assert_eq!(pad_from_nonce(&secret, &nonce), pad);
    }

    // --- string verification -------------------------------------------------

    #[test]
    fn every_string_verifies_against_itself_on_both_routes(
        master in any::<u64>(),
        bits in prop::collection::vec(any::<bool>(), 1..16),
        m in 1u32..64,
        start in any::<u64>(),
        mode in mode_strategy(),
    ) {
        let secret = BitString::new(bits);
        let bank = GeneratorBank::from_master(master, secret.len()).unwrap();
        let assignment = assign_from_secret(&bank, &secret).unwrap();
        let stream = encode_string(&bank, &assignment, &secret, m, start, mode).unwrap();
        let report = verify_stream(&bank, &assignment, &secret, &stream, mode).unwrap();
        prop_assert_eq!(report.verdict, Verdict::Accept);
        prop_assert_eq!(report.first_mismatch, None);
        prop_assert_eq!(report.steps_checked, m);
        prop_assert_eq!(report.residual_false_accept, Some((-f64::from(m)).exp2()));
    }

    /// The product of the sender's and verifier's telegraph amplitudes at
    /// step `t` is -1 exactly when the xor of their logic bits at step `t`
    /// is 1, so the two routes must reject at the same step or both accept.
    #[test]
    fn product_and_xor_routes_are_the_same_decision(
        master in any::<u64>(),
        pairs in prop::collection::vec(any::<(bool, bool)>(), 1..16),
        m in 1u32..64,
        start in any::<u64>(),
    ) {
        let (sent, local): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let (sent, local) = (BitString::new(sent), BitString::new(local));
        let bank = GeneratorBank::from_master(master, sent.len()).unwrap();
        let assignment = assign_from_secret(&bank, &local).unwrap();

        let by_product = {
            let s = encode_string(&bank, &assignment, &sent, m, start, RtwMode::Product).unwrap();
            verify_stream(&bank, &assignment, &local, &s, RtwMode::Product).unwrap()
        };
        let by_xor = {
            let s = encode_string(&bank, &assignment, &sent, m, start, RtwMode::Xor).unwrap();
            verify_stream(&bank, &assignment, &local, &s, RtwMode::Xor).unwrap()
        };
        prop_assert_eq!(by_product.verdict, by_xor.verdict);
        prop_assert_eq!(by_product.first_mismatch, by_xor.first_mismatch);
        prop_assert_eq!(by_product.steps_checked, by_xor.steps_checked);
    }

    // --- channel arithmetic ----------------------------------------------------

    #[test]
    fn level_classifier_inverts_the_expected_levels_for_any_valid_parameters(
        r_low in 1e2f64..1e6,
        ratio in 1.01f64..1e3,
        kt_eff in 1e-3f64..1e3,
        bandwidth in 1e-3f64..1e3,
    ) {
        let mut params = KljnParams { r_low, r_high: r_low * ratio, ..KljnParams::default() };
        params.noise.kt_eff = kt_eff;
        params.noise.bandwidth = bandwidth;
        params.validate().unwrap();
        for (a, b, want) in [
            (false, false, StateClass::SameLow),
            (false, true, StateClass::Mixed),
            (true, false, StateClass::Mixed),
            (true, true, StateClass::SameHigh),
        ] {
            let level = expected_msq_voltage(a, b, &params);
            prop_assert_eq!(classify_state(level, &params).unwrap(), want);
        }
    }

    #[test]
    fn authentication_budget_is_the_exact_bit_length(f in 1u64..) {
        let b = authentication_budget(f).unwrap();
        prop_assert!(u128::from(f) <= 1u128 << b, "F fits in 2^b outcomes");
        prop_assert!(b == 0 || u128::from(f) > 1u128 << (b - 1), "b is minimal");
    }
}
