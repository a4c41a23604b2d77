//! Challenge/response sessions between a key and a lock.
//!
//! Three session families share one transport:
//!
//! * **Ultra**: the lock sends a fresh nonce; the key answers with its
//!   stored secret masked by a nonce-derived pad. Every accepted session
//!   then *renews* the secret with a fresh resistor-noise exchange, so each
//!   secret authenticates at most once. Accounting: an accepted session
//!   consumes the N secret bits plus `ceil(log2 F)` bits to authenticate
//!   the F public comparison bits of the renewal exchange.
//! * **Strong**: the lock encrypts a random N-bit challenge under the
//!   shared secret; the key decrypts and answers with an m-step telegraph
//!   product stream for the decrypted string. The secret never crosses the
//!   wire and is reused across sessions; a forged response survives with
//!   probability 2^-m per guessed key. Strong pairs must be initialized
//!   once (first recognition + key renewal) before normal sessions.
//! * **Simple**: the strong session flow with the manufacturer secret kept
//!   for life — no initialization, no renewal, and therefore no protection
//!   against a manufacturer who remembers what was provisioned.
//!
//! # Renewal atomicity
//!
//! Renewal is two-phase. The freshly exchanged candidate is parked in
//! `pending` on both sides, proven equal with a candidate-verify stream,
//! then committed: the key commits when it sees `Commit`, the lock when it
//! sees `CommitAck`. Any single lost or truncated frame leaves the pair in
//! one of three states — both on the old key, both on the new key, or one
//! committed and one holding the candidate as `pending` — and verification
//! tries `stored` first and `pending` second, promoting `pending` on a
//! match. A pair therefore stays mutually openable across any one-frame
//! interruption, at the documented cost that an interrupted renewal forces
//! the old secret to serve one more session.
//!
//! # Modeling notes
//!
//! Both devices run in one process, so a session function drives both ends
//! in explicit alternation through the in-memory channel. The renewal
//! exchange seed that crosses the wire in `KljnStart` labels the *shared
//! physical channel realization* — both ends of a wire see the same noise
//! waveform by physics, and the simulation grants them the same stream by
//! seed. It is not a secret input; the eavesdropper model works from
//! channel statistics, never from seeds. Session counters are bookkeeping
//! and decoy freshness, not a security control: replaying an old encrypted
//! challenge to a key reproduces a response the attacker already observed,
//! and replaying an old response to a lock fails because every round binds
//! the response to a fresh random start index.
//!
//! A garbled challenge (unparseable payload, wrong length) is answered
//! with a *decoy* stream — a fresh telegraph wave — rather than an error
//! frame, so a challenger cannot distinguish "could not parse" from "wrong
//! key" beyond the reject it would get anyway. Channel failures are not
//! forgery evidence: only a well-formed, verifiably wrong response counts
//! toward lockout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::kljn::{authentication_budget, run_exchange, ExchangeConfig, InjectionPlan, KljnParams};
use crate::nbl::{
    assign_from_secret, decoy_stream, encode_string, verify_stream, RtwMode, RtwStream, Verdict,
};
use crate::puf::cipher::cipher_stream;
use crate::puf::device::{expected_ultra_response, KeyOrigin, Phase, PufDevice, Role, SecretKey, Variant};
use crate::seed::{derive_seed, seeded_rng};
use crate::transport::{open_session, Endpoint, FrameType};

/// Tunable knobs shared by all session kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Verification stream length; a wrong key survives with prob `2^-m`.
    pub m: u32,
    /// Which product route streams are computed and checked with.
    pub mode: RtwMode,
    /// Physics of the renewal exchange.
    pub kljn: KljnParams,
    /// Send ultra responses unmasked (the accounting-textbook mode where
    /// the N key bits themselves cross the wire once per session).
    pub raw_key_response: bool,
    /// Inject an attack current into renewal exchanges (test hook).
    pub renewal_injection: Option<InjectionPlan>,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            m: 83,
            mode: RtwMode::Product,
            kljn: KljnParams::default(),
            raw_key_response: false,
            renewal_injection: None,
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParam("stream length m must be >= 1".into()));
        }
        self.kljn.validate()
    }
}

/// How a session ended, from the lock's perspective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionVerdict {
    /// The key proved knowledge of the shared secret.
    Accept,
    /// A well-formed response failed verification (counted toward lockout).
    Reject,
    /// The session died of a channel failure before a verdict; devices are
    /// unchanged except for possibly parked pending state.
    Aborted,
}

/// Summary of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengeSession {
    pub session_id: u64,
    pub variant: Variant,
    pub verdict: SessionVerdict,
    /// The lock verified against (and promoted) its pending key — the
    /// recovery path after a lost commit acknowledgment.
    pub recovered_pending: bool,
    /// Secret bits consumed: N for an accepted ultra session, else 0.
    pub secure_bits_consumed: u64,
    /// `ceil(log2 F)` for the F public comparison bits of this session's
    /// renewal exchange; 0 when no renewal ran.
    pub authentication_bits_consumed: u32,
    /// Generation the lock committed during this session's renewal.
    pub renewed_generation: Option<u32>,
    /// A renewal ran and aborted (channel fault, candidate mismatch, or
    /// exchange alarm); the previous secret stays in service.
    pub renewal_aborted: bool,
    pub frames_sent_lock: u64,
    pub frames_sent_key: u64,
}

impl ChallengeSession {
    pub fn accepted(&self) -> bool {
        self.verdict == SessionVerdict::Accept
    }
}

// ---------------------------------------------------------------------------
// Payload codecs.
// ---------------------------------------------------------------------------

/// `n_bits (u32 BE) || packed bits` — used for nonces and ultra responses.
fn encode_bits_payload(bits: &BitString) -> Vec<u8> {
    let mut out = (bits.len() as u32).to_be_bytes().to_vec();
    out.extend_from_slice(&bits.to_packed_bytes());
    out
}

fn decode_bits_payload(bytes: &[u8]) -> Result<BitString> {
    if bytes.len() < 4 {
        return Err(Error::WireFormat("bit payload shorter than its length field".into()));
    }
    let n = u32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes")) as usize;
    BitString::from_packed_bytes(&bytes[4..], n)
}

/// `exchange seed (u64 BE) || n_bits (u32 BE)`.
fn encode_kljn_start(seed: u64, n_bits: u32) -> Vec<u8> {
    let mut out = seed.to_be_bytes().to_vec();
    out.extend_from_slice(&n_bits.to_be_bytes());
    out
}

fn decode_kljn_start(bytes: &[u8]) -> Result<(u64, u32)> {
    if bytes.len() != 12 {
        return Err(Error::WireFormat(format!("renewal-start payload needs 12 bytes, got {}", bytes.len())));
    }
    Ok((
        u64::from_be_bytes(bytes[0..8].try_into().expect("8 bytes")),
        u32::from_be_bytes(bytes[8..12].try_into().expect("4 bytes")),
    ))
}

struct StringChallenge {
    counter: u64,
    start: u64,
    m: u32,
    ciphertext: BitString,
}

/// `counter (u64) || start (u64) || m (u32) || n_bits (u32) || packed ct`.
fn encode_string_challenge(c: &StringChallenge) -> Vec<u8> {
    let mut out = c.counter.to_be_bytes().to_vec();
    out.extend_from_slice(&c.start.to_be_bytes());
    out.extend_from_slice(&c.m.to_be_bytes());
    out.extend_from_slice(&encode_bits_payload(&c.ciphertext));
    out
}

fn decode_string_challenge(bytes: &[u8]) -> Result<StringChallenge> {
    if bytes.len() < 24 {
        return Err(Error::WireFormat("challenge payload shorter than its header".into()));
    }
    let counter = u64::from_be_bytes(bytes[0..8].try_into().expect("8 bytes"));
    let start = u64::from_be_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let m = u32::from_be_bytes(bytes[16..20].try_into().expect("4 bytes"));
    if m == 0 {
        return Err(Error::WireFormat("challenge stream length m must be >= 1".into()));
    }
    let ciphertext = decode_bits_payload(&bytes[20..])?;
    Ok(StringChallenge { counter, start, m, ciphertext })
}

// ---------------------------------------------------------------------------
// Per-side protocol steps. Each step is one receive and at most one send, so
// sessions can interleave the two devices over the in-memory queues; the
// steps are also unit-testable with hand-crafted frames.
// ---------------------------------------------------------------------------

/// What a key-side step did, for tests and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum KeyStep {
    Responded,
    Decoy,
    Silent,
    Aborted,
}

/// Key side of an ultra round: answer a nonce with the masked stored key.
pub(crate) fn key_answer_nonce(key: &mut PufDevice, ep: &mut Endpoint, raw: bool) -> Result<KeyStep> {
    match ep.recv() {
        Ok(f) if f.frame_type == FrameType::ChallengeRequest => {
            match decode_bits_payload(&f.payload) {
                Ok(nonce) if nonce.len() == key.stored.bits.len() => {
                    let resp = expected_ultra_response(&key.stored.bits, &nonce, raw);
                    ep.send(FrameType::UltraResponse, encode_bits_payload(&resp))?;
                    Ok(KeyStep::Responded)
                }
                _ => {
                    // A nonce we cannot answer coherently; bail out loudly
                    // (there is no decoy that could verify anyway).
                    let _ = ep.send(FrameType::Abort, Vec::new());
                    Ok(KeyStep::Aborted)
                }
            }
        }
        Ok(_) => {
            let _ = ep.send(FrameType::Abort, Vec::new());
            Ok(KeyStep::Aborted)
        }
        Err(_) => Ok(KeyStep::Silent),
    }
}

/// Key side of a string round: decrypt the challenge and stream the product
/// (a decoy when the challenge is garbled).
pub(crate) fn key_answer_string_challenge(
    key: &mut PufDevice,
    ep: &mut Endpoint,
    params: &ProtocolParams,
) -> Result<KeyStep> {
    let frame = match ep.recv() {
        Ok(f) if f.frame_type == FrameType::StringChallenge => f,
        Ok(_) => {
            let _ = ep.send(FrameType::Abort, Vec::new());
            return Ok(KeyStep::Aborted);
        }
        Err(_) => return Ok(KeyStep::Silent),
    };
    let decoy_fresh = key.session_counter;
    match decode_string_challenge(&frame.payload) {
        Ok(c) if c.ciphertext.len() == key.stored.bits.len() => {
            key.session_counter = key.session_counter.max(c.counter) + 1;
            let plaintext = c.ciphertext.xor(&cipher_stream(&key.stored.bits, c.counter))?;
            let assignment = assign_from_secret(&key.bank, &key.stored.bits)?;
            let stream = encode_string(&key.bank, &assignment, &plaintext, c.m, c.start, params.mode)?;
            ep.send(FrameType::StringResponse, stream.encode_wire())?;
            Ok(KeyStep::Responded)
        }
        other => {
            // Garbled challenge: respond with a fresh telegraph wave. The
            // challenger sees a well-formed stream that rejects; it cannot
            // tell a parse failure from a wrong key.
            key.session_counter += 1;
            let (m, start) = match other {
                Ok(c) => (c.m, c.start),
                Err(_) => (params.m, 0),
            };
            let seed = derive_seed(decoy_fresh, ep.session_id(), "puf.decoy");
            let decoy = decoy_stream(seed, m.max(1), start, params.mode)?;
            ep.send(FrameType::StringResponse, decoy.encode_wire())?;
            Ok(KeyStep::Decoy)
        }
    }
}

/// Key side of renewal, first half: run the exchange and offer the
/// candidate-verify stream. Parks the candidate in `pending`.
pub(crate) fn key_renewal_exchange_step(
    key: &mut PufDevice,
    ep: &mut Endpoint,
    params: &ProtocolParams,
) -> Result<KeyStep> {
    let frame = match ep.recv() {
        Ok(f) if f.frame_type == FrameType::KljnStart => f,
        Ok(f) if f.frame_type == FrameType::Close => return Ok(KeyStep::Silent),
        Ok(_) => {
            let _ = ep.send(FrameType::Abort, Vec::new());
            return Ok(KeyStep::Aborted);
        }
        Err(_) => return Ok(KeyStep::Silent),
    };
    let parsed = decode_kljn_start(&frame.payload);
    let (seed, n_bits) = match parsed {
        Ok((s, n)) if n as usize == key.stored.bits.len() => (s, n as usize),
        _ => {
            let _ = ep.send(FrameType::Abort, Vec::new());
            return Ok(KeyStep::Aborted);
        }
    };
    let mut cfg = ExchangeConfig::new(n_bits, seed);
    cfg.params = params.kljn.clone();
    cfg.injection = params.renewal_injection;
    match run_exchange(&cfg) {
        Ok(t) => {
            ep.stats.account_bits(t.f_public_bits);
            let candidate = SecretKey {
                bits: t.key_bob,
                origin: KeyOrigin::Exchanged,
                generation: key.stored.generation + 1,
            };
            let verify_start = derive_seed(seed, 0, "renewal.verify.start");
            let assignment = assign_from_secret(&key.bank, &candidate.bits)?;
            let stream =
                encode_string(&key.bank, &assignment, &candidate.bits, params.m, verify_start, params.mode)?;
            key.pending = Some(candidate);
            ep.send(FrameType::CandidateVerify, stream.encode_wire())?;
            Ok(KeyStep::Responded)
        }
        Err(Error::ExchangeAborted { .. }) => {
            // The exchange alarmed; both ends compute the same physics, so
            // the lock aborts identically. Keep the old key, park nothing.
            key.pending = None;
            let _ = ep.send(FrameType::Abort, Vec::new());
            Ok(KeyStep::Aborted)
        }
        Err(e) => Err(e),
    }
}

/// Key side of renewal, second half: commit on `Commit`, acknowledge.
pub(crate) fn key_commit_step(key: &mut PufDevice, ep: &mut Endpoint) -> Result<KeyStep> {
    match ep.recv() {
        Ok(f) if f.frame_type == FrameType::Commit => {
            key.commit_pending();
            ep.send(FrameType::CommitAck, Vec::new())?;
            Ok(KeyStep::Responded)
        }
        Ok(f) if f.frame_type == FrameType::Abort => {
            // The lock rejected the candidate; discard it.
            key.pending = None;
            Ok(KeyStep::Aborted)
        }
        Ok(_) => Ok(KeyStep::Silent),
        // Nothing arrived: keep `pending` parked for later recovery.
        Err(_) => Ok(KeyStep::Silent),
    }
}

/// Outcome of the lock judging one string-round response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RoundVerdict {
    AcceptStored,
    AcceptPending,
    Reject,
    Aborted,
}

/// Lock side of a string round: receive the stream and verify it, trying
/// the stored key first and the pending key second.
pub(crate) fn lock_judge_string_response(
    lock: &mut PufDevice,
    ep: &mut Endpoint,
    challenge: &BitString,
    counter: u64,
    start: u64,
    params: &ProtocolParams,
) -> Result<RoundVerdict> {
    let frame = match ep.recv() {
        Ok(f) if f.frame_type == FrameType::StringResponse => f,
        Ok(_) => return Ok(RoundVerdict::Aborted),
        Err(Error::ChannelEmpty) => return Ok(RoundVerdict::Aborted),
        Err(Error::WireFormat(_)) => return Ok(RoundVerdict::Aborted),
        Err(e) => return Err(e),
    };
    let stream = match RtwStream::decode_wire(&frame.payload) {
        Ok(s) if s.start == start && s.len() == params.m => s,
        // A response was given but is malformed or unbound to this round's
        // start index: that is a failed attempt, not a channel problem.
        _ => return Ok(RoundVerdict::Reject),
    };
    // Hypothesis 1: the key used the secret we have committed.
    let assignment = assign_from_secret(&lock.bank, &lock.stored.bits)?;
    if let Ok(report) = verify_stream(&lock.bank, &assignment, challenge, &stream, params.mode) {
        if report.verdict == Verdict::Accept {
            // Any parked candidate is stale — the peer is on our key.
            lock.pending = None;
            return Ok(RoundVerdict::AcceptStored);
        }
    }
    // Hypothesis 2: the peer committed a renewal we only parked. It then
    // decrypted with the pending key, so the plaintext it streamed is
    // challenge XOR ks(stored) XOR ks(pending).
    if let Some(pending) = lock.pending.clone() {
        let shifted = challenge
            .xor(&cipher_stream(&lock.stored.bits, counter))?
            .xor(&cipher_stream(&pending.bits, counter))?;
        let assignment_p = assign_from_secret(&lock.bank, &pending.bits)?;
        if let Ok(report) = verify_stream(&lock.bank, &assignment_p, &shifted, &stream, params.mode) {
            if report.verdict == Verdict::Accept {
                lock.commit_pending();
                return Ok(RoundVerdict::AcceptPending);
            }
        }
    }
    Ok(RoundVerdict::Reject)
}

// ---------------------------------------------------------------------------
// Round and renewal orchestration.
// ---------------------------------------------------------------------------

struct RoundOutcome {
    verdict: RoundVerdict,
}

/// One full encrypted-challenge round: lock issues, key answers, lock judges.
fn string_challenge_round(
    lock: &mut PufDevice,
    key: &mut PufDevice,
    lock_ep: &mut Endpoint,
    key_ep: &mut Endpoint,
    params: &ProtocolParams,
    round_seed: u64,
) -> Result<RoundOutcome> {
    let n_bits = lock.stored.bits.len();
    let mut rng = seeded_rng(derive_seed(round_seed, 0, "round.random"));
    let challenge = BitString::random(&mut rng, n_bits);
    let start: u64 = rng.gen();
    let counter = lock.next_counter();
    let ciphertext = challenge.xor(&cipher_stream(&lock.stored.bits, counter))?;
    lock_ep.send(
        FrameType::StringChallenge,
        encode_string_challenge(&StringChallenge { counter, start, m: params.m, ciphertext }),
    )?;
    key_answer_string_challenge(key, key_ep, params)?;
    let verdict = lock_judge_string_response(lock, lock_ep, &challenge, counter, start, params)?;
    Ok(RoundOutcome { verdict })
}

struct RenewalOutcome {
    /// Generation the lock committed, if it got that far.
    lock_committed: Option<u32>,
    aborted: bool,
    authentication_bits: u32,
}

/// Renew the pair's secret over a fresh exchange (two-phase commit).
fn renew_keys(
    lock: &mut PufDevice,
    key: &mut PufDevice,
    lock_ep: &mut Endpoint,
    key_ep: &mut Endpoint,
    params: &ProtocolParams,
    renewal_seed: u64,
) -> Result<RenewalOutcome> {
    let n_bits = lock.stored.bits.len();
    let exchange_seed = derive_seed(renewal_seed, 0, "renewal.exchange");
    lock_ep.send(FrameType::KljnStart, encode_kljn_start(exchange_seed, n_bits as u32))?;

    // Key side: exchange + candidate offer.
    key_renewal_exchange_step(key, key_ep, params)?;

    // Lock side: its own end of the same physical exchange.
    let mut cfg = ExchangeConfig::new(n_bits, exchange_seed);
    cfg.params = params.kljn.clone();
    cfg.injection = params.renewal_injection;
    let transcript = match run_exchange(&cfg) {
        Ok(t) => t,
        Err(Error::ExchangeAborted { .. }) => {
            // Alarm: identical on both ends by shared physics. Drain the
            // key's Abort if it arrived; keep the old secret.
            let _ = lock_ep.recv();
            return Ok(RenewalOutcome { lock_committed: None, aborted: true, authentication_bits: 0 });
        }
        Err(e) => return Err(e),
    };
    lock_ep.stats.account_bits(transcript.f_public_bits);
    let authentication_bits = if transcript.f_public_bits == 0 {
        0
    } else {
        authentication_budget(transcript.f_public_bits)?
    };

    let candidate = SecretKey {
        bits: transcript.key_alice,
        origin: KeyOrigin::Exchanged,
        generation: lock.stored.generation + 1,
    };
    let verify_start = derive_seed(exchange_seed, 0, "renewal.verify.start");

    let accepted = match lock_ep.recv() {
        Ok(f) if f.frame_type == FrameType::CandidateVerify => {
            match RtwStream::decode_wire(&f.payload) {
                Ok(s) if s.start == verify_start && s.len() == params.m => {
                    let assignment = assign_from_secret(&lock.bank, &candidate.bits)?;
                    matches!(
                        verify_stream(&lock.bank, &assignment, &candidate.bits, &s, params.mode),
                        Ok(r) if r.verdict == Verdict::Accept
                    )
                }
                _ => false,
            }
        }
        // Abort from the key, nothing delivered, or truncated frame.
        _ => {
            return Ok(RenewalOutcome { lock_committed: None, aborted: true, authentication_bits });
        }
    };
    if !accepted {
        // The candidates disagree (estimation noise) or the stream is
        // malformed: scrap this renewal on both sides.
        let _ = lock_ep.send(FrameType::Abort, Vec::new());
        key_commit_step(key, key_ep)?;
        return Ok(RenewalOutcome { lock_committed: None, aborted: true, authentication_bits });
    }

    lock.pending = Some(candidate);
    lock_ep.send(FrameType::Commit, Vec::new())?;
    key_commit_step(key, key_ep)?;
    let lock_committed = match lock_ep.recv() {
        Ok(f) if f.frame_type == FrameType::CommitAck => lock.commit_pending(),
        // No acknowledgment: keep the candidate parked; the next session
        // recovers through the pending hypothesis.
        _ => None,
    };
    Ok(RenewalOutcome { lock_committed, aborted: false, authentication_bits })
}

// ---------------------------------------------------------------------------
// Public sessions.
// ---------------------------------------------------------------------------

fn check_pair(lock: &PufDevice, key: &PufDevice) -> Result<()> {
    if lock.role != Role::Lock {
        return Err(Error::Protocol("first device must have the lock role".into()));
    }
    if key.role != Role::Key {
        return Err(Error::Protocol("second device must have the key role".into()));
    }
    if lock.variant != key.variant {
        return Err(Error::Protocol(format!(
            "variant mismatch: lock is {}, key is {}",
            lock.variant.as_str(),
            key.variant.as_str()
        )));
    }
    if lock.locked_out() {
        return Err(Error::LockedOut { failed_attempts: lock.failed_attempts });
    }
    Ok(())
}

fn require_phase(device: &PufDevice, phase: Phase, what: &str) -> Result<()> {
    if device.phase != phase {
        return Err(Error::Phase(format!("{what} (device is {:?})", device.phase)));
    }
    Ok(())
}

fn session_skeleton(lock: &PufDevice, lock_ep: &Endpoint) -> ChallengeSession {
    ChallengeSession {
        session_id: lock_ep.session_id(),
        variant: lock.variant,
        verdict: SessionVerdict::Aborted,
        recovered_pending: false,
        secure_bits_consumed: 0,
        authentication_bits_consumed: 0,
        renewed_generation: None,
        renewal_aborted: false,
        frames_sent_lock: 0,
        frames_sent_key: 0,
    }
}

fn finish(mut session: ChallengeSession, lock_ep: &Endpoint, key_ep: &Endpoint) -> ChallengeSession {
    session.frames_sent_lock = lock_ep.frames_sent();
    session.frames_sent_key = key_ep.frames_sent();
    session
}

/// One ultra session: nonce -> masked key -> verify -> renew.
pub fn challenge_ultra(
    lock: &mut PufDevice,
    key: &mut PufDevice,
    lock_ep: &mut Endpoint,
    key_ep: &mut Endpoint,
    params: &ProtocolParams,
    session_seed: u64,
) -> Result<ChallengeSession> {
    params.validate()?;
    check_pair(lock, key)?;
    if lock.variant != Variant::Ultra {
        return Err(Error::Protocol(format!(
            "ultra session on a {} pair",
            lock.variant.as_str()
        )));
    }
    require_phase(lock, Phase::Active, "ultra sessions need an initialized lock")?;
    require_phase(key, Phase::Active, "ultra sessions need an initialized key")?;

    let mut session = session_skeleton(lock, lock_ep);
    let n_bits = lock.stored.bits.len();
    let mut nonce_rng = seeded_rng(derive_seed(session_seed, 0, "session.ultra.nonce"));
    let nonce = BitString::random(&mut nonce_rng, n_bits);
    lock_ep.send(FrameType::ChallengeRequest, encode_bits_payload(&nonce))?;
    key_answer_nonce(key, key_ep, params.raw_key_response)?;

    let response = match lock_ep.recv() {
        Ok(f) if f.frame_type == FrameType::UltraResponse => decode_bits_payload(&f.payload).ok(),
        _ => None,
    };
    let response = match response.filter(|r| r.len() == n_bits) {
        Some(r) => r,
        None => return Ok(finish(session, lock_ep, key_ep)),
    };

    if response == expected_ultra_response(&lock.stored.bits, &nonce, params.raw_key_response) {
        lock.pending = None;
    } else if lock
        .pending
        .as_ref()
        .is_some_and(|p| response == expected_ultra_response(&p.bits, &nonce, params.raw_key_response))
    {
        lock.commit_pending();
        session.recovered_pending = true;
    } else {
        lock.failed_attempts += 1;
        let _ = lock_ep.send(FrameType::Abort, Vec::new());
        session.verdict = SessionVerdict::Reject;
        return Ok(finish(session, lock_ep, key_ep));
    }
    session.verdict = SessionVerdict::Accept;
    lock.failed_attempts = 0;
    // The response consumed this generation of the secret.
    session.secure_bits_consumed = n_bits as u64;

    let renewal = renew_keys(lock, key, lock_ep, key_ep, params, derive_seed(session_seed, 0, "session.renewal"))?;
    session.authentication_bits_consumed = renewal.authentication_bits;
    session.renewed_generation = renewal.lock_committed;
    session.renewal_aborted = renewal.aborted;
    Ok(finish(session, lock_ep, key_ep))
}

fn challenge_stream_session(
    lock: &mut PufDevice,
    key: &mut PufDevice,
    lock_ep: &mut Endpoint,
    key_ep: &mut Endpoint,
    params: &ProtocolParams,
    session_seed: u64,
    expected_variant: Variant,
) -> Result<ChallengeSession> {
    params.validate()?;
    check_pair(lock, key)?;
    if lock.variant != expected_variant {
        return Err(Error::Protocol(format!(
            "{} session on a {} pair",
            expected_variant.as_str(),
            lock.variant.as_str()
        )));
    }
    require_phase(lock, Phase::Active, "challenge sessions need an initialized lock")?;
    require_phase(key, Phase::Active, "challenge sessions need an initialized key")?;

    let mut session = session_skeleton(lock, lock_ep);
    let round = string_challenge_round(lock, key, lock_ep, key_ep, params, derive_seed(session_seed, 0, "session.round"))?;
    session.verdict = match round.verdict {
        RoundVerdict::AcceptStored => SessionVerdict::Accept,
        RoundVerdict::AcceptPending => {
            session.recovered_pending = true;
            SessionVerdict::Accept
        }
        RoundVerdict::Reject => {
            lock.failed_attempts += 1;
            SessionVerdict::Reject
        }
        RoundVerdict::Aborted => SessionVerdict::Aborted,
    };
    if session.verdict == SessionVerdict::Accept {
        lock.failed_attempts = 0;
    }
    Ok(finish(session, lock_ep, key_ep))
}

/// One strong session: encrypted challenge, product-stream response.
pub fn challenge_strong(
    lock: &mut PufDevice,
    key: &mut PufDevice,
    lock_ep: &mut Endpoint,
    key_ep: &mut Endpoint,
    params: &ProtocolParams,
    session_seed: u64,
) -> Result<ChallengeSession> {
    challenge_stream_session(lock, key, lock_ep, key_ep, params, session_seed, Variant::Strong)
}

/// One simple session: the strong flow under the lifetime manufacturer key.
pub fn challenge_simple(
    lock: &mut PufDevice,
    key: &mut PufDevice,
    lock_ep: &mut Endpoint,
    key_ep: &mut Endpoint,
    params: &ProtocolParams,
    session_seed: u64,
) -> Result<ChallengeSession> {
    challenge_stream_session(lock, key, lock_ep, key_ep, params, session_seed, Variant::Simple)
}

/// First recognition of a provisioned strong/ultra pair, then key renewal.
///
/// The round runs under the manufacturer secret. If the *key* turns out to
/// already hold a later generation (a previous initialization committed on
/// the key but its acknowledgment never reached the lock), the pending
/// hypothesis recognizes it, the lock promotes, and no second renewal is
/// needed. On success both devices are `Active` on an exchanged secret and
/// the manufacturer's knowledge is stale.
pub fn initialize(
    lock: &mut PufDevice,
    key: &mut PufDevice,
    lock_ep: &mut Endpoint,
    key_ep: &mut Endpoint,
    params: &ProtocolParams,
    session_seed: u64,
) -> Result<ChallengeSession> {
    params.validate()?;
    check_pair(lock, key)?;
    if lock.variant == Variant::Simple {
        return Err(Error::Phase("simple pairs have no initialization step".into()));
    }
    require_phase(lock, Phase::Provisioned, "pair is already initialized")?;

    let mut session = session_skeleton(lock, lock_ep);
    let round =
        string_challenge_round(lock, key, lock_ep, key_ep, params, derive_seed(session_seed, 0, "init.recognition"))?;
    match round.verdict {
        RoundVerdict::Aborted => {
            session.verdict = SessionVerdict::Aborted;
            return Ok(finish(session, lock_ep, key_ep));
        }
        RoundVerdict::Reject => {
            lock.failed_attempts += 1;
            session.verdict = SessionVerdict::Reject;
            return Ok(finish(session, lock_ep, key_ep));
        }
        RoundVerdict::AcceptPending => {
            // The pair already renewed on an interrupted earlier run; the
            // lock has just caught up. Nothing left to exchange.
            lock.failed_attempts = 0;
            session.verdict = SessionVerdict::Accept;
            session.recovered_pending = true;
            session.renewed_generation = Some(lock.stored.generation);
            let _ = lock_ep.send(FrameType::Close, Vec::new());
            key_renewal_exchange_step(key, key_ep, params)?;
            return Ok(finish(session, lock_ep, key_ep));
        }
        RoundVerdict::AcceptStored => {}
    }
    lock.failed_attempts = 0;

    let renewal = renew_keys(lock, key, lock_ep, key_ep, params, derive_seed(session_seed, 0, "init.renewal"))?;
    session.authentication_bits_consumed = renewal.authentication_bits;
    session.renewal_aborted = renewal.aborted;
    session.renewed_generation = renewal.lock_committed;
    // Initialization succeeds only if the lock left the manufacturer key
    // behind; a parked pending or an aborted renewal means "try again".
    session.verdict = if lock.phase == Phase::Active {
        SessionVerdict::Accept
    } else {
        SessionVerdict::Aborted
    };
    Ok(finish(session, lock_ep, key_ep))
}

/// Run whichever session the pair's lifecycle calls for, over fresh
/// endpoints: initialization for a provisioned strong/ultra lock, otherwise
/// the variant's challenge protocol.
pub fn open_pair(
    lock: &mut PufDevice,
    key: &mut PufDevice,
    params: &ProtocolParams,
    session_seed: u64,
) -> Result<ChallengeSession> {
    let (mut lock_ep, mut key_ep) = open_session(derive_seed(session_seed, 0, "session.id"));
    if lock.variant != Variant::Simple && lock.phase == Phase::Provisioned {
        initialize(lock, key, &mut lock_ep, &mut key_ep, params, session_seed)
    } else {
        match lock.variant {
            Variant::Ultra => challenge_ultra(lock, key, &mut lock_ep, &mut key_ep, params, session_seed),
            Variant::Strong => challenge_strong(lock, key, &mut lock_ep, &mut key_ep, params, session_seed),
            Variant::Simple => challenge_simple(lock, key, &mut lock_ep, &mut key_ep, params, session_seed),
        }
    }
}

// ---------------------------------------------------------------------------
// Pure verdict helpers for the adversary harness: lock-side decisions with
// no device mutation and no transport.
// ---------------------------------------------------------------------------

/// Would this lock accept `response` to `nonce` in an ultra session?
/// Checks the stored key, then the pending key — exactly the session logic.
pub fn ultra_response_verdict(lock: &PufDevice, nonce: &BitString, response: &BitString, raw: bool) -> bool {
    if response.len() != lock.stored.bits.len() {
        return false;
    }
    if *response == expected_ultra_response(&lock.stored.bits, nonce, raw) {
        return true;
    }
    lock.pending
        .as_ref()
        .is_some_and(|p| *response == expected_ultra_response(&p.bits, nonce, raw))
}

/// Would this lock accept `incoming` as the product stream for a round
/// whose decrypted challenge is `challenge_plaintext`?
pub fn stream_response_verdict(
    lock: &PufDevice,
    challenge_plaintext: &BitString,
    incoming: &RtwStream,
    mode: RtwMode,
) -> Result<bool> {
    let assignment = assign_from_secret(&lock.bank, &lock.stored.bits)?;
    match verify_stream(&lock.bank, &assignment, challenge_plaintext, incoming, mode) {
        Ok(r) => Ok(r.verdict == Verdict::Accept),
        Err(Error::ModeMismatch { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}
