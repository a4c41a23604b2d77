//! Attack strategy registry and Monte Carlo drivers.
//!
//! Each [`Attack`] is a self-contained adversary model that measures one of
//! the security rates the design promises and gates the measurement against
//! the analytic value:
//!
//! * `passive-eve` — wiretap discriminators on mixed-cycle waveforms must
//!   guess at chance (0.5).
//! * `active-inject` — a deterministic current injection must be detected
//!   and the affected cycles excluded; with no injection there must be no
//!   false alarms.
//! * `brute-force-ultra` — a uniformly random response to an N-bit
//!   challenge is accepted with probability exactly `2^-N`.
//! * `brute-force-stream` — a random telegraph stream survives an m-step
//!   verification with probability `2^-m`.
//! * `brute-force-key` — guessing the secret behind an encrypted-challenge
//!   round succeeds at `2^-N` (plus a negligible `2^-m` stream collision).
//! * `clone-snapshot` — a physical device clone works until the next key
//!   renewal and never after it.
//! * `manufacturer-replay` — provisioning-time knowledge opens a simple
//!   pair forever but an initialized strong pair never.
//!
//! Drivers derive every trial's randomness from `(master seed, trial
//! index)`, and parallel reductions are order-independent integer sums, so
//! results are identical for any thread count.

use rayon::prelude::*;

use crate::adversary::eve::{standard_discriminators, mean_split_accuracy, score_mixed_cycles, ScorePool};
use crate::adversary::report::{AttackReport, GateKind};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::kljn::{run_exchange, ExchangeConfig, InjectionPlan};
use crate::nbl::{assign_from_secret, decoy_stream, encode_string, RtwMode};
use crate::noise::NoiseParams;
use crate::puf::cipher::cipher_stream;
use crate::puf::device::{provision, PufDevice, Variant};
use crate::puf::protocol::{
    challenge_simple, challenge_strong, challenge_ultra, open_pair, stream_response_verdict,
    ultra_response_verdict, ProtocolParams, SessionVerdict,
};
use crate::seed::{derive_seed, seeded_rng};
use crate::transport::open_session;
use rand::Rng;

/// Knobs shared by all attack drivers. `None` means the attack's
/// documented default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackContext {
    /// Master seed; every trial derives from it.
    pub seed: u64,
    /// Trial count (meaning varies: trials, runs, or target cycles).
    pub trials: Option<u64>,
    /// Secret length N in bits.
    pub n_bits: Option<usize>,
    /// Verification stream length m.
    pub m: Option<u32>,
    /// Exchange samples per cycle.
    pub samples_per_cycle: Option<usize>,
    /// Injection amplitude in mixed-state loop-current RMS units.
    pub amplitude_scale: Option<f64>,
    /// Add a deliberately broken 60%-accurate wiretap discriminator to the
    /// passive study, to prove the gates can fail.
    pub fixture_leaky: bool,
}

impl Default for AttackContext {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: None,
            n_bits: None,
            m: None,
            samples_per_cycle: None,
            amplitude_scale: None,
            fixture_leaky: false,
        }
    }
}

/// A named adversary model producing gated reports.
pub trait Attack: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, ctx: &AttackContext) -> Result<Vec<AttackReport>>;
}

/// All registered attacks, in a stable order.
pub fn registry() -> Vec<Box<dyn Attack>> {
    vec![
        Box::new(PassiveEve),
        Box::new(ActiveInject),
        Box::new(BruteForceUltra),
        Box::new(BruteForceStream),
        Box::new(BruteForceKey),
        Box::new(CloneSnapshot),
        Box::new(ManufacturerReplay),
    ]
}

/// Look an attack up by name.
pub fn find(name: &str) -> Option<Box<dyn Attack>> {
    registry().into_iter().find(|a| a.name() == name)
}

/// Run every registered attack with one context.
pub fn run_all(ctx: &AttackContext) -> Result<Vec<AttackReport>> {
    let mut out = Vec::new();
    for attack in registry() {
        out.extend(attack.run(ctx)?);
    }
    Ok(out)
}

/// Cheap renewal physics for device setup inside attack drivers: the
/// attacks measure verification rates, not exchange statistics.
fn setup_params(m: u32) -> ProtocolParams {
    let mut p = ProtocolParams { m, ..ProtocolParams::default() };
    p.kljn.noise = NoiseParams { samples_per_cycle: 256, ..NoiseParams::default() };
    p
}

/// Provision and (for strong/ultra) initialize a pair.
fn initialized_pair(
    variant: Variant,
    n_bits: usize,
    seed: u64,
    params: &ProtocolParams,
) -> Result<(PufDevice, PufDevice)> {
    let pair = provision(variant, n_bits, seed)?;
    let (mut lock, mut key) = (pair.lock, pair.key);
    if variant != Variant::Simple {
        let s = open_pair(&mut lock, &mut key, params, derive_seed(seed, 0, "setup.init"))?;
        if s.verdict != SessionVerdict::Accept {
            return Err(Error::Protocol("attack setup: initialization did not accept".into()));
        }
    }
    Ok((lock, key))
}

// ---------------------------------------------------------------------------

struct PassiveEve;

impl Attack for PassiveEve {
    fn name(&self) -> &'static str {
        "passive-eve"
    }

    fn description(&self) -> &'static str {
        "wiretap discriminators over mixed-cycle waveforms; accuracy must sit at chance"
    }

    fn run(&self, ctx: &AttackContext) -> Result<Vec<AttackReport>> {
        let target_cycles = ctx.trials.unwrap_or(10_000);
        let n_bits = ctx.n_bits.unwrap_or(64);
        let samples = ctx.samples_per_cycle.unwrap_or(1000);
        let discriminators = standard_discriminators();
        // Every kept bit is a mixed cycle, so n_bits exchanges-worth of
        // bits guarantee the target.
        let exchanges = target_cycles.div_ceil(n_bits as u64);
        let pools: Vec<ScorePool> = (0..exchanges)
            .into_par_iter()
            .map(|i| -> Result<ScorePool> {
                let mut cfg =
                    ExchangeConfig::new(n_bits, derive_seed(ctx.seed, i, "attack.eve.exchange"));
                cfg.params.noise =
                    NoiseParams { samples_per_cycle: samples, ..NoiseParams::default() };
                cfg.retain_traces = true;
                let t = run_exchange(&cfg)?;
                // Offset cannot collide across exchanges: max_cycles bounds
                // the per-exchange index.
                score_mixed_cycles(&t, &discriminators, i * (cfg.max_cycles + 1))
            })
            .collect::<Result<_>>()?;
        let mut pool = ScorePool::new(discriminators.len());
        for p in pools {
            pool.merge(p);
        }

        let mut reports = Vec::new();
        for (d, scores) in discriminators.iter().zip(&pool.scores) {
            let out = mean_split_accuracy(d.name(), scores, &pool.labels)?;
            reports.push(AttackReport::binomial(
                format!("passive-eve/{}", out.discriminator),
                out.cycles,
                out.correct,
                0.5,
                GateKind::TwoSided,
                format!("mean-split accuracy over {} mixed cycles", out.cycles),
            ));
        }

        if ctx.fixture_leaky {
            // A deliberately broken discriminator that peeks at the truth
            // and guesses right 60% of the time. It exists to prove the
            // harness can fail: its report must come out pass = false.
            let leak_seed = derive_seed(ctx.seed, 0, "fixture.leak");
            let correct = pool
                .labels
                .iter()
                .enumerate()
                .filter(|(i, _)| {
                    let u = crate::seed::splitmix_at(leak_seed, *i as u64);
                    (u as f64 / u64::MAX as f64) < 0.6
                })
                .count() as u64;
            reports.push(AttackReport::binomial(
                "passive-eve/fixture-leaky-oracle",
                pool.labels.len() as u64,
                correct,
                0.5,
                GateKind::TwoSided,
                "test fixture: leaks 60% accuracy and must FAIL the chance gate",
            ));
        }
        Ok(reports)
    }
}

// ---------------------------------------------------------------------------

struct ActiveInject;

impl Attack for ActiveInject {
    fn name(&self) -> &'static str {
        "active-inject"
    }

    fn description(&self) -> &'static str {
        "DC current injection into the exchange; must be detected, excluded, and alarm-free when absent"
    }

    fn run(&self, ctx: &AttackContext) -> Result<Vec<AttackReport>> {
        let runs = ctx.trials.unwrap_or(1000);
        let n_bits = ctx.n_bits.unwrap_or(16);
        let samples = ctx.samples_per_cycle.unwrap_or(1000);
        let amplitude = ctx.amplitude_scale.unwrap_or(10.0);

        let run_one = |r: u64, amp: f64, label: &str| -> Result<(bool, bool, bool)> {
            let mut cfg = ExchangeConfig::new(n_bits, derive_seed(ctx.seed, r, label));
            cfg.params.noise = NoiseParams { samples_per_cycle: samples, ..NoiseParams::default() };
            cfg.injection =
                Some(InjectionPlan { start_cycle: 2, n_cycles: 4, amplitude_scale: amp });
            match run_exchange(&cfg) {
                Ok(t) => {
                    let detected = t.cycles.iter().any(|c| c.injected && c.alarm);
                    let leaked = t.cycles.iter().any(|c| c.injected && c.kept);
                    let any_alarm = t.alarm_count > 0;
                    Ok((detected, leaked, any_alarm))
                }
                // Aborting under attack is the strongest form of detection.
                Err(Error::ExchangeAborted { .. }) => Ok((true, false, true)),
                Err(e) => Err(e),
            }
        };

        let attacked: Vec<(bool, bool, bool)> = (0..runs)
            .into_par_iter()
            .map(|r| run_one(r, amplitude, "attack.active.run"))
            .collect::<Result<_>>()?;
        let detected = attacked.iter().filter(|x| x.0).count() as u64;
        let leaked = attacked.iter().filter(|x| x.1).count() as u64;

        let calibration: Vec<(bool, bool, bool)> = (0..runs)
            .into_par_iter()
            .map(|r| run_one(r, 0.0, "attack.active.calibration"))
            .collect::<Result<_>>()?;
        let false_alarms = calibration.iter().filter(|x| x.2).count() as u64;

        Ok(vec![
            AttackReport::with_tolerance(
                "active-inject/detection",
                runs,
                detected,
                1.0,
                0.01,
                GateKind::LowerBound,
                format!("{amplitude}x RMS injection into cycles 2..6 must alarm in >= 99% of runs"),
            ),
            AttackReport::with_tolerance(
                "active-inject/key-leak",
                runs,
                leaked,
                0.0,
                0.0,
                GateKind::UpperBound,
                "no injected cycle may ever contribute a key bit",
            ),
            AttackReport::with_tolerance(
                "active-inject/false-alarms",
                runs,
                false_alarms,
                0.0,
                1e-3,
                GateKind::UpperBound,
                "zero-amplitude calibration: alarm rate must stay below 1e-3",
            ),
        ])
    }
}

// ---------------------------------------------------------------------------

struct BruteForceUltra;

impl Attack for BruteForceUltra {
    fn name(&self) -> &'static str {
        "brute-force-ultra"
    }

    fn description(&self) -> &'static str {
        "uniformly random response to the N-bit challenge; accepted at exactly 2^-N"
    }

    fn run(&self, ctx: &AttackContext) -> Result<Vec<AttackReport>> {
        let trials = ctx.trials.unwrap_or(100_000);
        let n_bits = ctx.n_bits.unwrap_or(8);
        let params = setup_params(ctx.m.unwrap_or(16));
        let (lock, _key) =
            initialized_pair(Variant::Ultra, n_bits, derive_seed(ctx.seed, 0, "attack.bfu.pair"), &params)?;

        let successes: u64 = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<u64> {
                let mut rng = seeded_rng(derive_seed(ctx.seed, t, "attack.bfu.trial"));
                let nonce = BitString::random(&mut rng, n_bits);
                let guess = BitString::random(&mut rng, n_bits);
                Ok(u64::from(ultra_response_verdict(&lock, &nonce, &guess, false)))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;

        Ok(vec![AttackReport::binomial(
            "brute-force-ultra",
            trials,
            successes,
            (-(n_bits as f64)).exp2(),
            GateKind::TwoSided,
            format!("uniform random {n_bits}-bit response, fresh nonce per trial"),
        )])
    }
}

// ---------------------------------------------------------------------------

struct BruteForceStream;

impl Attack for BruteForceStream {
    fn name(&self) -> &'static str {
        "brute-force-stream"
    }

    fn description(&self) -> &'static str {
        "random telegraph stream against an m-step verification; survives at exactly 2^-m"
    }

    fn run(&self, ctx: &AttackContext) -> Result<Vec<AttackReport>> {
        let trials = ctx.trials.unwrap_or(1_000_000);
        let n_bits = ctx.n_bits.unwrap_or(16);
        let m = ctx.m.unwrap_or(12);
        let params = setup_params(16);
        let (lock, _key) =
            initialized_pair(Variant::Strong, n_bits, derive_seed(ctx.seed, 0, "attack.bfs.pair"), &params)?;

        let successes: u64 = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<u64> {
                let seed_t = derive_seed(ctx.seed, t, "attack.bfs.trial");
                let mut rng = seeded_rng(seed_t);
                let challenge = BitString::random(&mut rng, n_bits);
                let start: u64 = rng.gen();
                // An independent fair telegraph wave: each step survives
                // the product check with probability 1/2.
                let guess = decoy_stream(derive_seed(seed_t, 0, "guess"), m, start, RtwMode::Product)?;
                Ok(u64::from(stream_response_verdict(&lock, &challenge, &guess, RtwMode::Product)?))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;

        Ok(vec![AttackReport::binomial(
            "brute-force-stream",
            trials,
            successes,
            (-(f64::from(m))).exp2(),
            GateKind::TwoSided,
            format!("random +/-1 stream, m = {m}, fresh challenge per trial"),
        )])
    }
}

// ---------------------------------------------------------------------------

struct BruteForceKey;

impl Attack for BruteForceKey {
    fn name(&self) -> &'static str {
        "brute-force-key"
    }

    fn description(&self) -> &'static str {
        "random key guess driven through the full encrypted-challenge round; accepted at ~2^(1-N)"
    }

    fn run(&self, ctx: &AttackContext) -> Result<Vec<AttackReport>> {
        let trials = ctx.trials.unwrap_or(100_000);
        let n_bits = ctx.n_bits.unwrap_or(8);
        let m = ctx.m.unwrap_or(83);
        let params = setup_params(16);
        let (lock, _key) =
            initialized_pair(Variant::Strong, n_bits, derive_seed(ctx.seed, 0, "attack.bfk.pair"), &params)?;

        let successes: u64 = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<u64> {
                let mut rng = seeded_rng(derive_seed(ctx.seed, t, "attack.bfk.trial"));
                // Lock side of a round: fresh challenge, encrypted under
                // the true secret.
                let challenge = BitString::random(&mut rng, n_bits);
                let start: u64 = rng.gen();
                let ciphertext = challenge.xor(&cipher_stream(&lock.stored.bits, t))?;
                // Attacker: guess a key, decrypt with it, stream the
                // product under its assignment. The generator bank is
                // public knowledge.
                let guessed_key = BitString::random(&mut rng, n_bits);
                let plaintext = ciphertext.xor(&cipher_stream(&guessed_key, t))?;
                let assignment = assign_from_secret(&lock.bank, &guessed_key)?;
                let stream =
                    encode_string(&lock.bank, &assignment, &plaintext, m, start, RtwMode::Product)?;
                Ok(u64::from(stream_response_verdict(&lock, &challenge, &stream, RtwMode::Product)?))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;

        // The response stream depends on the key and the decrypted challenge
        // only through their per-position XOR, so a guess G is accepted not
        // just when G equals the key K but whenever
        // G ^ keystream(G) == K ^ keystream(K). A uniform wrong guess hits
        // that collision at ~2^-N too (one expected extra preimage), putting
        // the exact rate at 2^-N * (2 - 2^-N), i.e. just under 2^(1-N).
        let p_key = (-(n_bits as f64)).exp2();
        Ok(vec![AttackReport::binomial(
            "brute-force-key",
            trials,
            successes,
            p_key * (2.0 - p_key),
            GateKind::TwoSided,
            format!(
                "uniform {n_bits}-bit key guess; rate doubles over 2^-{n_bits} via keystream \
                 preimage collisions; m = {m} keeps the stream-collision term ~2^-{m} negligible"
            ),
        )])
    }
}

// ---------------------------------------------------------------------------

struct CloneSnapshot;

impl Attack for CloneSnapshot {
    fn name(&self) -> &'static str {
        "clone-snapshot"
    }

    fn description(&self) -> &'static str {
        "bit-exact device clone; opens before the next renewal, dead after it"
    }

    fn run(&self, ctx: &AttackContext) -> Result<Vec<AttackReport>> {
        let n_bits = ctx.n_bits.unwrap_or(16);
        let params = setup_params(ctx.m.unwrap_or(16));

        // Before: clone the key right after initialization and present the
        // clone. Nothing has renewed since the snapshot, so it must open.
        let (mut lock_a, key_a) =
            initialized_pair(Variant::Ultra, n_bits, derive_seed(ctx.seed, 0, "attack.clone.a"), &params)?;
        let mut clone_a = key_a.clone();
        let (mut le, mut ke) = open_session(derive_seed(ctx.seed, 0, "attack.clone.a.session"));
        let before = challenge_ultra(&mut lock_a, &mut clone_a, &mut le, &mut ke, &params, derive_seed(ctx.seed, 1, "attack.clone.a.session"))?;

        // After: clone, let the legitimate key run one session (which
        // renews the secret), then present the stale clone.
        let (mut lock_b, mut key_b) =
            initialized_pair(Variant::Ultra, n_bits, derive_seed(ctx.seed, 0, "attack.clone.b"), &params)?;
        let mut clone_b = key_b.clone();
        let (mut le1, mut ke1) = open_session(derive_seed(ctx.seed, 0, "attack.clone.b.session"));
        let honest = challenge_ultra(&mut lock_b, &mut key_b, &mut le1, &mut ke1, &params, derive_seed(ctx.seed, 1, "attack.clone.b.session"))?;
        if honest.verdict != SessionVerdict::Accept {
            return Err(Error::Protocol("clone-snapshot setup: honest session did not accept".into()));
        }
        let (mut le2, mut ke2) = open_session(derive_seed(ctx.seed, 2, "attack.clone.b.session"));
        let after = challenge_ultra(&mut lock_b, &mut clone_b, &mut le2, &mut ke2, &params, derive_seed(ctx.seed, 3, "attack.clone.b.session"))?;

        Ok(vec![
            AttackReport::with_tolerance(
                "clone-snapshot/before-renewal",
                1,
                u64::from(before.verdict == SessionVerdict::Accept),
                1.0,
                0.0,
                GateKind::TwoSided,
                "a fresh clone is indistinguishable from the original",
            ),
            AttackReport::with_tolerance(
                "clone-snapshot/after-renewal",
                1,
                u64::from(after.verdict == SessionVerdict::Accept),
                0.0,
                0.0,
                GateKind::TwoSided,
                "one honest session renews the secret and orphans the clone",
            ),
        ])
    }
}

// ---------------------------------------------------------------------------

struct ManufacturerReplay;

impl Attack for ManufacturerReplay {
    fn name(&self) -> &'static str {
        "manufacturer-replay"
    }

    fn description(&self) -> &'static str {
        "manufacturer rebuilds the key from provisioning records; opens simple pairs, never initialized strong pairs"
    }

    fn run(&self, ctx: &AttackContext) -> Result<Vec<AttackReport>> {
        let n_bits = ctx.n_bits.unwrap_or(16);
        // Full-length streams so the residual 2^-m is astronomically small.
        let params = setup_params(ctx.m.unwrap_or(83));

        // Strong: after initialization the secret is an exchanged key the
        // manufacturer never saw.
        let mseed = derive_seed(ctx.seed, 0, "attack.replay.strong");
        let (mut lock_s, _key_s) = initialized_pair(Variant::Strong, n_bits, mseed, &params)?;
        let mut replica = provision(Variant::Strong, n_bits, mseed)?.key;
        // The attacker controls the replica's firmware; phase checks on the
        // counterfeit side are no obstacle.
        replica.phase = crate::puf::device::Phase::Active;
        let (mut le, mut ke) = open_session(derive_seed(ctx.seed, 1, "attack.replay.strong"));
        let strong = challenge_strong(&mut lock_s, &mut replica, &mut le, &mut ke, &params, derive_seed(ctx.seed, 2, "attack.replay.strong"))?;

        // Simple: the manufacturer key is the lifetime secret; a rebuild
        // opens the lock.
        let sseed = derive_seed(ctx.seed, 0, "attack.replay.simple");
        let (mut lock_p, _key_p) = initialized_pair(Variant::Simple, n_bits, sseed, &params)?;
        let mut rebuilt = provision(Variant::Simple, n_bits, sseed)?.key;
        let (mut le2, mut ke2) = open_session(derive_seed(ctx.seed, 1, "attack.replay.simple"));
        let simple = challenge_simple(&mut lock_p, &mut rebuilt, &mut le2, &mut ke2, &params, derive_seed(ctx.seed, 2, "attack.replay.simple"))?;

        Ok(vec![
            AttackReport::with_tolerance(
                "manufacturer-replay/strong-after-init",
                1,
                u64::from(strong.verdict == SessionVerdict::Accept),
                0.0,
                0.0,
                GateKind::TwoSided,
                format!("initialization retires the manufacturer key; residual 2^-{}", params.m),
            ),
            AttackReport::with_tolerance(
                "manufacturer-replay/simple",
                1,
                u64::from(simple.verdict == SessionVerdict::Accept),
                1.0,
                0.0,
                GateKind::TwoSided,
                "simple pairs keep the provisioned secret for life",
            ),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn registry_names_are_unique_and_lookup_works() {
        let names: Vec<&str> = registry().iter().map(|a| a.name()).collect();
        let set: HashSet<&str> = names.iter().copied().collect();
        assert_eq!(names.len(), set.len(), "duplicate attack names");
        assert_eq!(names.len(), 7);
        assert!(find("brute-force-ultra").is_some());
        assert!(find("no-such-attack").is_none());
        for a in registry() {
            assert!(!a.description().is_empty());
        }
    }

    #[test]
    fn clone_snapshot_is_deterministic_and_passes() {
        let ctx = AttackContext { seed: 5, ..AttackContext::default() };
        let r1 = find("clone-snapshot").unwrap().run(&ctx).unwrap();
        let r2 = find("clone-snapshot").unwrap().run(&ctx).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.len(), 2);
        assert!(r1.iter().all(|r| r.pass), "{r1:?}");
        assert_eq!(r1[0].successes, 1, "clone must open before renewal");
        assert_eq!(r1[1].successes, 0, "clone must be dead after renewal");
    }

    #[test]
    fn manufacturer_replay_splits_strong_and_simple() {
        let ctx = AttackContext { seed: 6, ..AttackContext::default() };
        let reports = find("manufacturer-replay").unwrap().run(&ctx).unwrap();
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.pass), "{reports:?}");
        assert_eq!(reports[0].successes, 0, "strong pair must reject the replica");
        assert_eq!(reports[1].successes, 1, "simple pair must accept the rebuild");
    }

    #[test]
    fn random_ultra_responses_hit_two_to_minus_n() {
        let ctx = AttackContext {
            seed: 7,
            trials: Some(20_000),
            n_bits: Some(6),
            ..AttackContext::default()
        };
        let reports = find("brute-force-ultra").unwrap().run(&ctx).unwrap();
        let r = &reports[0];
        assert!((r.analytic_rate - 1.0 / 64.0).abs() < 1e-15);
        assert!(r.pass, "measured {} vs analytic {} +/- {}", r.measured_rate, r.analytic_rate, r.tolerance);
        assert!(r.successes > 0, "20k trials at 1/64 cannot plausibly yield zero hits");
    }

    #[test]
    fn random_streams_survive_at_two_to_minus_m() {
        let ctx = AttackContext {
            seed: 8,
            trials: Some(200_000),
            m: Some(10),
            ..AttackContext::default()
        };
        let reports = find("brute-force-stream").unwrap().run(&ctx).unwrap();
        let r = &reports[0];
        assert!((r.analytic_rate - (0.5f64).powi(10)).abs() < 1e-18);
        assert!(r.pass, "measured {} vs analytic {} +/- {}", r.measured_rate, r.analytic_rate, r.tolerance);
    }

    #[test]
    fn key_guessing_is_gated_by_n_not_m() {
        let ctx = AttackContext {
            seed: 9,
            trials: Some(20_000),
            n_bits: Some(6),
            m: Some(48),
            ..AttackContext::default()
        };
        let reports = find("brute-force-key").unwrap().run(&ctx).unwrap();
        let r = &reports[0];
        // 2^-6 * (2 - 2^-6): the exact key plus the expected single extra
        // keystream preimage.
        assert!((r.analytic_rate - (2.0 / 64.0 - 1.0 / 4096.0)).abs() < 1e-15);
        assert!(r.pass, "measured {} vs analytic {} +/- {}", r.measured_rate, r.analytic_rate, r.tolerance);
    }

    #[test]
    fn detection_rises_monotonically_with_amplitude() {
        let rates: Vec<f64> = [0.0, 1.0, 2.9, 5.0, 10.0]
            .into_iter()
            .map(|amp| {
                let ctx = AttackContext {
                    seed: 10,
                    trials: Some(50),
                    samples_per_cycle: Some(400),
                    amplitude_scale: Some(amp),
                    ..AttackContext::default()
                };
                let reports = find("active-inject").unwrap().run(&ctx).unwrap();
                reports.iter().find(|r| r.name.ends_with("/detection")).unwrap().measured_rate
            })
            .collect();
        for pair in rates.windows(2) {
            assert!(pair[1] >= pair[0], "detection must not fall with amplitude: {rates:?}");
        }
        assert_eq!(rates[0], 0.0, "zero amplitude cannot be detected");
        assert_eq!(rates[4], 1.0, "10x RMS injection is always caught: {rates:?}");
    }

    #[test]
    fn active_injection_never_contributes_key_bits() {
        let ctx = AttackContext {
            seed: 11,
            trials: Some(100),
            samples_per_cycle: Some(400),
            ..AttackContext::default()
        };
        let reports = find("active-inject").unwrap().run(&ctx).unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert!(r.pass, "{}: measured {} vs analytic {}", r.name, r.measured_rate, r.analytic_rate);
        }
        assert_eq!(reports[1].successes, 0, "injected cycles leaked into a key");
        assert_eq!(reports[2].successes, 0, "false alarms without injection");
    }

    #[test]
    fn small_eve_battery_passes_and_leaky_fixture_fails() {
        let ctx = AttackContext {
            seed: 12,
            trials: Some(2000),
            n_bits: Some(32),
            samples_per_cycle: Some(300),
            fixture_leaky: true,
            ..AttackContext::default()
        };
        let reports = find("passive-eve").unwrap().run(&ctx).unwrap();
        assert_eq!(reports.len(), 5);
        for r in &reports {
            assert!(r.trials >= 2000, "{}: only {} cycles", r.name, r.trials);
            if r.name.contains("fixture-leaky") {
                assert!(!r.pass, "the leaky fixture must fail its gate: {r:?}");
                assert!(r.measured_rate > 0.55, "fixture should leak ~0.6, got {}", r.measured_rate);
            } else {
                assert!(r.pass, "{}: accuracy {} off chance", r.name, r.measured_rate);
            }
        }
    }

    #[test]
    fn attack_reports_are_identical_across_thread_counts() {
        // The rayon pool is global, so emulate single-thread determinism by
        // comparing two runs in the same process (the pool size is fixed)
        // plus the documented derivation: per-trial seeds depend only on
        // (master seed, trial index).
        let ctx = AttackContext {
            seed: 13,
            trials: Some(5_000),
            n_bits: Some(8),
            ..AttackContext::default()
        };
        let a = find("brute-force-ultra").unwrap().run(&ctx).unwrap();
        let b = find("brute-force-ultra").unwrap().run(&ctx).unwrap();
        assert_eq!(a, b);
    }
}
