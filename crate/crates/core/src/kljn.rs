//! Two-resistor thermal-noise key exchange loop.
//!
//! Each cycle, both parties privately connect either a low (`r_low`) or high
//! (`r_high`) resistor — with its Johnson noise source — to a shared wire.
//! Publicly observable are only the channel voltage and loop current. Their
//! mean squares reveal the *parallel* resistance, which distinguishes
//! low/low, mixed, and high/high states but cannot order a mixed state:
//! low/high and high/low produce identical statistics. Mixed cycles therefore
//! yield one secret bit (each side knows its own switch, hence the peer's);
//! same-state cycles are discarded as public.
//!
//! Defense against an in-wire current injector: both ends exchange their
//! instantaneous voltage/current readings over an authenticated public
//! channel every `every_kth` tick and alarm on any normalized deviation
//! above `epsilon`. Alarmed cycles are discarded. The public traffic has a
//! price: `ceil(log2 F)` bits of the produced key must be spent
//! authenticating `F` public comparison bits.
//!
//! Circuit model (lumped, both noise sources white and independent):
//!
//! ```text
//! I      = (U_A - U_B) / (R_A + R_B)          loop current
//! U_ch   = (U_A*R_B + U_B*R_A) / (R_A + R_B)  shared node voltage
//! E<U²>  = 4*kT_eff*Δf * R_p,  R_p = R_A*R_B/(R_A+R_B)
//! E<I²>  = 4*kT_eff*Δf / (R_A + R_B)
//! ```
//!
//! An attacker injecting a current `I_E` at the node shifts the node voltage
//! by `I_E*R_p` (identically at both ends) and splits the end currents:
//! Alice measures `I - I_E*R_p/R_A`, Bob `I + I_E*R_p/R_B`, so the end-to-end
//! current discrepancy equals `I_E` exactly — which is what the comparison
//! defense detects.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::noise::{NoiseParams, SampleTrace};
use crate::seed::derive_seed;

/// Bits of public comparison traffic per compared tick: each tick one party
/// publishes its instantaneous voltage and current as two 64-bit values.
pub const BITS_PER_COMPARED_TICK: u64 = 128;

/// Parameters of the instantaneous-comparison defense.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareParams {
    /// Compare every k-th tick (tick 0 always compared). Must be >= 1.
    pub every_kth: usize,
    /// Alarm when a compared deviation exceeds `epsilon` reference RMS units.
    pub epsilon: f64,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self { every_kth: 16, epsilon: 3.0 }
    }
}

/// Full parameter set for the exchange loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KljnParams {
    pub r_low: f64,
    pub r_high: f64,
    pub noise: NoiseParams,
    pub compare: CompareParams,
}

impl Default for KljnParams {
    fn default() -> Self {
        Self {
            r_low: 10_000.0,
            r_high: 100_000.0,
            noise: NoiseParams::default(),
            compare: CompareParams::default(),
        }
    }
}

impl KljnParams {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if !(self.r_low.is_finite() && self.r_low > 0.0) {
            return Err(Error::InvalidParam(format!("r_low must be positive, got {}", self.r_low)));
        }
        if !(self.r_high.is_finite() && self.r_high > 0.0) {
            return Err(Error::InvalidParam(format!(
                "r_high must be positive, got {}",
                self.r_high
            )));
        }
        if self.r_low >= self.r_high {
            return Err(Error::InvalidParam(format!(
                "r_low ({}) must be strictly below r_high ({})",
                self.r_low, self.r_high
            )));
        }
        if self.compare.every_kth == 0 {
            return Err(Error::InvalidParam("compare.every_kth must be >= 1".into()));
        }
        if !(self.compare.epsilon.is_finite() && self.compare.epsilon > 0.0) {
            return Err(Error::InvalidParam(format!(
                "compare.epsilon must be positive, got {}",
                self.compare.epsilon
            )));
        }
        Ok(())
    }
}

/// Which resistor a switch bit selects: `false` = low, `true` = high.
pub fn select_resistance(bit: bool, params: &KljnParams) -> f64 {
    if bit {
        params.r_high
    } else {
        params.r_low
    }
}

fn r_parallel(r_a: f64, r_b: f64) -> f64 {
    r_a * r_b / (r_a + r_b)
}

/// Expected mean-square channel voltage for a switch pair.
pub fn expected_msq_voltage(alice_bit: bool, bob_bit: bool, params: &KljnParams) -> f64 {
    let r_a = select_resistance(alice_bit, params);
    let r_b = select_resistance(bob_bit, params);
    params.noise.four_kt_df() * r_parallel(r_a, r_b)
}

/// Expected mean-square loop current for a switch pair.
pub fn expected_msq_current(alice_bit: bool, bob_bit: bool, params: &KljnParams) -> f64 {
    let r_a = select_resistance(alice_bit, params);
    let r_b = select_resistance(bob_bit, params);
    params.noise.four_kt_df() / (r_a + r_b)
}

/// RMS of the loop current in the mixed state — the natural scale for
/// normalizing current deviations in the comparison defense.
pub fn reference_rms_current(params: &KljnParams) -> f64 {
    (params.noise.four_kt_df() / (params.r_low + params.r_high)).sqrt()
}

/// RMS of the channel voltage in the mixed state.
pub fn reference_rms_voltage(params: &KljnParams) -> f64 {
    (params.noise.four_kt_df() * r_parallel(params.r_low, params.r_high)).sqrt()
}

/// Joint switch state as seen through channel statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateClass {
    SameLow,
    Mixed,
    SameHigh,
}

impl StateClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StateClass::SameLow => "SameLow",
            StateClass::Mixed => "Mixed",
            StateClass::SameHigh => "SameHigh",
        }
    }
}

/// Classification thresholds `(t1, t2)`: geometric means of adjacent
/// expected voltage levels, balancing the multiplicative spread of the
/// mean-square estimator.
pub fn classification_thresholds(params: &KljnParams) -> (f64, f64) {
    let l_low = expected_msq_voltage(false, false, params);
    let l_mix = expected_msq_voltage(false, true, params);
    let l_high = expected_msq_voltage(true, true, params);
    ((l_low * l_mix).sqrt(), (l_mix * l_high).sqrt())
}

/// Classify a measured mean-square voltage: below `t1` same-low, above `t2`
/// same-high, otherwise mixed.
pub fn classify_state(msq_voltage: f64, params: &KljnParams) -> Result<StateClass> {
    if !(msq_voltage.is_finite() && msq_voltage >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "mean-square voltage must be non-negative, got {msq_voltage}"
        )));
    }
    let (t1, t2) = classification_thresholds(params);
    Ok(if msq_voltage < t1 {
        StateClass::SameLow
    } else if msq_voltage > t2 {
        StateClass::SameHigh
    } else {
        StateClass::Mixed
    })
}

/// What one party learns about the peer's switch bit from a classified cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeerEstimate {
    /// Mixed cycle: the peer holds the complement of our bit, and an
    /// eavesdropper cannot know which side holds which — a secret bit.
    Secret(bool),
    /// Same-state cycle: deducible, but public; the cycle is discarded.
    Discard,
    /// The observed class contradicts our own switch position (finite-sample
    /// estimation error); the cycle is discarded and counted.
    Contradiction,
}

/// Deduce the peer's switch bit from our own bit and the observed class.
pub fn deduce_peer_bit(own_bit: bool, class: StateClass) -> PeerEstimate {
    match class {
        StateClass::Mixed => PeerEstimate::Secret(!own_bit),
        StateClass::SameLow => {
            if own_bit {
                PeerEstimate::Contradiction
            } else {
                PeerEstimate::Discard
            }
        }
        StateClass::SameHigh => {
            if own_bit {
                PeerEstimate::Discard
            } else {
                PeerEstimate::Contradiction
            }
        }
    }
}

/// Waveforms of one cycle as observable on the wire. The node voltage is
/// identical at both ends; end currents differ only under injection.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTraces {
    pub channel_voltage: SampleTrace,
    pub alice_current: SampleTrace,
    pub bob_current: SampleTrace,
}

/// Statistics of one simulated cycle (no allocation; hot path).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleObservation {
    /// Mean-square node voltage over the cycle.
    pub msq_u: f64,
    /// Mean-square current at Alice's end (equals Bob's absent injection).
    pub msq_i: f64,
    /// Number of ticks the comparison defense examined.
    pub compared_ticks: u64,
    /// First compared tick whose normalized deviation exceeded epsilon.
    pub first_breach: Option<u64>,
    /// Largest normalized deviation seen across compared ticks.
    pub max_normalized_deviation: f64,
}

/// Run one cycle's physics, streaming each tick to `sink(t, u, i_a, i_b)`.
fn cycle_physics<F>(
    alice_bit: bool,
    bob_bit: bool,
    params: &KljnParams,
    injected_current: f64,
    rng_a: &mut ChaCha8Rng,
    rng_b: &mut ChaCha8Rng,
    mut sink: F,
) where
    F: FnMut(usize, f64, f64, f64),
{
    let r_a = select_resistance(alice_bit, params);
    let r_b = select_resistance(bob_bit, params);
    let four_kt_df = params.noise.four_kt_df();
    let sigma_a = (four_kt_df * r_a).sqrt();
    let sigma_b = (four_kt_df * r_b).sqrt();
    let inv_denom = 1.0 / (r_a + r_b);
    let r_p = r_parallel(r_a, r_b);
    // Injection splits at the node by the conductance ratio; the end-to-end
    // current discrepancy is exactly the injected current.
    let shift_u = injected_current * r_p;
    let shift_ia = -injected_current * r_p / r_a;
    let shift_ib = injected_current * r_p / r_b;
    for t in 0..params.noise.samples_per_cycle {
        let za: f64 = rng_a.sample(StandardNormal);
        let zb: f64 = rng_b.sample(StandardNormal);
        let u_a = sigma_a * za;
        let u_b = sigma_b * zb;
        let i0 = (u_a - u_b) * inv_denom;
        let u_ch = (u_a * r_b + u_b * r_a) * inv_denom;
        sink(t, u_ch + shift_u, i0 + shift_ia, i0 + shift_ib);
    }
}

/// Simulate one cycle and return summary statistics plus the outcome of the
/// inline comparison defense. `injected_current` is a DC current (amperes in
/// the simulation's unit scale) an attacker feeds into the node; pass 0.0
/// for a clean cycle.
pub fn simulate_cycle_stats(
    alice_bit: bool,
    bob_bit: bool,
    params: &KljnParams,
    injected_current: f64,
    rng_a: &mut ChaCha8Rng,
    rng_b: &mut ChaCha8Rng,
) -> Result<CycleObservation> {
    params.validate()?;
    let m = params.noise.samples_per_cycle;
    let k = params.compare.every_kth;
    let eps = params.compare.epsilon;
    let inv_rms_i = 1.0 / reference_rms_current(params);
    let mut sum_u2 = 0.0;
    let mut sum_i2 = 0.0;
    let mut compared = 0u64;
    let mut first_breach = None;
    let mut max_dev: f64 = 0.0;
    cycle_physics(alice_bit, bob_bit, params, injected_current, rng_a, rng_b, |t, u, ia, ib| {
        sum_u2 += u * u;
        sum_i2 += ia * ia;
        if t % k == 0 {
            compared += 1;
            // Node voltage is common to both ends in the lumped model, so
            // only the current legs can deviate.
            let dev = (ib - ia).abs() * inv_rms_i;
            if dev > max_dev {
                max_dev = dev;
            }
            if dev > eps && first_breach.is_none() {
                first_breach = Some(t as u64);
            }
        }
    });
    Ok(CycleObservation {
        msq_u: sum_u2 / m as f64,
        msq_i: sum_i2 / m as f64,
        compared_ticks: compared,
        first_breach,
        max_normalized_deviation: max_dev,
    })
}

/// Simulate one cycle retaining full waveforms (for eavesdropper studies and
/// explicit [`compare_instantaneous`] calls).
pub fn simulate_cycle_traces(
    alice_bit: bool,
    bob_bit: bool,
    params: &KljnParams,
    injected_current: f64,
    rng_a: &mut ChaCha8Rng,
    rng_b: &mut ChaCha8Rng,
) -> Result<CycleTraces> {
    params.validate()?;
    let m = params.noise.samples_per_cycle;
    let mut u = Vec::with_capacity(m);
    let mut ia = Vec::with_capacity(m);
    let mut ib = Vec::with_capacity(m);
    cycle_physics(alice_bit, bob_bit, params, injected_current, rng_a, rng_b, |_, uv, a, b| {
        u.push(uv);
        ia.push(a);
        ib.push(b);
    });
    Ok(CycleTraces {
        channel_voltage: SampleTrace::volts(u),
        alice_current: SampleTrace::amperes(ia),
        bob_current: SampleTrace::amperes(ib),
    })
}

/// Outcome of the instantaneous-comparison defense over one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlarmReport {
    pub alarm: bool,
    /// First compared tick whose deviation breached epsilon.
    pub first_breach: Option<u64>,
    /// Ticks examined (every k-th, starting at tick 0).
    pub compared_ticks: u64,
    /// Public bits this comparison cost: 128 per compared tick.
    pub public_bits: u64,
    pub max_normalized_deviation: f64,
}

/// Compare the two ends' instantaneous readings every k-th tick. Voltage
/// deviations are normalized by the mixed-state voltage RMS, current
/// deviations by the mixed-state current RMS; either exceeding epsilon is an
/// alarm. All four traces must have equal length.
pub fn compare_instantaneous(
    u_a: &SampleTrace,
    i_a: &SampleTrace,
    u_b: &SampleTrace,
    i_b: &SampleTrace,
    params: &KljnParams,
) -> Result<AlarmReport> {
    params.validate()?;
    let n = u_a.len();
    for t in [i_a, u_b, i_b] {
        if t.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: t.len() });
        }
    }
    if n == 0 {
        return Err(Error::EmptyTrace);
    }
    let k = params.compare.every_kth;
    let eps = params.compare.epsilon;
    let inv_rms_u = 1.0 / reference_rms_voltage(params);
    let inv_rms_i = 1.0 / reference_rms_current(params);
    let mut compared = 0u64;
    let mut first_breach = None;
    let mut max_dev: f64 = 0.0;
    for t in (0..n).step_by(k) {
        compared += 1;
        let du = (u_a.values()[t] - u_b.values()[t]).abs() * inv_rms_u;
        let di = (i_a.values()[t] - i_b.values()[t]).abs() * inv_rms_i;
        let dev = du.max(di);
        if dev > max_dev {
            max_dev = dev;
        }
        if dev > eps && first_breach.is_none() {
            first_breach = Some(t as u64);
        }
    }
    Ok(AlarmReport {
        alarm: first_breach.is_some(),
        first_breach,
        compared_ticks: compared,
        public_bits: compared * BITS_PER_COMPARED_TICK,
        max_normalized_deviation: max_dev,
    })
}

/// Secret bits spent authenticating `f_public_bits` of public comparison
/// traffic: `ceil(log2 F)`. `F` must be at least 1.
pub fn authentication_budget(f_public_bits: u64) -> Result<u32> {
    if f_public_bits == 0 {
        return Err(Error::InvalidParam("authentication budget requires F >= 1".into()));
    }
    Ok(if f_public_bits == 1 { 0 } else { 64 - (f_public_bits - 1).leading_zeros() })
}

/// A deterministic current-injection attack window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub start_cycle: u64,
    pub n_cycles: u64,
    /// DC amplitude in units of the mixed-state loop-current RMS.
    pub amplitude_scale: f64,
}

impl InjectionPlan {
    pub fn active_at(&self, cycle: u64) -> bool {
        self.amplitude_scale != 0.0
            && cycle >= self.start_cycle
            && cycle - self.start_cycle < self.n_cycles
    }
}

/// Everything that determines an exchange run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeConfig {
    pub n_bits: usize,
    pub params: KljnParams,
    pub seed: u64,
    /// Give up (with a diagnostic) if this many cycles pass without
    /// accumulating `n_bits` kept bits.
    pub max_cycles: u64,
    /// Abort when the alarm fraction exceeds this after a warm-up of 32
    /// cycles — persistent alarms mean the channel is under attack.
    pub abort_alarm_fraction: f64,
    pub injection: Option<InjectionPlan>,
    /// Retain per-cycle waveforms in the transcript (memory-heavy; off by
    /// default). Needed only by eavesdropper studies.
    #[serde(default)]
    pub retain_traces: bool,
}

impl ExchangeConfig {
    pub fn new(n_bits: usize, seed: u64) -> Self {
        Self {
            n_bits,
            params: KljnParams::default(),
            seed,
            max_cycles: 16 * n_bits as u64 + 512,
            abort_alarm_fraction: 0.5,
            injection: None,
            retain_traces: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_bits == 0 {
            return Err(Error::InvalidParam("n_bits must be >= 1".into()));
        }
        if self.max_cycles == 0 {
            return Err(Error::InvalidParam("max_cycles must be >= 1".into()));
        }
        if !(self.abort_alarm_fraction.is_finite() && self.abort_alarm_fraction > 0.0) {
            return Err(Error::InvalidParam("abort_alarm_fraction must be positive".into()));
        }
        Ok(())
    }
}

/// One cycle's record in an exchange transcript.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KljnCycle {
    pub index: u64,
    pub alice_bit: bool,
    pub bob_bit: bool,
    pub class: StateClass,
    pub kept: bool,
    pub alarm: bool,
    pub estimation_error: bool,
    pub injected: bool,
    pub msq_u: f64,
    pub msq_i: f64,
}

/// Complete record of one exchange run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeTranscript {
    pub config: ExchangeConfig,
    pub cycles: Vec<KljnCycle>,
    /// Waveforms per cycle; populated only when `retain_traces` is set.
    pub traces: Vec<CycleTraces>,
    pub key_alice: BitString,
    pub key_bob: BitString,
    pub discarded_count: u64,
    pub alarm_count: u64,
    pub estimation_error_count: u64,
    pub f_public_bits: u64,
    pub authentication_bits_consumed: u32,
}

impl ExchangeTranscript {
    pub fn kept_count(&self) -> u64 {
        self.cycles.iter().filter(|c| c.kept).count() as u64
    }

    pub fn kept_fraction(&self) -> f64 {
        if self.cycles.is_empty() {
            0.0
        } else {
            self.kept_count() as f64 / self.cycles.len() as f64
        }
    }

    /// Serialize as line-delimited JSON: one header record carrying the
    /// parameters and seed, then one record per cycle with the fixed fields
    /// `(index, class, kept, alarm, msq_u, msq_i)`. Byte-stable for equal
    /// configs: field order and float formatting are deterministic.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = serde_json::json!({
            "record": "header",
            "schema_version": 1,
            "n_bits": self.config.n_bits,
            "seed": self.config.seed,
            "r_low": self.config.params.r_low,
            "r_high": self.config.params.r_high,
            "kt_eff": self.config.params.noise.kt_eff,
            "bandwidth": self.config.params.noise.bandwidth,
            "samples_per_cycle": self.config.params.noise.samples_per_cycle,
            "compare_every_kth": self.config.params.compare.every_kth,
            "compare_epsilon": self.config.params.compare.epsilon,
            "cycles": self.cycles.len(),
            "kept": self.kept_count(),
            "discarded": self.discarded_count,
            "alarms": self.alarm_count,
            "estimation_errors": self.estimation_error_count,
            "f_public_bits": self.f_public_bits,
            "authentication_bits": self.authentication_bits_consumed,
            "key_alice_hex": self.key_alice.to_hex(),
            "key_bob_hex": self.key_bob.to_hex(),
        });
        out.push_str(&header.to_string());
        out.push('\n');
        for c in &self.cycles {
            let line = serde_json::json!({
                "record": "cycle",
                "index": c.index,
                "class": c.class.as_str(),
                "kept": c.kept,
                "alarm": c.alarm,
                "msq_u": c.msq_u,
                "msq_i": c.msq_i,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

/// Run a full exchange until `n_bits` secret bits are kept.
///
/// Key-bit convention: the key bit of a kept cycle is **Alice's switch
/// bit**; Bob records the complement of his own bit. Cycles are kept only
/// when classified Mixed with no alarm. Random streams are derived from
/// `config.seed` with fixed labels, so equal configs give byte-identical
/// transcripts.
pub fn run_exchange(config: &ExchangeConfig) -> Result<ExchangeTranscript> {
    config.validate()?;
    let mut rng_bits_a = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, "kljn.alice.bits"));
    let mut rng_bits_b = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, "kljn.bob.bits"));
    let mut rng_noise_a =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, "kljn.alice.noise"));
    let mut rng_noise_b = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0, "kljn.bob.noise"));

    let ref_rms_i = reference_rms_current(&config.params);
    let mut cycles = Vec::new();
    let mut traces = Vec::new();
    let mut key_alice = BitString::new(Vec::with_capacity(config.n_bits));
    let mut key_bob = BitString::new(Vec::with_capacity(config.n_bits));
    let mut discarded = 0u64;
    let mut alarms = 0u64;
    let mut estimation_errors = 0u64;
    let mut f_public_bits = 0u64;

    let mut index = 0u64;
    while key_alice.len() < config.n_bits {
        if index >= config.max_cycles {
            return Err(Error::ExchangeAborted {
                cycles: index,
                alarms,
                reason: format!(
                    "cycle budget {} exhausted with {}/{} bits kept",
                    config.max_cycles,
                    key_alice.len(),
                    config.n_bits
                ),
            });
        }
        let alice_bit = rng_bits_a.gen_bool(0.5);
        let bob_bit = rng_bits_b.gen_bool(0.5);
        let injected_current = match &config.injection {
            Some(plan) if plan.active_at(index) => plan.amplitude_scale * ref_rms_i,
            _ => 0.0,
        };

        let obs;
        if config.retain_traces {
            let tr = simulate_cycle_traces(
                alice_bit,
                bob_bit,
                &config.params,
                injected_current,
                &mut rng_noise_a,
                &mut rng_noise_b,
            )?;
            let report = compare_instantaneous(
                &tr.channel_voltage,
                &tr.alice_current,
                &tr.channel_voltage,
                &tr.bob_current,
                &config.params,
            )?;
            obs = CycleObservation {
                msq_u: crate::stats::mean_square(&tr.channel_voltage)?,
                msq_i: crate::stats::mean_square(&tr.alice_current)?,
                compared_ticks: report.compared_ticks,
                first_breach: report.first_breach,
                max_normalized_deviation: report.max_normalized_deviation,
            };
            traces.push(tr);
        } else {
            obs = simulate_cycle_stats(
                alice_bit,
                bob_bit,
                &config.params,
                injected_current,
                &mut rng_noise_a,
                &mut rng_noise_b,
            )?;
        }

        f_public_bits += obs.compared_ticks * BITS_PER_COMPARED_TICK;
        let alarm = obs.first_breach.is_some();
        let class = classify_state(obs.msq_u, &config.params)?;
        let est_a = deduce_peer_bit(alice_bit, class);
        let est_b = deduce_peer_bit(bob_bit, class);
        let estimation_error = est_a == PeerEstimate::Contradiction
            || est_b == PeerEstimate::Contradiction;
        let kept = class == StateClass::Mixed && !alarm && !estimation_error;
        if kept {
            key_alice.push(alice_bit);
            key_bob.push(!bob_bit);
        } else {
            discarded += 1;
        }
        if alarm {
            alarms += 1;
        }
        if estimation_error {
            estimation_errors += 1;
        }
        cycles.push(KljnCycle {
            index,
            alice_bit,
            bob_bit,
            class,
            kept,
            alarm,
            estimation_error,
            injected: injected_current != 0.0,
            msq_u: obs.msq_u,
            msq_i: obs.msq_i,
        });
        index += 1;

        // Persistent alarms mean someone is actively manipulating the loop;
        // give up rather than bleed key material.
        if index >= 32 && alarms as f64 / index as f64 > config.abort_alarm_fraction {
            return Err(Error::ExchangeAborted {
                cycles: index,
                alarms,
                reason: format!(
                    "alarm fraction {:.3} exceeded abort threshold {:.3}",
                    alarms as f64 / index as f64,
                    config.abort_alarm_fraction
                ),
            });
        }
    }

    let authentication_bits_consumed = authentication_budget(f_public_bits)?;
    Ok(ExchangeTranscript {
        config: config.clone(),
        cycles,
        traces,
        key_alice,
        key_bob,
        discarded_count: discarded,
        alarm_count: alarms,
        estimation_error_count: estimation_errors,
        f_public_bits,
        authentication_bits_consumed,
    })
}
