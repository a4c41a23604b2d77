//! Noise sources: random telegraph waves and Johnson (thermal) noise.
//!
//! Two kinds of randomness with deliberately different contracts:
//!
//! * **Telegraph waves** ([`RtwGenerator`]) are counter-based: amplitude at
//!   cycle `j` is a pure function of `(seed, j)`, so any party holding the
//!   seed can evaluate any cycle out of order. This is what makes product
//!   streams verifiable.
//! * **Johnson noise** ([`johnson_sample`] and friends) is sampled from a
//!   stateful seeded RNG; only whole-trace statistics matter, never the
//!   position of an individual sample.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::splitmix_at;

/// Binary random telegraph wave with amplitudes in `{-1, +1}`.
///
/// Amplitude at cycle `j` is the top bit of `splitmix_at(seed, j)`:
/// bit 1 maps to `-1`, bit 0 to `+1`. The generator also exposes a
/// sequential cursor for streaming use; `next_amplitude()` is exactly
/// `amplitude_at(cursor)` followed by a cursor increment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RtwGenerator {
    seed: u64,
    cursor: u64,
}

impl RtwGenerator {
    pub fn new(seed: u64) -> Self {
        Self { seed, cursor: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Random-access amplitude at cycle `j`: `+1` or `-1`.
    #[inline]
    pub fn amplitude_at(&self, j: u64) -> i8 {
        if splitmix_at(self.seed, j) >> 63 == 1 {
            -1
        } else {
            1
        }
    }

    /// The same cycle value as a logic bit under the canonical mapping
    /// `+1 <-> 0`, `-1 <-> 1`.
    #[inline]
    pub fn bit_at(&self, j: u64) -> bool {
        splitmix_at(self.seed, j) >> 63 == 1
    }

    /// Sequential form of [`RtwGenerator::amplitude_at`].
    pub fn next_amplitude(&mut self) -> i8 {
        let a = self.amplitude_at(self.cursor);
        self.cursor += 1;
        a
    }
}

/// Physical parameters of a thermal-noise simulation.
///
/// The mean-square voltage of a resistor `R` observed through bandwidth
/// `bandwidth` at effective temperature `kt_eff` is
/// `4 * kt_eff * bandwidth * R`; with the defaults (`kt_eff = 1.0`,
/// `bandwidth = 0.5`) that is numerically `2 R`, which keeps example numbers
/// readable. `samples_per_cycle` is how many independent samples both
/// parties draw within one switching cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub kt_eff: f64,
    pub bandwidth: f64,
    pub samples_per_cycle: usize,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { kt_eff: 1.0, bandwidth: 0.5, samples_per_cycle: 10_000 }
    }
}

impl NoiseParams {
    /// The factor `4 * kt_eff * bandwidth` multiplying resistance in all
    /// mean-square formulas.
    pub fn four_kt_df(&self) -> f64 {
        4.0 * self.kt_eff * self.bandwidth
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kt_eff.is_finite() && self.kt_eff > 0.0) {
            return Err(Error::InvalidParam(format!("kt_eff must be positive, got {}", self.kt_eff)));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(Error::InvalidParam(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if self.samples_per_cycle == 0 {
            return Err(Error::InvalidParam("samples_per_cycle must be >= 1".into()));
        }
        Ok(())
    }
}

/// Unit tag for a sampled waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceUnit {
    Volts,
    Amperes,
}

/// A finite waveform of instantaneous samples with a unit tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTrace {
    unit: TraceUnit,
    values: Vec<f64>,
}

impl SampleTrace {
    pub fn volts(values: Vec<f64>) -> Self {
        Self { unit: TraceUnit::Volts, values }
    }

    pub fn amperes(values: Vec<f64>) -> Self {
        Self { unit: TraceUnit::Amperes, values }
    }

    pub fn unit(&self) -> TraceUnit {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Standard deviation of the Johnson-noise voltage of resistance `r`.
pub fn johnson_sigma(r: f64, params: &NoiseParams) -> Result<f64> {
    params.validate()?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParam(format!("resistance must be positive, got {r}")));
    }
    Ok((params.four_kt_df() * r).sqrt())
}

/// One instantaneous Johnson-noise voltage sample of resistance `r`:
/// zero-mean Gaussian with variance `4 * kt_eff * bandwidth * r`.
pub fn johnson_sample<R: Rng + ?Sized>(r: f64, params: &NoiseParams, rng: &mut R) -> Result<f64> {
    let sigma = johnson_sigma(r, params)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(sigma * z)
}

/// A full cycle (`samples_per_cycle` samples) of Johnson-noise voltage.
pub fn johnson_trace<R: Rng + ?Sized>(
    r: f64,
    params: &NoiseParams,
    rng: &mut R,
) -> Result<SampleTrace> {
    let sigma = johnson_sigma(r, params)?;
    let values = (0..params.samples_per_cycle)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        })
        .collect();
    Ok(SampleTrace::volts(values))
}
