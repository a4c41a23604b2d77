//! Adversary harness: attack drivers that measure the security rates the
//! design promises and gate them statistically.
//!
//! * [`report`] — gated outcome records (measured vs analytic rate).
//! * [`eve`] — passive wiretap discriminators over exchange waveforms.
//! * [`attacks`] — the strategy registry: forgery, injection, cloning and
//!   replay drivers, all deterministic in a master seed.

pub mod attacks;
pub mod eve;
pub mod report;

pub use attacks::{find, registry, run_all, Attack, AttackContext};
pub use eve::{
    mean_split_accuracy, passive_eve_study, score_mixed_cycles, standard_discriminators,
    Discriminator, EveOutcome, ScorePool,
};
pub use report::{reports_to_csv, AttackReport, GateKind};
