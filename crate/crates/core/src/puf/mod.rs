//! Hardware key/lock pairs and their challenge/response sessions.
//!
//! * [`device`] — device state: variants, lifecycle phases, secrets with
//!   provenance, and manufacturer provisioning.
//! * [`cipher`] — keystreams for challenge encryption and response masking.
//! * [`protocol`] — the session protocols (ultra / strong / simple),
//!   initialization, and two-phase key renewal over the framed transport.
//! * [`storage`] — checksummed state files with atomic replacement.

pub mod cipher;
pub mod device;
pub mod protocol;
pub mod storage;

pub use device::{provision, KeyOrigin, Phase, ProvisionedPair, PufDevice, Role, SecretKey, Variant};
pub use protocol::{
    challenge_simple, challenge_strong, challenge_ultra, initialize, open_pair, stream_response_verdict,
    ultra_response_verdict, ChallengeSession, ProtocolParams, SessionVerdict,
};
pub use storage::{decode_device, encode_device, load_device, save_device, SCHEMA_VERSION};
