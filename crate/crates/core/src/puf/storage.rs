//! Durable device state with integrity checking.
//!
//! A state file is a JSON document `{ "body": <record>, "checksum": <hex> }`
//! where the checksum is SHA-256 over the canonical JSON encoding of the
//! body. Loading verifies the checksum and the schema version before any
//! field is trusted; writing goes through a temporary file plus rename so a
//! crash mid-write never leaves a half-written state file in place.
//!
//! The lockout threshold is deliberately *not* persisted: it is runtime
//! policy, not device identity, and the Monte Carlo drivers override it.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::nbl::GeneratorBank;
use crate::puf::device::{KeyOrigin, Phase, PufDevice, Role, SecretKey, Variant};

/// On-disk schema this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Serialized secret: hex bits plus provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SecretRecord {
    key_hex: String,
    n_bits: usize,
    origin: KeyOrigin,
    generation: u32,
}

impl SecretRecord {
    fn from_key(k: &SecretKey) -> Self {
        Self {
            key_hex: k.bits.to_hex(),
            n_bits: k.bits.len(),
            origin: k.origin,
            generation: k.generation,
        }
    }

    fn to_key(&self) -> Result<SecretKey> {
        Ok(SecretKey {
            bits: BitString::from_hex(&self.key_hex, self.n_bits)?,
            origin: self.origin,
            generation: self.generation,
        })
    }
}

/// The checksummed payload of a state file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateBody {
    schema_version: u32,
    variant: Variant,
    role: Role,
    phase: Phase,
    stored: SecretRecord,
    pending: Option<SecretRecord>,
    bank_seeds_a: Vec<u64>,
    bank_seeds_b: Vec<u64>,
    session_counter: u64,
    failed_attempts: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct StateFile {
    body: StateBody,
    checksum: String,
}

fn body_checksum(body: &StateBody) -> Result<String> {
    let bytes = serde_json::to_vec(body)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Serialize a device to the state-file JSON (body + checksum).
pub fn encode_device(device: &PufDevice) -> Result<String> {
    let body = StateBody {
        schema_version: SCHEMA_VERSION,
        variant: device.variant,
        role: device.role,
        phase: device.phase,
        stored: SecretRecord::from_key(&device.stored),
        pending: device.pending.as_ref().map(SecretRecord::from_key),
        bank_seeds_a: device.bank.seeds_a().to_vec(),
        bank_seeds_b: device.bank.seeds_b().to_vec(),
        session_counter: device.session_counter,
        failed_attempts: device.failed_attempts,
    };
    let checksum = body_checksum(&body)?;
    Ok(serde_json::to_string_pretty(&StateFile { body, checksum })?)
}

/// Parse and verify state-file JSON back into a device.
///
/// `lockout_threshold` is supplied by the caller (runtime policy).
pub fn decode_device(json: &str, lockout_threshold: Option<u32>) -> Result<PufDevice> {
    let file: StateFile =
        serde_json::from_str(json).map_err(|e| Error::Integrity(format!("unparseable state file: {e}")))?;
    let expect = body_checksum(&file.body)?;
    if expect != file.checksum {
        return Err(Error::Integrity(format!(
            "state checksum mismatch: stored {}, computed {expect}",
            file.checksum
        )));
    }
    let body = file.body;
    if body.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion { found: body.schema_version, supported: SCHEMA_VERSION });
    }
    let stored = body.stored.to_key()?;
    let pending = body.pending.as_ref().map(SecretRecord::to_key).transpose()?;
    let bank = GeneratorBank::from_seeds(body.bank_seeds_a, body.bank_seeds_b)?;
    if bank.n_bits() != stored.bits.len() {
        return Err(Error::Integrity(format!(
            "bank has {} positions but stored key has {} bits",
            bank.n_bits(),
            stored.bits.len()
        )));
    }
    Ok(PufDevice {
        role: body.role,
        variant: body.variant,
        phase: body.phase,
        stored,
        pending,
        bank,
        session_counter: body.session_counter,
        failed_attempts: body.failed_attempts,
        lockout_threshold,
    })
}

/// Write a device state file atomically (temp file + rename).
pub fn save_device(device: &PufDevice, path: &Path) -> Result<()> {
    let json = encode_device(device)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = dir.join(match path.file_name() {
        Some(name) => {
            let mut n = name.to_os_string();
            n.push(".tmp");
            n
        }
        None => return Err(Error::InvalidParam(format!("not a file path: {}", path.display()))),
    });
    // Avoid clobbering an unrelated temp file from a concurrent writer.
    let mut salt = 0u32;
    while tmp.exists() {
        salt += 1;
        tmp = dir.join(format!(
            "{}.tmp{salt}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("state")
        ));
    }
    fs::write(&tmp, json.as_bytes())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Load a device state file written by [`save_device`].
pub fn load_device(path: &Path, lockout_threshold: Option<u32>) -> Result<PufDevice> {
    let json = fs::read_to_string(path)?;
    decode_device(&json, lockout_threshold)
}
