//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error for simulation, protocol, wire-format, and storage failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An operation that needs samples received an empty trace.
    #[error("empty sample trace")]
    EmptyTrace,

    /// Two containers that must agree in length did not.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// A verification stream arrived in a different encoding mode than the
    /// verifier was asked to use.
    #[error("stream mode mismatch: expected {expected}, got {actual}")]
    ModeMismatch {
        expected: &'static str,
        actual: &'static str,
    },

    /// A byte payload could not be decoded as the claimed wire format.
    #[error("malformed wire payload: {0}")]
    WireFormat(String),

    /// A frame arrived whose type is not valid in the current protocol phase.
    #[error("protocol violation: {0}")]
    Protocol(String),

    /// The transport had no frame to deliver.
    #[error("channel empty")]
    ChannelEmpty,

    /// The transport was shut down mid-session (injected fault).
    #[error("channel closed after {delivered} delivered frames")]
    ChannelClosed { delivered: u64 },

    /// A key exchange gave up before producing the requested bits.
    #[error("exchange aborted after {cycles} cycles ({alarms} alarms): {reason}")]
    ExchangeAborted {
        cycles: u64,
        alarms: u64,
        reason: String,
    },

    /// A device refused an operation in its current lifecycle phase.
    #[error("device phase error: {0}")]
    Phase(String),

    /// A device is locked out after too many failed authentications.
    #[error("device locked out after {failed_attempts} failed attempts")]
    LockedOut { failed_attempts: u32 },

    /// Stored device state failed its integrity check.
    #[error("state integrity failure: {0}")]
    Integrity(String),

    /// Stored device state has a schema this build does not understand.
    #[error("unsupported state schema version {found} (supported: {supported})")]
    SchemaVersion { found: u32, supported: u32 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}
