//! In-memory framed channel between a key and a lock.
//!
//! The channel is ideal — ordered, reliable, lossless — except for faults
//! injected explicitly with [`Endpoint::set_fault`], which drop or truncate
//! all frames from a given send index onward. Fault injection is what the
//! renewal-atomicity tests sweep.
//!
//! Wire format of a frame, fixed for replay files:
//!
//! ```text
//! session id (8 bytes BE) || sequence (4 bytes BE) || type tag (1 byte) ||
//! payload length (4 bytes BE) || payload
//! ```
//!
//! [`ChannelStats`] tracks `F`, the count of public bits exchanged for
//! instantaneous-comparison traffic; `ceil(log2 F)` key bits must later be
//! spent authenticating them. Only comparison traffic counts toward `F`.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed byte length of the frame header.
pub const FRAME_HEADER_LEN: usize = 17;

/// Message type tags. Byte values are part of the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameType {
    /// Lock -> key: fresh nonce for a masked key response (ultra variant).
    ChallengeRequest,
    /// Key -> lock: pad-masked stored key (ultra variant).
    UltraResponse,
    /// Lock -> key: encrypted challenge string + stream parameters.
    StringChallenge,
    /// Key -> lock: telegraph product stream.
    StringResponse,
    /// Lock -> key: begin key renewal; payload carries the exchange seed.
    KljnStart,
    /// Key -> lock: stream proving the candidate keys agree.
    CandidateVerify,
    /// Lock -> key: commit the candidate key.
    Commit,
    /// Key -> lock: candidate committed.
    CommitAck,
    /// Either direction: orderly session end.
    Close,
    /// Either direction: session abandoned.
    Abort,
    /// Instantaneous-comparison traffic (counts toward F).
    Comparison,
}

impl FrameType {
    pub fn wire_byte(self) -> u8 {
        match self {
            FrameType::ChallengeRequest => 0x10,
            FrameType::UltraResponse => 0x11,
            FrameType::StringChallenge => 0x12,
            FrameType::StringResponse => 0x13,
            FrameType::KljnStart => 0x20,
            FrameType::CandidateVerify => 0x22,
            FrameType::Commit => 0x23,
            FrameType::CommitAck => 0x24,
            FrameType::Close => 0x2E,
            FrameType::Abort => 0x2F,
            FrameType::Comparison => 0x30,
        }
    }

    pub fn from_wire_byte(b: u8) -> Result<Self> {
        Ok(match b {
            0x10 => FrameType::ChallengeRequest,
            0x11 => FrameType::UltraResponse,
            0x12 => FrameType::StringChallenge,
            0x13 => FrameType::StringResponse,
            0x20 => FrameType::KljnStart,
            0x22 => FrameType::CandidateVerify,
            0x23 => FrameType::Commit,
            0x24 => FrameType::CommitAck,
            0x2E => FrameType::Close,
            0x2F => FrameType::Abort,
            0x30 => FrameType::Comparison,
            other => {
                return Err(Error::WireFormat(format!("unknown frame type byte 0x{other:02x}")))
            }
        })
    }
}

/// One protocol message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub session_id: u64,
    pub sequence: u32,
    pub frame_type: FrameType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.session_id.to_be_bytes());
        out.extend_from_slice(&self.sequence.to_be_bytes());
        out.push(self.frame_type.wire_byte());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(Error::WireFormat(format!(
                "frame header needs {FRAME_HEADER_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let session_id = u64::from_be_bytes(bytes[0..8].try_into().expect("8 bytes"));
        let sequence = u32::from_be_bytes(bytes[8..12].try_into().expect("4 bytes"));
        let frame_type = FrameType::from_wire_byte(bytes[12])?;
        let len = u32::from_be_bytes(bytes[13..17].try_into().expect("4 bytes")) as usize;
        let payload = &bytes[FRAME_HEADER_LEN..];
        if payload.len() != len {
            return Err(Error::WireFormat(format!(
                "frame payload length field says {len}, got {} bytes",
                payload.len()
            )));
        }
        Ok(Self { session_id, sequence, frame_type, payload: payload.to_vec() })
    }
}

/// What an injected fault does to affected frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    /// Frames from the fault index onward vanish entirely.
    DropRest,
    /// Frames from the fault index onward arrive cut to half length
    /// (malformed on decode).
    Truncate,
}

/// Fault plan for one endpoint's send side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    /// Send index (0-based, per endpoint) at which the fault engages.
    pub at_frame: u64,
    pub kind: FaultKind,
}

/// Accounting for the authenticated public side channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelStats {
    /// Public bits of comparison traffic exchanged (the `F` in the
    /// authentication budget).
    pub f_public_bits: u64,
    pub frames_sent: u64,
    pub faults_injected: u64,
}

impl ChannelStats {
    /// Count a comparison frame's payload toward `F` (8 bits per byte).
    /// Non-comparison frames leave `F` unchanged.
    pub fn account_frame(&mut self, frame: &Frame) {
        if frame.frame_type == FrameType::Comparison {
            self.f_public_bits += 8 * frame.payload.len() as u64;
        }
    }

    /// Count comparison traffic at bit granularity (for values that are not
    /// whole bytes on the wire, e.g. instantaneous readings accounted
    /// directly from an exchange transcript).
    pub fn account_bits(&mut self, bits: u64) {
        self.f_public_bits += bits;
    }
}

type Queue = Arc<Mutex<VecDeque<Vec<u8>>>>;

/// One side of a session: sends into its outgoing queue, receives from the
/// peer's. Single producer / single consumer.
#[derive(Debug)]
pub struct Endpoint {
    session_id: u64,
    outgoing: Queue,
    incoming: Queue,
    send_seq: u32,
    sent_frames: u64,
    fault: Option<FaultPlan>,
    pub stats: ChannelStats,
}

impl Endpoint {
    pub fn session_id(&self) -> u64 {
        self.session_id
    }

    /// Frames this endpoint has attempted to send (including faulted ones).
    pub fn frames_sent(&self) -> u64 {
        self.sent_frames
    }

    /// Arm a fault on this endpoint's send side.
    pub fn set_fault(&mut self, plan: FaultPlan) {
        self.fault = Some(plan);
    }

    /// Send a frame with the next sequence number. Faulted frames still
    /// consume a sequence number — the sender believes they went out.
    pub fn send(&mut self, frame_type: FrameType, payload: Vec<u8>) -> Result<()> {
        let frame = Frame {
            session_id: self.session_id,
            sequence: self.send_seq,
            frame_type,
            payload,
        };
        self.send_seq += 1;
        let index = self.sent_frames;
        self.sent_frames += 1;
        self.stats.frames_sent += 1;
        self.stats.account_frame(&frame);
        let encoded = frame.encode();
        let delivered = match self.fault {
            Some(FaultPlan { at_frame, kind }) if index >= at_frame => {
                self.stats.faults_injected += 1;
                match kind {
                    FaultKind::DropRest => None,
                    FaultKind::Truncate => Some(encoded[..encoded.len() / 2].to_vec()),
                }
            }
            _ => Some(encoded),
        };
        if let Some(bytes) = delivered {
            self.outgoing.lock().expect("queue poisoned").push_back(bytes);
        }
        Ok(())
    }

    /// Receive the next frame; [`Error::ChannelEmpty`] when none is waiting
    /// (the documented signals-empty contract — no blocking).
    pub fn recv(&mut self) -> Result<Frame> {
        let bytes = self
            .incoming
            .lock()
            .expect("queue poisoned")
            .pop_front()
            .ok_or(Error::ChannelEmpty)?;
        Frame::decode(&bytes)
    }
}

/// Open a fresh session: two endpoints over an isolated queue pair.
pub fn open_session(session_id: u64) -> (Endpoint, Endpoint) {
    let a_to_b: Queue = Arc::new(Mutex::new(VecDeque::new()));
    let b_to_a: Queue = Arc::new(Mutex::new(VecDeque::new()));
    let a = Endpoint {
        session_id,
        outgoing: a_to_b.clone(),
        incoming: b_to_a.clone(),
        send_seq: 0,
        sent_frames: 0,
        fault: None,
        stats: ChannelStats::default(),
    };
    let b = Endpoint {
        session_id,
        outgoing: b_to_a,
        incoming: a_to_b,
        send_seq: 0,
        sent_frames: 0,
        fault: None,
        stats: ChannelStats::default(),
    };
    (a, b)
}
