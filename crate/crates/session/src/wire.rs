//! `HVW1` framing: 4-byte magic, a type byte, a little-endian u32 payload
//! length, then the payload. One frame per WebSocket message.

use anatoview_core::foveate::FoveatedFrame;
use thiserror::Error;

use crate::messages::{ControlMessage, DataMessage};

pub const MAGIC: &[u8; 4] = b"HVW1";
pub const HEADER_LEN: usize = 9;
/// Largest payload accepted in either direction.
pub const MAX_PAYLOAD: usize = 32 << 20;

pub const TYPE_CONTROL: u8 = 0x01;
pub const TYPE_FRAME: u8 = 0x10;
pub const TYPE_PICK: u8 = 0x11;
pub const TYPE_ACK: u8 = 0x12;
pub const TYPE_ERROR: u8 = 0x13;
pub const TYPE_HIERARCHY: u8 = 0x14;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("message truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("payload length {0} exceeds the limit")]
    LengthOverflow(u32),
    #[error("{0} bytes after the payload")]
    TrailingBytes(usize),
    #[error("malformed payload: {0}")]
    BadPayload(String),
}

impl WireError {
    /// Stable code reported to clients.
    pub fn code(&self) -> &'static str {
        match self {
            WireError::Truncated { .. } => "truncated",
            WireError::BadMagic(_) => "bad-magic",
            WireError::UnknownType(_) => "unknown-type",
            WireError::LengthOverflow(_) => "length-overflow",
            WireError::TrailingBytes(_) => "trailing-bytes",
            WireError::BadPayload(_) => "bad-message",
        }
    }
}

fn frame(kind: u8, payload: &[u8]) -> Vec<u8> {
    let len = u32::try_from(payload.len()).expect("payload under 4 GiB");
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.push(kind);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Splits one complete frame into its type and payload.
pub fn unframe(bytes: &[u8]) -> Result<(u8, &[u8]), WireError> {
    if bytes.len() < HEADER_LEN {
        let have = bytes.len();
        // A wrong prefix is reported as such even when short.
        if bytes[..have.min(4)] != MAGIC[..have.min(4)] {
            let mut m = [0u8; 4];
            m[..have.min(4)].copy_from_slice(&bytes[..have.min(4)]);
            return Err(WireError::BadMagic(m));
        }
        return Err(WireError::Truncated {
            needed: HEADER_LEN,
            have,
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let kind = bytes[4];
    if !matches!(
        kind,
        TYPE_CONTROL | TYPE_FRAME | TYPE_PICK | TYPE_ACK | TYPE_ERROR | TYPE_HIERARCHY
    ) {
        return Err(WireError::UnknownType(kind));
    }
    let len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
    if len as usize > MAX_PAYLOAD {
        return Err(WireError::LengthOverflow(len));
    }
    let end = HEADER_LEN + len as usize;
    if bytes.len() < end {
        return Err(WireError::Truncated {
            needed: end,
            have: bytes.len(),
        });
    }
    if bytes.len() > end {
        return Err(WireError::TrailingBytes(bytes.len() - end));
    }
    Ok((kind, &bytes[HEADER_LEN..end]))
}

pub fn encode_control(msg: &ControlMessage) -> Vec<u8> {
    let json = serde_json::to_vec(msg).expect("control messages serialize");
    frame(TYPE_CONTROL, &json)
}

pub fn decode_control(bytes: &[u8]) -> Result<ControlMessage, WireError> {
    match unframe(bytes)? {
        (TYPE_CONTROL, payload) => json(payload),
        (kind, _) => Err(WireError::UnknownType(kind)),
    }
}

pub fn encode_data(msg: &DataMessage) -> Vec<u8> {
    match msg {
        DataMessage::Frame(f) => frame(TYPE_FRAME, &f.encode()),
        DataMessage::PickResult(p) => frame(TYPE_PICK, &to_json(p)),
        DataMessage::Ack { frame_id } => frame(TYPE_ACK, &frame_id.to_le_bytes()),
        DataMessage::Error(e) => frame(TYPE_ERROR, &to_json(e)),
        DataMessage::Hierarchy(h) => frame(TYPE_HIERARCHY, &to_json(h)),
    }
}

pub fn decode_data(bytes: &[u8]) -> Result<DataMessage, WireError> {
    let (kind, payload) = unframe(bytes)?;
    Ok(match kind {
        TYPE_FRAME => DataMessage::Frame(
            FoveatedFrame::decode(payload).map_err(|e| WireError::BadPayload(e.to_string()))?,
        ),
        TYPE_PICK => DataMessage::PickResult(json(payload)?),
        TYPE_ACK => {
            let id: [u8; 8] = payload
                .try_into()
                .map_err(|_| WireError::BadPayload(format!("ack of {} bytes", payload.len())))?;
            DataMessage::Ack {
                frame_id: u64::from_le_bytes(id),
            }
        }
        TYPE_ERROR => DataMessage::Error(json(payload)?),
        TYPE_HIERARCHY => DataMessage::Hierarchy(json(payload)?),
        other => return Err(WireError::UnknownType(other)),
    })
}

fn json<T: serde::de::DeserializeOwned>(payload: &[u8]) -> Result<T, WireError> {
    serde_json::from_slice(payload).map_err(|e| WireError::BadPayload(e.to_string()))
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("data messages serialize")
}
