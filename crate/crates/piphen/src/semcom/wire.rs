//! Length-prefixed binary frames: `[u32 le length][version][kind][payload]`.
//! The length covers the version byte, kind byte and payload.

use super::SemcomError;

pub const WIRE_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Delta = 0,
    Item = 1,
    RawObservation = 2,
    Request = 3,
    Response = 4,
}

impl FrameKind {
    fn from_byte(b: u8) -> Result<Self, SemcomError> {
        Ok(match b {
            0 => FrameKind::Delta,
            1 => FrameKind::Item,
            2 => FrameKind::RawObservation,
            3 => FrameKind::Request,
            4 => FrameKind::Response,
            other => return Err(SemcomError::Invalid(format!("unknown frame kind {other}"))),
        })
    }
}

pub fn encode_frame(kind: FrameKind, payload: &[u8]) -> Vec<u8> {
    let len = (payload.len() + 2) as u32;
    let mut out = Vec::with_capacity(payload.len() + 6);
    out.extend_from_slice(&len.to_le_bytes());
    out.push(WIRE_VERSION);
    out.push(kind as u8);
    out.extend_from_slice(payload);
    out
}

/// Decode one frame from the front of `bytes`; returns the frame and the
/// remaining tail, so streams of frames can be walked.
pub fn decode_frame(bytes: &[u8]) -> Result<(FrameKind, &[u8], &[u8]), SemcomError> {
    if bytes.len() < 6 {
        return Err(SemcomError::Invalid("frame shorter than header".into()));
    }
    let len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    if len < 2 || bytes.len() < 4 + len {
        return Err(SemcomError::Invalid("frame length prefix out of range".into()));
    }
    if bytes[4] != WIRE_VERSION {
        return Err(SemcomError::Invalid(format!("unsupported wire version {}", bytes[4])));
    }
    let kind = FrameKind::from_byte(bytes[5])?;
    Ok((kind, &bytes[6..4 + len], &bytes[4 + len..]))
}
