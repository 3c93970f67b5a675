use thiserror::Error;

use super::crc::crc16;
use super::message::{Message, PayloadError};

pub const SYNC: u8 = 0xA5;
pub const MAX_PAYLOAD: usize = 1024;
/// Sync, type, two length bytes and two CRC bytes.
pub const FRAME_OVERHEAD: usize = 6;
pub const MAX_FRAME: usize = MAX_PAYLOAD + FRAME_OVERHEAD;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte cap")]
    Oversize(usize),
    #[error(transparent)]
    Range(#[from] PayloadError),
}

pub fn encode(message: &Message) -> Result<Vec<u8>, EncodeError> {
    let payload = message.encode_payload()?;
    if payload.len() > MAX_PAYLOAD {
        return Err(EncodeError::Oversize(payload.len()));
    }
    let mut frame = Vec::with_capacity(payload.len() + FRAME_OVERHEAD);
    frame.push(SYNC);
    frame.push(message.msg_type());
    frame.extend_from_slice(&(payload.len() as u16).to_le_bytes());
    frame.extend_from_slice(&payload);
    let crc = crc16(&frame[1..]);
    frame.extend_from_slice(&crc.to_le_bytes());
    Ok(frame)
}
