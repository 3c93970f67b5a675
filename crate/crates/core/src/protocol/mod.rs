//! Framed binary protocol between the device and a host or app.
//!
//! ```text
//! +------+------+---------+-----------------+---------+
//! | 0xA5 | type | len u16 | payload (len B) | crc u16 |
//! +------+------+---------+-----------------+---------+
//! ```
//!
//! Integers are little-endian. `len` is at most 1024. The CRC is
//! CRC-16/CCITT-FALSE over `type`, `len` and `payload`.

mod crc;
mod decoder;
mod frame;
mod message;

pub use crc::crc16;
pub use decoder::{decode_push, Decoded, Decoder, Diagnostic};
pub use frame::{encode, EncodeError, FRAME_OVERHEAD, MAX_FRAME, MAX_PAYLOAD, SYNC};
pub use message::{CommandKind, Message, PayloadError, HISTORY_RECORDS_PER_FRAME, HISTORY_RECORD_BYTES};
