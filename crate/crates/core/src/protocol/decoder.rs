use super::crc::crc16;
use super::frame::{FRAME_OVERHEAD, MAX_PAYLOAD, SYNC};
use super::message::{Message, PayloadError};

/// Why bytes were dropped. Decoding never stops on an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    /// A run of bytes that did not start a frame was skipped.
    Resync { skipped: usize },
    /// Header announced a payload over the cap.
    BadLength { len: usize },
    CrcMismatch { msg_type: u8, expected: u16, actual: u16 },
    /// CRC was valid but the type is unknown.
    BadType { msg_type: u8 },
    /// CRC was valid but the payload does not parse for its type.
    Malformed { msg_type: u8, error: PayloadError },
    /// Stream ended in the middle of a frame.
    Truncated { buffered: usize },
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub messages: Vec<Message>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Incremental frame decoder.
///
/// Bytes may arrive in arbitrary chunks; the decoded output depends only on
/// the concatenated stream. After a rejected candidate frame the decoder
/// drops its sync byte and rescans the bytes it already holds, so a valid
/// frame hidden behind a corrupt header is still found.
#[derive(Debug, Default, Clone)]
pub struct Decoder {
    buf: Vec<u8>,
    skipped: usize,
}

impl Decoder {
    pub fn new() -> Decoder {
        Decoder::default()
    }

    /// Bytes held while waiting for the rest of a frame.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    pub fn push(&mut self, bytes: &[u8]) -> Decoded {
        self.buf.extend_from_slice(bytes);
        let mut out = Decoded::default();
        let pos = self.scan(0, &mut out);
        self.buf.drain(..pos);
        out
    }

    /// Flushes at end of stream: incomplete candidates are reported and
    /// anything behind them is still decoded.
    pub fn finish(&mut self) -> Decoded {
        let mut out = Decoded::default();
        let mut pos = 0;
        loop {
            pos = self.scan(pos, &mut out);
            if pos >= self.buf.len() {
                break;
            }
            out.diagnostics.push(Diagnostic::Truncated { buffered: self.buf.len() - pos });
            pos += 1;
        }
        if self.skipped > 0 {
            out.diagnostics.push(Diagnostic::Resync { skipped: self.skipped });
            self.skipped = 0;
        }
        self.buf.clear();
        out
    }

    /// Consumes complete frames from `pos`; returns where the first
    /// incomplete candidate starts (or the end of the buffer).
    fn scan(&mut self, mut pos: usize, out: &mut Decoded) -> usize {
        let buf = &self.buf;
        loop {
            while pos < buf.len() && buf[pos] != SYNC {
                pos += 1;
                self.skipped += 1;
            }
            if pos == buf.len() {
                return pos;
            }
            if self.skipped > 0 {
                out.diagnostics.push(Diagnostic::Resync { skipped: self.skipped });
                self.skipped = 0;
            }
            let avail = buf.len() - pos;
            if avail < 4 {
                return pos;
            }
            let msg_type = buf[pos + 1];
            let len = usize::from(u16::from_le_bytes([buf[pos + 2], buf[pos + 3]]));
            if len > MAX_PAYLOAD {
                out.diagnostics.push(Diagnostic::BadLength { len });
                pos += 1;
                continue;
            }
            let total = len + FRAME_OVERHEAD;
            if avail < total {
                return pos;
            }
            let body = &buf[pos + 1..pos + 4 + len];
            let expected = u16::from_le_bytes([buf[pos + 4 + len], buf[pos + 5 + len]]);
            let actual = crc16(body);
            if actual != expected {
                out.diagnostics.push(Diagnostic::CrcMismatch { msg_type, expected, actual });
                pos += 1;
                continue;
            }
            match Message::decode_payload(msg_type, &body[3..]) {
                Ok(m) => out.messages.push(m),
                Err(PayloadError::UnknownType(t)) => out.diagnostics.push(Diagnostic::BadType { msg_type: t }),
                Err(error) => out.diagnostics.push(Diagnostic::Malformed { msg_type, error }),
            }
            pos += total;
        }
    }
}

/// Value-style wrapper around [`Decoder::push`].
pub fn decode_push(decoder: &Decoder, bytes: &[u8]) -> (Decoder, Vec<Message>, Vec<Diagnostic>) {
    let mut next = decoder.clone();
    let Decoded { messages, diagnostics } = next.push(bytes);
    (next, messages, diagnostics)
}
