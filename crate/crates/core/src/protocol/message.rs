use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frame::MAX_PAYLOAD;
use crate::history::{HistoryKind, HistoryRecord};
use crate::pmr::{Phase, SessionEventKind};

/// Wire size of one history record: `t_ms u64, kind u8, value u16`.
pub const HISTORY_RECORD_BYTES: usize = 11;

/// Most records a single `HistoryResponse` frame can carry.
pub const HISTORY_RECORDS_PER_FRAME: usize = (MAX_PAYLOAD - 2) / HISTORY_RECORD_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    StartTraining,
    CancelTraining,
    ToggleSilent,
}

impl CommandKind {
    pub fn code(self) -> u8 {
        match self {
            CommandKind::StartTraining => 0,
            CommandKind::CancelTraining => 1,
            CommandKind::ToggleSilent => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<CommandKind> {
        Some(match code {
            0 => CommandKind::StartTraining,
            1 => CommandKind::CancelTraining,
            2 => CommandKind::ToggleSilent,
            _ => return None,
        })
    }
}

/// Protocol messages. The JSON form (used by the event log and the WebSocket
/// mirror) puts `type` first and the remaining fields in wire order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Message {
    LevelUpdate { t_ms: u64, accumulator: u16, led_level: u8 },
    Squeeze { t_ms: u64, peak: u16, duration_ms: u16 },
    TrainingPrompt { t_ms: u64 },
    SessionEvent { t_ms: u64, kind: SessionEventKind, step: u8, phase: Phase },
    SilentMode { t_ms: u64, on: bool },
    Command { cmd: CommandKind },
    HistoryRequest { from_ms: u64, to_ms: u64 },
    HistoryResponse { count: u16, records: Vec<HistoryRecord> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("payload is {actual} bytes, expected {expected}")]
    Length { expected: usize, actual: usize },
    #[error("field `{field}` has out-of-range value {value}")]
    Range { field: &'static str, value: u64 },
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::LevelUpdate { .. } => 0x01,
            Message::Squeeze { .. } => 0x02,
            Message::TrainingPrompt { .. } => 0x03,
            Message::SessionEvent { .. } => 0x04,
            Message::SilentMode { .. } => 0x05,
            Message::Command { .. } => 0x10,
            Message::HistoryRequest { .. } => 0x11,
            Message::HistoryResponse { .. } => 0x12,
        }
    }

    /// Timestamp carried by device-originated messages.
    pub fn t_ms(&self) -> Option<u64> {
        match *self {
            Message::LevelUpdate { t_ms, .. }
            | Message::Squeeze { t_ms, .. }
            | Message::TrainingPrompt { t_ms }
            | Message::SessionEvent { t_ms, .. }
            | Message::SilentMode { t_ms, .. } => Some(t_ms),
            _ => None,
        }
    }

    /// Builds as many `HistoryResponse` messages as needed to carry `records`
    /// within the payload cap. An empty slice still yields one (empty) reply.
    pub fn history_responses(records: &[HistoryRecord]) -> Vec<Message> {
        if records.is_empty() {
            return vec![Message::HistoryResponse { count: 0, records: Vec::new() }];
        }
        records
            .chunks(HISTORY_RECORDS_PER_FRAME)
            .map(|chunk| Message::HistoryResponse { count: chunk.len() as u16, records: chunk.to_vec() })
            .collect()
    }

    pub(crate) fn encode_payload(&self) -> Result<Vec<u8>, PayloadError> {
        let mut p = Vec::new();
        match self {
            Message::LevelUpdate { t_ms, accumulator, led_level } => {
                p.extend_from_slice(&t_ms.to_le_bytes());
                p.extend_from_slice(&accumulator.to_le_bytes());
                p.push(*led_level);
            }
            Message::Squeeze { t_ms, peak, duration_ms } => {
                p.extend_from_slice(&t_ms.to_le_bytes());
                p.extend_from_slice(&peak.to_le_bytes());
                p.extend_from_slice(&duration_ms.to_le_bytes());
            }
            Message::TrainingPrompt { t_ms } => p.extend_from_slice(&t_ms.to_le_bytes()),
            Message::SessionEvent { t_ms, kind, step, phase } => {
                p.extend_from_slice(&t_ms.to_le_bytes());
                p.extend_from_slice(&[kind.code(), *step, phase.code()]);
            }
            Message::SilentMode { t_ms, on } => {
                p.extend_from_slice(&t_ms.to_le_bytes());
                p.push(u8::from(*on));
            }
            Message::Command { cmd } => p.push(cmd.code()),
            Message::HistoryRequest { from_ms, to_ms } => {
                p.extend_from_slice(&from_ms.to_le_bytes());
                p.extend_from_slice(&to_ms.to_le_bytes());
            }
            Message::HistoryResponse { count, records } => {
                if usize::from(*count) != records.len() {
                    return Err(PayloadError::Range { field: "count", value: u64::from(*count) });
                }
                p.extend_from_slice(&count.to_le_bytes());
                for r in records {
                    p.extend_from_slice(&r.t_ms.to_le_bytes());
                    p.push(r.kind.code());
                    p.extend_from_slice(&r.value.to_le_bytes());
                }
            }
        }
        Ok(p)
    }

    pub(crate) fn decode_payload(msg_type: u8, p: &[u8]) -> Result<Message, PayloadError> {
        let expect = |n: usize| {
            if p.len() == n {
                Ok(())
            } else {
                Err(PayloadError::Length { expected: n, actual: p.len() })
            }
        };
        let u64_at = |i: usize| u64::from_le_bytes(p[i..i + 8].try_into().unwrap());
        let u16_at = |i: usize| u16::from_le_bytes([p[i], p[i + 1]]);

        Ok(match msg_type {
            0x01 => {
                expect(11)?;
                Message::LevelUpdate { t_ms: u64_at(0), accumulator: u16_at(8), led_level: p[10] }
            }
            0x02 => {
                expect(12)?;
                Message::Squeeze { t_ms: u64_at(0), peak: u16_at(8), duration_ms: u16_at(10) }
            }
            0x03 => {
                expect(8)?;
                Message::TrainingPrompt { t_ms: u64_at(0) }
            }
            0x04 => {
                expect(11)?;
                let kind = SessionEventKind::from_code(p[8])
                    .ok_or(PayloadError::Range { field: "kind", value: u64::from(p[8]) })?;
                let phase =
                    Phase::from_code(p[10]).ok_or(PayloadError::Range { field: "phase", value: u64::from(p[10]) })?;
                Message::SessionEvent { t_ms: u64_at(0), kind, step: p[9], phase }
            }
            0x05 => {
                expect(9)?;
                let on = match p[8] {
                    0 => false,
                    1 => true,
                    v => return Err(PayloadError::Range { field: "on", value: u64::from(v) }),
                };
                Message::SilentMode { t_ms: u64_at(0), on }
            }
            0x10 => {
                expect(1)?;
                let cmd = CommandKind::from_code(p[0]).ok_or(PayloadError::Range { field: "cmd", value: u64::from(p[0]) })?;
                Message::Command { cmd }
            }
            0x11 => {
                expect(16)?;
                Message::HistoryRequest { from_ms: u64_at(0), to_ms: u64_at(8) }
            }
            0x12 => {
                if p.len() < 2 {
                    return Err(PayloadError::Length { expected: 2, actual: p.len() });
                }
                let count = u16_at(0);
                expect(2 + usize::from(count) * HISTORY_RECORD_BYTES)?;
                let records = p[2..]
                    .chunks_exact(HISTORY_RECORD_BYTES)
                    .map(|r| {
                        let kind = HistoryKind::from_code(r[8])
                            .ok_or(PayloadError::Range { field: "record.kind", value: u64::from(r[8]) })?;
                        Ok(HistoryRecord {
                            t_ms: u64::from_le_bytes(r[0..8].try_into().unwrap()),
                            kind,
                            value: u16::from_le_bytes([r[9], r[10]]),
                        })
                    })
                    .collect::<Result<Vec<_>, PayloadError>>()?;
                Message::HistoryResponse { count, records }
            }
            other => return Err(PayloadError::UnknownType(other)),
        })
    }
}
