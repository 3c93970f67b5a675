//! Deterministic, hardware-free model of a pressure-sensing stress ball that
//! tracks an accumulated anxiety level, lights an LED gauge, and guides the
//! user through timed progressive muscle relaxation (PMR) sessions.
//!
//! The crate is organised bottom-up:
//!
//! * [`pmr`] - relaxation plans and the timed session machine.
//! * [`device`] - squeeze detection, the anxiety accumulator and the device
//!   state machine that ties everything together.
//! * [`protocol`] - the framed binary device/app wire protocol.
//! * [`history`] - append-only history file, range queries, daily aggregates.
//! * [`sim`] - traces, trace synthesis and the virtual-clock replay loop.
//! * [`config`] - the `key = value` configuration file.

pub mod config;
pub mod device;
pub mod history;
pub mod pmr;
pub mod protocol;
pub mod sim;

pub use config::{ConfigError, DeviceConfig, HostConfig};
pub use device::{
    AppCommand, Button, DeviceState, Event, LcdText, LedFrame, Mode, Output, PressureSample,
    SqueezeEvent,
};
pub use history::{DayAggregate, HistoryKind, HistoryRecord, HistoryStore};
pub use pmr::{Phase, PmrPlan, PmrSession, PmrStep, SessionEvent, SessionEventKind};
pub use protocol::{Decoder, Diagnostic, Message};
