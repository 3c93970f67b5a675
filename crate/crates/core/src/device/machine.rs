use serde::{Deserialize, Serialize};

use super::detector::{PressureSample, SqueezeDetector, SqueezeEvent};
use super::level::{accumulate, decay, led_level};
use crate::config::DeviceConfig;
use crate::history::{HistoryKind, HistoryRecord};
use crate::pmr::{start_session, Advance, Phase, PmrSession, SessionEvent, SessionEventKind, LCD_COLUMNS};
use crate::protocol::{CommandKind, Message};

/// LCD line shown when the gauge is full.
pub const PROMPT_TEXT: &str = "Start PMR training";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Sensing,
    TrainingPrompt,
    Training,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Button {
    Silent,
    Start,
    Cancel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppCommand {
    StartTraining,
    CancelTraining,
    ToggleSilent,
}

impl From<CommandKind> for AppCommand {
    fn from(cmd: CommandKind) -> Self {
        match cmd {
            CommandKind::StartTraining => AppCommand::StartTraining,
            CommandKind::CancelTraining => AppCommand::CancelTraining,
            CommandKind::ToggleSilent => AppCommand::ToggleSilent,
        }
    }
}

/// Device input alphabet. Events must be delivered in non-decreasing time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Tick { t_ms: u64 },
    Sample(PressureSample),
    Button { t_ms: u64, button: Button },
    App { t_ms: u64, command: AppCommand },
}

impl Event {
    pub fn t_ms(&self) -> u64 {
        match *self {
            Event::Tick { t_ms } | Event::Button { t_ms, .. } | Event::App { t_ms, .. } => t_ms,
            Event::Sample(s) => s.t_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedFrame {
    pub white: Vec<u8>,
    pub blue: bool,
}

/// One LCD line: printable ASCII, at most 32 characters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LcdText(String);

impl LcdText {
    /// Replaces anything outside printable ASCII with `?` and cuts the line
    /// to the display width.
    pub fn new(text: &str) -> LcdText {
        LcdText(
            text.chars()
                .map(|c| if c == ' ' || c.is_ascii_graphic() { c } else { '?' })
                .take(LCD_COLUMNS)
                .collect(),
        )
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Led { t_ms: u64, frame: LedFrame },
    Lcd { t_ms: u64, text: LcdText },
    Message(Message),
    History(HistoryRecord),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename = "LedFrame")]
struct LedLine {
    t_ms: u64,
    white: Vec<u8>,
    blue: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename = "LcdText")]
struct LcdLine {
    t_ms: u64,
    line: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename = "HistoryRecord")]
struct HistoryLine {
    t_ms: u64,
    kind: HistoryKind,
    value: u16,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyLine {
    Led(LedLine),
    Lcd(LcdLine),
    History(HistoryLine),
    Message(Message),
}

impl Output {
    /// Canonical JSON: `type` first, then the fields in declaration order.
    pub fn to_json(&self) -> String {
        let json = match self {
            Output::Message(m) => serde_json::to_string(m),
            Output::Led { t_ms, frame } => serde_json::to_string(&LedLine {
                t_ms: *t_ms,
                white: frame.white.clone(),
                blue: frame.blue,
            }),
            Output::Lcd { t_ms, text } => serde_json::to_string(&LcdLine {
                t_ms: *t_ms,
                line: text.as_str().to_string(),
            }),
            Output::History(r) => serde_json::to_string(&HistoryLine {
                t_ms: r.t_ms,
                kind: r.kind,
                value: r.value,
            }),
        };
        json.expect("output serialization is infallible")
    }

    pub fn from_json(line: &str) -> Result<Output, serde_json::Error> {
        Ok(match serde_json::from_str::<AnyLine>(line)? {
            AnyLine::Led(l) => Output::Led {
                t_ms: l.t_ms,
                frame: LedFrame { white: l.white, blue: l.blue },
            },
            AnyLine::Lcd(l) => Output::Lcd { t_ms: l.t_ms, text: LcdText::new(&l.line) },
            AnyLine::History(h) => Output::History(HistoryRecord { t_ms: h.t_ms, kind: h.kind, value: h.value }),
            AnyLine::Message(m) => Output::Message(m),
        })
    }
}

/// The whole device as one value.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub mode: Mode,
    pub accumulator: u16,
    pub silent: bool,
    pub detector: SqueezeDetector,
    pub session: Option<PmrSession>,
    pub last_tick_ms: u64,
    /// Level and time decay is measured from; reset on every explicit level change.
    pub decay_origin: (u64, u16),
}

impl DeviceState {
    pub fn new(t_ms: u64) -> DeviceState {
        DeviceState {
            mode: Mode::Sensing,
            accumulator: 0,
            silent: false,
            detector: SqueezeDetector::default(),
            session: None,
            last_tick_ms: t_ms,
            decay_origin: (t_ms, 0),
        }
    }

    /// Fresh device plus the level report it sends on power-up.
    pub fn boot(t_ms: u64, config: &DeviceConfig) -> (DeviceState, Vec<Output>) {
        let state = DeviceState::new(t_ms);
        let out = vec![Output::Message(Message::LevelUpdate {
            t_ms,
            accumulator: 0,
            led_level: led_level(0, config),
        })];
        (state, out)
    }

    /// In-place form of [`step`].
    pub fn apply(&mut self, event: Event, config: &DeviceConfig) -> Vec<Output> {
        let before = render(self, config);
        let mut out = Vec::new();
        let t = event.t_ms();

        match event {
            Event::Tick { t_ms } => {
                self.last_tick_ms = self.last_tick_ms.max(t_ms);
                match self.mode {
                    Mode::Sensing => self.apply_decay(t_ms, config, &mut out),
                    Mode::Training => self.advance_session(t_ms, config, &mut out),
                    Mode::TrainingPrompt => {}
                }
            }
            Event::Sample(sample) => {
                if let Some(squeeze) = self.detector.update(sample, config) {
                    self.on_squeeze(squeeze, config, &mut out);
                }
            }
            Event::Button { button: Button::Silent, .. } | Event::App { command: AppCommand::ToggleSilent, .. } => {
                self.silent = !self.silent;
                out.push(Output::Message(Message::SilentMode { t_ms: t, on: self.silent }));
                let kind = if self.silent { HistoryKind::SilentOn } else { HistoryKind::SilentOff };
                out.push(Output::History(HistoryRecord { t_ms: t, kind, value: 0 }));
            }
            Event::Button { button: Button::Start, .. } | Event::App { command: AppCommand::StartTraining, .. } => {
                if self.mode == Mode::TrainingPrompt {
                    self.start_training(t, config, &mut out);
                }
            }
            Event::Button { button: Button::Cancel, .. } | Event::App { command: AppCommand::CancelTraining, .. } => {
                self.cancel(t, config, &mut out);
            }
        }

        let after = render(self, config);
        if before.0 != after.0 {
            out.push(Output::Led { t_ms: t, frame: after.0 });
        }
        if before.1 != after.1 {
            out.push(Output::Lcd { t_ms: t, text: after.1 });
        }
        out
    }

    fn on_squeeze(&mut self, squeeze: SqueezeEvent, config: &DeviceConfig, out: &mut Vec<Output>) {
        out.push(Output::Message(Message::Squeeze {
            t_ms: squeeze.t_ms,
            peak: squeeze.peak,
            duration_ms: squeeze.duration_ms.min(u64::from(u16::MAX)) as u16,
        }));
        out.push(Output::History(HistoryRecord {
            t_ms: squeeze.t_ms,
            kind: HistoryKind::Squeeze,
            value: squeeze.peak,
        }));
        // Squeezes are only counted towards the gauge while sensing; during
        // training they are part of the exercise.
        if self.mode == Mode::Sensing {
            let level = accumulate(self.accumulator, squeeze.peak, config);
            self.set_level(squeeze.t_ms, level, config, out);
        }
    }

    fn apply_decay(&mut self, t_ms: u64, config: &DeviceConfig, out: &mut Vec<Output>) {
        if config.decay_half_life_ms == 0 {
            return;
        }
        let (origin_ms, origin_level) = self.decay_origin;
        let level = decay(origin_level, t_ms.saturating_sub(origin_ms), config);
        if level != self.accumulator {
            self.accumulator = level;
            self.report_level(t_ms, config, out);
        }
    }

    fn report_level(&self, t_ms: u64, config: &DeviceConfig, out: &mut Vec<Output>) {
        out.push(Output::Message(Message::LevelUpdate {
            t_ms,
            accumulator: self.accumulator,
            led_level: led_level(self.accumulator, config),
        }));
        out.push(Output::History(HistoryRecord {
            t_ms,
            kind: HistoryKind::Level,
            value: self.accumulator,
        }));
    }

    /// Explicit level change in sensing mode; prompts when the gauge fills.
    fn set_level(&mut self, t_ms: u64, level: u16, config: &DeviceConfig, out: &mut Vec<Output>) {
        self.accumulator = level.min(config.a_max);
        self.decay_origin = (t_ms, self.accumulator);
        self.report_level(t_ms, config, out);
        if self.mode == Mode::Sensing && self.accumulator == config.a_max {
            self.mode = Mode::TrainingPrompt;
            out.push(Output::Message(Message::TrainingPrompt { t_ms }));
            out.push(Output::History(HistoryRecord { t_ms, kind: HistoryKind::Prompt, value: 0 }));
        }
    }

    fn start_training(&mut self, t_ms: u64, config: &DeviceConfig, out: &mut Vec<Output>) {
        let session = start_session(config.plan.clone(), t_ms);
        out.push(session_message(&SessionEvent {
            t_ms,
            kind: SessionEventKind::Started,
            step: 0,
            phase: Phase::Tense,
        }));
        out.push(Output::History(HistoryRecord { t_ms, kind: HistoryKind::SessionStarted, value: 0 }));
        self.session = Some(session);
        self.mode = Mode::Training;
    }

    fn advance_session(&mut self, t_ms: u64, config: &DeviceConfig, out: &mut Vec<Output>) {
        let Some(session) = &self.session else { return };
        let (advance, events) = session.advance(t_ms);
        out.extend(events.iter().map(session_message));
        match advance {
            Advance::Running(session) => self.session = Some(session),
            Advance::Completed => {
                let done_ms = events.last().map_or(t_ms, |e| e.t_ms);
                out.push(Output::History(HistoryRecord {
                    t_ms: done_ms,
                    kind: HistoryKind::SessionCompleted,
                    value: 0,
                }));
                self.session = None;
                self.mode = Mode::Sensing;
                self.set_level(done_ms, 0, config, out);
            }
        }
    }

    fn cancel(&mut self, t_ms: u64, config: &DeviceConfig, out: &mut Vec<Output>) {
        match self.mode {
            Mode::Sensing => return,
            Mode::TrainingPrompt => {}
            Mode::Training => {
                // Bring the session up to date first; it may already be over.
                self.advance_session(t_ms, config, out);
                let Some(session) = self.session.take() else { return };
                out.push(session_message(&SessionEvent {
                    t_ms,
                    kind: SessionEventKind::Cancelled,
                    step: session.step_index,
                    phase: session.phase,
                }));
                out.push(Output::History(HistoryRecord {
                    t_ms,
                    kind: HistoryKind::SessionCancelled,
                    value: 0,
                }));
            }
        }
        self.mode = Mode::Sensing;
        self.set_level(t_ms, config.cancel_level(), config, out);
    }
}

fn session_message(ev: &SessionEvent) -> Output {
    Output::Message(Message::SessionEvent {
        t_ms: ev.t_ms,
        kind: ev.kind,
        step: ev.step as u8,
        phase: ev.phase,
    })
}

/// Pure transition function: the same `(state, event, config)` always yields
/// the same next state and the same outputs in the same order.
pub fn step(state: &DeviceState, event: Event, config: &DeviceConfig) -> (DeviceState, Vec<Output>) {
    let mut next = state.clone();
    let out = next.apply(event, config);
    (next, out)
}

/// What the LED row and LCD show for a state. Training frames are rendered at
/// the state's last tick.
pub fn render(state: &DeviceState, config: &DeviceConfig) -> (LedFrame, LcdText) {
    let leds = usize::from(config.led_count);
    let (white, line) = match (&state.session, state.mode) {
        (Some(session), Mode::Training) => {
            let now = state.last_tick_ms.max(session.phase_started_ms);
            (session.led_pattern(now, leds), LcdText::new(&session.instruction_text()))
        }
        (_, mode) => {
            let lit = usize::from(led_level(state.accumulator, config));
            let white = (0..leds).map(|i| if i < lit { 255 } else { 0 }).collect();
            let line = if mode == Mode::TrainingPrompt { PROMPT_TEXT } else { "" };
            (white, LcdText::new(line))
        }
    };
    (LedFrame { white, blue: state.silent }, line)
}
