use thiserror::Error;

use crate::device::{AppCommand, Button, Event};

/// A button press or app command injected at a fixed virtual time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScriptedInput {
    pub t_ms: u64,
    pub event: Event,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("script line {line}: {reason}")]
pub struct ScriptError {
    pub line: usize,
    pub reason: String,
}

/// Parses `t_ms,input` lines, where input is one of `silent`, `start`,
/// `cancel` (device buttons) or `app_start`, `app_cancel`, `app_silent`.
/// An optional `t_ms,input` header, blank lines and `#` comments are skipped.
pub fn parse_script(text: &str) -> Result<Vec<ScriptedInput>, ScriptError> {
    let mut out: Vec<ScriptedInput> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') || (line == 1 && s == "t_ms,input") {
            continue;
        }
        let err = |reason: String| ScriptError { line, reason };
        let (t, input) = s.split_once(',').ok_or_else(|| err("expected `t_ms,input`".into()))?;
        let t_ms: u64 = t.trim().parse().map_err(|_| err(format!("bad timestamp `{t}`")))?;
        let event = match input.trim() {
            "silent" => Event::Button { t_ms, button: Button::Silent },
            "start" => Event::Button { t_ms, button: Button::Start },
            "cancel" => Event::Button { t_ms, button: Button::Cancel },
            "app_start" => Event::App { t_ms, command: AppCommand::StartTraining },
            "app_cancel" => Event::App { t_ms, command: AppCommand::CancelTraining },
            "app_silent" => Event::App { t_ms, command: AppCommand::ToggleSilent },
            other => return Err(err(format!("unknown input `{other}`"))),
        };
        if out.last().is_some_and(|p| p.t_ms > t_ms) {
            return Err(err("inputs must be in time order".into()));
        }
        out.push(ScriptedInput { t_ms, event });
    }
    Ok(out)
}
