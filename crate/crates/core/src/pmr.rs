//! Progressive muscle relaxation plans and the timed session machine.
//!
//! A session walks the plan's steps in order. Each step has a tense phase
//! followed by a relax phase. [`PmrSession::advance`] may cross several phase
//! boundaries at once and stamps every boundary event with its exact
//! analytic time, so the event stream does not depend on how often the caller
//! polls.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest line the LCD can show.
pub const LCD_COLUMNS: usize = 32;

/// Steps are reported on the wire as a single byte.
pub const MAX_STEPS: usize = 256;

const BUILTIN_PLAN: &str = include_str!("../plans/default.plan");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("plan has no steps")]
    EmptyPlan,
    #[error("line {line}: duration must be a positive number of milliseconds, got `{value}`")]
    BadDuration { line: usize, value: String },
    #[error("line {line}: instruction is {len} characters, the LCD holds {LCD_COLUMNS}")]
    OversizeInstruction { line: usize, len: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("plan has {0} steps, at most {MAX_STEPS} are supported")]
    TooManySteps(usize),
    #[error("plan file is not valid UTF-8")]
    NotUtf8,
    #[error("cannot read plan file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmrStep {
    pub muscle_group: String,
    pub instruction: String,
    pub tense_ms: u64,
    pub relax_ms: u64,
}

impl PmrStep {
    pub fn duration_ms(&self) -> u64 {
        self.tense_ms + self.relax_ms
    }

    pub fn phase_ms(&self, phase: Phase) -> u64 {
        match phase {
            Phase::Tense => self.tense_ms,
            Phase::Relax => self.relax_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmrPlan {
    pub name: String,
    pub steps: Vec<PmrStep>,
}

impl PmrPlan {
    /// The seven-group plan shipped in `plans/default.plan`.
    pub fn builtin() -> PmrPlan {
        load_plan(BUILTIN_PLAN.as_bytes()).expect("builtin plan is valid")
    }

    pub fn from_file(path: &Path) -> Result<PmrPlan, PlanError> {
        let bytes = std::fs::read(path).map_err(|e| PlanError::Io(format!("{}: {e}", path.display())))?;
        load_plan(&bytes)
    }

    pub fn total_ms(&self) -> u64 {
        self.steps.iter().map(PmrStep::duration_ms).sum()
    }
}

impl Default for PmrPlan {
    fn default() -> Self {
        PmrPlan::builtin()
    }
}

/// Parses a plan file.
///
/// One step per line as `muscle_group | instruction | tense_ms | relax_ms`.
/// Blank lines and `#` comments are skipped; an optional first line
/// `name: <text>` names the plan.
pub fn load_plan(bytes: &[u8]) -> Result<PmrPlan, PlanError> {
    let text = std::str::from_utf8(bytes).map_err(|_| PlanError::NotUtf8)?;
    let mut name = String::from("PMR");
    let mut steps = Vec::new();
    let mut seen_content = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if let Some(rest) = line.strip_prefix("name:") {
                name = rest.trim().to_string();
                continue;
            }
        }
        steps.push(parse_step(line, line_no)?);
    }

    if steps.is_empty() {
        return Err(PlanError::EmptyPlan);
    }
    if steps.len() > MAX_STEPS {
        return Err(PlanError::TooManySteps(steps.len()));
    }
    Ok(PmrPlan { name, steps })
}

fn parse_step(line: &str, line_no: usize) -> Result<PmrStep, PlanError> {
    let fields: Vec<&str> = line.split('|').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(PlanError::Malformed {
            line: line_no,
            reason: format!("expected 4 `|`-separated fields, found {}", fields.len()),
        });
    }
    let muscle_group = fields[0];
    let instruction = fields[1];
    if muscle_group.is_empty() {
        return Err(PlanError::Malformed { line: line_no, reason: "empty muscle group".into() });
    }
    if instruction.is_empty() {
        return Err(PlanError::Malformed { line: line_no, reason: "empty instruction".into() });
    }
    if !instruction.chars().all(|c| c.is_ascii() && !c.is_ascii_control()) {
        return Err(PlanError::Malformed {
            line: line_no,
            reason: "instruction must be printable ASCII".into(),
        });
    }
    let len = instruction.chars().count();
    if len > LCD_COLUMNS {
        return Err(PlanError::OversizeInstruction { line: line_no, len });
    }
    let duration = |s: &str| -> Result<u64, PlanError> {
        match s.parse::<i64>() {
            Ok(v) if v > 0 => Ok(v as u64),
            _ => Err(PlanError::BadDuration { line: line_no, value: s.to_string() }),
        }
    };
    Ok(PmrStep {
        muscle_group: muscle_group.to_string(),
        instruction: instruction.to_string(),
        tense_ms: duration(fields[2])?,
        relax_ms: duration(fields[3])?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Tense,
    Relax,
}

impl Phase {
    pub fn code(self) -> u8 {
        match self {
            Phase::Tense => 0,
            Phase::Relax => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Phase> {
        match code {
            0 => Some(Phase::Tense),
            1 => Some(Phase::Relax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionEventKind {
    Started,
    StepAdvanced,
    PhaseChanged,
    Completed,
    Cancelled,
}

impl SessionEventKind {
    pub fn code(self) -> u8 {
        match self {
            SessionEventKind::Started => 0,
            SessionEventKind::StepAdvanced => 1,
            SessionEventKind::PhaseChanged => 2,
            SessionEventKind::Completed => 3,
            SessionEventKind::Cancelled => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<SessionEventKind> {
        Some(match code {
            0 => SessionEventKind::Started,
            1 => SessionEventKind::StepAdvanced,
            2 => SessionEventKind::PhaseChanged,
            3 => SessionEventKind::Completed,
            4 => SessionEventKind::Cancelled,
            _ => return None,
        })
    }
}

impl fmt::Display for SessionEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SessionEventKind::Started => "started",
            SessionEventKind::StepAdvanced => "step_advanced",
            SessionEventKind::PhaseChanged => "phase_changed",
            SessionEventKind::Completed => "completed",
            SessionEventKind::Cancelled => "cancelled",
        };
        f.write_str(s)
    }
}

/// A session boundary, stamped with the exact time it happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionEvent {
    pub t_ms: u64,
    pub kind: SessionEventKind,
    pub step: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmrSession {
    pub plan: Arc<PmrPlan>,
    pub started_ms: u64,
    pub step_index: usize,
    pub phase: Phase,
    pub phase_started_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Advance {
    Running(PmrSession),
    Completed,
}

pub fn start_session(plan: Arc<PmrPlan>, now_ms: u64) -> PmrSession {
    PmrSession {
        plan,
        started_ms: now_ms,
        step_index: 0,
        phase: Phase::Tense,
        phase_started_ms: now_ms,
    }
}

impl PmrSession {
    pub fn current_step(&self) -> &PmrStep {
        &self.plan.steps[self.step_index]
    }

    pub fn phase_duration_ms(&self) -> u64 {
        self.current_step().phase_ms(self.phase)
    }

    pub fn phase_end_ms(&self) -> u64 {
        self.phase_started_ms + self.phase_duration_ms()
    }

    pub fn completion_ms(&self) -> u64 {
        self.started_ms + self.plan.total_ms()
    }

    /// Moves the session forward to `now_ms`, crossing every phase boundary at
    /// or before it.
    ///
    /// A tense to relax boundary yields `PhaseChanged`, a relax to next-step
    /// boundary yields `StepAdvanced`, and the end of the last relax phase
    /// yields `Completed`. Calling again with the same `now_ms` is a no-op.
    pub fn advance(&self, now_ms: u64) -> (Advance, Vec<SessionEvent>) {
        let mut session = self.clone();
        let mut events = Vec::new();
        loop {
            let end = session.phase_end_ms();
            if now_ms < end {
                return (Advance::Running(session), events);
            }
            match session.phase {
                Phase::Tense => {
                    session.phase = Phase::Relax;
                    session.phase_started_ms = end;
                    events.push(SessionEvent {
                        t_ms: end,
                        kind: SessionEventKind::PhaseChanged,
                        step: session.step_index,
                        phase: Phase::Relax,
                    });
                }
                Phase::Relax if session.step_index + 1 < session.plan.steps.len() => {
                    session.step_index += 1;
                    session.phase = Phase::Tense;
                    session.phase_started_ms = end;
                    events.push(SessionEvent {
                        t_ms: end,
                        kind: SessionEventKind::StepAdvanced,
                        step: session.step_index,
                        phase: Phase::Tense,
                    });
                }
                Phase::Relax => {
                    events.push(SessionEvent {
                        t_ms: end,
                        kind: SessionEventKind::Completed,
                        step: session.step_index,
                        phase: Phase::Relax,
                    });
                    return (Advance::Completed, events);
                }
            }
        }
    }

    /// `floor(255 * remaining / phase_duration)`, clamped to the current phase.
    pub fn countdown_brightness(&self, now_ms: u64) -> u8 {
        let duration = self.phase_duration_ms();
        let end = self.phase_end_ms();
        let now = now_ms.clamp(self.phase_started_ms, end);
        let remaining = end - now;
        (255 * remaining as u128 / duration as u128) as u8
    }

    /// LED row for the running session: completed steps full, the current step
    /// counting down, later steps dark. Plans longer than the row wrap around
    /// and start a fresh row.
    pub fn led_pattern(&self, now_ms: u64, led_count: usize) -> Vec<u8> {
        let mut leds = vec![0u8; led_count];
        if led_count == 0 {
            return leds;
        }
        let pos = self.step_index % led_count;
        for led in leds.iter_mut().take(pos) {
            *led = 255;
        }
        leds[pos] = self.countdown_brightness(now_ms);
        leds
    }

    pub fn instruction_text(&self) -> String {
        let step = self.current_step();
        match self.phase {
            Phase::Tense => step.instruction.clone(),
            Phase::Relax => format!("Relax: {}", step.muscle_group),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> Arc<PmrPlan> {
        Arc::new(PmrPlan::builtin())
    }

    #[test]
    fn builtin_plan_has_seven_steps() {
        let plan = PmrPlan::builtin();
        assert_eq!(plan.steps.len(), 7);
        // 7 * (5000 + 10000)
        assert_eq!(plan.total_ms(), 105_000);
        assert!(plan.steps.iter().all(|s| s.instruction.len() <= LCD_COLUMNS));
    }

    #[test]
    fn plan_errors() {
        assert_eq!(load_plan(b"# nothing\n\nname: x\n"), Err(PlanError::EmptyPlan));
        assert_eq!(
            load_plan(b"hands | squeeze | 0 | 100\n"),
            Err(PlanError::BadDuration { line: 1, value: "0".into() })
        );
        assert_eq!(
            load_plan(b"hands | squeeze | -5 | 100\n"),
            Err(PlanError::BadDuration { line: 1, value: "-5".into() })
        );
        let long = format!("hands | {} | 10 | 10", "x".repeat(33));
        assert_eq!(
            load_plan(long.as_bytes()),
            Err(PlanError::OversizeInstruction { line: 1, len: 33 })
        );
        assert!(matches!(load_plan(b"a | b | 1\n"), Err(PlanError::Malformed { line: 1, .. })));
        assert_eq!(load_plan(&[0xff, 0xfe]), Err(PlanError::NotUtf8));
    }

    #[test]
    fn plan_name_only_on_first_line() {
        let p = load_plan(b"# c\nname: Short\nhands | Squeeze | 10 | 20\n").unwrap();
        assert_eq!(p.name, "Short");
        assert_eq!(p.steps[0].duration_ms(), 30);
        assert!(load_plan(b"hands | Squeeze | 10 | 20\nname: late\n").is_err());
    }

    #[test]
    fn fresh_session() {
        let s = start_session(plan(), 0);
        assert_eq!((s.step_index, s.phase, s.started_ms), (0, Phase::Tense, 0));
        let s = start_session(plan(), 42);
        assert_eq!(s.phase_started_ms, 42);
        assert_eq!(s.instruction_text(), s.plan.steps[0].instruction);
    }

    #[test]
    fn advance_first_boundary() {
        let s = start_session(plan(), 0);
        let (adv, ev) = s.advance(5000);
        let Advance::Running(s) = adv else { panic!() };
        assert_eq!((s.step_index, s.phase), (0, Phase::Relax));
        assert_eq!(
            ev,
            vec![SessionEvent { t_ms: 5000, kind: SessionEventKind::PhaseChanged, step: 0, phase: Phase::Relax }]
        );
    }

    #[test]
    fn advance_to_second_step() {
        let s = start_session(plan(), 0);
        let (_, _) = s.advance(4999);
        let (adv, ev) = s.advance(15_000);
        let Advance::Running(s) = adv else { panic!() };
        assert_eq!((s.step_index, s.phase), (1, Phase::Tense));
        let stepped: Vec<_> = ev.iter().filter(|e| e.kind == SessionEventKind::StepAdvanced).collect();
        assert_eq!(stepped.len(), 1);
        assert_eq!(stepped[0].t_ms, 15_000);
        assert!(!ev.iter().any(|e| e.kind == SessionEventKind::PhaseChanged && e.t_ms == 15_000));
    }

    #[test]
    fn advance_to_completion() {
        let s = start_session(plan(), 0);
        let (adv, ev) = s.advance(1_000_000);
        assert_eq!(adv, Advance::Completed);
        let last = ev.last().unwrap();
        assert_eq!((last.kind, last.t_ms), (SessionEventKind::Completed, 105_000));
        // 7 phase changes, 6 step advances, 1 completion
        assert_eq!(ev.len(), 14);
    }

    #[test]
    fn advance_idempotent() {
        let s = start_session(plan(), 100);
        let (Advance::Running(s1), _) = s.advance(23_456) else { panic!() };
        let (Advance::Running(s2), ev) = s1.advance(23_456) else { panic!() };
        assert_eq!(s1, s2);
        assert!(ev.is_empty());
    }

    #[test]
    fn countdown_values() {
        let s = start_session(plan(), 0);
        assert_eq!(s.countdown_brightness(0), 255);
        assert_eq!(s.countdown_brightness(2500), 127);
        assert_eq!(s.countdown_brightness(5000), 0);
    }

    #[test]
    fn led_patterns() {
        let s = start_session(plan(), 0);
        assert_eq!(s.led_pattern(0, 8), vec![255, 0, 0, 0, 0, 0, 0, 0]);

        let mut s2 = s.clone();
        s2.step_index = 2;
        s2.phase_started_ms = 30_000;
        assert_eq!(s2.led_pattern(32_500, 8), vec![255, 255, 127, 0, 0, 0, 0, 0]);

        let long = PmrPlan {
            name: "long".into(),
            steps: vec![s.plan.steps[0].clone(); 9],
        };
        let mut s3 = start_session(Arc::new(long), 0);
        s3.step_index = 8;
        assert_eq!(s3.led_pattern(0, 8), vec![255, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn relax_instruction_names_the_group() {
        let s = start_session(plan(), 0);
        let (Advance::Running(s), _) = s.advance(5000) else { panic!() };
        assert_eq!(s.instruction_text(), "Relax: hands/forearms");
    }
}
