use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

use super::script::ScriptedInput;
use super::trace::Trace;
use crate::config::{ConfigError, DeviceConfig};
use crate::device::{DeviceState, Event, Output, PressureSample};
use crate::history::{FlushPolicy, HistoryError, HistoryStore};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("event log: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything that determines a replay.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub config: DeviceConfig,
    pub history_path: Option<PathBuf>,
    pub history_flush: FlushPolicy,
    pub trace: Trace,
    pub script: Vec<ScriptedInput>,
    /// Real-time multiplier; 0 runs as fast as possible.
    pub speed: f64,
    /// Last tick time. Defaults to the latest trace or script timestamp.
    pub duration_ms: Option<u64>,
    /// Wall-clock time of device boot, added to history timestamps.
    pub epoch_ms: u64,
}

impl SimRun {
    pub fn new(config: DeviceConfig, trace: Trace) -> SimRun {
        SimRun {
            config,
            history_path: None,
            history_flush: FlushPolicy::EveryAppend,
            trace,
            script: Vec::new(),
            speed: 0.0,
            duration_ms: None,
            epoch_ms: 0,
        }
    }

    pub fn end_ms(&self) -> u64 {
        self.duration_ms.unwrap_or_else(|| {
            let trace_end = self.trace.last_ms().unwrap_or(0);
            let script_end = self.script.last().map_or(0, |s| s.t_ms);
            trace_end.max(script_end)
        })
    }
}

/// Drives a device on a virtual clock, one tick at a time.
///
/// Each tick at time `T` delivers, in order: scripted inputs due in
/// `(T - tick_ms, T]` at their own timestamps, externally injected events
/// stamped `T`, the latest trace sample at or before `T` (zero-order hold),
/// and finally `Tick { T }`.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: DeviceConfig,
    state: DeviceState,
    trace: Trace,
    script: Vec<ScriptedInput>,
    next_sample: usize,
    next_script: usize,
    held: Option<u16>,
    now_ms: u64,
    epoch_ms: u64,
}

impl Simulator {
    /// Boots the device at virtual time 0 and returns its boot outputs.
    pub fn new(
        config: DeviceConfig,
        trace: Trace,
        script: Vec<ScriptedInput>,
        epoch_ms: u64,
    ) -> Result<(Simulator, Vec<Output>), ConfigError> {
        config.validate()?;
        let (state, boot) = DeviceState::boot(0, &config);
        let sim = Simulator {
            config,
            state,
            trace,
            script,
            next_sample: 0,
            next_script: 0,
            held: None,
            now_ms: 0,
            epoch_ms,
        };
        let boot = sim.to_wall_clock(boot);
        Ok((sim, boot))
    }

    pub fn config(&self) -> &DeviceConfig {
        &self.config
    }

    pub fn state(&self) -> &DeviceState {
        &self.state
    }

    /// Time of the next tick.
    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn epoch_ms(&self) -> u64 {
        self.epoch_ms
    }

    /// Runs one tick. `injected` events are re-stamped to the tick time.
    pub fn tick(&mut self, injected: &[Event]) -> Vec<Output> {
        let now = self.now_ms;
        let mut out = Vec::new();

        while let Some(input) = self.script.get(self.next_script) {
            if input.t_ms > now {
                break;
            }
            out.extend(self.state.apply(input.event, &self.config));
            self.next_script += 1;
        }
        for event in injected {
            out.extend(self.state.apply(restamp(*event, now), &self.config));
        }
        let samples = self.trace.samples();
        while self.next_sample < samples.len() && samples[self.next_sample].t_ms <= now {
            self.held = Some(samples[self.next_sample].pressure);
            self.next_sample += 1;
        }
        if let Some(pressure) = self.held {
            out.extend(self.state.apply(Event::Sample(PressureSample { t_ms: now, pressure }), &self.config));
        }
        out.extend(self.state.apply(Event::Tick { t_ms: now }, &self.config));

        self.now_ms += self.config.tick_ms;
        self.to_wall_clock(out)
    }

    fn to_wall_clock(&self, mut out: Vec<Output>) -> Vec<Output> {
        for o in &mut out {
            if let Output::History(r) = o {
                r.t_ms += self.epoch_ms;
            }
        }
        out
    }
}

fn restamp(event: Event, t_ms: u64) -> Event {
    match event {
        Event::Tick { .. } => Event::Tick { t_ms },
        Event::Sample(s) => Event::Sample(PressureSample { t_ms, ..s }),
        Event::Button { button, .. } => Event::Button { t_ms, button },
        Event::App { command, .. } => Event::App { t_ms, command },
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub outputs: Vec<Output>,
    pub final_state: DeviceState,
}

impl RunOutput {
    /// The event log: one canonical JSON object per output, `\n` terminated.
    pub fn event_log(&self) -> String {
        let mut log = String::new();
        for o in &self.outputs {
            log.push_str(&o.to_json());
            log.push('\n');
        }
        log
    }
}

/// Replays `sim` from boot through its last tick, appending every history
/// record to the configured history file.
pub fn run(sim: &SimRun) -> Result<RunOutput, RunError> {
    let mut store = match &sim.history_path {
        Some(path) => Some(HistoryStore::open(path, sim.history_flush)?.0),
        None => None,
    };
    let (mut device, mut outputs) = Simulator::new(sim.config.clone(), sim.trace.clone(), sim.script.clone(), sim.epoch_ms)?;
    let end = sim.end_ms();
    let pause = (sim.speed > 0.0).then(|| Duration::from_secs_f64(sim.config.tick_ms as f64 / 1000.0 / sim.speed));

    while device.now_ms() <= end {
        outputs.extend(device.tick(&[]));
        if let Some(pause) = pause {
            std::thread::sleep(pause);
        }
    }

    if let Some(store) = &mut store {
        for o in &outputs {
            if let Output::History(r) = o {
                store.append(*r)?;
            }
        }
        store.flush()?;
    }
    Ok(RunOutput { outputs, final_state: device.state().clone() })
}

pub fn write_event_log<W: Write>(out: &RunOutput, mut writer: W) -> std::io::Result<()> {
    writer.write_all(out.event_log().as_bytes())?;
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::Mode;
    use crate::protocol::Message;
    use crate::sim::{gen_trace, Profile};

    #[test]
    fn empty_trace_logs_boot_only() {
        let out = run(&SimRun::new(DeviceConfig::default(), Trace::default())).unwrap();
        assert_eq!(out.event_log(), "{\"type\":\"LevelUpdate\",\"t_ms\":0,\"accumulator\":0,\"led_level\":0}\n");
    }

    #[test]
    fn calm_trace_has_no_squeezes() {
        let cfg = DeviceConfig::default();
        let trace = gen_trace(3, Profile::Calm, 30_000, &cfg);
        let out = run(&SimRun::new(cfg, trace)).unwrap();
        assert!(!out.outputs.iter().any(|o| matches!(o, Output::Message(Message::Squeeze { .. }))));
    }

    #[test]
    fn stressed_trace_reaches_prompt() {
        let cfg = DeviceConfig::default();
        let trace = gen_trace(42, Profile::Stressed, 120_000, &cfg);
        let out = run(&SimRun::new(cfg, trace)).unwrap();
        assert_eq!(out.final_state.mode, Mode::TrainingPrompt);
        let a = out.event_log();
        let cfg = DeviceConfig::default();
        let again = run(&SimRun::new(cfg.clone(), gen_trace(42, Profile::Stressed, 120_000, &cfg))).unwrap();
        assert_eq!(a, again.event_log());
    }

    #[test]
    fn history_is_offset_by_epoch() {
        let cfg = DeviceConfig::default();
        let mut sim = SimRun::new(cfg.clone(), gen_trace(1, Profile::Stressed, 10_000, &cfg));
        sim.epoch_ms = 1_000_000;
        let out = run(&sim).unwrap();
        let hist: Vec<_> = out
            .outputs
            .iter()
            .filter_map(|o| if let Output::History(r) = o { Some(*r) } else { None })
            .collect();
        assert!(!hist.is_empty());
        assert!(hist.iter().all(|r| r.t_ms >= 1_000_000));
    }
}
