//! Device and host configuration.
//!
//! The file format is flat `key = value`, one pair per line, with `#`
//! comments. Unknown and repeated keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::history::FlushPolicy;
use crate::pmr::{PlanError, PmrPlan};

/// Full-scale reading of the 10-bit pressure ADC.
pub const ADC_MAX: u16 = 1023;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: `{value}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("plan: {0}")]
    Plan(#[from] PlanError),
    #[error("cannot read config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceConfig {
    /// Rising threshold, ADC counts.
    pub p_hi: u16,
    /// Falling threshold, ADC counts.
    pub p_lo: u16,
    /// Full-scale accumulator value.
    pub a_max: u16,
    pub delta_min: u16,
    pub delta_max: u16,
    pub led_count: u8,
    pub tick_ms: u64,
    /// Zero disables decay.
    pub decay_half_life_ms: u64,
    /// Fraction of `a_max` restored when training is cancelled.
    pub cancel_reset_fraction: f64,
    pub plan: Arc<PmrPlan>,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            p_hi: 300,
            p_lo: 150,
            a_max: 1000,
            delta_min: 10,
            delta_max: 100,
            led_count: 8,
            tick_ms: 10,
            decay_half_life_ms: 0,
            cancel_reset_fraction: 0.5,
            plan: Arc::new(PmrPlan::builtin()),
        }
    }
}

impl DeviceConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.p_lo < self.p_hi && self.p_hi <= ADC_MAX) {
            return fail(format!("need p_lo < p_hi <= {ADC_MAX}, got p_lo={} p_hi={}", self.p_lo, self.p_hi));
        }
        if !(0 < self.delta_min && self.delta_min <= self.delta_max && self.delta_max <= self.a_max) {
            return fail(format!(
                "need 0 < delta_min <= delta_max <= a_max, got {} / {} / {}",
                self.delta_min, self.delta_max, self.a_max
            ));
        }
        if self.led_count == 0 {
            return fail("led_count must be at least 1".into());
        }
        if self.tick_ms == 0 {
            return fail("tick_ms must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.cancel_reset_fraction) {
            return fail(format!("cancel_reset_fraction must be in [0, 1], got {}", self.cancel_reset_fraction));
        }
        Ok(())
    }

    /// Accumulator value restored after a cancel.
    pub fn cancel_level(&self) -> u16 {
        (self.cancel_reset_fraction * self.a_max as f64).floor() as u16
    }
}

/// Everything the simulator host reads from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct HostConfig {
    pub device: DeviceConfig,
    pub plan_path: Option<PathBuf>,
    pub history_path: Option<PathBuf>,
    pub history_flush: FlushPolicy,
}

impl Default for HostConfig {
    fn default() -> Self {
        HostConfig {
            device: DeviceConfig::default(),
            plan_path: None,
            history_path: None,
            history_flush: FlushPolicy::EveryAppend,
        }
    }
}

impl HostConfig {
    pub fn from_file(path: &Path) -> Result<HostConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        HostConfig::parse(&text, base)
    }

    /// Parses config text. Relative `plan_path` and `history_path` values are
    /// resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<HostConfig, ConfigError> {
        let mut cfg = HostConfig::default();
        let mut seen: Vec<String> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            seen.push(key.to_string());

            let bad = || ConfigError::BadValue { line, key: key.into(), value: value.into() };
            let dev = &mut cfg.device;
            match key {
                "p_hi" => dev.p_hi = value.parse().map_err(|_| bad())?,
                "p_lo" => dev.p_lo = value.parse().map_err(|_| bad())?,
                "a_max" => dev.a_max = value.parse().map_err(|_| bad())?,
                "delta_min" => dev.delta_min = value.parse().map_err(|_| bad())?,
                "delta_max" => dev.delta_max = value.parse().map_err(|_| bad())?,
                "led_count" => dev.led_count = value.parse().map_err(|_| bad())?,
                "tick_ms" => dev.tick_ms = value.parse().map_err(|_| bad())?,
                "decay_half_life_ms" => dev.decay_half_life_ms = value.parse().map_err(|_| bad())?,
                "cancel_reset_fraction" => {
                    let f: f64 = value.parse().map_err(|_| bad())?;
                    if !f.is_finite() {
                        return Err(bad());
                    }
                    dev.cancel_reset_fraction = f;
                }
                "plan_path" => cfg.plan_path = Some(base_dir.join(value)),
                "history_path" => cfg.history_path = Some(base_dir.join(value)),
                "history_flush" => {
                    cfg.history_flush = match value {
                        "every" => FlushPolicy::EveryAppend,
                        v => match v.strip_prefix("batch:").map(str::parse::<usize>) {
                            Some(Ok(n)) if n > 0 => FlushPolicy::Batched(n),
                            _ => return Err(bad()),
                        },
                    }
                }
                _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
            }
        }

        if let Some(path) = &cfg.plan_path {
            cfg.device.plan = Arc::new(PmrPlan::from_file(path)?);
        }
        cfg.device.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        DeviceConfig::default().validate().unwrap();
        assert_eq!(DeviceConfig::default().cancel_level(), 500);
    }

    #[test]
    fn parses_keys_and_comments() {
        let text = "# device\np_hi = 400 # firmer\np_lo=100\n\nled_count = 10\nhistory_path = h.log\nhistory_flush = batch:16\n";
        let cfg = HostConfig::parse(text, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.device.p_hi, 400);
        assert_eq!(cfg.device.p_lo, 100);
        assert_eq!(cfg.device.led_count, 10);
        assert_eq!(cfg.history_path, Some(PathBuf::from("/tmp/x/h.log")));
        assert_eq!(cfg.history_flush, FlushPolicy::Batched(16));
    }

    #[test]
    fn rejects_unknown_duplicate_and_bad() {
        assert_eq!(
            HostConfig::parse("colour = red", Path::new(".")),
            Err(ConfigError::UnknownKey { line: 1, key: "colour".into() })
        );
        assert!(matches!(
            HostConfig::parse("p_hi = 1\np_hi = 2", Path::new(".")),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(HostConfig::parse("p_hi = lots", Path::new(".")), Err(ConfigError::BadValue { .. })));
        assert!(matches!(HostConfig::parse("p_hi", Path::new(".")), Err(ConfigError::Syntax { line: 1 })));
    }

    #[test]
    fn rejects_broken_invariants() {
        for text in [
            "p_lo = 300",
            "p_hi = 1024",
            "delta_min = 0",
            "delta_max = 5",
            "delta_max = 2000",
            "led_count = 0",
            "tick_ms = 0",
            "cancel_reset_fraction = 1.5",
        ] {
            assert!(
                matches!(HostConfig::parse(text, Path::new(".")), Err(ConfigError::Invalid(_))),
                "{text}"
            );
        }
    }
}
