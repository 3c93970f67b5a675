use thiserror::Error;

use crate::config::{DeviceConfig, ADC_MAX};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("pressure {0} is outside the ADC range 0..={ADC_MAX}")]
pub struct SampleError(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PressureSample {
    pub t_ms: u64,
    pub pressure: u16,
}

impl PressureSample {
    pub fn new(t_ms: u64, pressure: u16) -> Result<Self, SampleError> {
        if pressure > ADC_MAX {
            return Err(SampleError(pressure));
        }
        Ok(PressureSample { t_ms, pressure })
    }
}

/// One complete press and release of the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SqueezeEvent {
    /// Time of the falling crossing.
    pub t_ms: u64,
    pub peak: u16,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectorPhase {
    #[default]
    Idle,
    InSqueeze,
}

/// Two-threshold squeeze detector. A squeeze opens when pressure reaches
/// `p_hi` and closes when it falls to `p_lo` or below; readings in between
/// keep the current phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SqueezeDetector {
    pub phase: DetectorPhase,
    pub peak: u16,
    pub started_ms: u64,
}

impl SqueezeDetector {
    pub fn update(&mut self, sample: PressureSample, config: &DeviceConfig) -> Option<SqueezeEvent> {
        match self.phase {
            DetectorPhase::Idle => {
                if sample.pressure >= config.p_hi {
                    *self = SqueezeDetector {
                        phase: DetectorPhase::InSqueeze,
                        peak: sample.pressure,
                        started_ms: sample.t_ms,
                    };
                }
                None
            }
            DetectorPhase::InSqueeze => {
                if sample.pressure <= config.p_lo {
                    let event = SqueezeEvent {
                        t_ms: sample.t_ms,
                        peak: self.peak,
                        duration_ms: sample.t_ms.saturating_sub(self.started_ms),
                    };
                    *self = SqueezeDetector::default();
                    Some(event)
                } else {
                    self.peak = self.peak.max(sample.pressure);
                    None
                }
            }
        }
    }
}

pub fn detect_squeeze(
    detector: &SqueezeDetector,
    sample: PressureSample,
    config: &DeviceConfig,
) -> (SqueezeDetector, Option<SqueezeEvent>) {
    let mut next = *detector;
    let event = next.update(sample, config);
    (next, event)
}
