use crate::config::{DeviceConfig, ADC_MAX};

/// Adds the increment earned by a squeeze with the given peak.
///
/// The increment scales linearly with the peak, is rounded to the nearest
/// unit and clamped to `[delta_min, delta_max]`; the sum saturates at `a_max`.
pub fn accumulate(accumulator: u16, peak: u16, config: &DeviceConfig) -> u16 {
    let scale = u64::from(ADC_MAX);
    let num = u64::from(config.delta_max) * u64::from(peak.min(ADC_MAX));
    // round half up
    let delta = ((2 * num + scale) / (2 * scale)) as u16;
    let delta = delta.clamp(config.delta_min, config.delta_max);
    accumulator.saturating_add(delta).min(config.a_max)
}

/// Exponential decay with the configured half-life, rounded down. A zero
/// half-life disables decay.
pub fn decay(accumulator: u16, elapsed_ms: u64, config: &DeviceConfig) -> u16 {
    if config.decay_half_life_ms == 0 || elapsed_ms == 0 {
        return accumulator;
    }
    let halvings = elapsed_ms as f64 / config.decay_half_life_ms as f64;
    (f64::from(accumulator) * (-halvings).exp2()).floor() as u16
}

/// Number of gauge LEDs lit for an accumulator value.
pub fn led_level(accumulator: u16, config: &DeviceConfig) -> u8 {
    let lit = u32::from(config.led_count) * u32::from(accumulator.min(config.a_max)) / u32::from(config.a_max);
    lit as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_examples() {
        let c = DeviceConfig::default();
        assert_eq!(accumulate(0, 1023, &c), 100);
        assert_eq!(accumulate(990, 1023, &c), 1000);
        // round(100 * 51 / 1023) = 5, raised to delta_min
        assert_eq!(accumulate(0, 51, &c), 10);
        // round(100 * 300 / 1023) = round(29.33) = 29
        assert_eq!(accumulate(0, 300, &c), 29);
        // 100 * 1018.5 / 1023 rounds; 1018 -> 99.51 -> 100, 1012 -> 98.92 -> 99
        assert_eq!(accumulate(0, 1018, &c), 100);
        assert_eq!(accumulate(0, 1012, &c), 99);
    }

    #[test]
    fn decay_examples() {
        let mut c = DeviceConfig::default();
        assert_eq!(decay(1000, 123_456, &c), 1000);
        c.decay_half_life_ms = 60_000;
        assert_eq!(decay(1000, 60_000, &c), 500);
        assert_eq!(decay(1000, 120_000, &c), 250);
        assert_eq!(decay(1000, 0, &c), 1000);
    }

    #[test]
    fn led_level_examples() {
        let c = DeviceConfig::default();
        assert_eq!(led_level(0, &c), 0);
        assert_eq!(led_level(1000, &c), 8);
        assert_eq!(led_level(499, &c), 3);
        assert_eq!(led_level(999, &c), 7);
    }
}
