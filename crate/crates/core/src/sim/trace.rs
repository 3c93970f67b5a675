use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{DeviceConfig, ADC_MAX};
use crate::device::PressureSample;

/// Sampling period of synthesized traces.
pub const SAMPLE_PERIOD_MS: u64 = 50;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    BadTrace { line: usize, reason: String },
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Pressure samples ordered by non-decreasing time.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    samples: Vec<PressureSample>,
}

impl Trace {
    /// Checks range and ordering; `line` in errors is the 1-based sample index.
    pub fn new(samples: Vec<PressureSample>) -> Result<Trace, TraceError> {
        for (i, s) in samples.iter().enumerate() {
            if s.pressure > ADC_MAX {
                return Err(TraceError::BadTrace { line: i + 1, reason: format!("pressure {} out of range", s.pressure) });
            }
            if i > 0 && s.t_ms < samples[i - 1].t_ms {
                return Err(TraceError::BadTrace { line: i + 1, reason: "time goes backwards".into() });
            }
        }
        Ok(Trace { samples })
    }

    pub fn samples(&self) -> &[PressureSample] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last_ms(&self) -> Option<u64> {
        self.samples.last().map(|s| s.t_ms)
    }
}

/// Reads a `t_ms,pressure` CSV trace. Line numbers in errors count the header
/// as line 1.
pub fn read_trace<R: Read>(reader: R) -> Result<Trace, TraceError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header_ok = csv
        .headers()
        .map(|h| h.iter().eq(["t_ms", "pressure"]))
        .map_err(|e| TraceError::BadTrace { line: 1, reason: e.to_string() })?;
    if !header_ok {
        return Err(TraceError::BadTrace { line: 1, reason: "header must be `t_ms,pressure`".into() });
    }
    let mut samples: Vec<PressureSample> = Vec::new();
    for (i, row) in csv.records().enumerate() {
        let line = i + 2;
        let bad = |reason: String| TraceError::BadTrace { line, reason };
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", row.len())));
        }
        let t_ms = u64::from_str(&row[0]).map_err(|_| bad(format!("bad timestamp `{}`", &row[0])))?;
        let pressure = u16::from_str(&row[1]).map_err(|_| bad(format!("bad pressure `{}`", &row[1])))?;
        let sample = PressureSample::new(t_ms, pressure).map_err(|e| bad(e.to_string()))?;
        if samples.last().is_some_and(|p| p.t_ms > t_ms) {
            return Err(bad(format!("timestamp {t_ms} is earlier than the previous sample")));
        }
        samples.push(sample);
    }
    Ok(Trace { samples })
}

pub fn write_trace<W: Write>(trace: &Trace, writer: W) -> Result<(), TraceError> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(["t_ms", "pressure"]).map_err(csv_io)?;
    for s in trace.samples() {
        csv.write_record([s.t_ms.to_string(), s.pressure.to_string()]).map_err(csv_io)?;
    }
    csv.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> TraceError {
    TraceError::Io(e.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Calm,
    Stressed,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "calm" => Ok(Profile::Calm),
            "stressed" => Ok(Profile::Stressed),
            other => Err(format!("unknown profile `{other}` (expected calm or stressed)")),
        }
    }
}

/// Synthesizes a trace sampled every 50 ms over `[0, duration_ms]`.
///
/// `Calm` stays uniformly within `[0, 0.8 * p_hi]`. `Stressed` alternates
/// quiet gaps (at most half of `p_lo`) with squeezes that ramp to a random
/// peak in `[p_hi, 1023]`, hold, and release. Same inputs, same trace.
pub fn gen_trace(seed: u64, profile: Profile, duration_ms: u64, config: &DeviceConfig) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_ms / SAMPLE_PERIOD_MS + 1) as usize;
    let quiet_max = config.p_lo / 2;
    let mut pressures: Vec<u16> = Vec::with_capacity(n);

    match profile {
        Profile::Calm => {
            let hi = (f64::from(config.p_hi) * 0.8).floor() as u16;
            pressures.extend((0..n).map(|_| rng.gen_range(0..=hi)));
        }
        Profile::Stressed => {
            while pressures.len() < n {
                let gap = rng.gen_range(4..=30);
                pressures.extend((0..gap).map(|_| rng.gen_range(0..=quiet_max)));

                let peak = rng.gen_range(config.p_hi..=ADC_MAX);
                let base = *pressures.last().unwrap();
                let ramp = rng.gen_range(2..=6u16);
                for k in 1..=ramp {
                    pressures.push(base + (peak - base) * k / ramp);
                }
                let hold = rng.gen_range(2..=12);
                for _ in 0..hold {
                    let sag = rng.gen_range(0..=(peak - config.p_hi) / 4);
                    pressures.push(peak - sag);
                }
                let release = rng.gen_range(1..=4u16);
                let floor = rng.gen_range(0..=quiet_max);
                for k in 1..=release {
                    pressures.push(peak - (peak - floor) * k / release);
                }
            }
            pressures.truncate(n);
        }
    }

    let samples = pressures
        .into_iter()
        .enumerate()
        .map(|(i, pressure)| PressureSample { t_ms: i as u64 * SAMPLE_PERIOD_MS, pressure })
        .collect();
    Trace { samples }
}
