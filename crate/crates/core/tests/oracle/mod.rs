//! Reference implementations used only by tests. Each one takes a different
//! route from the library code it checks.
#![allow(dead_code, unused_imports)]

/// Bit-at-a-time CRC-16/CCITT-FALSE.
pub fn crc16_bitwise(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= u16::from(byte) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
        }
    }
    crc
}

/// Offline frame scan over a complete stream: at each offset, take a frame if
/// one with a valid length and CRC starts there, else move one byte on.
pub fn scan_frames(stream: &[u8]) -> Vec<Vec<u8>> {
    let mut frames = Vec::new();
    let mut i = 0;
    while i < stream.len() {
        if stream[i] == 0xA5 && i + 4 <= stream.len() {
            let len = u16::from_le_bytes([stream[i + 2], stream[i + 3]]) as usize;
            let end = i + 6 + len;
            if len <= 1024 && end <= stream.len() {
                let crc = u16::from_le_bytes([stream[end - 2], stream[end - 1]]);
                if crc16_bitwise(&stream[i + 1..end - 2]) == crc {
                    frames.push(stream[i..end].to_vec());
                    i = end;
                    continue;
                }
            }
        }
        i += 1;
    }
    frames
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfflineSqueeze {
    pub t_ms: u64,
    pub peak: u16,
    pub duration_ms: u64,
}

/// Two passes: first collect every rising and falling candidate index, then
/// pair each rise with the first fall after it.
pub fn detect_offline(samples: &[(u64, u16)], p_hi: u16, p_lo: u16) -> Vec<OfflineSqueeze> {
    let rises: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].1 >= p_hi).collect();
    let falls: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].1 <= p_lo).collect();
    let mut out = Vec::new();
    let mut cursor = 0;
    loop {
        let Some(&r) = rises.iter().find(|&&r| r >= cursor) else { break };
        let Some(&f) = falls.iter().find(|&&f| f > r) else { break };
        let peak = samples[r..f].iter().map(|s| s.1).max().unwrap();
        out.push(OfflineSqueeze { t_ms: samples[f].0, peak, duration_ms: samples[f].0 - samples[r].0 });
        cursor = f + 1;
    }
    out
}

/// Civil date from days since 1970-01-01 (proleptic Gregorian).
pub fn civil_from_days(z: i64) -> (i32, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    ((if m <= 2 { y + 1 } else { y }) as i32, m, d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteDay {
    pub ymd: (i32, u32, u32),
    pub mean_level: f64,
    pub max_level: u16,
    pub level_count: usize,
    pub squeeze_count: usize,
    pub sessions_completed: usize,
}

/// Per-day summary by filtering the whole record list once per distinct day.
/// Records are `(t_ms, kind_name, value)`.
pub fn aggregate_brute(records: &[(u64, &str, u16)]) -> Vec<BruteDay> {
    let mut days: Vec<u64> = records.iter().map(|r| r.0 / 86_400_000).collect();
    days.sort_unstable();
    days.dedup();
    days.into_iter()
        .map(|day| {
            let of_day: Vec<_> = records.iter().filter(|r| r.0 / 86_400_000 == day).collect();
            let levels: Vec<u16> = of_day.iter().filter(|r| r.1 == "level").map(|r| r.2).collect();
            BruteDay {
                ymd: civil_from_days(day as i64),
                mean_level: if levels.is_empty() {
                    0.0
                } else {
                    levels.iter().map(|&v| f64::from(v)).sum::<f64>() / levels.len() as f64
                },
                max_level: levels.iter().copied().max().unwrap_or(0),
                level_count: levels.len(),
                squeeze_count: of_day.iter().filter(|r| r.1 == "squeeze").count(),
                sessions_completed: of_day.iter().filter(|r| r.1 == "session_completed").count(),
            }
        })
        .collect()
}

#[cfg(test)]
mod self_check {
    use super::*;

    #[test]
    fn oracle_crc_check_value() {
        assert_eq!(crc16_bitwise(b"123456789"), 0x29B1);
    }

    #[test]
    fn civil_dates() {
        assert_eq!(civil_from_days(0), (1970, 1, 1));
        assert_eq!(civil_from_days(19_675), (2023, 11, 14));
        assert_eq!(civil_from_days(11_016), (2000, 2, 29));
    }
}
