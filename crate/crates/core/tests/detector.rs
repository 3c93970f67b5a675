mod oracle;

use pmrball_core::device::{detect_squeeze, PressureSample, SqueezeDetector};
use pmrball_core::DeviceConfig;
use proptest::prelude::*;

fn stream(samples: &[(u64, u16)], config: &DeviceConfig) -> Vec<oracle::OfflineSqueeze> {
    let mut det = SqueezeDetector::default();
    let mut out = Vec::new();
    for &(t_ms, pressure) in samples {
        let (next, ev) = detect_squeeze(&det, PressureSample::new(t_ms, pressure).unwrap(), config);
        det = next;
        if let Some(e) = ev {
            out.push(oracle::OfflineSqueeze { t_ms: e.t_ms, peak: e.peak, duration_ms: e.duration_ms });
        }
    }
    out
}

fn timed(ps: &[u16]) -> Vec<(u64, u16)> {
    ps.iter().enumerate().map(|(i, &p)| (i as u64 * 10, p)).collect()
}

#[test]
fn worked_examples_agree_with_oracle() {
    let c = DeviceConfig::default();
    for (ps, n) in [(&[0, 200, 250, 100][..], 0), (&[0, 400, 600, 100], 1), (&[0, 400, 100, 400, 100], 2)] {
        let s = timed(ps);
        let got = stream(&s, &c);
        assert_eq!(got, oracle::detect_offline(&s, c.p_hi, c.p_lo));
        assert_eq!(got.len(), n);
    }
    let one = stream(&timed(&[0, 400, 600, 100]), &c);
    assert_eq!((one[0].peak, one[0].t_ms), (600, 30));
}

proptest! {
    #[test]
    fn streaming_equals_offline(
        steps in prop::collection::vec((0u64..80, 0u16..=1023), 0..300),
        p_lo in 50u16..400,
        gap in 1u16..300,
    ) {
        let config = DeviceConfig { p_lo, p_hi: (p_lo + gap).min(1023), ..DeviceConfig::default() };
        prop_assume!(config.p_lo < config.p_hi);
        let mut t = 0;
        let samples: Vec<(u64, u16)> = steps.iter().map(|&(dt, p)| { t += dt; (t, p) }).collect();
        prop_assert_eq!(stream(&samples, &config), oracle::detect_offline(&samples, config.p_hi, config.p_lo));
    }
}
