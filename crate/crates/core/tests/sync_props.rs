use std::collections::HashSet;

use orbfront::sync::{assemble_bundles, generate_stream, naive_associate, Sensor, TriggerConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_ignores_jitter(seed in any::<u64>(), frac in 0.0f64..0.49) {
        let cfg = TriggerConfig::default();
        let jitter = (cfg.cam_period_ns() as f64 * frac) as u64;
        let clean = assemble_bundles(&cfg, &generate_stream(&cfg, 1.0, 0, seed)).unwrap();
        let noisy = assemble_bundles(&cfg, &generate_stream(&cfg, 1.0, jitter, seed)).unwrap();
        prop_assert_eq!(clean.compositions(), noisy.compositions());
    }

    #[test]
    fn bundles_are_coherent_and_conserve_samples(seed in any::<u64>(), ratio in 1u32..6, jitter in 0u64..60_000_000) {
        let cfg = TriggerConfig::new(30, 30 * ratio).unwrap();
        let stream = generate_stream(&cfg, 0.5, jitter, seed);
        prop_assert!(stream.iter().all(|s| s.arrival_ns >= s.capture_ns));
        prop_assert!(stream.windows(2).all(|w| w[0].arrival_ns <= w[1].arrival_ns));
        let asm = assemble_bundles(&cfg, &stream).unwrap();
        let mut seen = HashSet::new();
        for (i, b) in asm.bundles.iter().enumerate() {
            prop_assert_eq!(b.tag, i as u64);
            for (cam, s) in b.frames.iter().enumerate() {
                prop_assert_eq!(s.sensor, Sensor::Cam(cam as u8));
                prop_assert_eq!(s.tag, b.tag);
            }
            prop_assert_eq!(b.imu.len() as u64, cfg.imu_per_cam());
            for s in &b.imu {
                prop_assert!(s.tag / cfg.imu_per_cam() == b.tag);
            }
            for s in b.frames.iter().chain(&b.imu) {
                prop_assert!(seen.insert((s.sensor, s.tag)));
            }
        }
        for p in &asm.incomplete {
            for s in p.frames.iter().chain(&p.imu) {
                prop_assert!(seen.insert((s.sensor, s.tag)));
            }
        }
        prop_assert_eq!(seen.len(), stream.len());
    }
}

#[test]
fn jitter_free_stream_counts() {
    let cfg = TriggerConfig::default();
    let s = generate_stream(&cfg, 1.0, 0, 1);
    assert_eq!(s.len(), 30 * 4 + 120);
    assert!(s.iter().all(|x| x.arrival_ns == x.capture_ns));
    assert!(naive_associate(&cfg, &s).is_empty());
    assert!(TriggerConfig::new(30, 100).is_err());
}

#[test]
fn naive_association_breaks_under_jitter() {
    let cfg = TriggerConfig::default();
    let jitter = cfg.cam_period_ns() * 49 / 100;
    let hits = (0..50u64)
        .filter(|&seed| !naive_associate(&cfg, &generate_stream(&cfg, 1.0, jitter, seed)).is_empty())
        .count();
    assert!(hits > 0);
}
