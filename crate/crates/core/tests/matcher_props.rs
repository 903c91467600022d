mod common;

use std::collections::HashSet;

use common::*;
use orbfront::corpus::stereo_pair;
use orbfront::extractor::extract_image;
use orbfront::matcher::{
    hamming_distance, match_stereo, sad_rectify, sad_window, stereo_match, DepthRange, MatcherConfig, SearchStrip,
    StereoCalib,
};
use orbfront::ExtractorConfig;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn hamming_matches_bit_loop_on_1000_pairs() {
    let mut rng = rng(31);
    for _ in 0..1000 {
        let (a, b) = (random_descriptor(&mut rng), random_descriptor(&mut rng));
        assert_eq!(hamming_distance(&a, &b), hamming_oracle(&a, &b));
    }
}

#[test]
fn stereo_match_equals_exhaustive_oracle() {
    let mut rng = rng(32);
    for case in 0..200 {
        let (l, r, strip, max_h) = random_instance(&mut rng);
        assert_eq!(stereo_match(&l, &r, &strip, max_h), stereo_match_oracle(&l, &r, &strip, max_h), "case {case}");
    }
}

#[test]
fn sad_matches_naive_loop() {
    let mut rng = rng(33);
    for _ in 0..100 {
        let a = random_image(30, 30, &mut rng);
        let b = random_image(30, 30, &mut rng);
        let (cl, cr) = ((rng.random_range(5..25), rng.random_range(5..25)), (rng.random_range(5..25), rng.random_range(5..25)));
        let mut expect = 0u32;
        for dy in -5i64..=5 {
            for dx in -5i64..=5 {
                let p = a.get((cl.0 as i64 + dx) as usize, (cl.1 as i64 + dy) as usize) as i64;
                let q = b.get((cr.0 as i64 + dx) as usize, (cr.1 as i64 + dy) as usize) as i64;
                expect += (p - q).unsigned_abs() as u32;
            }
        }
        assert_eq!(sad_window(&a, &b, cl, cr).unwrap(), expect);
    }
}

#[test]
fn rectification_recovers_off_by_two() {
    let (l, r) = stereo_pair(120, 60, 10, 34);
    let mut recovered = 0;
    let mut total = 0;
    for y in (10..50).step_by(3) {
        for x in (30..100).step_by(5) {
            for off in [-2i64, 2] {
                let xr = (x as i64 - 10 + off) as u32;
                let rect = sad_rectify(&l, &r, (x, y), (xr, y), 5).unwrap();
                total += 1;
                if rect.offset as i64 == -off && rect.disparity == 10.0 {
                    recovered += 1;
                }
            }
        }
    }
    assert_eq!(recovered, total);
}

#[test]
fn shift_twelve_is_recovered() {
    let strip = SearchStrip::default();
    let calib = StereoCalib::new(500.0, 0.1).unwrap();
    let (mut good, mut all) = (0usize, 0usize);
    for seed in 0..3 {
        let (l, r) = stereo_pair(640, 480, 12, 100 + seed);
        let cfg = ExtractorConfig::default();
        let out = match_stereo(
            &extract_image(&l, &cfg).unwrap(),
            &extract_image(&r, &cfg).unwrap(),
            &strip,
            Some(&calib),
            &MatcherConfig::default(),
        )
        .unwrap();
        all += out.pairs.len();
        good += out.pairs.iter().filter(|p| (p.disparity - 12.0).abs() <= 0.5).count();
        for p in &out.pairs {
            let depth = p.depth.expect("positive disparity");
            assert!((depth - 50.0 / p.disparity).abs() < 1e-9);
        }
    }
    assert!(all > 500);
    assert!(good as f64 >= 0.95 * all as f64, "{good}/{all}");
}

#[test]
fn identical_frames_give_no_depth() {
    let (l, _) = stereo_pair(320, 240, 0, 35);
    let ex = extract_image(&l, &ExtractorConfig::default()).unwrap();
    let strip = SearchStrip { min_disparity: 0, ..SearchStrip::default() };
    let calib = StereoCalib::new(500.0, 0.1).unwrap();
    let out = match_stereo(&ex, &ex, &strip, Some(&calib), &MatcherConfig::default()).unwrap();
    assert!(!out.pairs.is_empty());
    assert!(out.pairs.iter().all(|p| p.disparity == 0.0 && p.depth.is_none()));
    assert_eq!(out.effective_depths(&DepthRange::default()), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hamming_is_a_metric(sa in any::<u64>()) {
        let mut rng = rng(sa);
        let (a, b, c) = (random_descriptor(&mut rng), random_descriptor(&mut rng), random_descriptor(&mut rng));
        prop_assert_eq!(a.hamming(&b), b.hamming(&a));
        prop_assert_eq!(a.hamming(&a), 0);
        prop_assert_eq!(a.hamming(&b) == 0, a == b);
        prop_assert!(a.hamming(&c) <= a.hamming(&b) + b.hamming(&c));
        let not_a = orbfront::Descriptor(a.0.map(|x| !x));
        prop_assert_eq!(a.hamming(&not_a), 256);
    }

    #[test]
    fn matches_respect_strip_and_are_one_to_one(seed in any::<u64>()) {
        let (l, r, strip, max_h) = random_instance(&mut rng(seed));
        let out = stereo_match(&l, &r, &strip, max_h);
        let mut used = HashSet::new();
        for c in &out {
            prop_assert!(used.insert(c.right_idx));
            prop_assert!(strip.contains(&l[c.left_idx].point, &r[c.right_idx].point));
            prop_assert_eq!(l[c.left_idx].point.level, r[c.right_idx].point.level);
            prop_assert!(c.hamming <= max_h);
            prop_assert_eq!(c.hamming, hamming_oracle(&l[c.left_idx].descriptor, &r[c.right_idx].descriptor));
        }
    }
}
