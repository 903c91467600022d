//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use orbfront::extractor::{Feature, FeaturePoint};
use orbfront::matcher::{MatchCandidate, SearchStrip};
use orbfront::{Descriptor, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(w: usize, h: usize, rng: &mut impl Rng) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random())
}

/// Moments by testing every pixel of the bounding square against x² + y² ≤ 225.
pub fn moments_oracle(img: &GrayImage, cx: usize, cy: usize) -> (i64, i64, i64) {
    let (mut m00, mut m10, mut m01) = (0i64, 0i64, 0i64);
    for y in -15i64..=15 {
        for x in -15i64..=15 {
            if x * x + y * y > 225 {
                continue;
            }
            let v = img.get((cx as i64 + x) as usize, (cy as i64 + y) as usize) as i64;
            m00 += v;
            m10 += v * x;
            m01 += v * y;
        }
    }
    (m00, m10, m01)
}

pub fn hamming_oracle(a: &Descriptor, b: &Descriptor) -> u32 {
    (0..256)
        .filter(|&i| (a.0[i / 8] >> (i % 8)) & 1 != (b.0[i / 8] >> (i % 8)) & 1)
        .count() as u32
}

pub fn random_descriptor(rng: &mut impl Rng) -> Descriptor {
    let mut d = [0u8; 32];
    rng.fill(&mut d);
    Descriptor(d)
}

/// Exhaustive O(L·R) matcher: every left feature scans every right feature.
pub fn stereo_match_oracle(
    left: &[Feature],
    right: &[Feature],
    strip: &SearchStrip,
    max_hamming: u32,
) -> Vec<MatchCandidate> {
    let mut best: Vec<Option<(usize, u32, i64)>> = vec![None; left.len()];
    for (li, l) in left.iter().enumerate() {
        for (ri, r) in right.iter().enumerate() {
            if l.point.level != r.point.level {
                continue;
            }
            let dy = (l.point.y as i64 - r.point.y as i64).abs();
            let d = l.point.x as i64 - r.point.x as i64;
            if dy > strip.row_tolerance as i64
                || d < strip.min_disparity as i64
                || d > strip.max_disparity as i64
            {
                continue;
            }
            let h = hamming_oracle(&l.descriptor, &r.descriptor);
            let better = match best[li] {
                None => true,
                Some((bri, bh, bd)) => h < bh || (h == bh && (d < bd || (d == bd && ri < bri))),
            };
            if better {
                best[li] = Some((ri, h, d));
            }
        }
    }
    let claims: Vec<(usize, usize, u32, i64)> = best
        .iter()
        .enumerate()
        .filter_map(|(li, b)| b.filter(|b| b.1 <= max_hamming).map(|(ri, h, d)| (li, ri, h, d)))
        .collect();
    claims
        .iter()
        .filter(|&&(li, ri, h, d)| {
            claims
                .iter()
                .filter(|c| c.1 == ri)
                .all(|&(lj, _, hj, dj)| (h, d, li) <= (hj, dj, lj))
        })
        .map(|&(left_idx, right_idx, hamming, _)| MatchCandidate {
            left_idx,
            right_idx,
            hamming,
        })
        .collect()
}

pub fn point(x: u32, y: u32, level: u8) -> FeaturePoint {
    FeaturePoint {
        x,
        y,
        level,
        score: 0,
        theta_q: 0,
        theta_f: None,
        degenerate: false,
    }
}

/// Small random matching instance with a narrow descriptor alphabet so that
/// Hamming ties and contested right features are common.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Feature>, Vec<Feature>, SearchStrip, u32) {
    let alphabet: Vec<Descriptor> = (0..rng.random_range(2..6)).map(|_| random_descriptor(rng)).collect();
    let feats = |n: usize, rng: &mut ChaCha8Rng| -> Vec<Feature> {
        let mut v: Vec<Feature> = (0..n)
            .map(|_| {
                let mut d = alphabet[rng.random_range(0..alphabet.len())];
                for _ in 0..rng.random_range(0..4) {
                    d.set_bit(rng.random_range(0..256));
                }
                Feature {
                    point: point(rng.random_range(0..80), rng.random_range(0..20), rng.random_range(0..2)),
                    descriptor: d,
                }
            })
            .collect();
        v.sort_by_key(|f| (f.point.level, f.point.y, f.point.x));
        v
    };
    let left = feats(rng.random_range(0..40), rng);
    let right = feats(rng.random_range(0..40), rng);
    let min_disparity = rng.random_range(0..5);
    let strip = SearchStrip {
        row_tolerance: rng.random_range(0..4),
        min_disparity,
        max_disparity: min_disparity + rng.random_range(1..60),
    };
    (left, right, strip, rng.random_range(100..=256))
}

/// Nearest-neighbour rotation of `src` about its center by `k` of 256 turns.
pub fn rotate_nearest(src: &GrayImage, k: u32) -> GrayImage {
    let theta = std::f64::consts::TAU * k as f64 / 256.0;
    let (s, c) = theta.sin_cos();
    let (w, h) = src.dimensions();
    let (cx, cy) = ((w / 2) as f64, (h / 2) as f64);
    GrayImage::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        let sx = (c * dx + s * dy + cx).round();
        let sy = (-s * dx + c * dy + cy).round();
        if sx < 0.0 || sy < 0.0 || sx >= w as f64 || sy >= h as f64 {
            0
        } else {
            src.get(sx as usize, sy as usize)
        }
    })
}
