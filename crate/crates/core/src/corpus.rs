//! Synthetic rectified stereo sequences with a known, constant disparity.
//!
//! Each frame is a random collage of flat rectangles and discs over a soft
//! gradient with low-amplitude noise. The right image is the left one moved
//! `shift` pixels to the left, so every scene point has disparity `shift`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{save_pgm, GrayImage, ImagingError};

pub const DEFAULT_SHIFT: u32 = 12;
pub const DEFAULT_FRAMES: usize = 30;
pub const DEFAULT_CORPUS_SEED: u64 = 2021;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub shift: u32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            frames: DEFAULT_FRAMES,
            shift: DEFAULT_SHIFT,
            seed: DEFAULT_CORPUS_SEED,
        }
    }
}

/// Random textured scene of the given size.
pub fn synth_scene(width: usize, height: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gx: f64 = rng.random_range(-0.1..0.1);
    let gy: f64 = rng.random_range(-0.1..0.1);
    let base: f64 = rng.random_range(90.0..160.0);
    let mut canvas: Vec<i32> = (0..width * height)
        .map(|i| {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            (base + gx * x + gy * y) as i32
        })
        .collect();

    let area = width * height;
    let rects = area / 1000;
    for _ in 0..rects {
        let w = rng.random_range(6..=48usize);
        let h = rng.random_range(6..=48usize);
        let x0 = rng.random_range(0..width);
        let y0 = rng.random_range(0..height);
        let v = rng.random_range(0..=255);
        for y in y0..(y0 + h).min(height) {
            canvas[y * width + x0..y * width + (x0 + w).min(width)].fill(v);
        }
    }
    let discs = area / 8000;
    for _ in 0..discs {
        let r = rng.random_range(4..=18i64);
        let cx = rng.random_range(0..width as i64);
        let cy = rng.random_range(0..height as i64);
        let v = rng.random_range(0..=255);
        for y in (cy - r).max(0)..(cy + r + 1).min(height as i64) {
            for x in (cx - r).max(0)..(cx + r + 1).min(width as i64) {
                if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                    canvas[y as usize * width + x as usize] = v;
                }
            }
        }
    }
    let data = canvas
        .into_iter()
        .map(|v| (v + rng.random_range(-3..=3)).clamp(0, 255) as u8)
        .collect();
    GrayImage::from_raw(width, height, data).expect("canvas sized width*height")
}

/// Left/right pair with true disparity `shift` everywhere.
pub fn stereo_pair(width: usize, height: usize, shift: u32, seed: u64) -> (GrayImage, GrayImage) {
    let shift = shift as usize;
    let scene = synth_scene(width + shift, height, seed);
    let left = GrayImage::from_fn(width, height, |x, y| scene.get(x, y));
    let right = GrayImage::from_fn(width, height, |x, y| scene.get(x + shift, y));
    (left, right)
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:04}.pgm")
}

/// Writes `left/` and `right/` PGM directories under `dir` and returns the
/// frame file names.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<Vec<String>, ImagingError> {
    let left_dir: PathBuf = dir.join("left");
    let right_dir: PathBuf = dir.join("right");
    fs::create_dir_all(&left_dir)?;
    fs::create_dir_all(&right_dir)?;
    let mut names = Vec::with_capacity(spec.frames);
    for i in 0..spec.frames {
        let (l, r) = stereo_pair(spec.width, spec.height, spec.shift, spec.seed.wrapping_add(i as u64));
        let name = frame_name(i);
        save_pgm(&l, left_dir.join(&name))?;
        save_pgm(&r, right_dir.join(&name))?;
        names.push(name);
    }
    Ok(names)
}

/// Writes a `key = value` calibration file.
pub fn write_calibration(path: &Path, fx: f64, baseline: f64) -> io::Result<()> {
    fs::write(path, format!("fx = {fx}\nbaseline = {baseline}\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_is_a_pure_shift() {
        let (l, r) = stereo_pair(80, 40, 12, 3);
        for y in 0..40 {
            for x in 12..80 {
                assert_eq!(l.get(x, y), r.get(x - 12, y));
            }
        }
    }

    #[test]
    fn scenes_are_seeded() {
        assert_eq!(synth_scene(64, 48, 1), synth_scene(64, 48, 1));
        assert_ne!(synth_scene(64, 48, 1), synth_scene(64, 48, 2));
    }
}
