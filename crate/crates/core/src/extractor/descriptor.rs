//! Rotated binary test descriptors.

use std::collections::VecDeque;

use crate::imaging::GrayImage;

use super::orientation::check_border;
use super::pattern::{SamplingPattern, TestPair};
use super::smoothing::RowSmoother;
use super::{ExtractError, FeaturePoint, PATCH_RADIUS};

pub const DESCRIPTOR_BYTES: usize = 32;
pub const DESCRIPTOR_BITS: usize = DESCRIPTOR_BYTES * 8;

/// 256 test results; test `i` lives in byte `i / 8`, bit `i % 8`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Descriptor(pub [u8; DESCRIPTOR_BYTES]);

impl Descriptor {
    pub const ZERO: Descriptor = Descriptor([0; DESCRIPTOR_BYTES]);

    #[inline]
    pub fn bit(&self, i: usize) -> bool {
        self.0[i / 8] >> (i % 8) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: usize) {
        self.0[i / 8] |= 1 << (i % 8);
    }

    /// Number of differing bits.
    #[inline]
    pub fn hamming(&self, other: &Descriptor) -> u32 {
        self.0
            .chunks_exact(8)
            .zip(other.0.chunks_exact(8))
            .map(|(a, b)| {
                let a = u64::from_le_bytes(a.try_into().expect("8-byte chunk"));
                let b = u64::from_le_bytes(b.try_into().expect("8-byte chunk"));
                (a ^ b).count_ones()
            })
            .sum()
    }

    pub fn as_bytes(&self) -> &[u8; DESCRIPTOR_BYTES] {
        &self.0
    }
}

impl std::fmt::Debug for Descriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Descriptor(")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        f.write_str(")")
    }
}

#[inline]
fn run_tests(pairs: &[TestPair], pixel: impl Fn(i32, i32) -> u8) -> Descriptor {
    let mut d = Descriptor::ZERO;
    for (i, p) in pairs.iter().enumerate() {
        // τ = 1 iff p(A) < p(B); ties give 0.
        if pixel(p.a.dx as i32, p.a.dy as i32) < pixel(p.b.dx as i32, p.b.dy as i32) {
            d.set_bit(i);
        }
    }
    d
}

/// Descriptor of `fp` on a smoothed image using the pattern rotated to `fp.theta_q`.
pub fn compute_descriptor(
    smoothed: &GrayImage,
    fp: &FeaturePoint,
    pattern: &SamplingPattern,
) -> Result<Descriptor, ExtractError> {
    let (cx, cy) = (fp.x as usize, fp.y as usize);
    check_border(smoothed, cx, cy)?;
    Ok(run_tests(pattern.rotated(fp.theta_q), |dx, dy| {
        smoothed.get((cx as i32 + dx) as usize, (cy as i32 + dy) as usize)
    }))
}

const WINDOW_ROWS: usize = 2 * PATCH_RADIUS + 1;

/// Smooths `img` and describes `points` in one top-to-bottom pass.
///
/// The smoother's seven-line buffer feeds a 31-line window; a point is
/// described as soon as the row 15 below it has been smoothed. Only when
/// `retain` is set is the full smoothed image kept and returned.
pub(crate) fn smooth_and_describe(
    img: &GrayImage,
    points: &[FeaturePoint],
    pattern: &SamplingPattern,
    retain: bool,
) -> Result<(Vec<Descriptor>, Option<GrayImage>), ExtractError> {
    for p in points {
        check_border(img, p.x as usize, p.y as usize)?;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by_key(|&i| points[i].y);
    let mut pending = order.into_iter().peekable();

    let mut descriptors = vec![Descriptor::ZERO; points.len()];
    let mut window: VecDeque<Vec<u8>> = VecDeque::with_capacity(WINDOW_ROWS + 1);
    let mut kept = retain.then(|| Vec::with_capacity(img.width() * img.height()));

    for (row_index, row) in RowSmoother::new(img).enumerate() {
        if let Some(kept) = kept.as_mut() {
            kept.extend_from_slice(&row);
        }
        window.push_back(row);
        if window.len() > WINDOW_ROWS {
            window.pop_front();
        }
        // Window currently spans rows row_index + 1 - len ..= row_index.
        let first_row = row_index + 1 - window.len();
        while let Some(&i) = pending.peek() {
            let p = &points[i];
            if p.y as usize + PATCH_RADIUS > row_index {
                break;
            }
            let (cx, cy) = (p.x as i32, p.y as i32);
            descriptors[i] = run_tests(pattern.rotated(p.theta_q), |dx, dy| {
                window[(cy + dy) as usize - first_row][(cx + dx) as usize]
            });
            pending.next();
        }
    }
    let smoothed = kept.map(|data| GrayImage::from_raw(img.width(), img.height(), data).expect("full image"));
    Ok((descriptors, smoothed))
}
