//! FAST-9 segment test on the 16-pixel Bresenham circle of radius 3,
//! with 3×3 non-maximum suppression on the arc score.

use crate::imaging::GrayImage;

use super::BORDER;

/// Circle offsets, clockwise starting straight up.
pub const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

/// Minimum contiguous arc length.
pub const ARC_LENGTH: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Corner {
    pub x: u32,
    pub y: u32,
    /// Sum of |I_circle − I_center| over the qualifying arc.
    pub score: u32,
}

#[inline]
fn circle_values(img: &GrayImage, x: usize, y: usize) -> [i32; 16] {
    let mut out = [0i32; 16];
    for (slot, &(dx, dy)) in out.iter_mut().zip(CIRCLE.iter()) {
        *slot = img.get((x as i32 + dx) as usize, (y as i32 + dy) as usize) as i32;
    }
    out
}

/// Sum of the deltas over the longest circular run of `flags`, if that run
/// is at least [`ARC_LENGTH`] long.
fn arc_score(flags: [bool; 16], deltas: &[i32; 16]) -> Option<u32> {
    let Some(gap) = flags.iter().position(|f| !f) else {
        return Some(deltas.iter().map(|d| d.unsigned_abs()).sum());
    };
    let mut best: Option<u32> = None;
    let (mut run, mut sum) = (0usize, 0u32);
    // Starting just past a gap means no qualifying run wraps the start.
    for step in 1..=16 {
        let i = (gap + step) % 16;
        if flags[i] {
            run += 1;
            sum += deltas[i].unsigned_abs();
        } else {
            if run >= ARC_LENGTH {
                best = Some(best.map_or(sum, |b| b.max(sum)));
            }
            run = 0;
            sum = 0;
        }
    }
    best
}

/// Segment test at `(x, y)`. Returns the corner score when at least
/// [`ARC_LENGTH`] contiguous circle pixels are all brighter than
/// `center + threshold` or all darker than `center − threshold`.
///
/// The caller guarantees the circle lies inside the image.
pub fn segment_test(img: &GrayImage, x: usize, y: usize, threshold: u8) -> Option<u32> {
    let center = img.get(x, y) as i32;
    let t = threshold as i32;
    let values = circle_values(img, x, y);
    let mut deltas = [0i32; 16];
    let mut bright = [false; 16];
    let mut dark = [false; 16];
    for i in 0..16 {
        deltas[i] = values[i] - center;
        bright[i] = values[i] > center + t;
        dark[i] = values[i] < center - t;
    }
    // 9 + 9 > 16, so at most one polarity can qualify.
    arc_score(bright, &deltas).or_else(|| arc_score(dark, &deltas))
}

/// Detects FAST corners at least [`BORDER`] pixels from every edge.
///
/// A corner survives suppression when no 3×3 neighbour scores higher and no
/// raster-earlier neighbour scores the same.
pub fn fast_detect(img: &GrayImage, threshold: u8) -> Vec<Corner> {
    let (w, h) = img.dimensions();
    if w < 2 * BORDER + 1 || h < 2 * BORDER + 1 {
        return Vec::new();
    }
    let mut scores = vec![0u32; w * h];
    let mut raw = Vec::new();
    for y in BORDER..h - BORDER {
        for x in BORDER..w - BORDER {
            if let Some(score) = segment_test(img, x, y, threshold) {
                // Arc deltas are strictly nonzero, so 0 means "no corner".
                scores[y * w + x] = score;
                raw.push((x, y, score));
            }
        }
    }
    raw.into_iter()
        .filter(|&(x, y, score)| {
            for ny in y - 1..=y + 1 {
                for nx in x - 1..=x + 1 {
                    if (nx, ny) == (x, y) {
                        continue;
                    }
                    let other = scores[ny * w + nx];
                    let earlier = (ny, nx) < (y, x);
                    if other > score || (earlier && other == score) {
                        return false;
                    }
                }
            }
            true
        })
        .map(|(x, y, score)| Corner {
            x: x as u32,
            y: y as u32,
            score,
        })
        .collect()
}
