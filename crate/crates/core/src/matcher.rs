//! Stereo correspondence: strip-constrained Hamming matching per pyramid
//! level, SAD rectification of the right-hand position, and depth.

use std::io::{self, Write};

use thiserror::Error;

use crate::extractor::{Descriptor, Extraction, Feature, FeaturePoint};
use crate::imaging::GrayImage;

/// Side of the square SAD window.
pub const SAD_WINDOW: usize = 11;
pub const SAD_RADIUS: usize = SAD_WINDOW / 2;

pub const DEFAULT_MAX_HAMMING: u32 = 64;
pub const DEFAULT_SAD_SLIDE: u32 = 5;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no SAD window position fits inside the image")]
    OutOfBounds,
}

/// Epipolar band in the right image: `|y_R − y_L| ≤ row_tolerance` and
/// `x_L − x_R ∈ [min_disparity, max_disparity]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchStrip {
    pub row_tolerance: u32,
    pub min_disparity: u32,
    pub max_disparity: u32,
}

impl Default for SearchStrip {
    fn default() -> Self {
        Self {
            row_tolerance: 2,
            min_disparity: 1,
            max_disparity: 96,
        }
    }
}

impl SearchStrip {
    pub fn validate(&self) -> Result<(), MatchError> {
        if self.min_disparity >= self.max_disparity {
            return Err(MatchError::Config(format!(
                "min_disparity {} must be below max_disparity {}",
                self.min_disparity, self.max_disparity
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, left: &FeaturePoint, right: &FeaturePoint) -> bool {
        let d = left.x as i64 - right.x as i64;
        (left.y as i64 - right.y as i64).unsigned_abs() <= self.row_tolerance as u64
            && d >= self.min_disparity as i64
            && d <= self.max_disparity as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoCalib {
    /// Focal length in level-0 pixels.
    pub fx: f64,
    /// Baseline in meters.
    pub baseline: f64,
}

impl StereoCalib {
    pub fn new(fx: f64, baseline: f64) -> Result<Self, MatchError> {
        if !(fx > 0.0 && fx.is_finite()) || !(baseline > 0.0 && baseline.is_finite()) {
            return Err(MatchError::Config(format!(
                "fx ({fx}) and baseline ({baseline}) must be positive"
            )));
        }
        Ok(Self { fx, baseline })
    }
}

/// Range of depths, in meters, that count as effective (open interval).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthRange {
    pub min: f64,
    pub max: f64,
}

impl Default for DepthRange {
    fn default() -> Self {
        Self { min: 0.1, max: 50.0 }
    }
}

impl DepthRange {
    pub fn contains(&self, depth: f64) -> bool {
        depth > self.min && depth < self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatcherConfig {
    pub max_hamming: u32,
    pub sad_slide: u32,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            max_hamming: DEFAULT_MAX_HAMMING,
            sad_slide: DEFAULT_SAD_SLIDE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatchCandidate {
    pub left_idx: usize,
    pub right_idx: usize,
    pub hamming: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchPair {
    pub left: FeaturePoint,
    pub right: FeaturePoint,
    pub hamming: u32,
    /// Level-0 pixels, after SAD correction.
    pub disparity: f64,
    /// Meters; `None` when disparity ≤ 0 or no calibration is known.
    pub depth: Option<f64>,
    pub sad_min: u32,
}

impl MatchPair {
    pub fn has_effective_depth(&self, range: &DepthRange) -> bool {
        self.disparity > 0.0 && self.depth.is_some_and(|d| range.contains(d))
    }
}

#[inline]
pub fn hamming_distance(a: &Descriptor, b: &Descriptor) -> u32 {
    a.hamming(b)
}

/// Best right-hand partner for each left feature, then pruned to one-to-one.
///
/// Only features on the same pyramid level are compared. Among candidates
/// inside `strip` the lowest Hamming distance wins, ties going to the smaller
/// disparity and then the smaller right index; the winner is kept only if its
/// distance is at most `max_hamming`. When several left features claim the
/// same right feature the one with the lowest (Hamming, disparity, left index)
/// keeps it and the others are dropped. Output is in left-index order.
pub fn stereo_match(
    left: &[Feature],
    right: &[Feature],
    strip: &SearchStrip,
    max_hamming: u32,
) -> Vec<MatchCandidate> {
    if left.is_empty() || right.is_empty() {
        return Vec::new();
    }
    // Right indices bucketed by (level, row).
    let max_level = right.iter().map(|f| f.point.level as usize).max().unwrap_or(0);
    let max_row = right.iter().map(|f| f.point.y as usize).max().unwrap_or(0);
    let mut rows: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); max_row + 1]; max_level + 1];
    for (i, f) in right.iter().enumerate() {
        rows[f.point.level as usize][f.point.y as usize].push(i);
    }

    let mut best_for_right: Vec<Option<(u32, u32, usize)>> = vec![None; right.len()];
    let mut claims: Vec<(usize, usize, u32, u32)> = Vec::new();
    for (li, lf) in left.iter().enumerate() {
        let Some(level_rows) = rows.get(lf.point.level as usize) else {
            continue;
        };
        let y = lf.point.y as usize;
        let lo = y.saturating_sub(strip.row_tolerance as usize);
        let hi = (y + strip.row_tolerance as usize).min(max_row);
        let mut best: Option<(u32, u32, usize)> = None;
        for row in level_rows.iter().take(hi + 1).skip(lo) {
            for &ri in row {
                let rf = &right[ri];
                if !strip.contains(&lf.point, &rf.point) {
                    continue;
                }
                let key = (
                    lf.descriptor.hamming(&rf.descriptor),
                    lf.point.x - rf.point.x,
                    ri,
                );
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        if let Some((hamming, disparity, ri)) = best.filter(|b| b.0 <= max_hamming) {
            let key = (hamming, disparity, li);
            if best_for_right[ri].is_none_or(|b| key < b) {
                best_for_right[ri] = Some(key);
            }
            claims.push((li, ri, hamming, disparity));
        }
    }
    claims
        .into_iter()
        .filter(|&(li, ri, _, _)| best_for_right[ri].is_some_and(|b| b.2 == li))
        .map(|(left_idx, right_idx, hamming, _)| MatchCandidate {
            left_idx,
            right_idx,
            hamming,
        })
        .collect()
}

#[inline]
fn window_fits(img: &GrayImage, cx: i64, cy: i64) -> bool {
    let r = SAD_RADIUS as i64;
    cx >= r && cy >= r && cx + r < img.width() as i64 && cy + r < img.height() as i64
}

fn sad_unchecked(left: &GrayImage, right: &GrayImage, cl: (usize, usize), cr: (usize, usize)) -> u32 {
    let mut sum = 0u32;
    for dy in 0..SAD_WINDOW {
        let lrow = &left.row(cl.1 + dy - SAD_RADIUS)[cl.0 - SAD_RADIUS..cl.0 + SAD_RADIUS + 1];
        let rrow = &right.row(cr.1 + dy - SAD_RADIUS)[cr.0 - SAD_RADIUS..cr.0 + SAD_RADIUS + 1];
        sum += lrow
            .iter()
            .zip(rrow)
            .map(|(&a, &b)| a.abs_diff(b) as u32)
            .sum::<u32>();
    }
    sum
}

/// Sum of absolute differences between the 11×11 windows centered at `cl`
/// in `left` and `cr` in `right`.
pub fn sad_window(
    left: &GrayImage,
    right: &GrayImage,
    cl: (usize, usize),
    cr: (usize, usize),
) -> Result<u32, MatchError> {
    if !window_fits(left, cl.0 as i64, cl.1 as i64) || !window_fits(right, cr.0 as i64, cr.1 as i64) {
        return Err(MatchError::Precondition(format!(
            "11x11 window at {cl:?} / {cr:?} leaves the image"
        )));
    }
    Ok(sad_unchecked(left, right, cl, cr))
}

/// Parabola vertex offset through (−1, s₋), (0, s₀), (1, s₊), clamped to ±0.5.
///
/// Returns 0 for a flat profile and for an exact match (s₀ = 0), where the
/// integer position is already perfect.
pub fn parabolic_offset(s_minus: u32, s_zero: u32, s_plus: u32) -> f64 {
    let (a, b, c) = (s_minus as f64, s_zero as f64, s_plus as f64);
    let denom = 2.0 * (a - 2.0 * b + c);
    if s_zero == 0 || denom == 0.0 {
        return 0.0;
    }
    ((a - c) / denom).clamp(-0.5, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectification {
    /// Integer horizontal shift d* applied to the right window.
    pub offset: i32,
    /// Sub-pixel refinement δ around `offset`.
    pub subpixel: f64,
    /// x_L − (x_R + d* + δ).
    pub disparity: f64,
    pub sad_min: u32,
    /// SAD at the original right position, if that window fits.
    pub sad_initial: Option<u32>,
}

/// Slides the right window horizontally over `−slide..=slide` around
/// `right`, keeping the left window fixed, and relocates the right point to
/// the lowest-SAD position. Ties go to the smaller |d|, then the smaller d.
/// Offsets whose window leaves the image are skipped.
pub fn sad_rectify(
    left_img: &GrayImage,
    right_img: &GrayImage,
    left: (u32, u32),
    right: (u32, u32),
    slide: u32,
) -> Result<Rectification, MatchError> {
    let (xl, yl) = (left.0 as i64, left.1 as i64);
    let (xr, yr) = (right.0 as i64, right.1 as i64);
    if !window_fits(left_img, xl, yl) {
        return Err(MatchError::OutOfBounds);
    }
    let slide = slide as i64;
    let profile: Vec<Option<u32>> = (-slide..=slide)
        .map(|d| {
            window_fits(right_img, xr + d, yr).then(|| {
                sad_unchecked(
                    left_img,
                    right_img,
                    (xl as usize, yl as usize),
                    ((xr + d) as usize, yr as usize),
                )
            })
        })
        .collect();
    let at = |d: i64| -> Option<u32> {
        let i = d + slide;
        if i < 0 {
            None
        } else {
            profile.get(i as usize).copied().flatten()
        }
    };
    let (best_d, sad_min) = (-slide..=slide)
        .filter_map(|d| at(d).map(|s| (d, s)))
        .min_by_key(|&(d, s)| (s, d.abs(), d))
        .ok_or(MatchError::OutOfBounds)?;
    let subpixel = match (at(best_d - 1), at(best_d + 1)) {
        (Some(s_minus), Some(s_plus)) => parabolic_offset(s_minus, sad_min, s_plus),
        _ => 0.0,
    };
    Ok(Rectification {
        offset: best_d as i32,
        subpixel,
        disparity: (xl - xr) as f64 - (best_d as f64 + subpixel),
        sad_min,
        sad_initial: at(0),
    })
}

/// fx · baseline / d, or `None` for non-positive disparity.
pub fn disparity_to_depth(disparity: f64, calib: &StereoCalib) -> Option<f64> {
    (disparity > 0.0 && disparity.is_finite()).then(|| calib.fx * calib.baseline / disparity)
}

#[derive(Debug, Clone, Default)]
pub struct MatchOutput {
    pub pairs: Vec<MatchPair>,
    /// Hamming matches discarded because no SAD window fit.
    pub dropped_out_of_bounds: usize,
}

impl MatchOutput {
    pub fn effective_depths(&self, range: &DepthRange) -> usize {
        self.pairs.iter().filter(|p| p.has_effective_depth(range)).count()
    }
}

/// Full matcher: Hamming pre-match per level, SAD rectification on the
/// level's smoothed images, disparity scaled to level 0, then depth.
/// Pairs come out ordered by (level, left y, left x).
pub fn match_stereo(
    left: &Extraction,
    right: &Extraction,
    strip: &SearchStrip,
    calib: Option<&StereoCalib>,
    cfg: &MatcherConfig,
) -> Result<MatchOutput, MatchError> {
    strip.validate()?;
    if left.smoothed.len() != right.smoothed.len() {
        return Err(MatchError::Precondition(format!(
            "pyramid depth differs: {} vs {}",
            left.smoothed.len(),
            right.smoothed.len()
        )));
    }
    let candidates = stereo_match(&left.features, &right.features, strip, cfg.max_hamming);
    let mut out = MatchOutput::default();
    for c in candidates {
        let lf = &left.features[c.left_idx].point;
        let rf = &right.features[c.right_idx].point;
        let level = lf.level as usize;
        let (Some(limg), Some(rimg)) = (left.smoothed.get(level), right.smoothed.get(level)) else {
            return Err(MatchError::Precondition(format!("no smoothed image for level {level}")));
        };
        let rect = match sad_rectify(limg, rimg, (lf.x, lf.y), (rf.x, rf.y), cfg.sad_slide) {
            Ok(r) => r,
            Err(MatchError::OutOfBounds) => {
                out.dropped_out_of_bounds += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let disparity = rect.disparity * left.level_scales.get(level).copied().unwrap_or(1.0);
        out.pairs.push(MatchPair {
            left: *lf,
            right: *rf,
            hamming: c.hamming,
            disparity,
            depth: calib.and_then(|cal| disparity_to_depth(disparity, cal)),
            sad_min: rect.sad_min,
        });
    }
    out.pairs
        .sort_by_key(|p| (p.left.level, p.left.y, p.left.x));
    Ok(out)
}

pub const MATCH_CSV_HEADER: &str = "level,xl,yl,xr,yr,hamming,disparity,depth";

/// One row per pair; invalid depths are written as `invalid`.
pub fn write_matches_csv(pairs: &[MatchPair], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{MATCH_CSV_HEADER}")?;
    for p in pairs {
        let depth = p.depth.map_or_else(|| "invalid".to_string(), |d| format!("{d:.4}"));
        writeln!(
            out,
            "{},{},{},{},{},{},{:.4},{}",
            p.left.level, p.left.x, p.left.y, p.right.x, p.right.y, p.hamming, p.disparity, depth
        )?;
    }
    Ok(())
}
