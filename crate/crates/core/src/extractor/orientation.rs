//! Intensity-centroid moments over the circular patch and the orientation
//! derived from them, in floating point and in the 8-bit datapath.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use crate::imaging::GrayImage;

use super::{ExtractError, BORDER, PATCH_RADIUS};

/// Number of quantized orientation bins (one full turn).
pub const ANGLE_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PatchMoments {
    pub m00: i64,
    pub m10: i64,
    pub m01: i64,
}

impl PatchMoments {
    /// Intensity centroid relative to the patch center, if the patch is not black.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        (self.m00 != 0).then(|| (self.m10 as f64 / self.m00 as f64, self.m01 as f64 / self.m00 as f64))
    }
}

/// Half-width of each mask row, indexed by |dy|: floor(sqrt(r² − dy²)).
pub fn mask_half_widths() -> &'static [usize; PATCH_RADIUS + 1] {
    static TABLE: OnceLock<[usize; PATCH_RADIUS + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let r2 = PATCH_RADIUS * PATCH_RADIUS;
        let mut table = [0; PATCH_RADIUS + 1];
        for (dy, slot) in table.iter_mut().enumerate() {
            let limit = r2 - dy * dy;
            let mut u = 0;
            while (u + 1) * (u + 1) <= limit {
                u += 1;
            }
            *slot = u;
        }
        table
    })
}

pub(crate) fn check_border(img: &GrayImage, cx: usize, cy: usize) -> Result<(), ExtractError> {
    let (w, h) = img.dimensions();
    if cx < BORDER || cy < BORDER || cx + BORDER >= w || cy + BORDER >= h {
        return Err(ExtractError::Precondition(format!(
            "({cx}, {cy}) is within {BORDER} px of the {w}x{h} image edge"
        )));
    }
    Ok(())
}

/// Moments m00, m10 and m01 over the radius-15 disc around `(cx, cy)`,
/// with coordinates taken relative to the center.
pub fn patch_moments(img: &GrayImage, cx: usize, cy: usize) -> Result<PatchMoments, ExtractError> {
    check_border(img, cx, cy)?;
    let half = mask_half_widths();
    let r = PATCH_RADIUS as i64;
    let mut m = PatchMoments::default();
    for dy in -r..=r {
        let u = half[dy.unsigned_abs() as usize] as i64;
        let row = img.row((cy as i64 + dy) as usize);
        let mut row_sum = 0i64;
        let mut row_x = 0i64;
        for dx in -u..=u {
            let v = row[(cx as i64 + dx) as usize] as i64;
            row_sum += v;
            row_x += dx * v;
        }
        m.m00 += row_sum;
        m.m10 += row_x;
        m.m01 += dy * row_sum;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ArithMode {
    /// Double-precision reference path.
    #[default]
    Float,
    /// 8-bit operand, 8-bit quotient, table-lookup arctangent.
    Fixed8,
}

impl std::str::FromStr for ArithMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "float" => Ok(Self::Float),
            "fixed8" | "fixed" => Ok(Self::Fixed8),
            other => Err(format!("unknown arithmetic mode `{other}` (expected float or fixed8)")),
        }
    }
}

impl std::fmt::Display for ArithMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Float => "float",
            Self::Fixed8 => "fixed8",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Orientation {
    /// Angle in units of 2π/256.
    pub theta_q: u8,
    /// Radians in [0, 2π); only produced by the float path.
    pub theta_f: Option<f64>,
    /// Set when m10 = m01 = 0 and the angle is undefined.
    pub degenerate: bool,
}

pub fn orientation(m: &PatchMoments, mode: ArithMode) -> Orientation {
    if m.m10 == 0 && m.m01 == 0 {
        return Orientation {
            theta_q: 0,
            theta_f: match mode {
                ArithMode::Float => Some(0.0),
                ArithMode::Fixed8 => None,
            },
            degenerate: true,
        };
    }
    match mode {
        ArithMode::Float => {
            let theta_f = float_angle(m.m10, m.m01);
            Orientation {
                theta_q: quantize_angle(theta_f),
                theta_f: Some(theta_f),
                degenerate: false,
            }
        }
        ArithMode::Fixed8 => Orientation {
            theta_q: fixed8_angle(m.m10, m.m01),
            theta_f: None,
            degenerate: false,
        },
    }
}

fn float_angle(m10: i64, m01: i64) -> f64 {
    let mut theta = (m01 as f64).atan2(m10 as f64);
    if theta < 0.0 {
        theta += TAU;
    }
    if theta >= TAU {
        theta = 0.0;
    }
    theta
}

/// round(θ·256/2π) mod 256.
pub fn quantize_angle(theta: f64) -> u8 {
    ((theta * ANGLE_BINS as f64 / TAU).round() as i64).rem_euclid(ANGLE_BINS as i64) as u8
}

/// atan(r/256) in bins for r in 0..256; values lie in [0, 32].
fn atan_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0u8; 256];
        for (r, slot) in table.iter_mut().enumerate() {
            let bins = (r as f64 / 256.0).atan() * ANGLE_BINS as f64 / TAU;
            *slot = bins.round() as u8;
        }
        table
    })
}

/// Orientation through the 8-bit datapath: both moment magnitudes are
/// truncated to their top 8 significant bits, the smaller is divided by the
/// larger into an 8-bit fraction, and a 256-entry table gives the angle
/// within the octant. Signs and the octant comparison fold the result onto
/// the full circle.
fn fixed8_angle(m10: i64, m01: i64) -> u8 {
    let (ax, ay) = (m10.unsigned_abs(), m01.unsigned_abs());
    let top = ax.max(ay);
    let shift = (u64::BITS - top.leading_zeros()).saturating_sub(8);
    let (x8, y8) = ((ax >> shift) as u32, (ay >> shift) as u32);
    let (lo, hi, steep) = if y8 > x8 { (x8, y8, true) } else { (y8, x8, false) };
    let ratio = ((lo << 8) / hi).min(255) as usize;
    let octant_angle = atan_table()[ratio] as i32;
    let quadrant_angle = if steep { 64 - octant_angle } else { octant_angle };
    let full = match (m10 >= 0, m01 >= 0) {
        (true, true) => quadrant_angle,
        (false, true) => 128 - quadrant_angle,
        (false, false) => 128 + quadrant_angle,
        (true, false) => 256 - quadrant_angle,
    };
    full.rem_euclid(ANGLE_BINS as i32) as u8
}

/// Circular distance between two bin indices.
pub fn bin_distance(a: u8, b: u8) -> u8 {
    let d = a.wrapping_sub(b);
    d.min(d.wrapping_neg())
}
