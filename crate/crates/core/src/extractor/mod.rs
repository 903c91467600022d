//! Oriented FAST detection and rotated binary descriptors over a two-level
//! pyramid.
//!
//! Per level the extractor runs FAST-9, keeps the strongest corners, orients
//! each by its intensity centroid and describes it on the Gaussian-smoothed
//! level. Orientation can be computed in double precision or through the
//! 8-bit datapath ([`ArithMode::Fixed8`]); everything else is integer and
//! shared by both modes.

pub mod descriptor;
pub mod fast;
pub mod orientation;
pub mod pattern;
pub mod smoothing;

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::imaging::{build_pyramid, GrayImage, ImagePyramid, ImagingError, DEFAULT_SCALE_FACTOR};

pub use descriptor::{compute_descriptor, Descriptor, DESCRIPTOR_BITS, DESCRIPTOR_BYTES};
pub use fast::{fast_detect, segment_test, Corner};
pub use orientation::{orientation, patch_moments, ArithMode, Orientation, PatchMoments};
pub use pattern::{Offset, SamplingPattern, TestPair};
pub use smoothing::{gaussian_smooth, RowSmoother};

/// Radius of the circular orientation and descriptor patch (31×31 window).
pub const PATCH_RADIUS: usize = 15;

/// Minimum distance of a feature from any image edge.
pub const BORDER: usize = PATCH_RADIUS + 1;

pub const DEFAULT_FAST_THRESHOLD: u8 = 20;
pub const DEFAULT_MAX_FEATURES_PER_LEVEL: usize = 600;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid sampling pattern: {0}")]
    Pattern(String),
    #[error("invalid extractor config: {0}")]
    Config(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    /// Column in the level's own pixel frame.
    pub x: u32,
    /// Row in the level's own pixel frame.
    pub y: u32,
    pub level: u8,
    pub score: u32,
    pub theta_q: u8,
    pub theta_f: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub point: FeaturePoint,
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorConfig {
    pub fast_threshold: u8,
    pub max_features_per_level: usize,
    pub arith_mode: ArithMode,
    pub scale_factor: f64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            fast_threshold: DEFAULT_FAST_THRESHOLD,
            max_features_per_level: DEFAULT_MAX_FEATURES_PER_LEVEL,
            arith_mode: ArithMode::Float,
            scale_factor: DEFAULT_SCALE_FACTOR,
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if self.fast_threshold < 1 {
            return Err(ExtractError::Config("fast_threshold must be >= 1".into()));
        }
        if self.max_features_per_level < 1 {
            return Err(ExtractError::Config("max_features_per_level must be >= 1".into()));
        }
        if !(self.scale_factor > 1.0) || !self.scale_factor.is_finite() {
            return Err(ExtractError::Config(format!(
                "scale_factor must be > 1, got {}",
                self.scale_factor
            )));
        }
        Ok(())
    }

    pub fn with_mode(&self, arith_mode: ArithMode) -> Self {
        Self {
            arith_mode,
            ..self.clone()
        }
    }
}

/// Features of one image together with the smoothed pyramid levels the
/// matcher needs for SAD rectification.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub features: Vec<Feature>,
    pub smoothed: Vec<GrayImage>,
    /// Level-0 width over level width, per level.
    pub level_scales: Vec<f64>,
}

impl Extraction {
    pub fn level_features(&self, level: u8) -> impl Iterator<Item = (usize, &Feature)> {
        self.features
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.point.level == level)
    }
}

/// Corners of one level, strongest `budget` first by score then raster order,
/// returned in raster order.
fn select_corners(img: &GrayImage, cfg: &ExtractorConfig) -> Vec<Corner> {
    let mut corners = fast_detect(img, cfg.fast_threshold);
    corners.sort_by(|a, b| b.score.cmp(&a.score).then((a.y, a.x).cmp(&(b.y, b.x))));
    corners.truncate(cfg.max_features_per_level);
    corners.sort_by_key(|c| (c.y, c.x));
    corners
}

fn extract_level(
    img: &GrayImage,
    level: u8,
    cfg: &ExtractorConfig,
    pattern: &SamplingPattern,
    retain: bool,
) -> Result<(Vec<Feature>, Option<GrayImage>), ExtractError> {
    let points = select_corners(img, cfg)
        .into_iter()
        .map(|c| {
            let m = patch_moments(img, c.x as usize, c.y as usize)?;
            let o = orientation(&m, cfg.arith_mode);
            Ok(FeaturePoint {
                x: c.x,
                y: c.y,
                level,
                score: c.score,
                theta_q: o.theta_q,
                theta_f: o.theta_f,
                degenerate: o.degenerate,
            })
        })
        .collect::<Result<Vec<_>, ExtractError>>()?;
    let (descriptors, smoothed) = descriptor::smooth_and_describe(img, &points, pattern, retain)?;
    let features = points
        .into_iter()
        .zip(descriptors)
        .map(|(point, descriptor)| Feature { point, descriptor })
        .collect();
    Ok((features, smoothed))
}

/// Features of every pyramid level, ordered by (level, y, x).
pub fn extract(pyr: &ImagePyramid, cfg: &ExtractorConfig) -> Result<Vec<Feature>, ExtractError> {
    extract_with_pattern(pyr, cfg, SamplingPattern::shipped())
}

pub fn extract_with_pattern(
    pyr: &ImagePyramid,
    cfg: &ExtractorConfig,
    pattern: &SamplingPattern,
) -> Result<Vec<Feature>, ExtractError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (level, img) in pyr.levels().iter().enumerate() {
        out.extend(extract_level(img, level as u8, cfg, pattern, false)?.0);
    }
    Ok(out)
}

/// Like [`extract`], also keeping the smoothed levels.
pub fn extract_pyramid(pyr: &ImagePyramid, cfg: &ExtractorConfig) -> Result<Extraction, ExtractError> {
    cfg.validate()?;
    let pattern = SamplingPattern::shipped();
    let mut features = Vec::new();
    let mut smoothed = Vec::with_capacity(pyr.len());
    for (level, img) in pyr.levels().iter().enumerate() {
        let (level_features, level_smoothed) = extract_level(img, level as u8, cfg, pattern, true)?;
        features.extend(level_features);
        smoothed.push(level_smoothed.expect("retained"));
    }
    Ok(Extraction {
        features,
        smoothed,
        level_scales: (0..pyr.len()).map(|l| pyr.level_scale(l)).collect(),
    })
}

/// Builds the pyramid for `img` and extracts from it.
pub fn extract_image(img: &GrayImage, cfg: &ExtractorConfig) -> Result<Extraction, ExtractError> {
    cfg.validate()?;
    let pyr = build_pyramid(img, cfg.scale_factor)?;
    extract_pyramid(&pyr, cfg)
}

/// Bytes per feature in a descriptor dump.
pub const DUMP_RECORD_BYTES: usize = 16 + DESCRIPTOR_BYTES;

/// Writes one 48-byte record per feature: x and y in level-0 pixels ×8
/// (i32 LE, the three sub-pixel bits always 0), level (u32 LE), theta_q
/// (u32 LE), then the 32 descriptor bytes.
pub fn write_descriptor_dump(
    features: &[Feature],
    level_scales: &[f64],
    mut out: impl Write,
) -> Result<(), ExtractError> {
    for f in features {
        let scale = level_scales.get(f.point.level as usize).copied().ok_or_else(|| {
            ExtractError::Precondition(format!("no scale for level {}", f.point.level))
        })?;
        let to_fixed = |v: u32| ((v as f64 * scale).round() as i32) << 3;
        out.write_all(&to_fixed(f.point.x).to_le_bytes())?;
        out.write_all(&to_fixed(f.point.y).to_le_bytes())?;
        out.write_all(&(f.point.level as u32).to_le_bytes())?;
        out.write_all(&(f.point.theta_q as u32).to_le_bytes())?;
        out.write_all(&f.descriptor.0)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DumpRecord {
    /// Level-0 x in 1/8 pixel.
    pub x8: i32,
    /// Level-0 y in 1/8 pixel.
    pub y8: i32,
    pub level: u32,
    pub theta_q: u32,
    pub descriptor: Descriptor,
}

pub fn read_descriptor_dump(mut input: impl Read) -> Result<Vec<DumpRecord>, ExtractError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % DUMP_RECORD_BYTES != 0 {
        return Err(ExtractError::Io(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("dump length {} is not a multiple of {DUMP_RECORD_BYTES}", bytes.len()),
        )));
    }
    Ok(bytes
        .chunks_exact(DUMP_RECORD_BYTES)
        .map(|rec| {
            let word = |i: usize| <[u8; 4]>::try_from(&rec[i * 4..i * 4 + 4]).expect("4 bytes");
            DumpRecord {
                x8: i32::from_le_bytes(word(0)),
                y8: i32::from_le_bytes(word(1)),
                level: u32::from_le_bytes(word(2)),
                theta_q: u32::from_le_bytes(word(3)),
                descriptor: Descriptor(rec[16..].try_into().expect("32 bytes")),
            }
        })
        .collect())
}
