//! 8-bit grayscale rasters, binary PGM I/O, bilinear downscaling and the
//! two-level image pyramid.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

/// Number of levels in every [`ImagePyramid`].
pub const PYRAMID_LEVELS: usize = 2;

/// Default per-level scale factor; maps 1280×720 onto 1067×600.
pub const DEFAULT_SCALE_FACTOR: f64 = 1.2;

// Guards ceil/round against representation error, e.g. 1200 / 1.2 = 1000.0000000000001.
const DIM_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("malformed PGM: {0}")]
    Format(String),
    #[error("unsupported PGM maxval {0}, only 255 is supported")]
    UnsupportedDepth(u32),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Row-major 8-bit intensity raster.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrayImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl GrayImage {
    /// Wraps raw row-major data. Fails if `data.len() != width * height`.
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width.checked_mul(height) != Some(data.len()) {
            return Err(ImagingError::InvalidImage(format!(
                "{}x{} image needs {} bytes, got {}",
                width,
                height,
                width.saturating_mul(height),
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u8] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    /// Encodes as binary P5 with maxval 255.
    pub fn to_pgm_bytes(&self) -> Result<Vec<u8>, ImagingError> {
        if self.is_empty() {
            return Err(ImagingError::InvalidImage(format!(
                "cannot encode {}x{} image",
                self.width, self.height
            )));
        }
        let header = format!("P5\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.data.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.data);
        Ok(out)
    }

    /// Decodes a binary P5 file. Comments (`#` to end of line) are allowed
    /// between header tokens; bytes after the payload are ignored.
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self, ImagingError> {
        let mut cursor = HeaderCursor { bytes, pos: 0 };
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(ImagingError::Format("missing P5 magic".into()));
        }
        cursor.pos = 2;
        let width = cursor.next_number("width")?;
        let height = cursor.next_number("height")?;
        let maxval = cursor.next_number("maxval")?;
        if width == 0 || height == 0 {
            return Err(ImagingError::Format(format!("zero dimension {width}x{height}")));
        }
        if maxval != 255 {
            return Err(ImagingError::UnsupportedDepth(maxval));
        }
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            Some(_) => return Err(ImagingError::Format("no whitespace after maxval".into())),
            None => {
                return Err(ImagingError::Io(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    "PGM header ends without payload",
                )))
            }
        }
        let (w, h) = (width as usize, height as usize);
        let len = w * h;
        let payload = &bytes[cursor.pos..];
        if payload.len() < len {
            return Err(ImagingError::Io(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                format!("PGM payload truncated: expected {len} bytes, found {}", payload.len()),
            )));
        }
        Ok(Self {
            width: w,
            height: h,
            data: payload[..len].to_vec(),
        })
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_number(&mut self, what: &str) -> Result<u32, ImagingError> {
        let start_pos = self.pos;
        self.skip_space_and_comments();
        if self.pos == start_pos {
            return Err(ImagingError::Format(format!("expected whitespace before {what}")));
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImagingError::Format(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImagingError::Format(format!("{what} out of range")))
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, ImagingError> {
    let bytes = fs::read(path)?;
    GrayImage::from_pgm_bytes(&bytes)
}

/// Writes `img` as P5/255. Empty images are rejected before touching the filesystem.
pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    let bytes = img.to_pgm_bytes()?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Bilinear downscale with pixel-center sampling and edge clamping.
///
/// Destination pixel `(u, v)` samples the source at
/// `((u + 0.5)·sx − 0.5, (v + 0.5)·sy − 0.5)`, clamped to the source
/// rectangle; the interpolated value is rounded half-up.
pub fn resize_bilinear(src: &GrayImage, dst_w: usize, dst_h: usize) -> Result<GrayImage, ImagingError> {
    if dst_w == 0 || dst_h == 0 {
        return Err(ImagingError::Precondition(format!(
            "destination {dst_w}x{dst_h} must be at least 1x1"
        )));
    }
    if dst_w > src.width || dst_h > src.height {
        return Err(ImagingError::Precondition(format!(
            "upscaling {}x{} -> {dst_w}x{dst_h} is not supported",
            src.width, src.height
        )));
    }
    let sx = src.width as f64 / dst_w as f64;
    let sy = src.height as f64 / dst_h as f64;
    let xs: Vec<(usize, usize, f64)> = (0..dst_w)
        .map(|u| sample_taps((u as f64 + 0.5) * sx - 0.5, src.width))
        .collect();
    let mut data = Vec::with_capacity(dst_w * dst_h);
    for v in 0..dst_h {
        let (y0, y1, wy) = sample_taps((v as f64 + 0.5) * sy - 0.5, src.height);
        let r0 = src.row(y0);
        let r1 = src.row(y1);
        for &(x0, x1, wx) in &xs {
            let top = r0[x0] as f64 * (1.0 - wx) + r0[x1] as f64 * wx;
            let bottom = r1[x0] as f64 * (1.0 - wx) + r1[x1] as f64 * wx;
            let value = top * (1.0 - wy) + bottom * wy;
            data.push((value + 0.5).floor().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(GrayImage {
        width: dst_w,
        height: dst_h,
        data,
    })
}

fn sample_taps(pos: f64, len: usize) -> (usize, usize, f64) {
    let pos = pos.clamp(0.0, (len - 1) as f64);
    let i0 = pos.floor() as usize;
    let i1 = (i0 + 1).min(len - 1);
    (i0, i1, pos - i0 as f64)
}

/// Dimensions of the next pyramid level: ceil on width, round on height.
/// This is the rule that maps 1280×720 to 1067×600 at factor 1.2.
pub fn scaled_dimensions(width: usize, height: usize, scale_factor: f64) -> (usize, usize) {
    let w = (width as f64 / scale_factor - DIM_EPSILON).ceil().max(1.0) as usize;
    let h = (height as f64 / scale_factor).round().max(1.0) as usize;
    (w, h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagePyramid {
    levels: Vec<GrayImage>,
    scale_factor: f64,
}

impl ImagePyramid {
    pub fn levels(&self) -> &[GrayImage] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> &GrayImage {
        &self.levels[index]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    /// Horizontal ratio between level 0 and `level`, from the actual
    /// rounded dimensions rather than the nominal factor.
    pub fn level_scale(&self, level: usize) -> f64 {
        self.levels[0].width as f64 / self.levels[level].width as f64
    }
}

pub fn build_pyramid(src: &GrayImage, scale_factor: f64) -> Result<ImagePyramid, ImagingError> {
    if !(scale_factor > 1.0) || !scale_factor.is_finite() {
        return Err(ImagingError::Precondition(format!(
            "scale factor must be > 1, got {scale_factor}"
        )));
    }
    if src.is_empty() {
        return Err(ImagingError::Precondition("empty source image".into()));
    }
    let mut levels = Vec::with_capacity(PYRAMID_LEVELS);
    levels.push(src.clone());
    for _ in 1..PYRAMID_LEVELS {
        let prev = levels.last().expect("level 0 present");
        let (w, h) = scaled_dimensions(prev.width, prev.height, scale_factor);
        if w >= prev.width || h >= prev.height {
            return Err(ImagingError::Precondition(format!(
                "{}x{} is too small to downscale by {scale_factor}",
                prev.width, prev.height
            )));
        }
        levels.push(resize_bilinear(prev, w, h)?);
    }
    Ok(ImagePyramid { levels, scale_factor })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_image_encoding() {
        let img = GrayImage::from_raw(1, 1, vec![128]).unwrap();
        let bytes = img.to_pgm_bytes().unwrap();
        assert_eq!(bytes, b"P5\n1 1\n255\n\x80");
        assert_eq!(GrayImage::from_pgm_bytes(&bytes).unwrap(), img);
    }

    #[test]
    fn zero_width_rejected_before_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.pgm");
        let img = GrayImage::from_raw(0, 4, vec![]).unwrap();
        assert!(matches!(save_pgm(&img, &path), Err(ImagingError::InvalidImage(_))));
        assert!(!path.exists());
    }

    #[test]
    fn loads_all_zero_4x4() {
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[0; 16]);
        let img = GrayImage::from_pgm_bytes(&bytes).unwrap();
        assert_eq!(img.dimensions(), (4, 4));
        assert_eq!(img.data(), &[0u8; 16]);
    }

    #[test]
    fn sixteen_bit_rejected() {
        let mut bytes = b"P5\n2 2\n65535\n".to_vec();
        bytes.extend_from_slice(&[0; 8]);
        assert!(matches!(
            GrayImage::from_pgm_bytes(&bytes),
            Err(ImagingError::UnsupportedDepth(65535))
        ));
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[0; 10]);
        match GrayImage::from_pgm_bytes(&bytes) {
            Err(ImagingError::Io(e)) => assert_eq!(e.kind(), io::ErrorKind::UnexpectedEof),
            other => panic!("expected I/O error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_headers() {
        for bad in [&b"P2\n1 1\n255\n\x00"[..], b"P5\nx 1\n255\n\x00", b"P5", b"P51 1 255 \x00"] {
            assert!(
                matches!(GrayImage::from_pgm_bytes(bad), Err(ImagingError::Format(_))),
                "{:?}",
                String::from_utf8_lossy(bad)
            );
        }
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# made by hand\n2 1\n# depth\n255\n\x01\x02";
        let img = GrayImage::from_pgm_bytes(bytes).unwrap();
        assert_eq!(img.data(), &[1, 2]);
    }

    #[test]
    fn from_raw_checks_length() {
        assert!(GrayImage::from_raw(3, 3, vec![0; 8]).is_err());
    }

    #[test]
    fn two_pixel_average_at_center() {
        let src = GrayImage::from_raw(2, 1, vec![0, 200]).unwrap();
        let out = resize_bilinear(&src, 1, 1).unwrap();
        assert_eq!(out.data(), &[100]);
    }

    #[test]
    fn half_up_rounding() {
        // Sample point 0.5 between 0 and 1 gives 0.5, which rounds up.
        let src = GrayImage::from_raw(2, 1, vec![0, 1]).unwrap();
        assert_eq!(resize_bilinear(&src, 1, 1).unwrap().data(), &[1]);
    }

    #[test]
    fn upscale_rejected() {
        let src = GrayImage::filled(4, 4, 7);
        assert!(matches!(resize_bilinear(&src, 5, 4), Err(ImagingError::Precondition(_))));
        assert!(matches!(resize_bilinear(&src, 0, 4), Err(ImagingError::Precondition(_))));
    }

    #[test]
    fn pyramid_dimensions() {
        assert_eq!(scaled_dimensions(1280, 720, 1.2), (1067, 600));
        assert_eq!(scaled_dimensions(640, 480, 1.2), (534, 400));
        assert_eq!(scaled_dimensions(1200, 600, 1.2), (1000, 500));
        let pyr = build_pyramid(&GrayImage::filled(640, 480, 9), 1.2).unwrap();
        assert_eq!(pyr.len(), PYRAMID_LEVELS);
        assert_eq!(pyr.level(1).dimensions(), (534, 400));
        assert!(pyr.level(1).data().iter().all(|&p| p == 9));
    }

    #[test]
    fn pyramid_factor_must_exceed_one() {
        let img = GrayImage::filled(64, 64, 0);
        assert!(build_pyramid(&img, 1.0).is_err());
        assert!(build_pyramid(&img, 0.5).is_err());
        assert!(build_pyramid(&img, f64::NAN).is_err());
    }
}
