//! 7×7 integer Gaussian smoothing, computed row by row through a shifting
//! line buffer so that only seven source rows are resident at a time.

use std::collections::VecDeque;
use std::sync::OnceLock;

use crate::imaging::GrayImage;

pub const KERNEL_SIZE: usize = 7;
pub const KERNEL_RADIUS: usize = KERNEL_SIZE / 2;
pub const KERNEL_SIGMA: f64 = 2.0;
/// Kernel coefficients sum to 2^KERNEL_SHIFT.
pub const KERNEL_SHIFT: u32 = 10;

/// Integer coefficients, sum exactly 1024. Rounding residue goes to the center tap.
pub fn gaussian_kernel() -> &'static [[u32; KERNEL_SIZE]; KERNEL_SIZE] {
    static KERNEL: OnceLock<[[u32; KERNEL_SIZE]; KERNEL_SIZE]> = OnceLock::new();
    KERNEL.get_or_init(|| {
        let r = KERNEL_RADIUS as i32;
        let weight = |i: i32, j: i32| (-((i * i + j * j) as f64) / (2.0 * KERNEL_SIGMA * KERNEL_SIGMA)).exp();
        let total: f64 = (-r..=r).flat_map(|i| (-r..=r).map(move |j| weight(i, j))).sum();
        let scale = (1u32 << KERNEL_SHIFT) as f64;
        let mut kernel = [[0u32; KERNEL_SIZE]; KERNEL_SIZE];
        let mut sum = 0i64;
        for (ky, row) in kernel.iter_mut().enumerate() {
            for (kx, k) in row.iter_mut().enumerate() {
                *k = (weight(kx as i32 - r, ky as i32 - r) / total * scale).round() as u32;
                sum += *k as i64;
            }
        }
        let c = &mut kernel[KERNEL_RADIUS][KERNEL_RADIUS];
        *c = (*c as i64 + (1i64 << KERNEL_SHIFT) - sum) as u32;
        kernel
    })
}

/// Streams smoothed rows of an image, top to bottom.
///
/// Rows above and below the image are replicated from the nearest edge row;
/// columns likewise.
pub struct RowSmoother<'a> {
    src: &'a GrayImage,
    /// Horizontally padded source rows for output rows `next - 3 ..= next + 3`.
    lines: VecDeque<Vec<u8>>,
    next: usize,
}

impl<'a> RowSmoother<'a> {
    pub fn new(src: &'a GrayImage) -> Self {
        let mut smoother = Self {
            src,
            lines: VecDeque::with_capacity(KERNEL_SIZE),
            next: 0,
        };
        if !src.is_empty() {
            let r = KERNEL_RADIUS as isize;
            for dy in -r..=r {
                let line = smoother.padded_row(dy);
                smoother.lines.push_back(line);
            }
        }
        smoother
    }

    fn padded_row(&self, y: isize) -> Vec<u8> {
        let h = self.src.height() as isize;
        let row = self.src.row(y.clamp(0, h - 1) as usize);
        let mut line = Vec::with_capacity(row.len() + 2 * KERNEL_RADIUS);
        line.extend(std::iter::repeat_n(row[0], KERNEL_RADIUS));
        line.extend_from_slice(row);
        line.extend(std::iter::repeat_n(row[row.len() - 1], KERNEL_RADIUS));
        line
    }

    /// Rows currently held in the line buffer.
    pub fn resident_rows(&self) -> usize {
        self.lines.len()
    }

    fn smooth_current(&self) -> Vec<u8> {
        let kernel = gaussian_kernel();
        let w = self.src.width();
        let round = 1u32 << (KERNEL_SHIFT - 1);
        (0..w)
            .map(|x| {
                let mut acc = 0u32;
                for (line, krow) in self.lines.iter().zip(kernel.iter()) {
                    let window = &line[x..x + KERNEL_SIZE];
                    for (&p, &k) in window.iter().zip(krow.iter()) {
                        acc += p as u32 * k;
                    }
                }
                ((acc + round) >> KERNEL_SHIFT) as u8
            })
            .collect()
    }
}

impl Iterator for RowSmoother<'_> {
    type Item = Vec<u8>;

    fn next(&mut self) -> Option<Vec<u8>> {
        if self.next >= self.src.height() {
            return None;
        }
        let out = self.smooth_current();
        self.next += 1;
        if self.next < self.src.height() {
            self.lines.pop_front();
            let incoming = self.padded_row((self.next + KERNEL_RADIUS) as isize);
            self.lines.push_back(incoming);
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.src.height() - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for RowSmoother<'_> {}

/// Whole-image Gaussian smoothing.
pub fn gaussian_smooth(img: &GrayImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.width() * img.height());
    for row in RowSmoother::new(img) {
        data.extend_from_slice(&row);
    }
    GrayImage::from_raw(img.width(), img.height(), data).expect("row count and width preserved")
}
