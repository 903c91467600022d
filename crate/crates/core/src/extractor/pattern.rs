//! The 256-pair binary test pattern and its per-angle rotated copies.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::orientation::ANGLE_BINS;
use super::{ExtractError, PATCH_RADIUS};

/// Number of binary tests per descriptor.
pub const PAIR_COUNT: usize = 256;

/// Seed that produced the shipped `data/orb_pattern.txt`.
pub const PATTERN_SEED: u64 = 0x5EED_0AB1;

/// Fractional bits of the tabulated sine and cosine used for rotation.
pub const TRIG_FRACTION_BITS: u32 = 13;

const SHIPPED_PATTERN: &str = include_str!("../../data/orb_pattern.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Offset {
    pub dx: i8,
    pub dy: i8,
}

impl Offset {
    pub const fn new(dx: i8, dy: i8) -> Self {
        Self { dx, dy }
    }

    fn radius_sq(self) -> i32 {
        self.dx as i32 * self.dx as i32 + self.dy as i32 * self.dy as i32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TestPair {
    pub a: Offset,
    pub b: Offset,
}

/// Base pairs plus one rotated copy per orientation bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPattern {
    pairs: Vec<TestPair>,
    rotated: Vec<Vec<TestPair>>,
}

impl SamplingPattern {
    pub fn new(pairs: Vec<TestPair>) -> Result<Self, ExtractError> {
        if pairs.len() != PAIR_COUNT {
            return Err(ExtractError::Pattern(format!(
                "expected {PAIR_COUNT} pairs, got {}",
                pairs.len()
            )));
        }
        let r2 = (PATCH_RADIUS * PATCH_RADIUS) as i32;
        if let Some((i, _)) = pairs
            .iter()
            .enumerate()
            .find(|(_, p)| p.a.radius_sq() > r2 || p.b.radius_sq() > r2)
        {
            return Err(ExtractError::Pattern(format!(
                "pair {i} leaves the radius-{PATCH_RADIUS} patch"
            )));
        }
        let table = trig_table();
        let rotated = table
            .iter()
            .map(|&(cos, sin)| {
                pairs
                    .iter()
                    .map(|p| TestPair {
                        a: rotate(p.a, cos, sin),
                        b: rotate(p.b, cos, sin),
                    })
                    .collect()
            })
            .collect();
        Ok(Self { pairs, rotated })
    }

    /// The pattern shipped with the crate.
    pub fn shipped() -> &'static SamplingPattern {
        static PATTERN: std::sync::OnceLock<SamplingPattern> = std::sync::OnceLock::new();
        PATTERN.get_or_init(|| Self::from_text(SHIPPED_PATTERN).expect("shipped pattern is valid"))
    }

    /// Draws pairs from an isotropic Gaussian (σ = 31/5), rejecting points
    /// outside the patch and degenerate pairs.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = (2 * PATCH_RADIUS + 1) as f64 / 5.0;
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        let r2 = (PATCH_RADIUS * PATCH_RADIUS) as i32;
        let point = |rng: &mut ChaCha8Rng| loop {
            let dx = normal.sample(rng).round();
            let dy = normal.sample(rng).round();
            let o = Offset::new(dx.clamp(-127.0, 127.0) as i8, dy.clamp(-127.0, 127.0) as i8);
            if o.radius_sq() <= r2 {
                return o;
            }
        };
        let mut pairs = Vec::with_capacity(PAIR_COUNT);
        while pairs.len() < PAIR_COUNT {
            let a = point(&mut rng);
            let b = point(&mut rng);
            if a != b {
                pairs.push(TestPair { a, b });
            }
        }
        Self::new(pairs).expect("generated pairs lie inside the patch")
    }

    /// Parses 256 lines of `ax ay bx by`.
    pub fn from_text(text: &str) -> Result<Self, ExtractError> {
        let mut pairs = Vec::with_capacity(PAIR_COUNT);
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<i8> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| ExtractError::Pattern(format!("line {}: {e}", lineno + 1)))?;
            let [ax, ay, bx, by] = nums[..] else {
                return Err(ExtractError::Pattern(format!(
                    "line {}: expected 4 integers, got {}",
                    lineno + 1,
                    nums.len()
                )));
            };
            pairs.push(TestPair {
                a: Offset::new(ax, ay),
                b: Offset::new(bx, by),
            });
        }
        Self::new(pairs)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(PAIR_COUNT * 16);
        for p in &self.pairs {
            writeln!(out, "{} {} {} {}", p.a.dx, p.a.dy, p.b.dx, p.b.dy).expect("writing to String");
        }
        out
    }

    pub fn pairs(&self) -> &[TestPair] {
        &self.pairs
    }

    /// Pairs rotated by `theta_q · 2π/256`.
    pub fn rotated(&self, theta_q: u8) -> &[TestPair] {
        &self.rotated[theta_q as usize]
    }
}

/// (cos, sin) per angle bin at [`TRIG_FRACTION_BITS`] fractional bits.
fn trig_table() -> Vec<(i32, i32)> {
    let one = (1i32 << TRIG_FRACTION_BITS) as f64;
    (0..ANGLE_BINS)
        .map(|k| {
            let angle = TAU * k as f64 / ANGLE_BINS as f64;
            ((angle.cos() * one).round() as i32, (angle.sin() * one).round() as i32)
        })
        .collect()
}

fn rotate(o: Offset, cos: i32, sin: i32) -> Offset {
    let (x, y) = (o.dx as i32, o.dy as i32);
    let half = 1i32 << (TRIG_FRACTION_BITS - 1);
    let rx = (cos * x - sin * y + half) >> TRIG_FRACTION_BITS;
    let ry = (sin * x + cos * y + half) >> TRIG_FRACTION_BITS;
    Offset::new(rx as i8, ry as i8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_pattern_is_reproducible_from_seed() {
        let generated = SamplingPattern::generate(PATTERN_SEED);
        assert_eq!(generated.to_text(), SHIPPED_PATTERN);
        assert_eq!(&generated, SamplingPattern::shipped());
    }

    #[test]
    fn bin_zero_is_base_pattern() {
        let p = SamplingPattern::shipped();
        assert_eq!(p.rotated(0), p.pairs());
    }

    #[test]
    fn all_offsets_within_patch_at_every_angle() {
        let p = SamplingPattern::shipped();
        for k in 0..=255u8 {
            for pair in p.rotated(k) {
                for o in [pair.a, pair.b] {
                    assert!(o.dx.unsigned_abs() as usize <= PATCH_RADIUS);
                    assert!(o.dy.unsigned_abs() as usize <= PATCH_RADIUS);
                }
            }
        }
    }

    #[test]
    fn quarter_turn_is_exact() {
        let p = SamplingPattern::shipped();
        for (base, rot) in p.pairs().iter().zip(p.rotated(64)) {
            assert_eq!(rot.a, Offset::new(-base.a.dy, base.a.dx));
            assert_eq!(rot.b, Offset::new(-base.b.dy, base.b.dx));
        }
    }

    #[test]
    fn roughly_gaussian_spread() {
        let p = SamplingPattern::shipped();
        let coords: Vec<f64> = p
            .pairs()
            .iter()
            .flat_map(|t| [t.a.dx, t.a.dy, t.b.dx, t.b.dy])
            .map(|v| v as f64)
            .collect();
        let mean = coords.iter().sum::<f64>() / coords.len() as f64;
        let sd = (coords.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / coords.len() as f64).sqrt();
        assert!(mean.abs() < 1.0, "mean {mean}");
        assert!((4.5..7.0).contains(&sd), "sd {sd}");
    }

    #[test]
    fn rejects_bad_text() {
        assert!(SamplingPattern::from_text("1 2 3 4\n").is_err());
        assert!(SamplingPattern::from_text(&"1 2 3\n".repeat(256)).is_err());
        assert!(SamplingPattern::from_text(&"16 0 0 0\n".repeat(256)).is_err());
    }
}
