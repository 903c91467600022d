//! Regenerates `data/orb_pattern.txt` from the pinned seed.
//!
//! cargo run -p orbfront --example regen_pattern > crates/core/data/orb_pattern.txt

use orbfront::extractor::pattern::{SamplingPattern, PATTERN_SEED};

fn main() {
    print!("{}", SamplingPattern::generate(PATTERN_SEED).to_text());
}
