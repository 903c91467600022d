//! Software model of a quad-camera ORB stereo frontend.
//!
//! - [`imaging`]: grayscale rasters, PGM I/O, bilinear two-level pyramid.
//! - [`extractor`]: oriented FAST + rotated binary descriptors, float and 8-bit paths.
//! - [`matcher`]: strip-constrained Hamming stereo matching, SAD rectification, depth.
//! - [`pipeline`]: discrete-event model of the frame-multiplexed FE/FM schedule.
//! - [`sync`]: trigger/tag based camera + IMU synchronization simulator.
//! - [`corpus`]: synthetic shifted stereo sequences with known disparity.

pub mod corpus;
pub mod extractor;
pub mod imaging;
pub mod matcher;
pub mod pipeline;
pub mod sync;

pub use extractor::{ArithMode, Descriptor, Extraction, ExtractorConfig, Feature, FeaturePoint};
pub use imaging::{build_pyramid, load_pgm, resize_bilinear, save_pgm, GrayImage, ImagePyramid};
pub use matcher::{MatchPair, MatcherConfig, SearchStrip, StereoCalib};
