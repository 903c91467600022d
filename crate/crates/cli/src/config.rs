//! `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are fixed (see
//! [`KEYS`]); anything else is rejected so typos surface immediately.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use orbfront::extractor::ExtractorConfig;
use orbfront::matcher::{DepthRange, MatcherConfig, SearchStrip, StereoCalib};
use orbfront::ArithMode;
use thiserror::Error;

pub const KEYS: &[&str] = &[
    "dataset_dir",
    "output_dir",
    "calib",
    "fx",
    "baseline",
    "fast_threshold",
    "max_features_per_level",
    "scale_factor",
    "arith_mode",
    "row_tolerance",
    "min_disparity",
    "max_disparity",
    "max_hamming",
    "sad_slide",
    "depth_min",
    "depth_max",
    "threads",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value}")]
    Value { key: String, value: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Parses `key = value` lines into an ordered map.
pub fn parse_kv(text: &str, origin: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            path: origin.to_string(),
            line: i + 1,
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_kv(&text, &path.display().to_string())
}

/// Calibration file with `fx` and `baseline` keys.
pub fn read_calibration(path: &Path) -> Result<StereoCalib, ConfigError> {
    let kv = read_kv(path)?;
    let get = |k: &str| -> Result<f64, ConfigError> {
        let v = kv.get(k).ok_or_else(|| ConfigError::Invalid(format!("{} lacks `{k}`", path.display())))?;
        v.parse().map_err(|_| ConfigError::Value {
            key: k.into(),
            value: v.clone(),
        })
    };
    StereoCalib::new(get("fx")?, get("baseline")?).map_err(|e| ConfigError::Invalid(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_dir: PathBuf,
    pub output_dir: PathBuf,
    pub calib_path: Option<PathBuf>,
    pub fx: Option<f64>,
    pub baseline: Option<f64>,
    pub extractor: ExtractorConfig,
    pub strip: SearchStrip,
    pub matcher: MatcherConfig,
    pub depth_range: DepthRange,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_dir: PathBuf::from("."),
            output_dir: PathBuf::from("out"),
            calib_path: None,
            fx: None,
            baseline: None,
            extractor: ExtractorConfig::default(),
            strip: SearchStrip::default(),
            matcher: MatcherConfig::default(),
            depth_range: DepthRange::default(),
            threads: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.into(),
        value: value.into(),
    })
}

impl RunConfig {
    /// Applies one key. Used for both file entries and flag overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "dataset_dir" => self.dataset_dir = value.into(),
            "output_dir" => self.output_dir = value.into(),
            "calib" => self.calib_path = Some(value.into()),
            "fx" => self.fx = Some(parse(key, value)?),
            "baseline" => self.baseline = Some(parse(key, value)?),
            "fast_threshold" => self.extractor.fast_threshold = parse(key, value)?,
            "max_features_per_level" => self.extractor.max_features_per_level = parse(key, value)?,
            "scale_factor" => self.extractor.scale_factor = parse(key, value)?,
            "arith_mode" => {
                self.extractor.arith_mode = value.parse::<ArithMode>().map_err(|_| ConfigError::Value {
                    key: key.into(),
                    value: value.into(),
                })?
            }
            "row_tolerance" => self.strip.row_tolerance = parse(key, value)?,
            "min_disparity" => self.strip.min_disparity = parse(key, value)?,
            "max_disparity" => self.strip.max_disparity = parse(key, value)?,
            "max_hamming" => self.matcher.max_hamming = parse(key, value)?,
            "sad_slide" => self.matcher.sad_slide = parse(key, value)?,
            "depth_min" => self.depth_range.min = parse(key, value)?,
            "depth_max" => self.depth_range.max = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        kv.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    /// File values first, then overrides in order.
    pub fn load(file: Option<&Path>, overrides: &[(&str, String)]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            cfg.apply(&read_kv(path)?)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.extractor.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.strip.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.depth_range.min >= 0.0 && self.depth_range.min < self.depth_range.max) {
            return Err(ConfigError::Invalid("depth_min must be >= 0 and below depth_max".into()));
        }
        Ok(())
    }

    /// Calibration from inline `fx`/`baseline` keys, else from the `calib`
    /// file, else `dataset_dir/calib.txt` when present.
    pub fn calibration(&self) -> Result<Option<StereoCalib>, ConfigError> {
        match (self.fx, self.baseline) {
            (Some(fx), Some(b)) => {
                return StereoCalib::new(fx, b).map(Some).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            (None, None) => {}
            _ => return Err(ConfigError::Invalid("fx and baseline must be given together".into())),
        }
        if let Some(p) = &self.calib_path {
            return read_calibration(p).map(Some);
        }
        let fallback = self.dataset_dir.join("calib.txt");
        if fallback.is_file() {
            return read_calibration(&fallback).map(Some);
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_spacing() {
        let kv = parse_kv("# run\n\n fx = 500 \nbaseline=0.1\n", "t").unwrap();
        assert_eq!(kv["fx"], "500");
        assert_eq!(kv["baseline"], "0.1");
    }

    #[test]
    fn rejects_missing_equals() {
        assert!(matches!(parse_kv("fx 500", "t"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "fast_threshold = 30\narith_mode = fixed8\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &[("fast_threshold", "12".into())]).unwrap();
        assert_eq!(cfg.extractor.fast_threshold, 12);
        assert_eq!(cfg.extractor.arith_mode, ArithMode::Fixed8);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("fast", "1"), Err(ConfigError::UnknownKey(_))));
    }

    #[test]
    fn every_key_is_settable() {
        let sample = |k: &str| match k {
            "arith_mode" => "fixed8",
            "dataset_dir" | "output_dir" | "calib" => "x",
            "scale_factor" | "depth_max" => "1.5",
            _ => "1",
        };
        let mut cfg = RunConfig::default();
        for k in KEYS {
            cfg.set(k, sample(k)).unwrap();
        }
    }

    #[test]
    fn calibration_needs_both_keys() {
        let cfg = RunConfig {
            fx: Some(500.0),
            ..RunConfig::default()
        };
        assert!(cfg.calibration().is_err());
    }
}
