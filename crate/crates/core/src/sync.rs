//! Trigger-and-tag sensor synchronization.
//!
//! A trigger generator fires the four cameras together at `cam_rate` and
//! the IMU at an integer multiple of that rate. Every sample carries the
//! trigger counter it was captured on, so the interface can group a frame's
//! four images and its IMU samples by tag no matter how delivery delays
//! reorder them. [`naive_associate`] implements the software alternative
//! (association by arrival time) for comparison.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const CAMERA_COUNT: usize = 4;
pub const DEFAULT_CAM_RATE_HZ: u32 = 30;
pub const DEFAULT_IMU_RATE_HZ: u32 = 120;

const NS_PER_S: u128 = 1_000_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SyncError {
    #[error("invalid trigger config: {0}")]
    Config(String),
    #[error("duplicate sample {sensor} tag {tag}")]
    Duplicate { sensor: Sensor, tag: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerConfig {
    cam_rate_hz: u32,
    imu_rate_hz: u32,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            cam_rate_hz: DEFAULT_CAM_RATE_HZ,
            imu_rate_hz: DEFAULT_IMU_RATE_HZ,
        }
    }
}

impl TriggerConfig {
    pub fn new(cam_rate_hz: u32, imu_rate_hz: u32) -> Result<Self, SyncError> {
        if cam_rate_hz == 0 || imu_rate_hz == 0 {
            return Err(SyncError::Config("rates must be positive".into()));
        }
        if !imu_rate_hz.is_multiple_of(cam_rate_hz) {
            return Err(SyncError::Config(format!(
                "IMU rate {imu_rate_hz} Hz is not an integer multiple of camera rate {cam_rate_hz} Hz"
            )));
        }
        Ok(Self {
            cam_rate_hz,
            imu_rate_hz,
        })
    }

    pub fn cam_rate_hz(&self) -> u32 {
        self.cam_rate_hz
    }

    pub fn imu_rate_hz(&self) -> u32 {
        self.imu_rate_hz
    }

    pub fn imu_per_cam(&self) -> u64 {
        (self.imu_rate_hz / self.cam_rate_hz) as u64
    }

    /// Nominal camera period, truncated to whole nanoseconds.
    pub fn cam_period_ns(&self) -> u64 {
        (NS_PER_S / self.cam_rate_hz as u128) as u64
    }

    pub fn cam_capture_ns(&self, tag: u64) -> u64 {
        (tag as u128 * NS_PER_S / self.cam_rate_hz as u128) as u64
    }

    pub fn imu_capture_ns(&self, tag: u64) -> u64 {
        (tag as u128 * NS_PER_S / self.imu_rate_hz as u128) as u64
    }

    /// Bundle (camera trigger) a sample belongs to.
    pub fn bundle_of(&self, sensor: Sensor, tag: u64) -> u64 {
        match sensor {
            Sensor::Cam(_) => tag,
            Sensor::Imu => tag / self.imu_per_cam(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sensor {
    Cam(u8),
    Imu,
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sensor::Cam(i) => write!(f, "cam{i}"),
            Sensor::Imu => f.write_str("imu"),
        }
    }
}

impl std::str::FromStr for Sensor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "imu" => Ok(Sensor::Imu),
            _ => s
                .strip_prefix("cam")
                .and_then(|i| i.parse::<u8>().ok())
                .filter(|&i| (i as usize) < CAMERA_COUNT)
                .map(Sensor::Cam)
                .ok_or_else(|| format!("unknown sensor `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaggedSample {
    pub sensor: Sensor,
    /// Camera trigger index for cameras, IMU trigger index for the IMU.
    pub tag: u64,
    pub capture_ns: u64,
    pub arrival_ns: u64,
}

/// Samples for `duration_s` seconds of triggers, each delayed by a uniform
/// draw from `[0, jitter_max_ns]`, returned in arrival order.
pub fn generate_stream(
    cfg: &TriggerConfig,
    duration_s: f64,
    jitter_max_ns: u64,
    seed: u64,
) -> Vec<TaggedSample> {
    let frames = (duration_s.max(0.0) * cfg.cam_rate_hz as f64 + 1e-9).floor() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |rng: &mut ChaCha8Rng| {
        if jitter_max_ns == 0 {
            0
        } else {
            rng.random_range(0..=jitter_max_ns)
        }
    };
    let ipc = cfg.imu_per_cam();
    let mut out = Vec::with_capacity((frames * (CAMERA_COUNT as u64 + ipc)) as usize);
    for frame in 0..frames {
        let capture = cfg.cam_capture_ns(frame);
        for cam in 0..CAMERA_COUNT as u8 {
            out.push(TaggedSample {
                sensor: Sensor::Cam(cam),
                tag: frame,
                capture_ns: capture,
                arrival_ns: capture + jitter(&mut rng),
            });
        }
        for imu_tag in frame * ipc..(frame + 1) * ipc {
            let capture = cfg.imu_capture_ns(imu_tag);
            out.push(TaggedSample {
                sensor: Sensor::Imu,
                tag: imu_tag,
                capture_ns: capture,
                arrival_ns: capture + jitter(&mut rng),
            });
        }
    }
    out.sort_by_key(|s| (s.arrival_ns, s.capture_ns, s.sensor, s.tag));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncBundle {
    pub tag: u64,
    /// Camera samples indexed by camera number.
    pub frames: [TaggedSample; CAMERA_COUNT],
    /// IMU samples in tag order.
    pub imu: Vec<TaggedSample>,
}

/// Membership of a bundle, independent of arrival times.
pub type Composition = (u64, Vec<(Sensor, u64, u64)>);

impl SyncBundle {
    pub fn composition(&self) -> Composition {
        let members = self
            .frames
            .iter()
            .chain(&self.imu)
            .map(|s| (s.sensor, s.tag, s.capture_ns))
            .collect();
        (self.tag, members)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartialBundle {
    pub tag: u64,
    pub frames: Vec<TaggedSample>,
    pub imu: Vec<TaggedSample>,
}

impl PartialBundle {
    fn is_complete(&self, imu_per_cam: u64) -> bool {
        self.frames.len() == CAMERA_COUNT && self.imu.len() as u64 == imu_per_cam
    }

    fn into_bundle(mut self) -> SyncBundle {
        self.frames.sort_by_key(|s| s.sensor);
        self.imu.sort_by_key(|s| s.tag);
        SyncBundle {
            tag: self.tag,
            frames: self.frames.try_into().expect("four camera samples"),
            imu: self.imu,
        }
    }
}

/// Streaming tag-based assembler. Complete bundles are released strictly in
/// tag order.
#[derive(Debug)]
pub struct BundleAssembler {
    cfg: TriggerConfig,
    seen: HashSet<(Sensor, u64)>,
    partial: BTreeMap<u64, PartialBundle>,
    ready: BTreeMap<u64, SyncBundle>,
    next_tag: u64,
}

impl BundleAssembler {
    pub fn new(cfg: TriggerConfig) -> Self {
        Self {
            cfg,
            seen: HashSet::new(),
            partial: BTreeMap::new(),
            ready: BTreeMap::new(),
            next_tag: 0,
        }
    }

    /// Adds one sample and returns any bundles that became releasable.
    pub fn push(&mut self, sample: TaggedSample) -> Result<Vec<SyncBundle>, SyncError> {
        if !self.seen.insert((sample.sensor, sample.tag)) {
            return Err(SyncError::Duplicate {
                sensor: sample.sensor,
                tag: sample.tag,
            });
        }
        let tag = self.cfg.bundle_of(sample.sensor, sample.tag);
        let entry = self.partial.entry(tag).or_insert_with(|| PartialBundle {
            tag,
            ..Default::default()
        });
        match sample.sensor {
            Sensor::Cam(_) => entry.frames.push(sample),
            Sensor::Imu => entry.imu.push(sample),
        }
        if entry.is_complete(self.cfg.imu_per_cam()) {
            let done = self.partial.remove(&tag).expect("entry present");
            self.ready.insert(tag, done.into_bundle());
        }
        let mut out = Vec::new();
        while let Some(bundle) = self.ready.remove(&self.next_tag) {
            out.push(bundle);
            self.next_tag += 1;
        }
        Ok(out)
    }

    /// Releases remaining complete bundles in tag order and returns the
    /// incomplete ones.
    pub fn finish(self) -> (Vec<SyncBundle>, Vec<PartialBundle>) {
        (self.ready.into_values().collect(), self.partial.into_values().collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assembly {
    pub bundles: Vec<SyncBundle>,
    pub incomplete: Vec<PartialBundle>,
}

impl Assembly {
    pub fn compositions(&self) -> Vec<Composition> {
        self.bundles.iter().map(SyncBundle::composition).collect()
    }
}

/// Feeds an arrival-ordered stream through a [`BundleAssembler`].
pub fn assemble_bundles(cfg: &TriggerConfig, stream: &[TaggedSample]) -> Result<Assembly, SyncError> {
    let mut asm = BundleAssembler::new(*cfg);
    let mut bundles = Vec::new();
    for &s in stream {
        bundles.extend(asm.push(s)?);
    }
    let (rest, incomplete) = asm.finish();
    bundles.extend(rest);
    Ok(Assembly { bundles, incomplete })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Misassociation {
    pub sensor: Sensor,
    pub tag: u64,
    pub arrival_ns: u64,
    pub true_bundle: u64,
    pub assigned_bundle: u64,
}

/// Arrival-time association without tags: each camera image goes to the
/// nominal trigger nearest its arrival, each IMU sample to the last camera
/// trigger at or before its arrival. Returns every sample placed in the
/// wrong bundle.
pub fn naive_associate(cfg: &TriggerConfig, stream: &[TaggedSample]) -> Vec<Misassociation> {
    let period = cfg.cam_period_ns() as u128;
    stream
        .iter()
        .filter_map(|s| {
            let approx = (s.arrival_ns as u128 / period) as u64;
            // Trigger grid is not exactly uniform in integer ns; check neighbours.
            let around = approx.saturating_sub(1)..=approx + 1;
            let assigned = match s.sensor {
                Sensor::Cam(_) => around
                    .min_by_key(|&k| (cfg.cam_capture_ns(k).abs_diff(s.arrival_ns), k))
                    .expect("non-empty range"),
                Sensor::Imu => around
                    .filter(|&k| cfg.cam_capture_ns(k) <= s.arrival_ns)
                    .max()
                    .unwrap_or(0),
            };
            let true_bundle = cfg.bundle_of(s.sensor, s.tag);
            (assigned != true_bundle).then_some(Misassociation {
                sensor: s.sensor,
                tag: s.tag,
                arrival_ns: s.arrival_ns,
                true_bundle,
                assigned_bundle: assigned,
            })
        })
        .collect()
}

pub const STREAM_CSV_HEADER: &str = "sensor,tag,capture_ns,arrival_ns";
pub const BUNDLE_CSV_HEADER: &str = "tag,frame_count,imu_count,complete";

pub fn write_stream_csv(stream: &[TaggedSample], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{STREAM_CSV_HEADER}")?;
    for s in stream {
        writeln!(out, "{},{},{},{}", s.sensor, s.tag, s.capture_ns, s.arrival_ns)?;
    }
    Ok(())
}

pub fn write_bundles_csv(assembly: &Assembly, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{BUNDLE_CSV_HEADER}")?;
    let mut rows: Vec<(u64, usize, usize, bool)> = assembly
        .bundles
        .iter()
        .map(|b| (b.tag, b.frames.len(), b.imu.len(), true))
        .chain(assembly.incomplete.iter().map(|p| (p.tag, p.frames.len(), p.imu.len(), false)))
        .collect();
    rows.sort();
    for (tag, frames, imu, complete) in rows {
        writeln!(out, "{tag},{frames},{imu},{complete}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_ratio() {
        assert_eq!(TriggerConfig::new(30, 120).unwrap().imu_per_cam(), 4);
        assert!(matches!(TriggerConfig::new(30, 100), Err(SyncError::Config(_))));
        assert!(TriggerConfig::new(0, 100).is_err());
    }

    #[test]
    fn jitter_free_counts() {
        let cfg = TriggerConfig::default();
        let s = generate_stream(&cfg, 1.0, 0, 1);
        assert_eq!(s.iter().filter(|x| matches!(x.sensor, Sensor::Cam(_))).count(), 120);
        assert_eq!(s.iter().filter(|x| x.sensor == Sensor::Imu).count(), 120);
        assert!(s.iter().all(|x| x.arrival_ns == x.capture_ns));
        let asm = assemble_bundles(&cfg, &s).unwrap();
        assert_eq!(asm.bundles.len(), 30);
        assert!(asm.incomplete.is_empty());
        for (i, b) in asm.bundles.iter().enumerate() {
            assert_eq!(b.tag, i as u64);
            assert!(b.frames.iter().all(|f| f.tag == b.tag));
            assert!(b.imu.iter().all(|m| m.tag / 4 == b.tag));
        }
        assert!(naive_associate(&cfg, &s).is_empty());
    }

    #[test]
    fn seeded_streams_repeat() {
        let cfg = TriggerConfig::default();
        assert_eq!(generate_stream(&cfg, 0.5, 5_000_000, 9), generate_stream(&cfg, 0.5, 5_000_000, 9));
        assert_ne!(generate_stream(&cfg, 0.5, 5_000_000, 9), generate_stream(&cfg, 0.5, 5_000_000, 10));
    }

    #[test]
    fn duplicate_rejected() {
        let cfg = TriggerConfig::default();
        let mut s = generate_stream(&cfg, 0.1, 0, 0);
        s.push(s[0]);
        assert!(matches!(assemble_bundles(&cfg, &s), Err(SyncError::Duplicate { .. })));
    }

    #[test]
    fn truncated_stream_leaves_incomplete_tail() {
        let cfg = TriggerConfig::default();
        let s = generate_stream(&cfg, 0.2, 0, 0);
        let asm = assemble_bundles(&cfg, &s[..s.len() - 2]).unwrap();
        assert_eq!(asm.bundles.len(), 5);
        assert_eq!(asm.incomplete.len(), 1);
        let kept: usize = asm.bundles.iter().map(|b| 4 + b.imu.len()).sum::<usize>()
            + asm.incomplete.iter().map(|p| p.frames.len() + p.imu.len()).sum::<usize>();
        assert_eq!(kept, s.len() - 2);
    }

    #[test]
    fn sensor_names_round_trip() {
        for s in [Sensor::Cam(0), Sensor::Cam(3), Sensor::Imu] {
            assert_eq!(s.to_string().parse::<Sensor>().unwrap(), s);
        }
        assert!("cam4".parse::<Sensor>().is_err());
    }

    #[test]
    fn bundles_csv() {
        let cfg = TriggerConfig::default();
        let s = generate_stream(&cfg, 0.1, 0, 0);
        let asm = assemble_bundles(&cfg, &s[..s.len() - 1]).unwrap();
        let mut buf = Vec::new();
        write_bundles_csv(&asm, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "tag,frame_count,imu_count,complete\n0,4,4,true\n1,4,4,true\n2,4,3,false\n");
    }
}
