//! Subcommand implementations. Each returns a report; the binary prints it
//! and derives the exit code from [`Diagnostics`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use orbfront::corpus::{self, CorpusSpec};
use orbfront::extractor::{extract_image, write_descriptor_dump, Extraction};
use orbfront::matcher::{match_stereo, write_matches_csv, MatchOutput, StereoCalib};
use orbfront::pipeline::{self, StageLatency};
use orbfront::sync::{self, TriggerConfig};
use orbfront::{load_pgm, ArithMode, GrayImage};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dataset::{self, write_atomic, FramePair};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

struct FrameRun {
    left: Extraction,
    right: Extraction,
    matches: Option<MatchOutput>,
}

fn run_frame(
    frame: &FramePair,
    cfg: &RunConfig,
    mode: ArithMode,
    calib: Option<&StereoCalib>,
    with_matches: bool,
) -> Result<FrameRun> {
    let ecfg = cfg.extractor.with_mode(mode);
    let limg = load_pgm(&frame.left).with_context(|| format!("loading {}", frame.left.display()))?;
    let rimg = load_pgm(&frame.right).with_context(|| format!("loading {}", frame.right.display()))?;
    let left = extract_image(&limg, &ecfg).with_context(|| format!("extracting {}", frame.left.display()))?;
    let right = extract_image(&rimg, &ecfg).with_context(|| format!("extracting {}", frame.right.display()))?;
    let matches = if with_matches {
        Some(match_stereo(&left, &right, &cfg.strip, calib, &cfg.matcher).with_context(|| format!("matching {}", frame.stem))?)
    } else {
        None
    };
    Ok(FrameRun { left, right, matches })
}

fn scan_dataset(cfg: &RunConfig, diag: &mut Diagnostics) -> Result<Vec<FramePair>> {
    let ds = dataset::scan(&cfg.dataset_dir)?;
    diag.errors
        .extend(ds.unpaired.iter().map(|p| format!("missing frame {p}")));
    Ok(ds.frames)
}

/// Runs `work` on every frame in parallel; results come back in frame order.
fn per_frame<T: Send>(
    cfg: &RunConfig,
    frames: &[FramePair],
    work: impl Fn(&FramePair) -> Result<T> + Sync,
) -> Result<Vec<(usize, Result<T>)>> {
    with_pool(cfg.threads, || {
        frames
            .par_iter()
            .map(|f| (f.index, work(f)))
            .collect::<Vec<_>>()
    })
}

fn dump_bytes(ex: &Extraction) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_descriptor_dump(&ex.features, &ex.level_scales, &mut buf)?;
    Ok(buf)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractRow {
    pub frame: String,
    pub left_features: usize,
    pub right_features: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ExtractReport {
    pub rows: Vec<ExtractRow>,
    pub diagnostics: Diagnostics,
}

pub const EXTRACT_SUMMARY_HEADER: &str = "frame,left_features,right_features";

/// Descriptor dumps under `features/{left,right}/` and `extract_summary.csv`.
pub fn cmd_extract(cfg: &RunConfig) -> Result<ExtractReport> {
    let mut report = ExtractReport::default();
    let frames = scan_dataset(cfg, &mut report.diagnostics)?;
    let out = &cfg.output_dir;
    let results = per_frame(cfg, &frames, |f| {
        let run = run_frame(f, cfg, cfg.extractor.arith_mode, None, false)?;
        write_atomic(&out.join("features/left").join(format!("{}.desc", f.stem)), &dump_bytes(&run.left)?)?;
        write_atomic(&out.join("features/right").join(format!("{}.desc", f.stem)), &dump_bytes(&run.right)?)?;
        Ok(ExtractRow {
            frame: f.stem.clone(),
            left_features: run.left.features.len(),
            right_features: run.right.features.len(),
        })
    })?;
    let mut csv = format!("{EXTRACT_SUMMARY_HEADER}\n");
    for (i, r) in results {
        match r {
            Ok(row) => {
                writeln!(csv, "{},{},{}", row.frame, row.left_features, row.right_features)?;
                report.rows.push(row);
            }
            Err(e) => report.diagnostics.errors.push(format!("{}: {e:#}", frames[i].stem)),
        }
    }
    write_atomic(&out.join("extract_summary.csv"), csv.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchRow {
    pub frame: String,
    pub pairs: usize,
    pub effective_depths: usize,
    pub mean_disparity: Option<f64>,
    pub dropped_out_of_bounds: usize,
}

#[derive(Debug, Clone, Default)]
pub struct MatchReport {
    pub rows: Vec<MatchRow>,
    pub diagnostics: Diagnostics,
}

pub const MATCH_SUMMARY_HEADER: &str = "frame,pairs,effective_depths,mean_disparity,dropped_out_of_bounds";

/// Per-frame `matches/<frame>.csv` and `match_summary.csv`.
pub fn cmd_match(cfg: &RunConfig) -> Result<MatchReport> {
    let mut report = MatchReport::default();
    let calib = cfg.calibration()?;
    if calib.is_none() {
        report
            .diagnostics
            .warnings
            .push("no calibration found; depths are reported as invalid".into());
    }
    let frames = scan_dataset(cfg, &mut report.diagnostics)?;
    let out = &cfg.output_dir;
    let results = per_frame(cfg, &frames, |f| {
        let run = run_frame(f, cfg, cfg.extractor.arith_mode, calib.as_ref(), true)?;
        let m = run.matches.expect("matches requested");
        let mut csv = Vec::new();
        write_matches_csv(&m.pairs, &mut csv)?;
        write_atomic(&out.join("matches").join(format!("{}.csv", f.stem)), &csv)?;
        let mean = (!m.pairs.is_empty())
            .then(|| m.pairs.iter().map(|p| p.disparity).sum::<f64>() / m.pairs.len() as f64);
        Ok(MatchRow {
            frame: f.stem.clone(),
            pairs: m.pairs.len(),
            effective_depths: m.effective_depths(&cfg.depth_range),
            mean_disparity: mean,
            dropped_out_of_bounds: m.dropped_out_of_bounds,
        })
    })?;
    let mut csv = format!("{MATCH_SUMMARY_HEADER}\n");
    for (i, r) in results {
        match r {
            Ok(row) => {
                let mean = row.mean_disparity.map_or_else(String::new, |d| format!("{d:.4}"));
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    row.frame, row.pairs, row.effective_depths, mean, row.dropped_out_of_bounds
                )?;
                report.rows.push(row);
            }
            Err(e) => report.diagnostics.errors.push(format!("{}: {e:#}", frames[i].stem)),
        }
    }
    write_atomic(&out.join("match_summary.csv"), csv.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: &'static str,
    pub reference_mean: f64,
    pub candidate_mean: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub reference: ArithMode,
    pub candidate: ArithMode,
    pub frames_used: usize,
    pub frames_requested: usize,
    pub rows: Vec<MetricRow>,
    pub diagnostics: Diagnostics,
}

pub const COMPARE_HEADER: &str = "metric,reference_mean,candidate_mean,relative_error";

/// |candidate − reference| / reference; 0 when both are 0.
pub fn relative_error(reference: f64, candidate: f64) -> f64 {
    if reference == 0.0 {
        if candidate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (candidate - reference).abs() / reference
    }
}

/// Runs the full extract and match chain in both arithmetic modes over the
/// first `frames` frames and compares the mean counts.
pub fn cmd_compare(cfg: &RunConfig, frames: usize, reference: ArithMode, candidate: ArithMode) -> Result<CompareReport> {
    let mut diag = Diagnostics::default();
    let calib = cfg.calibration()?;
    if calib.is_none() {
        diag.warnings
            .push("no calibration found; effective-depth counts will be zero".into());
    }
    let mut all = scan_dataset(cfg, &mut diag)?;
    if all.len() < frames {
        diag.warnings.push(format!("dataset has {} frames, {frames} requested", all.len()));
    }
    all.truncate(frames);
    let counts = |mode: ArithMode| -> Result<Vec<(usize, Result<[usize; 3]>)>> {
        per_frame(cfg, &all, |f| {
            let run = run_frame(f, cfg, mode, calib.as_ref(), true)?;
            let m = run.matches.expect("matches requested");
            Ok([
                run.left.features.len() + run.right.features.len(),
                m.pairs.len(),
                m.effective_depths(&cfg.depth_range),
            ])
        })
    };
    let (a, b) = (counts(reference)?, counts(candidate)?);
    let mut sums = [[0usize; 3]; 2];
    let mut used = 0;
    for ((i, ra), (_, rb)) in a.into_iter().zip(b) {
        match (ra, rb) {
            (Ok(ca), Ok(cb)) => {
                used += 1;
                for k in 0..3 {
                    sums[0][k] += ca[k];
                    sums[1][k] += cb[k];
                }
            }
            (Err(e), _) | (_, Err(e)) => diag.errors.push(format!("{}: {e:#}", all[i].stem)),
        }
    }
    let denom = used.max(1) as f64;
    let rows = ["feature_points", "matched_pairs", "effective_depths"]
        .into_iter()
        .enumerate()
        .map(|(k, metric)| {
            let (r, c) = (sums[0][k] as f64 / denom, sums[1][k] as f64 / denom);
            MetricRow {
                metric,
                reference_mean: r,
                candidate_mean: c,
                relative_error: relative_error(r, c),
            }
        })
        .collect::<Vec<_>>();
    let mut csv = format!("{COMPARE_HEADER}\n");
    for r in &rows {
        writeln!(csv, "{},{:.4},{:.4},{:.6}", r.metric, r.reference_mean, r.candidate_mean, r.relative_error)?;
    }
    write_atomic(&cfg.output_dir.join("compare.csv"), csv.as_bytes())?;
    Ok(CompareReport {
        reference,
        candidate,
        frames_used: used,
        frames_requested: frames,
        rows,
        diagnostics: diag,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub fps: f64,
    pub period_ms: f64,
    pub latency: pipeline::LatencyReport,
    pub trace_path: PathBuf,
}

pub fn cmd_pipeline_sim(out_dir: &Path, t_fe_ms: f64, t_fm_ms: f64, frames: usize, chains: usize) -> Result<PipelineReport> {
    let lat = StageLatency::from_ms(t_fe_ms, t_fm_ms)?;
    let trace = pipeline::simulate(lat, frames, chains)?;
    let fps = pipeline::throughput(&trace)?;
    let mut csv = Vec::new();
    pipeline::write_trace_csv(&trace, &mut csv)?;
    let trace_path = out_dir.join("trace.csv");
    write_atomic(&trace_path, &csv)?;
    Ok(PipelineReport {
        fps,
        period_ms: 1000.0 / fps,
        latency: pipeline::latency_report(&trace),
        trace_path,
    })
}

#[derive(Debug, Clone)]
pub struct SyncArgs {
    pub cam_rate_hz: u32,
    pub imu_rate_hz: u32,
    pub duration_s: f64,
    pub jitter_ns: u64,
    pub seed: u64,
    /// Also run the arrival-time baseline, scanning this many seeds from `seed`.
    pub naive_seeds: Option<u64>,
}

impl Default for SyncArgs {
    fn default() -> Self {
        Self {
            cam_rate_hz: sync::DEFAULT_CAM_RATE_HZ,
            imu_rate_hz: sync::DEFAULT_IMU_RATE_HZ,
            duration_s: 1.0,
            jitter_ns: 0,
            seed: 0,
            naive_seeds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaiveFinding {
    pub seed: u64,
    pub first: sync::Misassociation,
    pub count: usize,
}

#[derive(Debug, Clone)]
pub struct SyncReport {
    pub bundles: usize,
    pub incomplete: usize,
    pub identical_to_jitter_free: bool,
    pub verdict: String,
    /// `Some(None)` when the baseline ran and never failed.
    pub naive: Option<Option<NaiveFinding>>,
    pub diagnostics: Diagnostics,
}

pub const VERDICT_TRIVIAL: &str = "invariant: trivially true";
pub const VERDICT_IDENTICAL: &str = "bundle composition identical to jitter-free";
pub const VERDICT_DIFFERS: &str = "bundle composition differs from jitter-free";

pub fn cmd_sync_sim(out_dir: &Path, args: &SyncArgs) -> Result<SyncReport> {
    let cfg = TriggerConfig::new(args.cam_rate_hz, args.imu_rate_hz)?;
    let mut diag = Diagnostics::default();
    if args.jitter_ns >= cfg.cam_period_ns() {
        diag.warnings.push(format!(
            "jitter {} ns is not below the camera period {} ns",
            args.jitter_ns,
            cfg.cam_period_ns()
        ));
    }
    let stream = sync::generate_stream(&cfg, args.duration_s, args.jitter_ns, args.seed);
    let assembly = sync::assemble_bundles(&cfg, &stream)?;
    let clean = sync::assemble_bundles(&cfg, &sync::generate_stream(&cfg, args.duration_s, 0, args.seed))?;
    let identical = assembly.compositions() == clean.compositions();
    let verdict = match (args.jitter_ns, identical) {
        (0, _) => VERDICT_TRIVIAL,
        (_, true) => VERDICT_IDENTICAL,
        (_, false) => VERDICT_DIFFERS,
    };
    if !identical {
        diag.errors.push(VERDICT_DIFFERS.into());
    }

    let mut buf = Vec::new();
    sync::write_stream_csv(&stream, &mut buf)?;
    write_atomic(&out_dir.join("stream.csv"), &buf)?;
    buf.clear();
    sync::write_bundles_csv(&assembly, &mut buf)?;
    write_atomic(&out_dir.join("bundles.csv"), &buf)?;

    let naive = args.naive_seeds.map(|n| {
        (args.seed..args.seed.saturating_add(n.max(1))).find_map(|seed| {
            let s = sync::generate_stream(&cfg, args.duration_s, args.jitter_ns, seed);
            let bad = sync::naive_associate(&cfg, &s);
            bad.first().map(|&first| NaiveFinding {
                seed,
                first,
                count: bad.len(),
            })
        })
    });
    Ok(SyncReport {
        bundles: assembly.bundles.len(),
        incomplete: assembly.incomplete.len(),
        identical_to_jitter_free: identical,
        verdict: verdict.into(),
        naive,
        diagnostics: diag,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub resolution: String,
    pub stage: &'static str,
    pub samples: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Standard deviation of the per-repeat means.
    pub repeat_stddev_ms: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub diagnostics: Diagnostics,
}

impl BenchReport {
    /// FM mean over FE mean for one resolution.
    pub fn fm_fe_ratio(&self, resolution: &str) -> Option<f64> {
        let get = |stage| {
            self.rows
                .iter()
                .find(|r| r.resolution == resolution && r.stage == stage)
                .map(|r| r.mean_ms)
        };
        Some(get("FM")? / get("FE")?)
    }
}

pub const BENCH_HEADER: &str = "resolution,stage,samples,mean_ms,median_ms,repeat_stddev_ms";

#[derive(Debug, Clone)]
pub struct BenchArgs {
    /// Datasets to time; resolutions without one get synthetic frames.
    pub datasets: Vec<PathBuf>,
    pub resolutions: Vec<(usize, usize)>,
    pub frames: usize,
    pub repeats: usize,
}

impl Default for BenchArgs {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            resolutions: vec![(640, 480), (1280, 720)],
            frames: 5,
            repeats: 3,
        }
    }
}

fn summarize(resolution: &str, stage: &'static str, runs: &[Vec<f64>]) -> BenchRow {
    let mut all: Vec<f64> = runs.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let mean = all.iter().sum::<f64>() / all.len().max(1) as f64;
    let median = match all.len() {
        0 => 0.0,
        n if n % 2 == 1 => all[n / 2],
        n => (all[n / 2 - 1] + all[n / 2]) / 2.0,
    };
    let means: Vec<f64> = runs.iter().map(|r| r.iter().sum::<f64>() / r.len().max(1) as f64).collect();
    let mm = means.iter().sum::<f64>() / means.len().max(1) as f64;
    let var = means.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / means.len().max(1) as f64;
    BenchRow {
        resolution: resolution.into(),
        stage,
        samples: all.len(),
        mean_ms: mean,
        median_ms: median,
        repeat_stddev_ms: var.sqrt(),
    }
}

fn load_pairs(dir: &Path, limit: usize) -> Result<Vec<(GrayImage, GrayImage)>> {
    dataset::scan(dir)?
        .frames
        .iter()
        .take(limit)
        .map(|f| Ok((load_pgm(&f.left)?, load_pgm(&f.right)?)))
        .collect()
}

/// Wall time of FE (one image) and FM (one stereo frame), single-threaded.
pub fn cmd_bench(cfg: &RunConfig, args: &BenchArgs) -> Result<BenchReport> {
    let mut diag = Diagnostics::default();
    let mut sets: Vec<(String, Vec<(GrayImage, GrayImage)>)> = Vec::new();
    for d in &args.datasets {
        let pairs = load_pairs(d, args.frames)?;
        if let Some((l, _)) = pairs.first() {
            sets.push((format!("{}x{}", l.width(), l.height()), pairs));
        } else {
            diag.warnings.push(format!("{} has no frames", d.display()));
        }
    }
    for &(w, h) in &args.resolutions {
        let label = format!("{w}x{h}");
        if sets.iter().all(|(l, _)| *l != label) {
            let pairs = (0..args.frames)
                .map(|i| corpus::stereo_pair(w, h, corpus::DEFAULT_SHIFT, corpus::DEFAULT_CORPUS_SEED + i as u64))
                .collect();
            sets.push((label, pairs));
        }
    }
    let calib = cfg.calibration()?;
    let mut rows = Vec::new();
    for (label, pairs) in &sets {
        let mut fe_runs = Vec::new();
        let mut fm_runs = Vec::new();
        for _ in 0..args.repeats.max(1) {
            let (mut fe, mut fm) = (Vec::new(), Vec::new());
            for (l, r) in pairs {
                let t = Instant::now();
                let el = extract_image(l, &cfg.extractor)?;
                fe.push(t.elapsed().as_secs_f64() * 1e3);
                let t = Instant::now();
                let er = extract_image(r, &cfg.extractor)?;
                fe.push(t.elapsed().as_secs_f64() * 1e3);
                let t = Instant::now();
                match_stereo(&el, &er, &cfg.strip, calib.as_ref(), &cfg.matcher)?;
                fm.push(t.elapsed().as_secs_f64() * 1e3);
            }
            fe_runs.push(fe);
            fm_runs.push(fm);
        }
        rows.push(summarize(label, "FE", &fe_runs));
        rows.push(summarize(label, "FM", &fm_runs));
    }
    let mut csv = format!("{BENCH_HEADER}\n");
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{:.4},{:.4},{:.4}",
            r.resolution, r.stage, r.samples, r.mean_ms, r.median_ms, r.repeat_stddev_ms
        )?;
    }
    write_atomic(&cfg.output_dir.join("bench.csv"), csv.as_bytes())?;
    Ok(BenchReport { rows, diagnostics: diag })
}

/// Writes a synthetic stereo corpus plus `calib.txt` under `out_dir`.
pub fn cmd_gen_corpus(out_dir: &Path, spec: &CorpusSpec, calib: &StereoCalib) -> Result<Vec<String>> {
    let names = corpus::write_corpus(out_dir, spec)?;
    corpus::write_calibration(&out_dir.join("calib.txt"), calib.fx, calib.baseline)?;
    Ok(names)
}
