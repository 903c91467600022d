use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use orbfront::corpus::CorpusSpec;
use orbfront::matcher::StereoCalib;
use orbfront::ArithMode;
use orbfront_cli::{
    cmd_bench, cmd_compare, cmd_extract, cmd_gen_corpus, cmd_match, cmd_pipeline_sim, cmd_sync_sim, BenchArgs,
    Diagnostics, RunConfig, SyncArgs,
};

#[derive(Parser)]
#[command(name = "orbfront", version, about = "ORB stereo frontend toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract features from every frame of a stereo dataset.
    Extract(RunArgs),
    /// Extract and match every frame of a stereo dataset.
    Match(RunArgs),
    /// Compare two arithmetic modes over the same frames.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value = "float")]
        reference: ArithMode,
        #[arg(long, default_value = "fixed8")]
        candidate: ArithMode,
    },
    /// Discrete-event simulation of the frame-multiplexed pipeline.
    PipelineSim {
        #[arg(long, default_value_t = 7.28)]
        t_fe: f64,
        #[arg(long, default_value_t = 14.59)]
        t_fm: f64,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Trigger-tag synchronization simulation.
    SyncSim {
        #[arg(long, default_value_t = 30)]
        cam_rate: u32,
        #[arg(long, default_value_t = 120)]
        imu_rate: u32,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Maximum delivery delay in nanoseconds.
        #[arg(long, default_value_t = 0)]
        jitter: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also run the arrival-time baseline over this many seeds.
        #[arg(long)]
        naive: Option<u64>,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
    },
    /// Per-stage wall time at several resolutions.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Extra datasets, e.g. a 1280x720 one.
        #[arg(long = "dataset")]
        datasets: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        frames: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Write a synthetic shifted stereo corpus.
    GenCorpus {
        #[arg(long, default_value = "corpus")]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 640)]
        width: usize,
        #[arg(long, default_value_t = 480)]
        height: usize,
        #[arg(long, default_value_t = 12)]
        shift: u32,
        #[arg(long, default_value_t = 2021)]
        seed: u64,
        #[arg(long, default_value_t = 500.0)]
        fx: f64,
        #[arg(long, default_value_t = 0.1)]
        baseline: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Calibration file with `fx` and `baseline`.
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    arith_mode: Option<ArithMode>,
    #[arg(long)]
    fast_threshold: Option<u8>,
    #[arg(long)]
    max_features_per_level: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Any other config key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut o: Vec<(&str, String)> = Vec::new();
        let mut push = |k, v: Option<String>| {
            if let Some(v) = v {
                o.push((k, v));
            }
        };
        push("dataset_dir", self.dataset_dir.as_ref().map(|p| p.display().to_string()));
        push("output_dir", self.output_dir.as_ref().map(|p| p.display().to_string()));
        push("calib", self.calib.as_ref().map(|p| p.display().to_string()));
        push("arith_mode", self.arith_mode.map(|m| m.to_string()));
        push("fast_threshold", self.fast_threshold.map(|v| v.to_string()));
        push("max_features_per_level", self.max_features_per_level.map(|v| v.to_string()));
        push("threads", self.threads.map(|v| v.to_string()));
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
            o.push((k.trim(), v.trim().to_string()));
        }
        Ok(RunConfig::load(self.config.as_deref(), &o)?)
    }
}

fn report(d: &Diagnostics) -> ExitCode {
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    for e in &d.errors {
        eprintln!("error: {e}");
    }
    if d.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let code = match cli.command {
        Command::Extract(args) => {
            let r = cmd_extract(&args.load()?)?;
            let total: usize = r.rows.iter().map(|x| x.left_features + x.right_features).sum();
            println!("extracted {} frames, {total} features", r.rows.len());
            report(&r.diagnostics)
        }
        Command::Match(args) => {
            let r = cmd_match(&args.load()?)?;
            let pairs: usize = r.rows.iter().map(|x| x.pairs).sum();
            let eff: usize = r.rows.iter().map(|x| x.effective_depths).sum();
            println!("matched {} frames, {pairs} pairs, {eff} effective depths", r.rows.len());
            report(&r.diagnostics)
        }
        Command::Compare {
            run,
            frames,
            reference,
            candidate,
        } => {
            let r = cmd_compare(&run.load()?, frames, reference, candidate)?;
            println!("{} vs {} over {} frames", r.reference, r.candidate, r.frames_used);
            println!("{:<18} {:>12} {:>12} {:>10}", "metric", r.reference.to_string(), r.candidate.to_string(), "rel_err");
            for m in &r.rows {
                println!(
                    "{:<18} {:>12.2} {:>12.2} {:>9.3}%",
                    m.metric,
                    m.reference_mean,
                    m.candidate_mean,
                    m.relative_error * 100.0
                );
            }
            report(&r.diagnostics)
        }
        Command::PipelineSim {
            t_fe,
            t_fm,
            frames,
            chains,
            output_dir,
        } => {
            let r = cmd_pipeline_sim(&output_dir, t_fe, t_fm, frames, chains)?;
            println!("throughput {:.3} fps (period {:.3} ms)", r.fps, r.period_ms);
            println!(
                "latency min {:.3} / mean {:.3} / max {:.3} ms",
                r.latency.min_ms, r.latency.mean_ms, r.latency.max_ms
            );
            println!("trace written to {}", r.trace_path.display());
            ExitCode::SUCCESS
        }
        Command::SyncSim {
            cam_rate,
            imu_rate,
            duration,
            jitter,
            seed,
            naive,
            output_dir,
        } => {
            let args = SyncArgs {
                cam_rate_hz: cam_rate,
                imu_rate_hz: imu_rate,
                duration_s: duration,
                jitter_ns: jitter,
                seed,
                naive_seeds: naive,
            };
            let r = cmd_sync_sim(&output_dir, &args)?;
            println!("{} bundles, {} incomplete", r.bundles, r.incomplete);
            println!("verdict: {}", r.verdict);
            match r.naive {
                Some(Some(f)) => println!(
                    "naive association: {} mis-associations at seed {}, first {} tag {} at {} ns (bundle {} -> {})",
                    f.count,
                    f.seed,
                    f.first.sensor,
                    f.first.tag,
                    f.first.arrival_ns,
                    f.first.true_bundle,
                    f.first.assigned_bundle
                ),
                Some(None) => println!("naive association: no mis-association found"),
                None => {}
            }
            report(&r.diagnostics)
        }
        Command::Bench {
            run,
            datasets,
            frames,
            repeats,
        } => {
            let cfg = run.load()?;
            let args = BenchArgs {
                datasets,
                frames,
                repeats,
                ..BenchArgs::default()
            };
            let r = cmd_bench(&cfg, &args)?;
            println!("{:<10} {:<5} {:>7} {:>10} {:>10} {:>10}", "res", "stage", "n", "mean_ms", "median_ms", "sd_ms");
            for row in &r.rows {
                println!(
                    "{:<10} {:<5} {:>7} {:>10.3} {:>10.3} {:>10.3}",
                    row.resolution, row.stage, row.samples, row.mean_ms, row.median_ms, row.repeat_stddev_ms
                );
            }
            let mut labels: Vec<&str> = r.rows.iter().map(|x| x.resolution.as_str()).collect();
            labels.dedup();
            for l in labels {
                if let Some(ratio) = r.fm_fe_ratio(l) {
                    println!("{l}: FM/FE = {ratio:.3}");
                }
            }
            report(&r.diagnostics)
        }
        Command::GenCorpus {
            output_dir,
            frames,
            width,
            height,
            shift,
            seed,
            fx,
            baseline,
        } => {
            let spec = CorpusSpec {
                width,
                height,
                frames,
                shift,
                seed,
            };
            let names = cmd_gen_corpus(&output_dir, &spec, &StereoCalib::new(fx, baseline)?)?;
            println!("wrote {} stereo frames to {}", names.len(), output_dir.display());
            ExitCode::SUCCESS
        }
    };
    Ok(code)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
