//! Discrete-event model of the frame-multiplexed extraction/matching
//! pipeline.
//!
//! Each chain owns one feature-extraction (FE) unit shared by the left and
//! right camera, one feature-matching (FM) unit and a single-frame buffer
//! between them. FE processes the left image and then the right image of a
//! frame and deposits the result in the buffer. FM takes a frame out of the
//! buffer as soon as it is idle. FE may begin the next frame only once the
//! buffer is free again, i.e. when FM has started on the previous frame.
//! Under these rules the steady-state frame period is `max(2·t_fe, t_fm)`.
//!
//! Time is kept in integer nanoseconds.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

/// Frames discarded from the front of a trace before measuring throughput.
pub const WARMUP_FRAMES: usize = 3;
/// Minimum trace length accepted by [`throughput`].
pub const MIN_THROUGHPUT_FRAMES: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("invalid latency: {0}")]
    Latency(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StageLatency {
    /// Extraction time for one image.
    pub fe_ns: u64,
    /// Matching time for one stereo frame.
    pub fm_ns: u64,
}

impl StageLatency {
    pub fn from_ns(fe_ns: u64, fm_ns: u64) -> Result<Self, PipelineError> {
        if fe_ns == 0 || fm_ns == 0 {
            return Err(PipelineError::Latency(format!(
                "both stages must take positive time (fe = {fe_ns} ns, fm = {fm_ns} ns)"
            )));
        }
        Ok(Self { fe_ns, fm_ns })
    }

    /// Milliseconds, rounded to the nearest nanosecond.
    pub fn from_ms(t_fe: f64, t_fm: f64) -> Result<Self, PipelineError> {
        let to_ns = |ms: f64, name: &str| {
            if !(ms > 0.0) || !ms.is_finite() {
                return Err(PipelineError::Latency(format!("{name} = {ms} ms must be positive")));
            }
            Ok((ms * 1e6).round() as u64)
        };
        Self::from_ns(to_ns(t_fe, "t_fe")?, to_ns(t_fm, "t_fm")?)
    }

    /// max(2·t_fe, t_fm).
    pub fn expected_period_ns(&self) -> u64 {
        (2 * self.fe_ns).max(self.fm_ns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    FeLeft,
    FeRight,
    Fm,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::FeLeft => "FE_L",
            Stage::FeRight => "FE_R",
            Stage::Fm => "FM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub chain: u8,
    pub frame: u32,
    pub stage: Stage,
    pub start_ns: u64,
    pub end_ns: u64,
}

/// Completed stage executions ordered by (chain, frame, stage).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PipelineTrace {
    pub events: Vec<TraceEvent>,
    pub frames: usize,
    pub chains: usize,
    pub latency: StageLatency,
}

impl PipelineTrace {
    pub fn event(&self, chain: usize, frame: usize, stage: Stage) -> &TraceEvent {
        let per_chain = self.frames * 3;
        let idx = chain * per_chain + frame * 3 + stage as usize;
        &self.events[idx]
    }

    fn fm_ends(&self, chain: usize) -> Vec<u64> {
        (0..self.frames).map(|f| self.event(chain, f, Stage::Fm).end_ns).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Completion {
    Fe { chain: usize, frame: usize, stage: Stage },
    Fm { chain: usize, frame: usize },
}

#[derive(Debug, Default)]
struct ChainState {
    fe_busy: bool,
    fm_busy: bool,
    /// Next frame FE will start.
    next_frame: usize,
    /// Frame sitting in the FE→FM buffer.
    buffer: Option<usize>,
    /// FE has finished the left image of this frame and owes the right one.
    right_pending: Option<usize>,
}

struct Engine {
    latency: StageLatency,
    frames: usize,
    queue: BinaryHeap<Reverse<(u64, Completion)>>,
    chains: Vec<ChainState>,
    starts: Vec<Vec<[u64; 3]>>,
    ends: Vec<Vec<[u64; 3]>>,
}

impl Engine {
    fn begin(&mut self, now: u64, chain: usize, frame: usize, stage: Stage) {
        let duration = match stage {
            Stage::FeLeft | Stage::FeRight => self.latency.fe_ns,
            Stage::Fm => self.latency.fm_ns,
        };
        self.starts[chain][frame][stage as usize] = now;
        let done = match stage {
            Stage::Fm => Completion::Fm { chain, frame },
            _ => Completion::Fe { chain, frame, stage },
        };
        self.queue.push(Reverse((now + duration, done)));
    }

    /// Starts whatever can start on `chain` at `now`. FM goes first so a
    /// buffer it drains is immediately available to FE.
    fn dispatch(&mut self, now: u64, chain: usize) {
        let st = &mut self.chains[chain];
        let mut launches = Vec::with_capacity(2);
        if !st.fm_busy {
            if let Some(frame) = st.buffer.take() {
                st.fm_busy = true;
                launches.push((frame, Stage::Fm));
            }
        }
        if !st.fe_busy {
            if let Some(frame) = st.right_pending.take() {
                st.fe_busy = true;
                launches.push((frame, Stage::FeRight));
            } else if st.buffer.is_none() && st.next_frame < self.frames {
                st.fe_busy = true;
                launches.push((st.next_frame, Stage::FeLeft));
                st.next_frame += 1;
            }
        }
        for (frame, stage) in launches {
            self.begin(now, chain, frame, stage);
        }
    }

    fn run(&mut self) {
        for chain in 0..self.chains.len() {
            self.dispatch(0, chain);
        }
        while let Some(Reverse((now, done))) = self.queue.pop() {
            let chain = match done {
                Completion::Fe { chain, frame, stage } => {
                    self.ends[chain][frame][stage as usize] = now;
                    let st = &mut self.chains[chain];
                    st.fe_busy = false;
                    match stage {
                        Stage::FeLeft => st.right_pending = Some(frame),
                        _ => {
                            debug_assert!(st.buffer.is_none(), "FE started while buffer full");
                            st.buffer = Some(frame);
                        }
                    }
                    chain
                }
                Completion::Fm { chain, frame } => {
                    self.ends[chain][frame][Stage::Fm as usize] = now;
                    self.chains[chain].fm_busy = false;
                    chain
                }
            };
            self.dispatch(now, chain);
        }
    }
}

/// Simulates `frames` stereo frames on `chains` independent FE/FM chains.
pub fn simulate(latency: StageLatency, frames: usize, chains: usize) -> Result<PipelineTrace, PipelineError> {
    if frames == 0 {
        return Err(PipelineError::Precondition("at least one frame is required".into()));
    }
    if !(1..=2).contains(&chains) {
        return Err(PipelineError::Precondition(format!("chains must be 1 or 2, got {chains}")));
    }
    let mut engine = Engine {
        latency,
        frames,
        queue: BinaryHeap::new(),
        chains: (0..chains).map(|_| ChainState::default()).collect(),
        starts: vec![vec![[0; 3]; frames]; chains],
        ends: vec![vec![[0; 3]; frames]; chains],
    };
    engine.run();
    let mut events = Vec::with_capacity(chains * frames * 3);
    for chain in 0..chains {
        for frame in 0..frames {
            for stage in [Stage::FeLeft, Stage::FeRight, Stage::Fm] {
                events.push(TraceEvent {
                    chain: chain as u8,
                    frame: frame as u32,
                    stage,
                    start_ns: engine.starts[chain][frame][stage as usize],
                    end_ns: engine.ends[chain][frame][stage as usize],
                });
            }
        }
    }
    Ok(PipelineTrace {
        events,
        frames,
        chains,
        latency,
    })
}

/// Per-chain steady-state frame rate: 1000 / mean FM completion gap (ms)
/// after discarding the first [`WARMUP_FRAMES`] frames.
pub fn throughput_per_chain(trace: &PipelineTrace) -> Result<Vec<f64>, PipelineError> {
    if trace.frames < MIN_THROUGHPUT_FRAMES {
        return Err(PipelineError::Precondition(format!(
            "throughput needs at least {MIN_THROUGHPUT_FRAMES} frames, trace has {}",
            trace.frames
        )));
    }
    Ok((0..trace.chains)
        .map(|chain| {
            let ends = trace.fm_ends(chain);
            let steady = &ends[WARMUP_FRAMES..];
            let span_ns = steady[steady.len() - 1] - steady[0];
            let mean_gap_ms = span_ns as f64 / 1e6 / (steady.len() - 1) as f64;
            1000.0 / mean_gap_ms
        })
        .collect())
}

/// Frames per second of the slowest chain.
pub fn throughput(trace: &PipelineTrace) -> Result<f64, PipelineError> {
    Ok(throughput_per_chain(trace)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// Steady-state FM completion gap of chain 0 in nanoseconds, if it is
/// constant after the first frame.
pub fn steady_period_ns(trace: &PipelineTrace) -> Option<u64> {
    let ends = trace.fm_ends(0);
    if ends.len() < 2 {
        return None;
    }
    let gap = ends[1] - ends[0];
    ends.windows(2).all(|w| w[1] - w[0] == gap).then_some(gap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    /// FM end − FE_L start per frame, chain 0, in ms.
    pub per_frame_ms: Vec<f64>,
    pub min_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
}

/// End-to-end latency statistics over every frame of every chain.
pub fn latency_report(trace: &PipelineTrace) -> LatencyReport {
    let mut all = Vec::with_capacity(trace.frames * trace.chains);
    for chain in 0..trace.chains {
        for frame in 0..trace.frames {
            let start = trace.event(chain, frame, Stage::FeLeft).start_ns;
            let end = trace.event(chain, frame, Stage::Fm).end_ns;
            all.push((end - start) as f64 / 1e6);
        }
    }
    let min_ms = all.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ms = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean_ms = all.iter().sum::<f64>() / all.len() as f64;
    all.truncate(trace.frames);
    LatencyReport {
        per_frame_ms: all,
        min_ms,
        mean_ms,
        max_ms,
    }
}

fn fmt_ms(ns: u64) -> String {
    format!("{}.{:06}", ns / 1_000_000, ns % 1_000_000)
}

pub const TRACE_CSV_HEADER: &str = "chain,frame,stage,start_ms,end_ms";

pub fn write_trace_csv(trace: &PipelineTrace, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for e in &trace.events {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.chain,
            e.frame,
            e.stage,
            fmt_ms(e.start_ns),
            fmt_ms(e.end_ns)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(fe: f64, fm: f64, frames: usize, chains: usize) -> PipelineTrace {
        simulate(StageLatency::from_ms(fe, fm).unwrap(), frames, chains).unwrap()
    }

    #[test]
    fn first_frame_is_unpipelined() {
        let t = sim(7.28, 14.59, 1, 1);
        let r = latency_report(&t);
        assert_eq!(t.event(0, 0, Stage::Fm).end_ns, 2 * 7_280_000 + 14_590_000);
        assert!((r.max_ms - 29.15).abs() < 1e-9);
    }

    #[test]
    fn fm_bound_schedule() {
        let t = sim(1.0, 10.0, 20, 1);
        assert_eq!(steady_period_ns(&t), Some(10_000_000));
        // FE of frame N+1 fires when FM of frame N starts.
        for n in 0..19 {
            assert_eq!(
                t.event(0, n + 1, Stage::FeLeft).start_ns,
                t.event(0, n, Stage::Fm).start_ns
            );
        }
        // FE busy 2 ms out of every 10.
        let e = t.event(0, 5, Stage::FeRight).end_ns;
        assert_eq!(t.event(0, 6, Stage::FeLeft).start_ns - e, 8_000_000);
    }

    #[test]
    fn fe_bound_schedule() {
        let t = sim(5.0, 0.001, 30, 1);
        assert_eq!(steady_period_ns(&t), Some(10_000_000));
        assert!((throughput(&t).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn paper_latencies() {
        let t = sim(7.28, 14.59, 100, 1);
        assert_eq!(steady_period_ns(&t), Some(14_590_000));
        let fps = throughput(&t).unwrap();
        assert!((fps - 1000.0 / 14.59).abs() < 1e-9);
        assert!((68.0..=69.0).contains(&fps));
        // Steady state: FM(N) ends one period plus t_fm after FE_L(N) starts.
        let r = latency_report(&t);
        assert!((r.per_frame_ms[50] - 29.18).abs() < 1e-9);
        assert!((r.min_ms - 29.15).abs() < 1e-9);
    }

    #[test]
    fn doubling_latency_halves_fps() {
        let a = throughput(&sim(3.0, 7.0, 40, 1)).unwrap();
        let b = throughput(&sim(6.0, 14.0, 40, 1)).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chains_are_independent() {
        let one = sim(7.28, 14.59, 30, 1);
        let two = sim(7.28, 14.59, 30, 2);
        let per = throughput_per_chain(&two).unwrap();
        assert_eq!(per[0], per[1]);
        assert_eq!(per[0], throughput(&one).unwrap());
        assert_eq!(&two.events[..90], &one.events[..]);
    }

    #[test]
    fn preconditions() {
        assert!(StageLatency::from_ms(0.0, 1.0).is_err());
        assert!(StageLatency::from_ms(1.0, -1.0).is_err());
        assert!(StageLatency::from_ms(f64::NAN, 1.0).is_err());
        let lat = StageLatency::from_ms(1.0, 1.0).unwrap();
        assert!(simulate(lat, 0, 1).is_err());
        assert!(simulate(lat, 5, 3).is_err());
        assert!(throughput(&simulate(lat, 9, 1).unwrap()).is_err());
    }

    #[test]
    fn csv_export() {
        let t = sim(1.0, 2.5, 1, 1);
        let mut buf = Vec::new();
        write_trace_csv(&t, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "chain,frame,stage,start_ms,end_ms\n\
             0,0,FE_L,0.000000,1.000000\n\
             0,0,FE_R,1.000000,2.000000\n\
             0,0,FM,2.000000,4.500000\n"
        );
    }
}
