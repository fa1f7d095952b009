//! Prequential (test-then-train) evaluation with random label sub-sampling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Example, IngestError, Normalized};
use crate::learner::{LearnError, Learner, LearnerSpec, Variant};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sampling rate must lie in (0, 1], got {0}")]
    InvalidRate(f64),
    #[error("the stream contains no usable example")]
    EmptyStream,
    #[error("{skipped} of {total} records could not be parsed (more than 1%)")]
    TooManySkipped { skipped: u64, total: u64 },
    #[error(transparent)]
    Data(IngestError),
    #[error("learner failed at stream position {step}: {source}")]
    Learner {
        step: u64,
        #[source]
        source: LearnError,
    },
}

/// Derives an independent seed for one consumer of a run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

const MASK_STREAM: u64 = 1;
const LEARNER_STREAM: u64 = 2;

/// Seed handed to the learner of a run with seed `seed`.
pub fn learner_seed(seed: u64) -> u64 {
    derive_seed(seed, LEARNER_STREAM)
}

/// Decides which examples are used for training. Depends only on the run
/// seed, so every learner sees the same mask.
#[derive(Debug, Clone)]
pub struct SubSampler {
    rng: ChaCha8Rng,
    rate: f64,
}

impl SubSampler {
    pub fn new(seed: u64, rate: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(MASK_STREAM);
        SubSampler { rng, rate }
    }

    pub fn draw(&mut self) -> bool {
        self.rng.random::<f64>() < self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub accuracy: f64,
    pub model_size: usize,
}

/// Trace spacing that keeps about a thousand points for a stream of
/// `total` examples.
pub fn trace_interval(total: u64) -> u64 {
    total.div_ceil(1000).max(1)
}

/// Running online accuracy `M_t = (1 - 1/t)·M_{t-1} + (1/t)·1{correct}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrequentialTracker {
    step: u64,
    accuracy: f64,
    trace_every: u64,
    trace: Vec<TracePoint>,
}

impl PrequentialTracker {
    /// `trace_every = 0` disables the trace.
    pub fn new(trace_every: u64) -> Self {
        PrequentialTracker {
            step: 0,
            accuracy: 0.0,
            trace_every,
            trace: Vec::new(),
        }
    }

    pub fn record(&mut self, correct: bool, model_size: usize) {
        self.step += 1;
        let t = self.step as f64;
        self.accuracy = (1.0 - 1.0 / t) * self.accuracy + f64::from(u8::from(correct)) / t;
        if self.trace_every > 0 && self.step.is_multiple_of(self.trace_every) {
            self.trace.push(TracePoint {
                step: self.step,
                accuracy: self.accuracy,
                model_size,
            });
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    pub fn trace(&self) -> &[TracePoint] {
        &self.trace
    }

    fn into_trace(self) -> Vec<TracePoint> {
        self.trace
    }
}

/// Plain mean of a correctness sequence.
pub fn batch_accuracy(correct: &[bool]) -> f64 {
    if correct.is_empty() {
        return 0.0;
    }
    correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub normalize: bool,
    pub learner: LearnerSpec,
    /// Steps between trace points; 0 disables the trace.
    #[serde(default)]
    pub trace_every: u64,
}

impl RunConfig {
    pub fn new(learner: LearnerSpec, rate: f64, seed: u64) -> Self {
        RunConfig {
            rate,
            seed,
            normalize: false,
            learner,
            trace_every: 0,
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.rate > 0.0 && self.rate <= 1.0 {
            Ok(())
        } else {
            Err(EvalError::InvalidRate(self.rate))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub final_accuracy: f64,
    pub model_size: usize,
    /// Largest ball count seen after any update.
    pub max_model_size: usize,
    pub steps: u64,
    pub updates: u64,
    pub skipped: u64,
    pub dropped_zero: u64,
    /// FNV-1a digest of the training mask.
    pub mask_digest: u64,
    pub trace: Vec<TracePoint>,
}

struct MaskDigest(u64);

impl MaskDigest {
    fn new() -> Self {
        MaskDigest(0xcbf2_9ce4_8422_2325)
    }

    fn push(&mut self, bit: bool) {
        self.0 ^= u64::from(bit);
        self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
    }
}

/// Builds the learner from `cfg` and runs the protocol.
pub fn run_prequential<I>(cfg: &RunConfig, stream: I) -> Result<RunReport, EvalError>
where
    I: IntoIterator<Item = Result<Example, IngestError>>,
{
    cfg.validate()?;
    let mut learner = cfg
        .learner
        .build(learner_seed(cfg.seed))
        .map_err(|source| EvalError::Learner { step: 0, source })?;
    run_with_learner(&mut learner, cfg, stream)
}

/// Runs the protocol with a caller-supplied learner; `cfg.learner` is
/// ignored.
pub fn run_with_learner<L, I>(
    learner: &mut L,
    cfg: &RunConfig,
    stream: I,
) -> Result<RunReport, EvalError>
where
    L: Learner + ?Sized,
    I: IntoIterator<Item = Result<Example, IngestError>>,
{
    cfg.validate()?;
    if cfg.normalize {
        let mut normalized = Normalized::new(stream.into_iter());
        let mut report = drive(learner, cfg, &mut normalized)?;
        report.dropped_zero = normalized.dropped();
        Ok(report)
    } else {
        drive(learner, cfg, &mut stream.into_iter())
    }
}

fn drive<L, I>(learner: &mut L, cfg: &RunConfig, stream: &mut I) -> Result<RunReport, EvalError>
where
    L: Learner + ?Sized,
    I: Iterator<Item = Result<Example, IngestError>>,
{
    let mut mask = SubSampler::new(cfg.seed, cfg.rate);
    let mut digest = MaskDigest::new();
    let mut tracker = PrequentialTracker::new(cfg.trace_every);
    let (mut records, mut skipped, mut updates, mut max_size) =
        (0u64, 0u64, 0u64, learner.model_size());

    for item in stream {
        records += 1;
        let (x, y) = match item {
            Ok(e) => e,
            Err(e) if e.is_record() => {
                skipped += 1;
                log::warn!("skipping record: {e}");
                continue;
            }
            Err(e) => return Err(EvalError::Data(e)),
        };
        let correct = learner.predict(&x) == Some(y);
        let train = mask.draw();
        digest.push(train);
        if train {
            learner.update(&x, y).map_err(|source| EvalError::Learner {
                step: records,
                source,
            })?;
            updates += 1;
            max_size = max_size.max(learner.model_size());
        }
        tracker.record(correct, learner.model_size());
    }

    if skipped * 100 > records {
        return Err(EvalError::TooManySkipped {
            skipped,
            total: records,
        });
    }
    if tracker.step() == 0 {
        return Err(EvalError::EmptyStream);
    }
    Ok(RunReport {
        final_accuracy: tracker.accuracy(),
        model_size: learner.model_size(),
        max_model_size: max_size,
        steps: tracker.step(),
        updates,
        skipped,
        dropped_zero: 0,
        mask_digest: digest.0,
        trace: tracker.into_trace(),
    })
}

/// Every variant crossed with every rate, all sharing `seed`.
pub fn grid(
    variants: &[Variant],
    rates: &[f64],
    seed: u64,
    template: &RunConfig,
) -> Vec<RunConfig> {
    let mut out = Vec::with_capacity(variants.len() * rates.len());
    for &rate in rates {
        for &v in variants {
            let mut cfg = template.clone();
            cfg.learner.variant = v;
            cfg.rate = rate;
            cfg.seed = seed;
            out.push(cfg);
        }
    }
    out
}

/// Runs independent configurations in parallel. Results keep the order of
/// `cfgs`; `open` supplies a fresh stream for each run.
pub fn sweep<F, I>(cfgs: &[RunConfig], open: F) -> Vec<Result<RunReport, EvalError>>
where
    F: Fn(&RunConfig) -> Result<I, EvalError> + Sync,
    I: IntoIterator<Item = Result<Example, IngestError>>,
{
    cfgs.par_iter()
        .map(|cfg| run_prequential(cfg, open(cfg)?))
        .collect()
}
