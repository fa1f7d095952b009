//! Reproducible experiment runs: a serializable spec in, result tables out.
//!
//! Every CSV written here starts with a `# spec:` line holding the JSON of
//! the experiment settings that produced it, so any result file can be replayed.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ball::BallRecord;
use crate::eval::{
    learner_seed, run_with_learner, trace_interval, EvalError, RunConfig, RunReport, TracePoint,
};
use crate::ingest::{
    scan_libsvm, CsvSchema, CsvSource, Example, IngestError, LabelColumn, LibsvmSource,
};
use crate::learner::{LearnError, LearnerSpec, Variant};
use crate::synth::{Generator, SynthKind};

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Usage(_) => 1,
            ExperimentError::Data(_) => 2,
            ExperimentError::Internal(_) => 3,
        }
    }
}

impl From<EvalError> for ExperimentError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidRate(_) => ExperimentError::Usage(e.to_string()),
            EvalError::Learner { step: 0, .. } => ExperimentError::Usage(e.to_string()),
            EvalError::Learner {
                source: LearnError::NonBinaryLabel(_),
                ..
            } => ExperimentError::Data(e.to_string()),
            EvalError::Learner { .. } => ExperimentError::Internal(e.to_string()),
            EvalError::EmptyStream | EvalError::TooManySkipped { .. } | EvalError::Data(_) => {
                ExperimentError::Data(e.to_string())
            }
        }
    }
}

impl From<IngestError> for ExperimentError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Schema(_) => ExperimentError::Usage(e.to_string()),
            _ => ExperimentError::Data(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Usage(msg.into())
}

/// Where the examples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSpec {
    Synth {
        #[serde(flatten)]
        generator: Generator,
        n: u64,
    },
    Libsvm {
        path: PathBuf,
        /// Feature dimension; found by a pre-pass when absent.
        #[serde(default)]
        dim: Option<usize>,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: Option<PathBuf>,
        #[serde(default)]
        label: LabelColumn,
        /// Columns to one-hot encode with dictionaries from a pre-pass.
        #[serde(default)]
        categorical: Vec<String>,
    },
}

impl DataSpec {
    /// Parses `synth:<generator>`, `libsvm:<path>` or `csv:<path>`. A bare
    /// path is read as CSV when it ends in `.csv` and as LIBSVM otherwise.
    /// Synthetic sources start with default parameters and `n = 10000`.
    pub fn parse(s: &str, seed: u64) -> Result<Self, ExperimentError> {
        if let Some(name) = s.strip_prefix("synth:") {
            let kind = SynthKind::by_name(name).ok_or_else(|| {
                usage(format!(
                    "unknown generator `{name}` (expected one of {})",
                    SynthKind::NAMES.join(", ")
                ))
            })?;
            return Ok(DataSpec::Synth {
                generator: Generator::new(kind, seed, 0.0),
                n: 10_000,
            });
        }
        let (kind, path) = match s.split_once(':') {
            Some(("libsvm", p)) => ("libsvm", p),
            Some(("csv", p)) => ("csv", p),
            _ if s.ends_with(".csv") => ("csv", s),
            _ => ("libsvm", s),
        };
        let path = PathBuf::from(path);
        Ok(if kind == "csv" {
            DataSpec::Csv {
                path,
                schema: None,
                label: LabelColumn::default(),
                categorical: Vec::new(),
            }
        } else {
            DataSpec::Libsvm { path, dim: None }
        })
    }

    /// Short dataset name for result tables.
    pub fn name(&self) -> String {
        match self {
            DataSpec::Synth { generator, .. } => generator.kind.name().to_owned(),
            DataSpec::Libsvm { path, .. } | DataSpec::Csv { path, .. } => {
                path.file_stem().map_or_else(
                    || path.display().to_string(),
                    |s| s.to_string_lossy().into_owned(),
                )
            }
        }
    }

    fn check_paths(&self) -> Result<(), ExperimentError> {
        let mut paths: Vec<&Path> = Vec::new();
        match self {
            DataSpec::Synth { generator, n } => {
                if *n == 0 {
                    return Err(usage("synthetic stream length must be positive"));
                }
                generator.stream(0).map_err(usage)?;
            }
            DataSpec::Libsvm { path, .. } => paths.push(path),
            DataSpec::Csv { path, schema, .. } => {
                paths.push(path);
                paths.extend(schema.as_deref());
            }
        }
        for p in paths {
            if !p.is_file() {
                return Err(usage(format!("no such data file: {}", p.display())));
            }
        }
        Ok(())
    }
}

/// A data source made ready to stream: dimensions and schemas resolved.
pub struct PreparedData {
    spec: DataSpec,
    len: u64,
    libsvm_dim: usize,
    schema: Option<CsvSchema>,
}

pub type ExampleStream = Box<dyn Iterator<Item = Result<Example, IngestError>> + Send>;

impl PreparedData {
    pub fn prepare(spec: &DataSpec) -> Result<Self, ExperimentError> {
        spec.check_paths()?;
        let mut prepared = PreparedData {
            spec: spec.clone(),
            len: 0,
            libsvm_dim: 0,
            schema: None,
        };
        match spec {
            DataSpec::Synth { n, .. } => prepared.len = *n,
            DataSpec::Libsvm { path, dim } => {
                let scan = scan_libsvm(path)?;
                if let Some(d) = dim {
                    if *d < scan.max_index {
                        return Err(usage(format!(
                            "declared dimension {d} is below the largest feature index {}",
                            scan.max_index
                        )));
                    }
                }
                prepared.len = scan.records;
                prepared.libsvm_dim = dim.unwrap_or(scan.max_index).max(1);
            }
            DataSpec::Csv {
                path,
                schema,
                label,
                categorical,
            } => {
                let mut s = match schema {
                    Some(p) => CsvSchema::from_json_file(p)?,
                    None => CsvSchema::prepass(path, label.clone(), categorical)?,
                };
                if schema.is_some() && !categorical.is_empty() {
                    let extra = CsvSchema::prepass(path, s.label.clone(), categorical)?;
                    s.categorical.extend(extra.categorical);
                }
                // counting pass; also surfaces header problems early
                let src = CsvSource::open(path, &s)?;
                prepared.len = src.count() as u64;
                prepared.schema = Some(s);
            }
        }
        Ok(prepared)
    }

    /// Declared stream length (records in the file, or `n` for synthetic
    /// data).
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn open(&self) -> Result<ExampleStream, ExperimentError> {
        Ok(match &self.spec {
            DataSpec::Synth { generator, n } => {
                Box::new(generator.stream(*n).map_err(usage)?.map(Ok))
            }
            DataSpec::Libsvm { path, .. } => Box::new(LibsvmSource::open(path, self.libsvm_dim)?),
            DataSpec::Csv { path, .. } => Box::new(CsvSource::open(
                path,
                self.schema.as_ref().expect("schema resolved"),
            )?),
        })
    }
}

/// Ball budget, absolute or as a fraction of the stream length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Balls(usize),
    Fraction(f64),
}

impl Budget {
    pub fn resolve(self, stream_len: u64) -> Result<usize, ExperimentError> {
        match self {
            Budget::Balls(0) => Err(usage("budget must be at least one ball")),
            Budget::Balls(b) => Ok(b),
            Budget::Fraction(f) if f > 0.0 && f <= 1.0 => {
                Ok(((f * stream_len as f64).ceil() as usize).max(1))
            }
            Budget::Fraction(f) => Err(usage(format!(
                "budget fraction must lie in (0, 1], got {f}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub data: DataSpec,
    pub variant: Variant,
    pub c_hat: f64,
    pub d_hat: f64,
    pub rate: f64,
    #[serde(default)]
    pub budget: Option<Budget>,
    pub seed: u64,
    #[serde(default)]
    pub normalize: bool,
    /// Binary randomized predictor (BASE only).
    #[serde(default)]
    pub binary: bool,
}

impl ExperimentSpec {
    pub fn new(data: DataSpec, variant: Variant) -> Self {
        ExperimentSpec {
            data,
            variant,
            c_hat: 1.0,
            d_hat: 2.0,
            rate: 1.0,
            budget: None,
            seed: 0,
            normalize: false,
            binary: false,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(usage(format!("rate must lie in (0, 1], got {}", self.rate)));
        }
        if self.budget.is_some() && self.variant != Variant::AutoAdj {
            return Err(usage("a budget requires --variant auto-adj"));
        }
        Ok(())
    }

    fn run_config(&self, max_balls: Option<usize>, trace_every: u64) -> RunConfig {
        let mut learner = LearnerSpec::new(self.variant);
        learner.c_hat = self.c_hat;
        learner.d_hat = self.d_hat;
        learner.binary = self.binary;
        learner.max_balls = max_balls;
        RunConfig {
            rate: self.rate,
            seed: self.seed,
            normalize: self.normalize,
            learner,
            trace_every,
        }
    }
}

/// One line of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub variant: Variant,
    pub rate: f64,
    pub budget: Option<usize>,
    pub seed: u64,
    pub final_accuracy: f64,
    pub final_model_size: usize,
    pub model_size_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    #[serde(flatten)]
    pub row: ResultRow,
    pub steps: u64,
    pub updates: u64,
    pub skipped: u64,
    pub max_model_size: usize,
    pub trace: Vec<TracePoint>,
    #[serde(skip)]
    pub balls: Vec<BallRecord>,
}

/// Runs one experiment on already prepared data.
pub fn run_prepared(
    spec: &ExperimentSpec,
    data: &PreparedData,
) -> Result<RunOutput, ExperimentError> {
    spec.validate()?;
    let max_balls = spec.budget.map(|b| b.resolve(data.len())).transpose()?;
    let cfg = spec.run_config(max_balls, trace_interval(data.len()));
    let mut learner = cfg
        .learner
        .build(learner_seed(cfg.seed))
        .map_err(|e| usage(e.to_string()))?;
    let report: RunReport = run_with_learner(&mut learner, &cfg, data.open()?)?;
    let check = learner.model().index().check_invariants();
    if let Err(msg) = check {
        return Err(ExperimentError::Internal(format!(
            "center index corrupted: {msg}"
        )));
    }
    if let Some(b) = max_balls {
        if report.max_model_size > b {
            return Err(ExperimentError::Internal(format!(
                "model grew to {} balls with a budget of {b}",
                report.max_model_size
            )));
        }
    }
    Ok(RunOutput {
        row: ResultRow {
            dataset: spec.data.name(),
            variant: spec.variant,
            rate: spec.rate,
            budget: max_balls,
            seed: spec.seed,
            final_accuracy: report.final_accuracy,
            final_model_size: report.model_size,
            model_size_fraction: report.model_size as f64 / report.steps as f64,
        },
        steps: report.steps,
        updates: report.updates,
        skipped: report.skipped,
        max_model_size: report.max_model_size,
        trace: report.trace,
        balls: learner.model().dump_records(),
    })
}

pub fn run(spec: &ExperimentSpec) -> Result<RunOutput, ExperimentError> {
    spec.validate()?;
    run_prepared(spec, &PreparedData::prepare(&spec.data)?)
}

/// A grid of runs: every rate, variant and seed around a base spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ExperimentSpec,
    pub variants: Vec<Variant>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    /// The individual runs, ordered by rate, then seed, then variant.
    /// Variants of one (rate, seed) cell share the seed and hence the
    /// sub-sampling mask.
    pub fn expand(&self) -> Vec<ExperimentSpec> {
        let mut out = Vec::new();
        for &rate in &self.rates {
            for &seed in &self.seeds {
                for &variant in &self.variants {
                    let mut s = self.base.clone();
                    s.rate = rate;
                    s.seed = seed;
                    s.variant = variant;
                    if let DataSpec::Synth { generator, .. } = &mut s.data {
                        generator.seed = seed;
                    }
                    out.push(s);
                }
            }
        }
        out
    }
}

/// Runs the grid in parallel; fails as a whole if any run fails.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<RunOutput>, ExperimentError> {
    let runs = spec.expand();
    if runs.is_empty() {
        return Ok(Vec::new());
    }
    for r in &runs {
        r.validate()?;
    }
    let file_data = match spec.base.data {
        DataSpec::Synth { .. } => None,
        ref d => Some(PreparedData::prepare(d)?),
    };
    runs.par_iter()
        .map(|r| match &file_data {
            Some(d) => run_prepared(r, d),
            None => run(r),
        })
        .collect()
}

/// What a result file was produced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Run(ExperimentSpec),
    Sweep(SweepSpec),
}

impl Provenance {
    pub fn execute(&self) -> Result<Vec<RunOutput>, ExperimentError> {
        match self {
            Provenance::Run(s) => Ok(vec![run(s)?]),
            Provenance::Sweep(s) => sweep(s),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("specs serialize")
    }
}

const SPEC_PREFIX: &str = "# spec: ";

/// Writes the result table: spec line, a note on scoring, header, rows.
pub fn write_csv<W: Write>(
    mut w: W,
    prov: &Provenance,
    runs: &[RunOutput],
) -> Result<(), ExperimentError> {
    let io = |e: std::io::Error| ExperimentError::Internal(format!("cannot write results: {e}"));
    writeln!(w, "{SPEC_PREFIX}{}", prov.to_json()).map_err(io)?;
    writeln!(
        w,
        "# every example is predicted before training; predictions made before any label was seen count as mistakes"
    )
    .map_err(io)?;
    let mut cw = csv::Writer::from_writer(w);
    for r in runs {
        cw.serialize(&r.row)
            .map_err(|e| ExperimentError::Internal(e.to_string()))?;
    }
    if runs.is_empty() {
        cw.write_record([
            "dataset",
            "variant",
            "rate",
            "budget",
            "seed",
            "final_accuracy",
            "final_model_size",
            "model_size_fraction",
        ])
        .map_err(|e| ExperimentError::Internal(e.to_string()))?;
    }
    cw.flush().map_err(io)
}

#[derive(Serialize)]
struct JsonReport<'a> {
    spec: &'a Provenance,
    runs: &'a [RunOutput],
}

pub fn write_json<W: Write>(
    w: W,
    prov: &Provenance,
    runs: &[RunOutput],
) -> Result<(), ExperimentError> {
    serde_json::to_writer_pretty(w, &JsonReport { spec: prov, runs })
        .map_err(|e| ExperimentError::Internal(format!("cannot write results: {e}")))
}

/// Recovers the experiment settings embedded in a result CSV.
pub fn read_provenance(path: &Path) -> Result<Provenance, ExperimentError> {
    let file = File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let json = first
        .trim_end()
        .strip_prefix(SPEC_PREFIX)
        .ok_or_else(|| usage(format!("{} has no embedded spec line", path.display())))?;
    serde_json::from_str(json).map_err(|e| usage(format!("{}: bad spec line: {e}", path.display())))
}
