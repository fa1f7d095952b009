use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abacoc::ball::write_jsonl;
use abacoc::experiment::{
    read_provenance, write_csv, write_json, Budget, DataSpec, ExperimentError, ExperimentSpec,
    Provenance, RunOutput, SweepSpec,
};
use abacoc::ingest::{write_libsvm_line, LabelColumn};
use abacoc::synth::SynthKind;
use abacoc::Variant;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "abacoc",
    version,
    about = "Prequential experiments with adaptive ball-cover classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one learner over one stream.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "auto-adj")]
        variant: Variant,
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Write the final balls as line-delimited JSON.
        #[arg(long)]
        dump_model: Option<PathBuf>,
    },
    /// Run a grid of variants, rates and seeds; variants share sub-sampling
    /// masks within each (rate, seed) cell.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "base,base-adj,auto,auto-adj"
        )]
        variants: Vec<Variant>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.03,0.05,0.1")]
        rates: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[command(flatten)]
        learner: LearnerArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Re-run the experiment recorded in a result CSV.
    Replay {
        results: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a synthetic stream in LIBSVM format.
    Gen {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct DataArgs {
    /// `synth:<generator>`, `libsvm:<path>` or `csv:<path>`.
    #[arg(long)]
    data: String,
    /// Stream length for synthetic data.
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    /// Label flip probability for synthetic data.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Input dimension (uniform_threshold, rotating_hyperplane), or the
    /// declared feature dimension of a LIBSVM file.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of classes for multiclass_blobs.
    #[arg(long)]
    classes: Option<usize>,
    /// Jitter for two_moons_like and multiclass_blobs.
    #[arg(long)]
    spread: Option<f64>,
    /// Radians per step for rotating_hyperplane.
    #[arg(long)]
    angular_rate: Option<f64>,
    /// Seed of the synthetic generator; defaults to the run seed.
    #[arg(long)]
    data_seed: Option<u64>,
    /// CSV label column, by header name or zero-based position.
    #[arg(long, default_value = "0")]
    label_column: LabelColumn,
    /// CSV columns to one-hot encode (dictionaries from a pre-pass).
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// JSON schema with the label column and category dictionaries.
    #[arg(long)]
    schema: Option<PathBuf>,
}

impl DataArgs {
    fn to_spec(&self, seed: u64) -> Result<DataSpec, ExperimentError> {
        let mut spec = DataSpec::parse(&self.data, self.data_seed.unwrap_or(seed))?;
        match &mut spec {
            DataSpec::Synth { generator, n } => {
                *n = self.n;
                generator.noise = self.noise;
                match &mut generator.kind {
                    SynthKind::UniformThreshold { dim } => set(dim, self.dim),
                    SynthKind::TwoMoonsLike { spread } => set(spread, self.spread),
                    SynthKind::RotatingHyperplane { dim, angular_rate } => {
                        set(dim, self.dim);
                        set(angular_rate, self.angular_rate);
                    }
                    SynthKind::MulticlassBlobs { classes, spread } => {
                        set(classes, self.classes);
                        set(spread, self.spread);
                    }
                }
            }
            DataSpec::Libsvm { dim, .. } => *dim = self.dim,
            DataSpec::Csv {
                schema,
                label,
                categorical,
                ..
            } => {
                *schema = self.schema.clone();
                *label = self.label_column.clone();
                *categorical = self.categorical.clone();
            }
        }
        Ok(spec)
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Args)]
struct LearnerArgs {
    /// Ball budget (auto-adj only).
    #[arg(long, conflicts_with = "budget_frac")]
    budget: Option<usize>,
    /// Ball budget as a fraction of the stream length (auto-adj only).
    #[arg(long)]
    budget_frac: Option<f64>,
    /// Scale inputs to unit Euclidean norm; zero vectors are skipped.
    #[arg(long)]
    normalize: bool,
    /// Space constant of the base variants.
    #[arg(long, default_value_t = 1.0)]
    c_hat: f64,
    /// Dimension estimate of the auto variants.
    #[arg(long, default_value_t = 2.0)]
    d_hat: f64,
    /// Binary randomized prediction for base (labels must be 0 and 1).
    #[arg(long)]
    binary: bool,
}

impl LearnerArgs {
    fn apply(&self, spec: &mut ExperimentSpec) {
        spec.budget = match (self.budget, self.budget_frac) {
            (Some(b), _) => Some(Budget::Balls(b)),
            (None, Some(f)) => Some(Budget::Fraction(f)),
            (None, None) => None,
        };
        spec.normalize = self.normalize;
        spec.c_hat = self.c_hat;
        spec.d_hat = self.d_hat;
        spec.binary = self.binary;
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Result CSV; a JSON report with traces is written next to it.
    /// Without it the CSV goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn internal(e: std::io::Error) -> ExperimentError {
    ExperimentError::Internal(format!("cannot write output: {e}"))
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| ExperimentError::Usage(format!("cannot create {}: {e}", path.display())))
}

fn emit(prov: &Provenance, runs: &[RunOutput], out: &OutputArgs) -> Result<(), ExperimentError> {
    match &out.out {
        None => {
            let stdout = std::io::stdout();
            write_csv(stdout.lock(), prov, runs)
        }
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&mut w, prov, runs)?;
            w.flush().map_err(internal)?;
            let mut j = create(&path.with_extension("json"))?;
            write_json(&mut j, prov, runs)?;
            j.flush().map_err(internal)
        }
    }
}

fn dump_model(path: &Path, run: &RunOutput) -> Result<(), ExperimentError> {
    let mut w = create(path)?;
    write_jsonl(&mut w, &run.balls).map_err(internal)?;
    w.flush().map_err(internal)
}

fn execute(cmd: Command) -> Result<(), ExperimentError> {
    match cmd {
        Command::Run {
            data,
            variant,
            rate,
            seed,
            learner,
            output,
            dump_model: dump,
        } => {
            let mut spec = ExperimentSpec::new(data.to_spec(seed)?, variant);
            spec.rate = rate;
            spec.seed = seed;
            learner.apply(&mut spec);
            let prov = Provenance::Run(spec);
            let runs = prov.execute()?;
            emit(&prov, &runs, &output)?;
            if let Some(p) = dump {
                dump_model(&p, &runs[0])?;
            }
            Ok(())
        }
        Command::Sweep {
            data,
            variants,
            rates,
            seeds,
            learner,
            output,
        } => {
            let first = seeds.first().copied().unwrap_or(0);
            let mut base = ExperimentSpec::new(
                data.to_spec(first)?,
                variants.first().copied().unwrap_or(Variant::Base),
            );
            learner.apply(&mut base);
            if let (Some(_), DataSpec::Synth { .. }) = (data.data_seed, &base.data) {
                return Err(ExperimentError::Usage(
                    "sweeps draw synthetic data with each run seed; --data-seed is not supported here".into(),
                ));
            }
            let prov = Provenance::Sweep(SweepSpec {
                base,
                variants,
                rates,
                seeds,
            });
            let runs = prov.execute()?;
            emit(&prov, &runs, &output)
        }
        Command::Replay { results, output } => {
            let prov = read_provenance(&results)?;
            let runs = prov.execute()?;
            emit(&prov, &runs, &output)
        }
        Command::Gen { data, seed, out } => {
            let spec = data.to_spec(seed)?;
            let DataSpec::Synth { generator, n } = spec else {
                return Err(ExperimentError::Usage(
                    "gen needs a synth:<generator> source".into(),
                ));
            };
            let stream = generator.stream(n).map_err(ExperimentError::Usage)?;
            let mut w: Box<dyn Write> = match &out {
                Some(p) => Box::new(create(p)?),
                None => Box::new(BufWriter::new(std::io::stdout().lock())),
            };
            for (x, y) in stream {
                write_libsvm_line(&mut w, &y.0.to_string(), &x).map_err(internal)?;
            }
            w.flush().map_err(internal)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
