//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rghmm_core::inference::{em_fit, EmConfig, InferenceError, McmcError};
use rghmm_core::model_selection::{bayes_factor_test, SelectionError, TestConfig};
use rghmm_core::seed::rng_from_seed;
use rghmm_core::segmentation::{find_segments, intersect_segments, Metric, Roi, SegmentError};
use rghmm_core::series::simulate_series;
use rghmm_core::{DynGraph, NetworkSeries, Regime};
use serde::Serialize;
use thiserror::Error;

use crate::experiment::{run_experiment, ExperimentError, ExperimentGrid};
use crate::format::{read_initial_graph, read_series_file, write_series, FormatError};
use crate::records::{EstimateRecord, ParamRecord, SegmentRecord, SegmentReport, TestRecord};

/// Failure classes, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            InferenceError::Series(_) | InferenceError::Graph(_) => CliError::Data(e.to_string()),
            InferenceError::Mcmc(McmcError::InvalidConfig(_)) => CliError::Usage(e.to_string()),
            InferenceError::DegenerateWeights | InferenceError::Path(_) | InferenceError::Mcmc(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::Inference(inner) => inner.into(),
            SelectionError::InvalidConfig(_) | SelectionError::Kernel(_) => CliError::Usage(e.to_string()),
            SelectionError::Graph(_) => CliError::Data(e.to_string()),
            SelectionError::ZeroLikelihood => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SegmentError> for CliError {
    fn from(e: SegmentError) -> Self {
        match e {
            SegmentError::InvalidRoi { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidGrid(_) | ExperimentError::Json(_) => CliError::Usage(e.to_string()),
            ExperimentError::Io { .. } | ExperimentError::Csv(_) => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rghmm", version, about = "Noisy percolation network series: simulate, estimate, test, segment")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "RGHMM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a noisy series observed at t_m = m / kappa.
    Simulate(SimulateArgs),
    /// Giant-component fraction and density per snapshot, as CSV.
    Curve(CurveArgs),
    /// Fit (p, q, gamma, alpha, beta) by EM under one regime.
    Estimate(EstimateArgs),
    /// Bayes-factor test of ER against PR.
    Test(TestArgs),
    /// Rising stretches of a series inside a time window.
    Segment(SegmentArgs),
    /// Run a replicated simulation study from a grid file.
    Experiment(ExperimentArgs),
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_regime)]
    pub regime: Regime,
    /// Number of vertices.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.7)]
    pub p: f64,
    #[arg(long, default_value_t = 0.3)]
    pub q: f64,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.03)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// Observation rate.
    #[arg(long, default_value_t = 0.6)]
    pub kappa: f64,
    /// Number of snapshots.
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Series file whose last snapshot is the initial graph (default: empty).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmArgs {
    /// Particles per filter pass.
    #[arg(long, short = 'B', default_value_t = 50_000)]
    pub particles: usize,
    /// Ancestral lines for the process-parameter statistics.
    #[arg(long, short = 'H', default_value_t = 10)]
    pub lines: usize,
    /// Sampled paths per interval and line.
    #[arg(long, short = 'D', default_value_t = 10)]
    pub paths: usize,
    /// Ancestral lines for the error-rate statistics.
    #[arg(long, default_value_t = 40_000)]
    pub psi: usize,
    #[arg(long, default_value_t = 20)]
    pub max_iters: usize,
    /// Relative-change stopping threshold.
    #[arg(long, default_value_t = 0.10)]
    pub tol: f64,
    /// Starting point as p,q,gamma,alpha,beta.
    #[arg(long, value_delimiter = ',')]
    pub start: Option<Vec<f64>>,
}

impl EmArgs {
    pub fn config(&self) -> Result<EmConfig, CliError> {
        let mut c = EmConfig {
            particles: self.particles,
            lines: self.lines,
            paths_per_segment: self.paths,
            noise_lines: self.psi,
            max_iters: self.max_iters,
            tol: self.tol,
            ..EmConfig::default()
        };
        if let Some(v) = &self.start {
            if v.len() != 5 {
                return Err(CliError::Usage(format!("--start needs 5 comma-separated values, got {}", v.len())));
            }
            let rec = ParamRecord {
                p: v[0],
                q: v[1],
                gamma: v[2],
                alpha: v[3],
                beta: v[4],
            };
            c.init = rec.to_model().map_err(|e| CliError::Usage(format!("--start: {e}")))?;
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_regime)]
    pub regime: Regime,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub em: EmArgs,
    /// Particles for the likelihood pass; defaults to --particles.
    #[arg(long)]
    pub forward_particles: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricChoice {
    Gcc,
    Density,
    Both,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Window start time; defaults to the first observation.
    #[arg(long)]
    pub roi_start: Option<f64>,
    /// Window end time; defaults to the last observation.
    #[arg(long)]
    pub roi_end: Option<f64>,
    #[arg(long, value_enum, default_value_t = MetricChoice::Both)]
    pub metric: MetricChoice,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Grid description (JSON).
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    let res = match out {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    res.map_err(|e| CliError::Data(format!("{}: {e}", out.map_or("<stdout>".into(), |p| p.display().to_string()))))
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("records serialize") + "\n";
    emit(out, &text)
}

fn shape(series: &NetworkSeries) -> (usize, usize) {
    (series.len(), series.n())
}

pub fn simulate(args: &SimulateArgs) -> Result<NetworkSeries, CliError> {
    let truth = ParamRecord {
        p: args.p,
        q: args.q,
        gamma: args.gamma,
        alpha: args.alpha,
        beta: args.beta,
    }
    .to_simulation_model()
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let init = match &args.init {
        Some(path) => {
            let g = read_initial_graph(path)?;
            if g.n() != args.n {
                return Err(CliError::Data(format!("initial graph has {} vertices, --n is {}", g.n(), args.n)));
            }
            g
        }
        None => DynGraph::empty(args.n).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let mut rng = rng_from_seed(args.seed);
    simulate_series(args.regime, init, &truth.process, &truth.noise, args.kappa, args.m, &mut rng)
        .map(|s| s.series)
        .map_err(|e| CliError::Usage(e.to_string()))
}

pub fn curve_csv(series: &NetworkSeries) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["t", "gcc_fraction", "density"]).map_err(fail)?;
    for (t, g) in series.times().iter().zip(series.snapshots()) {
        w.serialize((t, g.gcc_fraction(), g.density())).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("numeric CSV"))
}

pub fn segment_report(series: &NetworkSeries, args: &SegmentArgs) -> Result<SegmentReport, CliError> {
    let times = series.times();
    let roi = Roi::new(
        args.roi_start.unwrap_or(times[0]),
        args.roi_end.unwrap_or(times[times.len() - 1]),
    )?;
    let (segments, metric) = match args.metric {
        MetricChoice::Gcc => (find_segments(series, &roi, Metric::Gcc)?, "gcc"),
        MetricChoice::Density => (find_segments(series, &roi, Metric::Density)?, "density"),
        MetricChoice::Both => (intersect_segments(series, &roi)?, "both"),
    };
    Ok(SegmentReport {
        input: args.input.display().to_string(),
        metric: metric.into(),
        roi_start: roi.start,
        roi_end: roi.end,
        segments: segments.into_iter().map(|s| SegmentRecord::new(s, times)).collect(),
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => {
            let series = simulate(&args)?;
            let mut buf = Vec::new();
            write_series(&series, &mut buf).map_err(|e| CliError::Data(e.to_string()))?;
            emit(args.out.as_deref(), std::str::from_utf8(&buf).expect("JSON is UTF-8"))
        }
        Command::Curve(args) => {
            let series = read_series_file(&args.input)?;
            emit(args.out.as_deref(), &curve_csv(&series)?)
        }
        Command::Estimate(args) => {
            let series = read_series_file(&args.input)?;
            let config = args.em.config()?;
            let clock = Instant::now();
            let fit = em_fit(&series, args.regime, &config, &mut rng_from_seed(args.seed))?;
            let record = EstimateRecord::new(
                args.regime,
                args.input.display().to_string(),
                args.seed,
                shape(&series),
                config,
                fit,
                clock.elapsed().as_secs_f64(),
            );
            emit_json(args.out.as_deref(), &record)
        }
        Command::Test(args) => {
            let series = read_series_file(&args.input)?;
            let config = TestConfig {
                em: args.em.config()?,
                forward_particles: args.forward_particles,
                trials: args.trials,
            };
            let clock = Instant::now();
            let result = bayes_factor_test(&series, &config, &mut rng_from_seed(args.seed))?;
            let record = TestRecord::new(
                args.input.display().to_string(),
                args.seed,
                shape(&series),
                config,
                result,
                clock.elapsed().as_secs_f64(),
            );
            emit_json(args.out.as_deref(), &record)
        }
        Command::Segment(args) => {
            let series = read_series_file(&args.input)?;
            let report = segment_report(&series, &args)?;
            emit_json(args.out.as_deref(), &report)
        }
        Command::Experiment(args) => {
            let text = fs::read_to_string(&args.grid)
                .map_err(|e| CliError::Data(format!("{}: {e}", args.grid.display())))?;
            let grid = ExperimentGrid::from_json(&text)?;
            let output = run_experiment(&grid, &args.out_dir)?;
            let failed = output.records.iter().filter(|r| r.error.is_some()).count();
            eprintln!(
                "{} replicates ({} failed); results in {}",
                output.records.len(),
                failed,
                output.dir.display()
            );
            Ok(())
        }
    }
}

/// Configures the global thread pool.
pub fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}
