//! The `bingham` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bingham_core::bingham::{fit_mle, DEFAULT_NODES};
use bingham_core::{
    BinghamDistribution, ConcentrationMatrix, NormalizationTable, Quadrature, TableSpec, VStrategy,
};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{
    parse_list, parse_thresholds, ConfigError, FileConfig, ToySettings, DEFAULT_THRESHOLDS,
};
use crate::dto::{quat, BinghamDto, ReportDto};
use crate::io;
use crate::run::{self, EvalSettings, RunFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Default concentrations for `sample`, inside the smallest useful table.
const DEFAULT_SAMPLE_LAMBDA: &str = "-0.2,-0.5,-0.8";

#[derive(Debug, Parser)]
#[command(name = "bingham", version, about = "Bingham pose uncertainty tools")]
pub struct Cli {
    /// Worker threads for table generation.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Normalization table file [env: BINGHAM_TABLE].
    #[arg(long, global = true)]
    pub table: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate log F over a concentration grid.
    TableGen(TableGenArgs),
    /// Draw samples from a Bingham distribution.
    Sample(SampleArgs),
    /// Maximum-likelihood fit to samples.
    Fit(FitArgs),
    /// Train a predictor on a synthetic scene.
    TrainToy(TrainToyArgs),
    /// Evaluate the held-out predictions of a run.
    Eval(EvalArgs),
    /// Write CSV files for plotting.
    ExportPlots(ExportArgs),
}

#[derive(Debug, Args)]
pub struct TableGenArgs {
    /// Nodes per axis, `c1,c2,c3`.
    #[arg(long, default_value = "32,32,32")]
    pub counts: String,
    /// Concentration range shared by all axes, `min,max`.
    #[arg(long, default_value = "-100,0", allow_hyphen_values = true)]
    pub range: String,
    /// Quadrature nodes per angle.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    /// Output file; defaults to the table path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mode quaternion `w,x,y,z`.
    #[arg(long, default_value = "1,0,0,0", allow_hyphen_values = true)]
    pub mode: String,
    /// Concentrations `λ1,λ2,λ3`, non-positive and descending.
    #[arg(long, default_value = DEFAULT_SAMPLE_LAMBDA, allow_hyphen_values = true)]
    pub lambda: String,
    /// Output file; standard output if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Samples as written by `sample`, or a bare list of quaternions.
    #[arg(long)]
    pub input: PathBuf,
    /// Quadrature nodes per angle.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    /// cyclic_K, asymmetric, ambiguous_views[_K] or mixed.
    #[arg(long)]
    pub scene: Option<String>,
    /// ubn, mbn-ce, mbn, mb-only, wta or ewta.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Mixture components.
    #[arg(long = "M")]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub final_lr_fraction: Option<f64>,
    /// Hidden layer widths, comma separated.
    #[arg(long)]
    pub hidden: Option<String>,
    /// Training samples.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub held_out: Option<usize>,
    /// birdal, gram_schmidt or cayley.
    #[arg(long)]
    pub v_strategy: Option<String>,
    /// l1 or probability.
    #[arg(long)]
    pub selection: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub ewta_interval: Option<usize>,
    /// Noise deviation for the mixed scene.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Recall thresholds for the final metrics, `deg:trans,...`.
    #[arg(long, default_value = DEFAULT_THRESHOLDS)]
    pub thresholds: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Recall thresholds, `deg:trans,...`; `inf` skips translation.
    #[arg(long, default_value = DEFAULT_THRESHOLDS)]
    pub thresholds: String,
    /// Mode-detection thresholds `deg:trans`; by default 5° and a tenth of
    /// the ground-truth translation diameter.
    #[arg(long)]
    pub detection: Option<String>,
    /// Uncertainty cut-offs of the threshold table, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub uncertainty_thresholds: Option<String>,
    /// Report file; the pruning curve goes next to it as CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleFile {
    pub distribution: BinghamDto,
    pub log_f: f64,
    pub seed: u64,
    pub samples: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleInput {
    File(SampleFile),
    Bare(Vec<[f64; 4]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub distribution: BinghamDto,
    pub log_f: f64,
    pub entropy: f64,
    pub n: usize,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        // an unreadable or malformed config file counts as a usage error
        Failure::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<run::RunError> for Failure {
    fn from(e: run::RunError) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<io::IoError> for Failure {
    fn from(e: io::IoError) -> Self {
        Failure::Runtime(e.into())
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .format_target(false)
        .try_init();
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let flags = FileConfig {
        table: cli.table,
        threads: cli.threads,
        ..FileConfig::default()
    };
    match cli.command {
        Command::TableGen(a) => table_gen(a, flags.or(file)),
        Command::Sample(a) => sample(a, flags.or(file)),
        Command::Fit(a) => fit(a),
        Command::TrainToy(a) => train_toy(a, flags, file),
        Command::Eval(a) => eval(a),
        Command::ExportPlots(a) => export_plots(a),
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn check_nodes(nodes: usize) -> Result<(), Failure> {
    if nodes < 2 {
        return Err(usage("--nodes must be at least 2"));
    }
    Ok(())
}

fn table_gen(a: TableGenArgs, cfg: FileConfig) -> Result<(), Failure> {
    let counts: [u32; 3] = parse_list("counts", &a.counts)?;
    let [min, max]: [f64; 2] = parse_list("range", &a.range)?;
    let threads = cfg.threads()?;
    check_nodes(a.nodes)?;
    let mut spec = TableSpec::cube(min, max, 2);
    for (axis, c) in spec.axes.iter_mut().zip(counts) {
        axis.count = c;
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let out = a
        .out
        .unwrap_or_else(|| cfg.table_source().path().to_path_buf());

    log::info!(
        "building {}x{}x{} table over [{min}, {max}] on {threads} thread(s)",
        counts[0],
        counts[1],
        counts[2]
    );
    let table =
        io::build_table(spec, &Quadrature::new(a.nodes), threads).context("building the table")?;
    io::write_table(&out, &table).context("writing the table")?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn load_table(path: &Path) -> anyhow::Result<NormalizationTable> {
    let t = io::read_table(path).context("reading the table")?;
    log::info!("using table {}", path.display());
    Ok(t)
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            io::write_bytes(p, text.as_bytes())?;
            log::info!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn sample(a: SampleArgs, cfg: FileConfig) -> Result<(), Failure> {
    let mode = quat(parse_list("mode", &a.mode)?).map_err(|e| usage(e.to_string()))?;
    let lambda = ConcentrationMatrix::new(parse_list("lambda", &a.lambda)?)
        .map_err(|e| usage(format!("lambda: {e}")))?;
    let v = VStrategy::Birdal
        .build(&mode.to_array())
        .map_err(|e| usage(e.to_string()))?;

    let d = match cfg.table_source().existing() {
        Some(p) => {
            let table = load_table(p)?;
            if !table.contains(lambda.lambdas()) {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "lambda {:?} lies outside the table {}",
                    lambda.lambdas(),
                    p.display()
                )));
            }
            BinghamDistribution::new(v, lambda, &table)
        }
        None => {
            log::info!("no table found, normalizing by quadrature");
            BinghamDistribution::new(v, lambda, &Quadrature::default())
        }
    };
    let samples = d.sample_seeded(a.n, a.seed);
    let file = SampleFile {
        distribution: BinghamDto::from(&d),
        log_f: d.log_f(),
        seed: a.seed,
        samples: samples.iter().map(|q| q.to_array()).collect(),
    };
    emit(a.out.as_deref(), &io::to_json(&file))?;
    Ok(())
}

fn fit(a: FitArgs) -> Result<(), Failure> {
    check_nodes(a.nodes)?;
    let input: SampleInput = io::read_json(&a.input).context("reading samples")?;
    let raw = match input {
        SampleInput::File(f) => f.samples,
        SampleInput::Bare(s) => s,
    };
    let samples = raw
        .into_iter()
        .map(quat)
        .collect::<Result<Vec<_>, _>>()
        .context("reading samples")?;
    let d = fit_mle(&samples, &Quadrature::new(a.nodes)).context("fitting")?;
    let file = FitFile {
        distribution: BinghamDto::from(&d),
        log_f: d.log_f(),
        entropy: d.entropy(),
        n: samples.len(),
    };
    emit(a.out.as_deref(), &io::to_json(&file))?;
    Ok(())
}

fn train_toy(a: TrainToyArgs, globals: FileConfig, file: FileConfig) -> Result<(), Failure> {
    let hidden = match &a.hidden {
        Some(s) => Some(
            s.split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| usage(format!("hidden: not a list of widths: {s:?}")))?,
        ),
        None => None,
    };
    let flags = FileConfig {
        scene: a.scene,
        noise: a.noise,
        scheme: a.scheme,
        m: a.m,
        seed: a.seed,
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        final_lr_fraction: a.final_lr_fraction,
        hidden,
        samples: a.samples,
        held_out: a.held_out,
        v_strategy: a.v_strategy,
        selection: a.selection,
        epsilon: a.epsilon,
        ewta_interval: a.ewta_interval,
        ..globals
    };
    let cfg = flags.or(file);
    let settings = ToySettings::resolve(&cfg)?;
    let threads = cfg.threads()?;
    let eval_settings = EvalSettings {
        recall: parse_thresholds(&a.thresholds)?,
        detection: None,
        uncertainty_thresholds: Vec::new(),
    };

    let table = match cfg.table_source().existing() {
        Some(p) => load_table(p)?,
        None => {
            log::info!("no table found, building the training table");
            run::training_table(threads).context("building the training table")?
        }
    };
    log::info!(
        "training {} on {} ({} samples, {} epochs, M = {})",
        settings.train.scheme.name(),
        settings.scene,
        settings.samples,
        settings.train.epochs,
        settings.train.components
    );
    let run = run::execute(&settings, &table, &eval_settings).context("training")?;
    if let (Some(first), Some(last)) = (run.loss_trace.first(), run.loss_trace.last()) {
        log::info!("loss {first:.4} -> {last:.4}");
    }
    io::write_json(&a.out, &run).context("writing the run")?;
    log::info!("wrote {}", a.out.display());
    Ok(())
}

fn read_run(path: &Path) -> anyhow::Result<RunFile> {
    let run: RunFile = io::read_json(path).context("reading the run")?;
    run.check_format()?;
    Ok(run)
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let recall = parse_thresholds(&a.thresholds)?;
    let detection = match &a.detection {
        Some(s) => match parse_thresholds(s)?.as_slice() {
            [one] => Some(*one),
            _ => return Err(usage("--detection takes a single deg:trans pair")),
        },
        None => None,
    };
    let uncertainty_thresholds = match &a.uncertainty_thresholds {
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| usage(format!("uncertainty thresholds: {s:?}")))?,
        None => Vec::new(),
    };
    let run = read_run(&a.run)?;
    let kind = run.config.scene_kind()?;
    let samples = run.eval_samples()?;
    if samples.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} has no held-out samples",
            a.run.display()
        )));
    }
    let settings = EvalSettings {
        recall,
        detection,
        uncertainty_thresholds,
    };
    let report = ReportDto::from(&run::evaluate_samples(&kind, &samples, &settings)?);
    io::write_json(&a.out, &report).context("writing the report")?;
    let csv = a.out.with_extension("csv");
    io::write_csv(&csv, &report.pruning).context("writing the pruning curve")?;
    log::info!("wrote {} and {}", a.out.display(), csv.display());
    Ok(())
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
    clamped_fraction: f64,
}

#[derive(Serialize)]
struct RecallRow {
    rot_threshold_deg: f64,
    trans_threshold: Option<f64>,
    recall: f64,
    oracle_recall: f64,
}

fn export_plots(a: ExportArgs) -> Result<(), Failure> {
    if a.run.is_none() && a.report.is_none() {
        return Err(usage("export-plots needs --run, --report or both"));
    }
    let run = a.run.as_deref().map(read_run).transpose()?;
    let report: ReportDto = match (&a.report, &run) {
        (Some(p), _) => io::read_json(p).context("reading the report")?,
        (None, Some(r)) => r.metrics.clone(),
        (None, None) => unreachable!("checked above"),
    };
    let dir = &a.out_dir;
    if let Some(run) = &run {
        let rows: Vec<LossRow> = run
            .loss_trace
            .iter()
            .zip(&run.clamped_fraction)
            .enumerate()
            .map(|(epoch, (loss, c))| LossRow {
                epoch,
                loss: *loss,
                clamped_fraction: *c,
            })
            .collect();
        io::write_csv(&dir.join("loss.csv"), &rows)?;
    }
    let recall: Vec<RecallRow> = report
        .recall
        .iter()
        .map(|r| RecallRow {
            rot_threshold_deg: r.spec.rot_threshold_deg,
            trans_threshold: r.spec.trans_threshold,
            recall: r.recall,
            oracle_recall: r.oracle_recall,
        })
        .collect();
    io::write_csv(&dir.join("pruning.csv"), &report.pruning)?;
    io::write_csv(&dir.join("recall.csv"), &recall)?;
    io::write_csv(&dir.join("oracle.csv"), &report.oracle)?;
    io::write_csv(&dir.join("thresholds.csv"), &report.thresholds)?;
    log::info!("wrote plot data to {}", dir.display());
    Ok(())
}
