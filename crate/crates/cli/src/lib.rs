//! Batch front end: train, evaluate, sample, correlation maps and random
//! datasets. Every stochastic command takes an explicit `--seed`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ttn_born::checkpoint::{self, Checkpoint, RunInfo};
use ttn_born::data::{self, pbm, BinaryDataset, ImageShape, Ordering, OrderingKind};
use ttn_born::factor_graph::{fg_train, FgTrainConfig, TreeFactorGraph};
use ttn_born::sample::sample_batch;
use ttn_born::train::{train_with, BatchSize, Scheme, TrainConfig, TrainStats};
use ttn_born::{Error, Model, ModelKind};

mod config;

pub use config::expand_config;

#[derive(Parser, Debug)]
#[command(name = "ttnborn", version, about = "Tree tensor network Born machines", args_override_self = true)]
pub struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// File of `key = value` lines naming long flags; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model and write `model.ttnborn` and `stats.csv` under `--out`.
    Train(TrainArgs),
    /// Print the NLL of a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Draw exact samples and write them as PBM images.
    Sample(SampleArgs),
    /// Write correlation maps of reference pixels as CSV matrices.
    Correlate(CorrelateArgs),
    /// Write a dataset of fair-coin patterns.
    GenRandom(GenRandomArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelType {
    Ttn,
    Mps,
    Treefg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeArg {
    OneSite,
    TwoSite,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "ttn")]
    pub model: ModelType,
    /// Text dataset or directory of `.pbm` images.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "1d")]
    pub order: Order,
    #[arg(long, default_value_t = 10)]
    pub dmax: usize,
    /// Bond dimension of the random initial network (defaults to `--dmax`).
    #[arg(long)]
    pub init_dmax: Option<usize>,
    #[arg(long, value_enum, default_value = "two-site")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Mini-batch size; the whole training set when omitted.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    pub cutoff: f64,
    /// Also write `epoch-NNNN.ttnborn` every k epochs (0 = never).
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    /// Use only the first N training samples.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Record wall-clock seconds in `stats.csv` (breaks byte-identical reruns).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Columns of the contact sheet.
    #[arg(long, default_value_t = 10)]
    pub cols: usize,
}

#[derive(Args, Debug)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Reference pixels in raw image order, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub pixels: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenRandomArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: u64,
    /// Output text file.
    #[arg(long)]
    pub out: PathBuf,
    /// Redraw repeated patterns.
    #[arg(long)]
    pub distinct: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{}", e.to_string().trim_end()),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    /// 2 usage, 3 input/output and parsing, 4 shape or argument, 5 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) => e.exit_code(),
            CliError::Run(e) => match e {
                Error::Parse { .. } | Error::Format(_) | Error::Io { .. } | Error::Checkpoint(_) => 3,
                Error::Dimension(_) | Error::Topology(_) | Error::Argument(_) | Error::State(_) => 4,
                Error::Numeric(_) | Error::DegenerateDistribution(_) | Error::DegenerateSample { .. } => 5,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), applies the config file and runs the
/// command, writing results to `out`.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args = expand_config(args.into_iter().map(Into::into).collect())?;
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Argument("--threads must be at least 1".into()).into());
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Argument(format!("cannot start thread pool: {e}")))?;
    let mut buf = Vec::new();
    let result = pool.install(|| match &cli.command {
        Command::Train(a) => cmd_train(a, &mut buf),
        Command::Eval(a) => cmd_eval(a, &mut buf),
        Command::Sample(a) => cmd_sample(a, &mut buf),
        Command::Correlate(a) => cmd_correlate(a, &mut buf),
        Command::GenRandom(a) => cmd_gen_random(a, &mut buf),
    });
    out.write_all(&buf).map_err(|e| Error::io("<stdout>", e))?;
    result
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments) -> CliResult<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e).into())
}

fn require_input(p: &Path) -> CliResult<()> {
    if !p.exists() {
        return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")).into());
    }
    Ok(())
}

fn make_out_dir(p: &Path) -> CliResult<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e).into())
}

fn write_file(p: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(p, bytes).map_err(|e| Error::io(p, e).into())
}

fn load_dataset(p: &Path, limit: Option<usize>) -> CliResult<BinaryDataset> {
    let d = if p.is_dir() { data::load_pbm_dir(p)? } else { data::load_binarized_text(p)? };
    Ok(match limit {
        Some(k) => d.truncated(k),
        None => d,
    })
}

/// Fixed-point text without a sign on values that round to zero.
fn fixed(x: f64, digits: usize) -> String {
    let t = format!("{x:.digits$}");
    if t.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        t.trim_start_matches('-').to_string()
    } else {
        t
    }
}

fn fmt_nll(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        "inf".into()
    }
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    require_input(&a.data)?;
    if let Some(t) = &a.test {
        require_input(t)?;
    }
    let train_set = load_dataset(&a.data, a.limit)?;
    if train_set.is_empty() {
        return Err(Error::Argument("training set is empty".into()).into());
    }
    let test_set = a.test.as_deref().map(|t| load_dataset(t, None)).transpose()?;
    let kind = match a.order {
        Order::OneD => OrderingKind::Raster1d,
        Order::TwoD => OrderingKind::Hierarchical2d,
    };
    let ordering = Ordering::new(kind, train_set.shape)?;
    let xs = ordering.apply(&train_set)?;
    let test = test_set.as_ref().map(|t| ordering.apply(t)).transpose()?;
    let n = ordering.padded_len();
    make_out_dir(&a.out)?;
    let info = |epoch| RunInfo {
        ordering: Some(*ordering.descriptor()),
        seed: a.seed,
        epoch,
    };

    let (stats, train_nll, test_nll) = match a.model {
        ModelType::Ttn | ModelType::Mps => {
            let mk = if a.model == ModelType::Ttn { ModelKind::Ttn } else { ModelKind::Mps };
            let config = TrainConfig {
                learning_rate: a.lr,
                d_max: a.dmax,
                scheme: match a.scheme {
                    SchemeArg::OneSite => Scheme::OneSite,
                    SchemeArg::TwoSite => Scheme::TwoSite,
                },
                svd_cutoff: a.cutoff,
                epochs: a.epochs,
                batch_size: a.batch_size.map_or(BatchSize::Full, BatchSize::Size),
                seed: a.seed,
                ..TrainConfig::default()
            };
            config.validate()?;
            let mut model = Model::random(mk, n, a.init_dmax.unwrap_or(a.dmax), a.seed)?;
            let stats = train_with(&mut model, &xs, &config, |m, e| {
                if a.checkpoint_every > 0 && e.epoch % a.checkpoint_every == 0 {
                    checkpoint::save_model(a.out.join(format!("epoch-{:04}.ttnborn", e.epoch)), m, &info(e.epoch))?;
                }
                Ok(())
            })?;
            checkpoint::save_model(a.out.join("model.ttnborn"), &model, &info(a.epochs))?;
            let train_nll = model.nll(&xs)?;
            let test_nll = test.as_ref().map(|t| model.nll(t)).transpose()?;
            (stats, train_nll, test_nll)
        }
        ModelType::Treefg => {
            let cfg = FgTrainConfig {
                learning_rate: a.lr,
                epochs: 1,
                ..FgTrainConfig::default()
            };
            let mut fg = TreeFactorGraph::heap_random(n, 0.1, a.seed)?;
            let mut stats = TrainStats::default();
            for epoch in 1..=a.epochs {
                let (next, s) = fg_train(&fg, &xs, &cfg)?;
                fg = next;
                let mut e = s.epochs.into_iter().next().expect("one epoch");
                e.epoch = epoch;
                stats.epochs.push(e);
                if a.checkpoint_every > 0 && epoch % a.checkpoint_every == 0 {
                    checkpoint::save_factor_graph(a.out.join(format!("epoch-{epoch:04}.ttnborn")), &fg, &info(epoch))?;
                }
            }
            checkpoint::save_factor_graph(a.out.join("model.ttnborn"), &fg, &info(a.epochs))?;
            let train_nll = fg.nll(&xs)?;
            let test_nll = test.as_ref().map(|t| fg.nll(t)).transpose()?;
            (stats, train_nll, test_nll)
        }
    };
    write_file(&a.out.join("stats.csv"), stats.to_csv(a.timing).as_bytes())?;
    emit(out, format_args!("train_nll {}", fmt_nll(train_nll)))?;
    if let Some(t) = test_nll {
        emit(out, format_args!("test_nll {}", fmt_nll(t)))?;
    }
    Ok(())
}

fn load_checkpoint(p: &Path) -> CliResult<Checkpoint<f64>> {
    require_input(p)?;
    Ok(checkpoint::load(p)?)
}

/// Orders raw samples for the checkpoint's network.
fn order_for(info: &RunInfo, set: &BinaryDataset, n_sites: usize) -> CliResult<Vec<Vec<u8>>> {
    match &info.ordering {
        Some(d) => Ok(Ordering::from_descriptor(d)?.apply(set)?),
        None if set.shape.len() == n_sites => Ok(set.samples.clone()),
        None => Err(Error::Dimension(format!(
            "samples have {} pixels, model has {n_sites}",
            set.shape.len()
        ))
        .into()),
    }
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CliResult<()> {
    require_input(&a.data)?;
    let ck = load_checkpoint(&a.checkpoint)?;
    let set = load_dataset(&a.data, a.limit)?;
    let (nll, log_z) = match &ck {
        Checkpoint::Born(m, info) => {
            let xs = order_for(info, &set, m.n_pixels())?;
            let mut m = m.clone();
            if m.center().is_none() {
                m.canonicalize(0)?;
            }
            (m.nll(&xs)?, m.log_partition()?)
        }
        Checkpoint::FactorGraph(fg, info) => {
            let xs = order_for(info, &set, fg.n_pixels())?;
            (fg.nll(&xs)?, fg.log_z(&vec![None; fg.n_vars()])?)
        }
    };
    emit(out, format_args!("nll {}", fmt_nll(nll)))?;
    emit(out, format_args!("log_z {}", fixed(log_z, 6)))?;
    emit(out, format_args!("model_type {}", ck.model_type()))?;
    emit(out, format_args!("samples {}", set.len()))
}

fn born(ck: Checkpoint<f64>) -> CliResult<(Model, RunInfo)> {
    match ck {
        Checkpoint::Born(m, i) => Ok((m, i)),
        Checkpoint::FactorGraph(..) => {
            Err(Error::Argument("this command needs a ttn or mps checkpoint, not a factor graph".into()).into())
        }
    }
}

fn raw_layout(info: &RunInfo, n_sites: usize) -> CliResult<(Option<Ordering>, ImageShape)> {
    match &info.ordering {
        Some(d) => {
            let o = Ordering::from_descriptor(d)?;
            let shape = o.raw_shape();
            Ok((Some(o), shape))
        }
        None => Ok((None, ImageShape::Flat { len: n_sites })),
    }
}

pub fn cmd_sample(a: &SampleArgs, out: &mut dyn Write) -> CliResult<()> {
    let (model, info) = born(load_checkpoint(&a.checkpoint)?)?;
    if a.count == 0 {
        return Err(Error::Argument("--count must be at least 1".into()).into());
    }
    make_out_dir(&a.out)?;
    let (ordering, shape) = raw_layout(&info, model.n_pixels())?;
    let leaves = sample_batch(&model, a.count, a.seed)?;
    let raw = leaves
        .iter()
        .map(|s| match &ordering {
            Some(o) => o.invert(s),
            None => Ok(s.clone()),
        })
        .collect::<ttn_born::Result<Vec<_>>>()?;
    let (h, w) = shape.dims();
    for (k, img) in raw.iter().enumerate() {
        write_file(&a.out.join(format!("sample-{k:05}.pbm")), &pbm::write(w, h, img)?)?;
    }
    let sheet = pbm::contact_sheet(&raw, w, h, a.cols)?;
    write_file(&a.out.join("sheet.pbm"), &pbm::write(sheet.width, sheet.height, &sheet.pixels)?)?;
    write_file(&a.out.join("samples.txt"), data::to_binarized_text(&raw).as_bytes())?;
    emit(out, format_args!("wrote {} samples to {}", raw.len(), a.out.display()))
}

pub fn cmd_correlate(a: &CorrelateArgs, out: &mut dyn Write) -> CliResult<()> {
    let (mut model, info) = born(load_checkpoint(&a.checkpoint)?)?;
    let (ordering, shape) = raw_layout(&info, model.n_pixels())?;
    if let Some(&p) = a.pixels.iter().find(|&&p| p >= shape.len()) {
        return Err(Error::Argument(format!("pixel {p} out of range for {} pixels", shape.len())).into());
    }
    if model.center().is_none() {
        model.canonicalize(0)?;
    }
    make_out_dir(&a.out)?;
    let (h, w) = shape.dims();
    for &p in &a.pixels {
        let slot = ordering.as_ref().map_or(p, |o| o.slots()[p]);
        let map = model.correlation_map(slot)?;
        let raw: Vec<f64> = match &ordering {
            Some(o) => o.slots().iter().map(|&s| map[s]).collect(),
            None => map,
        };
        let mut text = format!("# ttnborn-correlation v1 pixel={p} rows={h} cols={w}\n");
        for r in 0..h {
            let row: Vec<String> = raw[r * w..(r + 1) * w].iter().map(|&v| fixed(v, 10)).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        let path = a.out.join(format!("corr-{p}.csv"));
        write_file(&path, text.as_bytes())?;
        emit(out, format_args!("wrote {}", path.display()))?;
    }
    Ok(())
}

pub fn cmd_gen_random(a: &GenRandomArgs, out: &mut dyn Write) -> CliResult<()> {
    let set = data::gen_random_patterns(a.n, a.count, a.seed, a.distinct)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        make_out_dir(dir)?;
    }
    write_file(&a.out, data::to_binarized_text(&set.samples).as_bytes())?;
    emit(out, format_args!("wrote {} patterns of {} pixels to {}", a.count, a.n, a.out.display()))
}
