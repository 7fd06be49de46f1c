//! The `kanfe` command line: run experiments, count parameters and check
//! datasets in the canonical recording format.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use kanfe::data::{self, window_count, LoadOptions, Normalization, Recording, SynthConfig};
use kanfe::models::{canonical_name, enumerate_table1, with_window, Model, ModelConfig, TABLE1_NAMES};
use kanfe::results::{load_results_csv, ranked_table, save_results_csv, summarize, summary_json, ModelFamily};
use kanfe::training::{run_experiment, ExperimentData, SplitOptions, TrainConfig};
use kanfe::Parameterized;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Name of the per-repeat results file written by `run`.
pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_JSON: &str = "summary.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Kanfe(#[from] kanfe::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Kanfe(kanfe::Error::Config(_)) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Shape and split defaults of a known dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub classes: usize,
    pub channels: usize,
    pub window: usize,
    pub test_subjects: Option<usize>,
}

pub const PRESETS: [Preset; 7] = [
    Preset { name: "synth", classes: 6, channels: 3, window: 80, test_subjects: None },
    Preset { name: "pamap2", classes: 13, channels: 39, window: 200, test_subjects: Some(4) },
    Preset { name: "pamap2-wrist", classes: 13, channels: 13, window: 200, test_subjects: Some(4) },
    Preset { name: "wisdm", classes: 6, channels: 3, window: 80, test_subjects: Some(18) },
    Preset { name: "motionsense", classes: 6, channels: 12, window: 200, test_subjects: Some(12) },
    Preset { name: "mmfit", classes: 11, channels: 24, window: 200, test_subjects: Some(5) },
    Preset { name: "mmfit-wrist", classes: 11, channels: 12, window: 200, test_subjects: Some(5) },
];

/// Window used for datasets without a preset.
pub const FALLBACK_WINDOW: usize = 100;

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

#[derive(Debug, Parser)]
#[command(name = "kanfe", version, about = "KAN feature extractors for IMU activity recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate models, writing results.csv and summary.json.
    Run(RunArgs),
    /// Print parameter counts for models at a given input shape.
    Params(ParamsArgs),
    /// Parse a directory of canonical recordings and report on it.
    Validate(ValidateArgs),
    /// Write a synthetic dataset in the canonical format.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    MinMax,
    ZScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Args)]
pub struct SynthOpts {
    #[arg(long, default_value_t = 8)]
    pub synth_subjects: usize,
    #[arg(long, default_value_t = 6)]
    pub synth_classes: usize,
    #[arg(long, default_value_t = 3)]
    pub synth_channels: usize,
    /// Samples per synthetic subject.
    #[arg(long, default_value_t = 1920)]
    pub synth_length: usize,
    #[arg(long, default_value_t = 0.15)]
    pub synth_noise: f64,
}

impl SynthOpts {
    fn config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            subjects: self.synth_subjects,
            classes: self.synth_classes,
            channels: self.synth_channels,
            length: self.synth_length,
            noise: self.synth_noise,
            ..SynthConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelSelection {
    /// Comma-separated model names, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    pub models: Vec<String>,
    /// Jumping-window length n_w.
    #[arg(long)]
    pub nw: Option<usize>,
    /// Channel-wise filters per channel.
    #[arg(long)]
    pub f: Option<usize>,
    /// Level-2 filters.
    #[arg(long)]
    pub f2: Option<usize>,
    /// Cross-channel filters.
    #[arg(long)]
    pub fp: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// `synth`, a dataset preset name, or any name for data under --data-dir.
    #[arg(long, default_value = "synth")]
    pub dataset: String,
    #[arg(long, env = "KANFE_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[command(flatten)]
    pub selection: ModelSelection,
    #[arg(long)]
    pub window: Option<usize>,
    /// Defaults to half the window.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Held-out subjects; half of them by default.
    #[arg(long)]
    pub test_subjects: Option<usize>,
    #[arg(long, value_enum, default_value = "min-max")]
    pub normalization: NormArg,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Seeds the split, the synthetic data and (as seed, seed+1, ...) the repeats.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Record wall time per run (makes results.csv differ between runs).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, value_enum, default_value = "f32")]
    pub precision: Precision,
    #[command(flatten)]
    pub synth: SynthOpts,
}

#[derive(Debug, Clone, Args)]
pub struct ParamsArgs {
    /// Preset supplying default channels, window and classes.
    #[arg(long)]
    pub dataset: Option<String>,
    #[command(flatten)]
    pub selection: ModelSelection,
    #[arg(long)]
    pub channels: Option<usize>,
    /// Frame length T.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Report params(A) / params(B) for two models `A,B`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub ratio: Option<Vec<String>>,
    /// Pick the best KAN and CNN models by mean macro-F1 from a results CSV.
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Directory of canonical files (defaults to --data-dir).
    pub path: Option<PathBuf>,
    #[arg(long, env = "KANFE_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub synth: SynthOpts,
}

/// Parses `args` (including the program name), executes the command and
/// returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Params(a) => cmd_params(a, out),
        Command::Validate(a) => cmd_validate(a, out, err),
        Command::Synth(a) => cmd_synth(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Resolves user model names to the standard configurations at the given shape.
pub fn select_models(
    sel: &ModelSelection,
    classes: usize,
    channels: usize,
    frame_len: usize,
) -> CliResult<Vec<ModelConfig>> {
    let mut rows = enumerate_table1(classes, channels, frame_len);
    if let Some(nw) = sel.nw {
        rows = with_window(rows, nw);
    }
    let wanted: Vec<&str> = sel.models.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    let mut chosen = Vec::new();
    if wanted.iter().any(|w| w.eq_ignore_ascii_case("all")) {
        chosen = rows;
    } else {
        for name in &wanted {
            let canon = canonical_name(name).ok_or_else(|| {
                CliError::Usage(format!("unknown model {name:?}; valid names: {}, all", TABLE1_NAMES.join(", ")))
            })?;
            if !chosen.iter().any(|c: &ModelConfig| c.name == canon) {
                chosen.push(rows.iter().find(|r| r.name == canon).cloned().expect("every canonical name has a row"));
            }
        }
    }
    if chosen.is_empty() {
        return Err(CliError::Usage(format!("no models selected; valid names: {}, all", TABLE1_NAMES.join(", "))));
    }
    for cfg in &mut chosen {
        if cfg.f.is_some() && sel.f.is_some() {
            cfg.f = sel.f;
        }
        if cfg.f2.is_some() && sel.f2.is_some() {
            cfg.f2 = sel.f2;
        }
        if cfg.fp.is_some() && sel.fp.is_some() {
            cfg.fp = sel.fp;
        }
        cfg.validate()?;
    }
    Ok(chosen)
}

fn load_dataset(args: &RunArgs, seed: u64) -> CliResult<Vec<Recording>> {
    if args.dataset.eq_ignore_ascii_case("synth") {
        return Ok(data::synth_har_with(&args.synth.config(seed)));
    }
    let dir = args.data_dir.as_ref().ok_or_else(|| {
        CliError::Usage(format!("dataset {} needs --data-dir (or KANFE_DATA_DIR)", args.dataset))
    })?;
    let classes = args.classes.or(preset(&args.dataset).map(|p| p.classes));
    let recs = data::load_canonical_with(dir, &LoadOptions { class_count: classes })?;
    if recs.is_empty() {
        return Err(kanfe::Error::EmptySet("recording").into());
    }
    Ok(recs)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<u8> {
    let p = preset(&args.dataset);
    let window = args.window.or(p.map(|p| p.window)).unwrap_or(FALLBACK_WINDOW);
    let stride = args.stride.unwrap_or((window / 2).max(1));
    let synthetic = args.dataset.eq_ignore_ascii_case("synth");
    let train_cfg = TrainConfig {
        epochs: args.epochs,
        patience: args.patience,
        lr: args.lr,
        momentum: args.momentum,
        batch_size: args.batch,
        repeats: args.repeats,
        seeds: (0..args.repeats as u64).map(|r| args.seed.wrapping_add(r)).collect(),
        ..TrainConfig::default()
    };
    train_cfg.validate()?;
    let opts = SplitOptions {
        window,
        stride,
        normalization: match args.normalization {
            NormArg::MinMax => Normalization::MinMax,
            NormArg::ZScore => Normalization::ZScore,
        },
        split_seed: args.seed,
        test_subjects: args.test_subjects.or(if synthetic { None } else { p.and_then(|p| p.test_subjects) }),
    };
    let recordings = load_dataset(args, args.seed)?;
    let classes = if synthetic { args.classes.or(Some(args.synth.synth_classes)) } else { args.classes.or(p.map(|p| p.classes)) };
    let data = ExperimentData::from_recordings(&args.dataset, &recordings, &opts, classes)?;
    let configs = select_models(&args.selection, data.class_count, data.channels, window)?;
    writeln!(
        err,
        "{}: {} train / {} test instances, {} channels, {} classes; {} models x {} repeats",
        data.name,
        data.train.len(),
        data.test.len(),
        data.channels,
        data.class_count,
        configs.len(),
        args.repeats
    )?;
    let results = match args.precision {
        Precision::F32 => run_experiment::<f32>(&data, &configs, &train_cfg, args.jobs.max(1), args.timing)?,
        Precision::F64 => run_experiment::<f64>(&data, &configs, &train_cfg, args.jobs.max(1), args.timing)?,
    };
    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join(RESULTS_CSV);
    let rows: Vec<_> = results.iter().flat_map(|r| r.runs.iter().cloned()).collect();
    save_results_csv(&csv_path, &rows)?;
    report_from_csv(&csv_path, &args.out.join(SUMMARY_JSON), out)?;
    Ok(EXIT_OK)
}

/// Writes the JSON summary and prints the ranked table, both derived only
/// from the CSV on disk.
pub fn report_from_csv(csv: &Path, json: &Path, out: &mut dyn Write) -> CliResult<()> {
    let rows = load_results_csv(csv)?;
    let summary = summarize(&rows);
    fs::write(json, summary_json(&summary)? + "\n")?;
    write!(out, "{}", ranked_table(&summary))?;
    writeln!(out, "results: {}", csv.display())?;
    Ok(())
}

/// Parameter counts of the selected models, in selection order.
pub fn param_table(args: &ParamsArgs) -> CliResult<Vec<(ModelConfig, usize)>> {
    let p = args.dataset.as_deref().map(|d| preset(d).ok_or_else(|| CliError::Usage(format!("unknown dataset preset {d:?}")))).transpose()?;
    let channels = args.channels.or(p.map(|p| p.channels)).unwrap_or(3);
    let window = args.window.or(p.map(|p| p.window)).unwrap_or(80);
    let classes = args.classes.or(p.map(|p| p.classes)).unwrap_or(6);
    select_models(&args.selection, classes, channels, window)?
        .into_iter()
        .map(|cfg| {
            let count = Model::<f32>::build(&cfg, args.seed)?.param_count();
            Ok((cfg, count))
        })
        .collect()
}

pub fn cmd_params(args: &ParamsArgs, out: &mut dyn Write) -> CliResult<u8> {
    let table = param_table(args)?;
    let width = table.iter().map(|(c, _)| c.name.len()).max().unwrap_or(5).max(5);
    writeln!(out, "{:<width$}  {:<8}  {:>10}", "model", "variant", "params")?;
    for (cfg, count) in &table {
        writeln!(out, "{:<width$}  {:<8}  {:>10}", cfg.name, cfg.variant.tag(), count)?;
    }
    let count_of = |name: &str| -> CliResult<usize> {
        if let Some((_, n)) = table.iter().find(|(c, _)| c.name == name) {
            return Ok(*n);
        }
        let extra = ParamsArgs {
            selection: ModelSelection { models: vec![name.to_string()], ..args.selection.clone() },
            ratio: None,
            results: None,
            ..args.clone()
        };
        Ok(param_table(&extra)?[0].1)
    };
    let pair = if let Some(names) = &args.ratio {
        if names.len() != 2 {
            return Err(CliError::Usage("--ratio takes exactly two model names, A,B".into()));
        }
        let resolve = |n: &str| {
            canonical_name(n).ok_or_else(|| {
                CliError::Usage(format!("unknown model {n:?}; valid names: {}", TABLE1_NAMES.join(", ")))
            })
        };
        Some((resolve(&names[0])?.to_string(), resolve(&names[1])?.to_string(), "params ratio"))
    } else if let Some(path) = &args.results {
        summarize(&load_results_csv(path)?).comparison.map(|c| (c.best_kan, c.best_cnn, "best KAN / best CNN params ratio"))
    } else {
        let smallest = |fam| table.iter().filter(|(c, _)| ModelFamily::of(&c.name) == fam).min_by_key(|(_, n)| *n);
        match (smallest(ModelFamily::Kan), smallest(ModelFamily::Cnn)) {
            (Some(k), Some(c)) => Some((k.0.name.clone(), c.0.name.clone(), "smallest KAN / smallest CNN params ratio")),
            _ => None,
        }
    };
    if let Some((a, b, label)) = pair {
        let (na, nb) = (count_of(&a)?, count_of(&b)?);
        writeln!(out, "{label} {a} / {b}: {:.4}", na as f64 / nb as f64)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<u8> {
    let dir = args
        .path
        .clone()
        .or_else(|| args.data_dir.clone())
        .ok_or_else(|| CliError::Usage("validate needs a directory (argument, --data-dir or KANFE_DATA_DIR)".into()))?;
    let p = args.dataset.as_deref().and_then(preset);
    let window = args.window.or(p.map(|p| p.window)).unwrap_or(FALLBACK_WINDOW);
    let stride = args.stride.unwrap_or((window / 2).max(1));
    if stride == 0 || stride > window {
        return Err(CliError::Usage(format!("stride {stride} must lie in 1..={window}")));
    }
    let classes = args.classes.or(p.map(|p| p.classes));
    let reports = data::scan_canonical(&dir, &LoadOptions { class_count: classes })?;
    if reports.is_empty() {
        writeln!(err, "warning: no canonical .csv files in {}", dir.display())?;
        return Ok(EXIT_OK);
    }
    let mut failures = 0;
    let mut recordings = Vec::new();
    for report in reports {
        match report.result {
            Ok(recs) => {
                let samples: usize = recs.iter().map(Recording::len).sum();
                let windows: usize = recs.iter().map(|r| window_count(r.len(), window, stride)).sum();
                if let Some(r) = recs.first() {
                    writeln!(
                        out,
                        "ok     {}: subject {}, {} segment(s), {samples} samples, {} channels at {} Hz, {windows} windows",
                        report.path.display(),
                        r.subject_id,
                        recs.len(),
                        r.channels(),
                        r.rate
                    )?;
                } else {
                    writeln!(out, "ok     {}: no samples", report.path.display())?;
                }
                recordings.extend(recs);
            }
            Err(e) => {
                failures += 1;
                writeln!(out, "error  {e}")?;
            }
        }
    }
    let subjects = data::subjects_of(&recordings);
    let mut channels: Vec<usize> = recordings.iter().map(Recording::channels).collect();
    channels.sort_unstable();
    channels.dedup();
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &recordings {
        for &l in &r.labels {
            *histogram.entry(l).or_default() += 1;
        }
    }
    let windows: usize = recordings.iter().map(|r| window_count(r.len(), window, stride)).sum();
    writeln!(out, "subjects: {}", subjects.len())?;
    writeln!(out, "channels: {}", channels.iter().map(usize::to_string).collect::<Vec<_>>().join(", "))?;
    let hist: Vec<String> = histogram.iter().map(|(l, n)| format!("{l}:{n}")).collect();
    writeln!(out, "labels: {}", hist.join(" "))?;
    writeln!(out, "windows (W={window}, S={stride}): {windows}")?;
    if channels.len() > 1 {
        writeln!(out, "error  recordings disagree on the channel count")?;
        failures += 1;
    }
    if subjects.len() >= 2 {
        let plan = data::split(&subjects, args.seed)?;
        writeln!(out, "split (seed {}): test {}", args.seed, plan.test_subjects.join(", "))?;
    }
    if failures > 0 {
        writeln!(err, "{failures} problem(s) found")?;
        return Ok(EXIT_FAILURE);
    }
    Ok(EXIT_OK)
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> CliResult<u8> {
    let recs = data::synth_har_with(&args.synth.config(args.seed));
    let paths = data::write_canonical(&args.out, &recs)?;
    writeln!(out, "wrote {} files to {}", paths.len(), args.out.display())?;
    Ok(EXIT_OK)
}
