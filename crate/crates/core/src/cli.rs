//! Command-line driver. Exit codes: 0 success (including an empty search),
//! 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bonsai::{bonsai_train, BonsaiModel, BonsaiSpec, BonsaiTrainConfig};
use crate::codec::{TAG_BONSAI, TAG_CNN, TAG_FASTGRNN, TAG_PROTONN};
use crate::datasets::{load_cifar10, DatasetSplit};
use crate::directconv::{cnn_footprint, train_cnn, ArchSpec, CnnModel, CnnTrainConfig};
use crate::error::{Error, Result};
use crate::fastgrnn::{fastgrnn_train, FastGrnnModel, FastGrnnSpec, FastGrnnTrainConfig, SeqMode};
use crate::harness::{
    emit_report, evaluate, parse_report_csv, prepare_split, run_experiment, Budget, CellResult, EvalReport,
    ExperimentConfig, Family, ReportFormat, Scale, StoredModel,
};
use crate::protonn::{protonn_train, ProtoNNModel, ProtoSpec, ProtoTrainConfig};
use crate::size::Footprint;

pub const DATA_ENV: &str = "CIFAR10_DIR";

#[derive(Debug, Parser)]
#[command(name = "memclass", version, about = "Memory-constrained CIFAR-10 classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the footprint of one model spec.
    Sizes(SpecArgs),
    /// Run a family's budgeted search, or a whole experiment from a config file.
    Search(SearchArgs),
    /// Train one spec and save the model.
    Train(TrainArgs),
    /// Score a saved model on the test batch.
    Eval(EvalArgs),
    /// Render a results CSV as a comparison table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// directconv, protonn, bonsai or fastgrnn.
    #[arg(long)]
    family: String,
    /// Layer list, e.g. "A, C1(32,3), M, Dr, D*".
    #[arg(long)]
    arch: Option<String>,
    /// Projection (ProtoNN) or tree (Bonsai) dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    prototypes: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long)]
    depth: Option<usize>,
    /// row, channel or multi.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    dw: f64,
    #[arg(long, default_value_t = 1.0)]
    du: f64,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Directory with the CIFAR-10 binary batches.
    #[arg(long, env = DATA_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    scale: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standardize each channel with training-set statistics.
    #[arg(long)]
    standardize: bool,
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Family to search; `fastgrnn` needs --mode.
    #[arg(long, required_unless_present = "config")]
    family: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, required_unless_present = "config")]
    budget: Option<u32>,
    /// Experiment config (key = value lines) instead of one family/budget.
    #[arg(long, conflicts_with_all = ["family", "budget"])]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Output directory for model files and results.csv.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    epochs: Option<usize>,
    /// ProtoNN kernel width.
    #[arg(long)]
    gamma: Option<f32>,
    #[arg(long)]
    lr: Option<f32>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// md or csv.
    #[arg(long, default_value = "md")]
    format: String,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Sizes(a) => sizes(&a),
        Command::Search(a) => search(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Report(a) => report(&a),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `memclass --help` for usage.");
            2
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn need<T: Copy>(v: Option<T>, flag: &str, family: &str) -> std::result::Result<T, Failure> {
    v.ok_or_else(|| usage(format!("--{flag} is required for {family}")))
}

/// A fully specified model of any family.
enum ModelSpec {
    Cnn(ArchSpec),
    Proto(ProtoSpec),
    Bonsai(BonsaiSpec),
    Grnn(FastGrnnSpec),
}

fn parse_mode(mode: Option<&str>) -> std::result::Result<SeqMode, Failure> {
    let m = mode.ok_or_else(|| usage("--mode is required for fastgrnn"))?;
    Ok(m.parse()?)
}

fn model_spec(a: &SpecArgs) -> std::result::Result<ModelSpec, Failure> {
    match a.family.to_ascii_lowercase().as_str() {
        "directconv" | "cnn" => {
            let text = a.arch.as_deref().ok_or_else(|| usage("--arch is required for directconv"))?;
            Ok(ModelSpec::Cnn(text.parse()?))
        }
        "protonn" => Ok(ModelSpec::Proto(ProtoSpec::new(
            need(a.dim, "dim", "protonn")?,
            need(a.prototypes, "prototypes", "protonn")?,
            a.density,
        )?)),
        "bonsai" => Ok(ModelSpec::Bonsai(BonsaiSpec::new(
            need(a.depth, "depth", "bonsai")?,
            need(a.dim, "dim", "bonsai")?,
        )?)),
        "fastgrnn" => Ok(ModelSpec::Grnn(FastGrnnSpec::new(
            parse_mode(a.mode.as_deref())?,
            need(a.hidden, "hidden", "fastgrnn")?,
            a.dw,
            a.du,
        )?)),
        other => Err(usage(format!("unknown family {other:?}"))),
    }
}

fn spec_footprint(spec: &ModelSpec) -> Result<Footprint> {
    match spec {
        ModelSpec::Cnn(arch) => cnn_footprint(arch),
        ModelSpec::Proto(s) => Ok(s.footprint(crate::protonn::INPUT_DIM)),
        ModelSpec::Bonsai(s) => Ok(crate::bonsai::bonsai_footprint(*s)),
        ModelSpec::Grnn(s) => Ok(s.footprint()),
    }
}

fn sizes(a: &SpecArgs) -> std::result::Result<(), Failure> {
    let fp = spec_footprint(&model_spec(a)?)?;
    println!("{fp}");
    Ok(())
}

fn load_split(data: &DataArgs) -> std::result::Result<(DatasetSplit, Scale), Failure> {
    let scale: Scale = data.scale.parse()?;
    let dir = data
        .data_dir
        .as_deref()
        .ok_or_else(|| Failure::Runtime(format!("no data directory: pass --data-dir or set {DATA_ENV}")))?;
    let (train, test) = load_cifar10(dir)?;
    Ok((prepare_split(train, test, &scale.config(), data.standardize, data.seed)?, scale))
}

fn search_family(a: &SearchArgs) -> std::result::Result<Family, Failure> {
    let name = a.family.as_deref().expect("clap enforces --family");
    if name.eq_ignore_ascii_case("fastgrnn") {
        return Ok(Family::FastGrnn(parse_mode(a.mode.as_deref())?));
    }
    Ok(name.parse()?)
}

/// Whether any candidate of `family` fits, judged from footprints alone.
fn any_feasible(family: Family, budget_kb: u32, scale: Scale) -> bool {
    let cfg = scale.config();
    match family {
        Family::DirectConv => !crate::directconv::feasible_models(budget_kb).is_empty(),
        Family::ProtoNN => !cfg
            .proto_grid
            .feasible_cells(budget_kb, crate::protonn::INPUT_DIM)
            .is_empty(),
        Family::Bonsai => !crate::bonsai::sweep_specs(&[1], budget_kb, crate::bonsai::INPUT_DIM).is_empty(),
        Family::FastGrnn(mode) => !crate::fastgrnn::build_candidates(budget_kb, mode).is_empty(),
    }
}

fn merge_results(path: &Path, new: &EvalReport) -> std::result::Result<(), Failure> {
    let mut merged = match fs::read_to_string(path) {
        Ok(text) => parse_report_csv(&text)?,
        Err(_) => EvalReport::default(),
    };
    for e in &new.entries {
        merged
            .entries
            .retain(|old| (old.family, old.budget_kb) != (e.family, e.budget_kb));
        merged.entries.push(e.clone());
    }
    merged.entries.sort_by_key(|e| (e.family, e.budget_kb));
    fs::write(path, emit_report(&merged, ReportFormat::Csv)?).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn search(a: &SearchArgs) -> std::result::Result<(), Failure> {
    if let Some(path) = &a.config {
        let mut config = ExperimentConfig::load(path)?;
        if config.data_dir.is_none() {
            config.data_dir = a.data.data_dir.clone();
        }
        if config.output_dir.is_none() {
            config.output_dir = Some(a.out.clone());
        }
        let data = DataArgs {
            data_dir: config.data_dir.clone(),
            scale: config.scale.to_string(),
            seed: config.seed,
            standardize: config.standardize || a.data.standardize,
        };
        let (split, _) = load_split(&data)?;
        let report = run_experiment(&config, &split)?;
        print!("{}", emit_report(&report, ReportFormat::Markdown)?);
        return Ok(());
    }
    let family = search_family(a)?;
    let budget = Budget::new(a.budget.expect("clap enforces --budget"))?;
    let scale: Scale = a.data.scale.parse()?;
    if !any_feasible(family, budget.kb(), scale) {
        println!("{family} {}KB: no feasible model", budget.kb());
        return Ok(());
    }
    let (split, scale) = load_split(&a.data)?;
    let config = ExperimentConfig {
        families: vec![family],
        budgets: vec![budget],
        seed: a.data.seed,
        scale,
        data_dir: None,
        output_dir: None,
        standardize: a.data.standardize,
    };
    let report = run_experiment(&config, &split)?;
    fs::create_dir_all(&a.out).map_err(|e| Failure::Runtime(format!("{}: {e}", a.out.display())))?;
    merge_results(&a.out.join("results.csv"), &report)?;
    for e in &report.entries {
        match &e.result {
            CellResult::NoFeasibleModel => println!("{} {}KB: no feasible model", e.family, e.budget_kb),
            CellResult::Model(m) => println!(
                "{} {}KB: {} [{}] val={:.3} test={:.3}",
                e.family,
                e.budget_kb,
                m.spec,
                crate::size::format_centi_kb(m.footprint_centi_kb),
                m.validation_accuracy.unwrap_or(f64::NAN),
                m.test_accuracy
            ),
        }
    }
    Ok(())
}

fn train(a: &TrainArgs) -> std::result::Result<(), Failure> {
    let spec = model_spec(&a.spec)?;
    let (split, scale) = load_split(&a.data)?;
    let seed = a.data.seed;
    let sc = scale.config();
    let (model, val): (Box<dyn StoredModel>, f64) = match spec {
        ModelSpec::Cnn(arch) => {
            let cfg = CnnTrainConfig {
                epochs: a.epochs.unwrap_or(sc.cnn_epochs),
                learning_rate: a.lr.unwrap_or(CnnTrainConfig::default().learning_rate),
                seed,
                ..CnnTrainConfig::default()
            };
            let (m, h) = train_cnn(CnnModel::init(arch, seed), &split, &cfg)?;
            (Box::new(m), h.best_validation_accuracy)
        }
        ModelSpec::Proto(s) => {
            let base = ProtoTrainConfig::default();
            let cfg = ProtoTrainConfig {
                epochs: a.epochs.unwrap_or(sc.proto_epochs),
                gamma: a.gamma.unwrap_or(base.gamma),
                learning_rate: a.lr.unwrap_or(base.learning_rate),
                seed,
                ..base
            };
            let (m, h) = protonn_train(s, &split.train, &split.validation, &cfg)?;
            (Box::new(m), h.best_validation_accuracy)
        }
        ModelSpec::Bonsai(s) => {
            let base = BonsaiTrainConfig::default();
            let cfg = BonsaiTrainConfig {
                epochs: a.epochs.unwrap_or(sc.bonsai_epochs),
                learning_rate: a.lr.unwrap_or(base.learning_rate),
                seed,
                ..base
            };
            let out = bonsai_train(s, &split.train, &split.validation, &cfg)?;
            (Box::new(out.best_model), out.history.best_validation_accuracy)
        }
        ModelSpec::Grnn(s) => {
            // the schedule follows the smallest budget the spec fits
            let budget = crate::harness::BUDGETS_KB
                .into_iter()
                .find(|&b| s.footprint().fits(b))
                .unwrap_or(128);
            let mut cfg = FastGrnnTrainConfig::for_budget(budget, seed).with_epochs(a.epochs.unwrap_or(sc.fastgrnn_epochs));
            if let Some(lr) = a.lr {
                cfg.learning_rate = lr;
            }
            let out = fastgrnn_train(s, &split.train, &split.validation, &cfg)?;
            (Box::new(out.model), out.history.best_validation_accuracy)
        }
    };
    crate::codec::write_file(&a.out, &model.to_bytes()?)?;
    println!("saved {} (val={val:.3})", a.out.display());
    Ok(())
}

/// Loads a model file of any family, dispatching on its tag byte.
pub fn load_model(path: &Path) -> Result<(Box<dyn StoredModel>, Footprint)> {
    let bytes = crate::codec::read_file(path)?;
    load_model_bytes(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Decodes any family's parameter file, dispatching on the tag byte.
pub fn load_model_bytes(bytes: &[u8]) -> Result<(Box<dyn StoredModel>, Footprint)> {
    let bytes = bytes.to_vec();
    match bytes.first().copied() {
        Some(TAG_CNN) => {
            let m = CnnModel::from_bytes(&bytes)?;
            let fp = m.footprint()?;
            Ok((Box::new(m), fp))
        }
        Some(TAG_PROTONN) => {
            let m = ProtoNNModel::from_bytes(&bytes)?;
            let fp = m.footprint();
            Ok((Box::new(m), fp))
        }
        Some(TAG_BONSAI) => {
            let m = BonsaiModel::from_bytes(&bytes)?;
            let fp = m.footprint();
            Ok((Box::new(m), fp))
        }
        Some(TAG_FASTGRNN) => {
            let m = FastGrnnModel::from_bytes(&bytes)?;
            let fp = m.footprint();
            Ok((Box::new(m), fp))
        }
        _ => Err(Error::Format("unknown model file".into())),
    }
}

fn eval(a: &EvalArgs) -> std::result::Result<(), Failure> {
    let (model, fp) = load_model(&a.model)?;
    let (split, _) = load_split(&a.data)?;
    let acc = evaluate(model.as_ref(), split.test.read())?;
    println!("{}: test={acc:.3} [{}]", a.model.display(), fp.kb_label());
    Ok(())
}

fn report(a: &ReportArgs) -> std::result::Result<(), Failure> {
    let format: ReportFormat = a.format.parse()?;
    let text = fs::read_to_string(&a.input).map_err(|e| Failure::Runtime(format!("{}: {e}", a.input.display())))?;
    let parsed = parse_report_csv(&text).map_err(|e| usage(format!("{}: {e}", a.input.display())))?;
    print!("{}", emit_report(&parsed, format)?);
    Ok(())
}
