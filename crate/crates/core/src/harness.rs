//! Budget-driven experiments across families, evaluation on the held-out
//! test batch, and the comparison table.
//!
//! Selection is always by validation accuracy. The test batch is read once
//! per selected model, after every search has finished.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bonsai::{self, bonsai_sweep, BonsaiSweepConfig, BonsaiTrainConfig};
use crate::datasets::{stratified_holdout, DatasetSplit, LabeledImage};
use crate::directconv::{sampling_search, CnnSearchConfig, CnnTrainConfig};
use crate::error::{Error, Result};
use crate::fastgrnn::{self, fastgrnn_sweep, FastGrnnSweepConfig, SeqMode};
use crate::history::accuracy;
use crate::protonn::{self, protonn_grid_train, ProtoGrid, ProtoTrainConfig, INPUT_DIM};
use crate::size::format_centi_kb;
use crate::Classifier;

pub const BUDGETS_KB: [u32; 5] = [8, 16, 32, 64, 128];
/// Validation images held out of the training batches, per class.
pub const VALIDATION_PER_CLASS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Budget(u32);

impl Budget {
    pub fn new(kb: u32) -> Result<Self> {
        if BUDGETS_KB.contains(&kb) {
            Ok(Budget(kb))
        } else {
            Err(Error::invalid(format!("budget {kb}KB is not one of {BUDGETS_KB:?}")))
        }
    }

    pub fn all() -> Vec<Budget> {
        BUDGETS_KB.iter().map(|&kb| Budget(kb)).collect()
    }

    pub fn kb(self) -> u32 {
        self.0
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_end_matches("KB").trim_end_matches("kb");
        let kb = t
            .parse()
            .map_err(|_| Error::invalid(format!("budget {s:?} is not an integer")))?;
        Budget::new(kb)
    }
}

/// One row of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    DirectConv,
    ProtoNN,
    Bonsai,
    FastGrnn(SeqMode),
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::DirectConv,
        Family::ProtoNN,
        Family::Bonsai,
        Family::FastGrnn(SeqMode::RowMajor),
        Family::FastGrnn(SeqMode::ChannelMajor),
        Family::FastGrnn(SeqMode::Multi),
    ];

    pub fn label(self) -> &'static str {
        match self {
            Family::DirectConv => "Direct Conv. (3-channel)",
            Family::ProtoNN => "ProtoNN",
            Family::Bonsai => "Bonsai",
            Family::FastGrnn(m) => m.label(),
        }
    }

    /// Parses a comma-separated list; `fastgrnn` expands to all three modes.
    pub fn parse_list(s: &str) -> Result<Vec<Family>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("fastgrnn") {
                out.extend(SeqMode::ALL.map(Family::FastGrnn));
            } else if part.eq_ignore_ascii_case("all") {
                out.extend(Family::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::DirectConv => f.write_str("directconv"),
            Family::ProtoNN => f.write_str("protonn"),
            Family::Bonsai => f.write_str("bonsai"),
            Family::FastGrnn(m) => write!(f, "fastgrnn-{m}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "directconv" | "cnn" => Ok(Family::DirectConv),
            "protonn" => Ok(Family::ProtoNN),
            "bonsai" => Ok(Family::Bonsai),
            _ => match s.strip_prefix("fastgrnn-") {
                Some(mode) => Ok(Family::FastGrnn(mode.parse()?)),
                None => Err(Error::invalid(format!("unknown family {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::invalid(format!("unknown scale {s:?} (desk or full)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        })
    }
}

/// Everything a scale changes. Desk runs shrink the data, candidate counts
/// and epochs so the whole suite fits a laptop afternoon.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleConfig {
    /// `None` keeps every training image.
    pub train_per_class: Option<usize>,
    pub validation_per_class: Option<usize>,
    pub cnn_samples: usize,
    pub cnn_partial_epochs: usize,
    pub cnn_epochs: usize,
    pub proto_grid: ProtoGrid,
    pub proto_epochs: usize,
    pub bonsai_depths: Vec<usize>,
    pub bonsai_dim_stride: usize,
    pub bonsai_epochs: usize,
    /// Candidates kept per (mode, budget), closest to the budget first.
    pub fastgrnn_candidates: usize,
    pub fastgrnn_epochs: usize,
}

impl Scale {
    pub fn config(self) -> ScaleConfig {
        match self {
            Scale::Full => ScaleConfig {
                train_per_class: None,
                validation_per_class: None,
                cnn_samples: 750,
                cnn_partial_epochs: 5,
                cnn_epochs: 100,
                proto_grid: ProtoGrid::full(),
                proto_epochs: 100,
                bonsai_depths: (1..=bonsai::MAX_DEPTH).collect(),
                bonsai_dim_stride: 1,
                bonsai_epochs: 200,
                fastgrnn_candidates: 3,
                fastgrnn_epochs: 150,
            },
            Scale::Desk => ScaleConfig {
                train_per_class: Some(500),
                validation_per_class: Some(100),
                cnn_samples: 30,
                cnn_partial_epochs: 2,
                cnn_epochs: 30,
                proto_grid: ProtoGrid {
                    gammas: vec![0.15, 1.5, 15.0],
                    learning_rates: vec![0.01],
                    ..ProtoGrid::full()
                },
                proto_epochs: 30,
                bonsai_depths: (1..=bonsai::MAX_DEPTH).collect(),
                bonsai_dim_stride: 4,
                bonsai_epochs: 30,
                fastgrnn_candidates: 1,
                fastgrnn_epochs: 30,
            },
        }
    }
}

impl ScaleConfig {
    pub fn cnn_search(&self, seed: u64) -> CnnSearchConfig {
        CnnSearchConfig {
            samples: self.cnn_samples,
            partial_epochs: self.cnn_partial_epochs,
            full: CnnTrainConfig {
                epochs: self.cnn_epochs,
                seed,
                ..CnnTrainConfig::default()
            },
            seed,
        }
    }

    pub fn proto_train(&self, seed: u64) -> ProtoTrainConfig {
        ProtoTrainConfig {
            epochs: self.proto_epochs,
            seed,
            ..ProtoTrainConfig::default()
        }
    }

    pub fn bonsai_sweep(&self, limit_kb: u32, seed: u64) -> BonsaiSweepConfig {
        BonsaiSweepConfig {
            depths: self.bonsai_depths.clone(),
            dim_stride: self.bonsai_dim_stride,
            limit_kb,
            train: BonsaiTrainConfig {
                epochs: self.bonsai_epochs,
                seed,
                ..BonsaiTrainConfig::default()
            },
        }
    }

    pub fn fastgrnn_sweep(&self, seed: u64) -> FastGrnnSweepConfig {
        FastGrnnSweepConfig {
            epochs: self.fastgrnn_epochs,
            seed,
            ..FastGrnnSweepConfig::default()
        }
    }
}

/// Holds out a stratified validation set and shrinks to the scale's subset.
/// With `standardize`, every subset is then shifted and scaled per channel
/// by training statistics; otherwise pixels stay in `[0, 1]`.
pub fn prepare_split(
    train: Vec<LabeledImage>,
    test: Vec<LabeledImage>,
    scale: &ScaleConfig,
    standardize: bool,
    seed: u64,
) -> Result<DatasetSplit> {
    let mut split = stratified_holdout(train, test, VALIDATION_PER_CLASS, seed)?;
    if let (Some(t), Some(v)) = (scale.train_per_class, scale.validation_per_class) {
        split = split.subsample(t, v, seed)?;
    }
    if standardize {
        split.standardize();
    }
    Ok(split)
}

/// Experiment settings, read from `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub families: Vec<Family>,
    pub budgets: Vec<Budget>,
    pub seed: u64,
    pub scale: Scale,
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Per-channel standardization of the prepared split; off by default.
    pub standardize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            families: Family::ALL.to_vec(),
            budgets: Budget::all(),
            seed: 0,
            scale: Scale::Desk,
            data_dir: None,
            output_dir: None,
            standardize: false,
        }
    }
}

impl ExperimentConfig {
    /// Blank lines and `#` comments are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("config line {}: expected key = value", n + 1)))?;
            let value = value.trim();
            match key.trim() {
                "families" => c.families = Family::parse_list(value)?,
                "budgets" => {
                    c.budgets = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?;
                    c.budgets.sort();
                    c.budgets.dedup();
                }
                "seed" => {
                    c.seed = value
                        .parse()
                        .map_err(|_| Error::Format(format!("config line {}: bad seed", n + 1)))?
                }
                "scale" => c.scale = value.parse()?,
                "data_dir" => c.data_dir = Some(PathBuf::from(value)),
                "output_dir" => c.output_dir = Some(PathBuf::from(value)),
                "standardize" => {
                    c.standardize = value
                        .parse()
                        .map_err(|_| Error::Format(format!("config line {}: standardize is true or false", n + 1)))?
                }
                other => return Err(Error::Format(format!("config line {}: unknown key {other:?}", n + 1))),
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        let mut s = format!(
            "families = {}\nbudgets = {}\nseed = {}\nscale = {}\n",
            join(self.families.iter().map(Family::to_string).collect()),
            join(self.budgets.iter().map(|b| b.kb().to_string()).collect()),
            self.seed,
            self.scale
        );
        if let Some(d) = &self.data_dir {
            s += &format!("data_dir = {}\n", d.display());
        }
        if let Some(d) = &self.output_dir {
            s += &format!("output_dir = {}\n", d.display());
        }
        if self.standardize {
            s += "standardize = true\n";
        }
        s
    }
}

/// Fraction of `items` whose argmax prediction matches the label.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, items: &[LabeledImage]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::InsufficientData("cannot evaluate on an empty dataset".into()));
    }
    accuracy(model, items)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCell {
    pub spec: String,
    /// Absent for reference rows that only quote a size.
    pub footprint_bytes: Option<u64>,
    pub footprint_centi_kb: u64,
    pub validation_accuracy: Option<f64>,
    pub test_accuracy: f64,
}

impl ModelCell {
    /// `acc [size]` with three decimals.
    pub fn render(&self) -> String {
        format!("{:.3} [{}]", self.test_accuracy, format_centi_kb(self.footprint_centi_kb))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellResult {
    Model(ModelCell),
    NoFeasibleModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportEntry {
    pub family: Family,
    pub budget_kb: u32,
    pub result: CellResult,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub entries: Vec<ReportEntry>,
    /// Distinct models scored on the test batch.
    pub evaluated_models: usize,
}

impl EvalReport {
    pub fn cell(&self, family: Family, budget_kb: u32) -> Option<&CellResult> {
        self.entries
            .iter()
            .find(|e| e.family == family && e.budget_kb == budget_kb)
            .map(|e| &e.result)
    }

    fn budgets(&self) -> Vec<u32> {
        let mut b: Vec<u32> = self.entries.iter().map(|e| e.budget_kb).collect();
        if b.is_empty() {
            return BUDGETS_KB.to_vec();
        }
        b.sort_unstable();
        b.dedup();
        b
    }

    fn families(&self) -> Vec<Family> {
        let mut f: Vec<Family> = self.entries.iter().map(|e| e.family).collect();
        f.sort();
        f.dedup();
        f
    }

    /// Families holding the highest test accuracy in the column.
    pub fn column_best(&self, budget_kb: u32) -> Vec<Family> {
        let scored: Vec<(Family, f64)> = self
            .entries
            .iter()
            .filter(|e| e.budget_kb == budget_kb)
            .filter_map(|e| match &e.result {
                CellResult::Model(m) => Some((e.family, m.test_accuracy)),
                CellResult::NoFeasibleModel => None,
            })
            .collect();
        let best = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        scored.into_iter().filter(|s| s.1 == best).map(|s| s.0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::invalid(format!("unknown report format {s:?} (md or csv)"))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "family",
    "budget_kb",
    "status",
    "spec",
    "footprint_bytes",
    "footprint_kb",
    "validation_accuracy",
    "test_accuracy",
];
const STATUS_OK: &str = "ok";
const STATUS_NONE: &str = "no feasible model";

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Markdown => Ok(emit_markdown(report)),
        ReportFormat::Csv => emit_csv(report),
    }
}

fn emit_markdown(report: &EvalReport) -> String {
    let budgets = report.budgets();
    let mut s = String::from("| Method |");
    for b in &budgets {
        s += &format!(" ≤{b}KB |");
    }
    s += "\n|---|";
    s += &"---|".repeat(budgets.len());
    s.push('\n');
    for family in report.families() {
        s += &format!("| {} |", family.label());
        for &b in &budgets {
            let text = match report.cell(family, b) {
                Some(CellResult::Model(m)) if report.column_best(b).contains(&family) => {
                    format!("**{}**", m.render())
                }
                Some(CellResult::Model(m)) => m.render(),
                Some(CellResult::NoFeasibleModel) => "--".into(),
                None => String::new(),
            };
            s += &format!(" {text} |");
        }
        s.push('\n');
    }
    s
}

fn emit_csv(report: &EvalReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for e in &report.entries {
        let row = match &e.result {
            CellResult::Model(m) => [
                e.family.to_string(),
                e.budget_kb.to_string(),
                STATUS_OK.into(),
                m.spec.clone(),
                m.footprint_bytes.map_or(String::new(), |b| b.to_string()),
                format_centi_kb(m.footprint_centi_kb).trim_end_matches("KB").to_string(),
                m.validation_accuracy.map_or(String::new(), |v| v.to_string()),
                m.test_accuracy.to_string(),
            ],
            CellResult::NoFeasibleModel => [
                e.family.to_string(),
                e.budget_kb.to_string(),
                STATUS_NONE.into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn parse_centi_kb(s: &str) -> Result<u64> {
    let bad = || Error::Format(format!("footprint {s:?} is not a KB value with two decimals"));
    let (int, frac) = s.trim().trim_end_matches("KB").split_once('.').ok_or_else(bad)?;
    if frac.len() != 2 {
        return Err(bad());
    }
    let i: u64 = int.parse().map_err(|_| bad())?;
    let f: u64 = frac.parse().map_err(|_| bad())?;
    Ok(i * 100 + f)
}

/// Reads a report written by [`emit_report`] in CSV form.
pub fn parse_report_csv(text: &str) -> Result<EvalReport> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut entries = Vec::new();
    for (n, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("csv: {e}")))?;
        if n == 0 {
            if rec.iter().ne(CSV_HEADER) {
                return Err(Error::Format("csv header does not match the report columns".into()));
            }
            continue;
        }
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Format(format!("csv row {n}: expected {} fields", CSV_HEADER.len())));
        }
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<Option<f64>> {
            match field(i) {
                "" => Ok(None),
                v => v
                    .parse()
                    .map(Some)
                    .map_err(|_| Error::Format(format!("csv row {n}: bad number {v:?}"))),
            }
        };
        let family: Family = field(0).parse().map_err(|e| Error::Format(format!("csv row {n}: {e}")))?;
        let budget_kb: u32 = field(1)
            .parse()
            .map_err(|_| Error::Format(format!("csv row {n}: bad budget")))?;
        let result = match field(2) {
            STATUS_OK => CellResult::Model(ModelCell {
                spec: field(3).to_string(),
                footprint_bytes: match field(4) {
                    "" => None,
                    v => Some(v.parse().map_err(|_| Error::Format(format!("csv row {n}: bad bytes")))?),
                },
                footprint_centi_kb: parse_centi_kb(field(5))?,
                validation_accuracy: num(6)?,
                test_accuracy: num(7)?.ok_or_else(|| Error::Format(format!("csv row {n}: missing test accuracy")))?,
            }),
            STATUS_NONE => CellResult::NoFeasibleModel,
            s => return Err(Error::Format(format!("csv row {n}: unknown status {s:?}"))),
        };
        entries.push(ReportEntry {
            family,
            budget_kb,
            result,
        });
    }
    Ok(EvalReport {
        entries,
        evaluated_models: 0,
    })
}

/// A selected model, ready to be scored and stored.
pub trait StoredModel: Classifier {
    fn to_bytes(&self) -> Result<Vec<u8>>;
}

impl StoredModel for crate::directconv::CnnModel {
    fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(crate::directconv::CnnModel::to_bytes(self))
    }
}

impl StoredModel for protonn::ProtoNNModel {
    fn to_bytes(&self) -> Result<Vec<u8>> {
        protonn::ProtoNNModel::to_bytes(self)
    }
}

impl StoredModel for bonsai::BonsaiModel {
    fn to_bytes(&self) -> Result<Vec<u8>> {
        bonsai::BonsaiModel::to_bytes(self)
    }
}

impl StoredModel for fastgrnn::FastGrnnModel {
    fn to_bytes(&self) -> Result<Vec<u8>> {
        fastgrnn::FastGrnnModel::to_bytes(self)
    }
}

/// Outcome of one family's search at one budget, before test scoring.
pub struct Selection<'a> {
    /// Equal keys mean the same trained model (scored once).
    pub key: usize,
    pub spec: String,
    pub footprint_bytes: u64,
    pub footprint_centi_kb: u64,
    pub validation_accuracy: f64,
    pub model: &'a dyn StoredModel,
}

/// Per-budget selections of one family; `None` marks an infeasible budget.
fn select_all<'a, T, F>(items: &'a [T], budgets: &[u32], mut pick: F) -> Result<Vec<Option<(usize, &'a T)>>>
where
    F: FnMut(&'a [T], u32) -> Result<&'a T>,
{
    budgets
        .iter()
        .map(|&b| match pick(items, b) {
            Ok(t) => {
                let idx = items.iter().position(|x| std::ptr::eq(x, t)).expect("picked from items");
                Ok(Some((idx, t)))
            }
            Err(Error::NoFeasibleModel { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Runs every family's search over the configured budgets and scores the
/// selected models on the test batch. Models and `results.csv` are written
/// to the output directory when one is configured.
pub fn run_experiment(config: &ExperimentConfig, split: &DatasetSplit) -> Result<EvalReport> {
    run_experiment_scaled(config, &config.scale.config(), split)
}

/// [`run_experiment`] with explicit scale settings in place of the named
/// scale's.
pub fn run_experiment_scaled(config: &ExperimentConfig, scale: &ScaleConfig, split: &DatasetSplit) -> Result<EvalReport> {
    let seed = config.seed;
    let budgets: Vec<u32> = config.budgets.iter().map(|b| b.kb()).collect();
    let mut report = EvalReport::default();
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    for &family in &config.families {
        // search first; the test batch is touched only below
        let cnn_models;
        let proto_candidates;
        let bonsai_entries;
        let grnn_entries;
        let selections: Vec<Option<Selection>>;
        match family {
            Family::DirectConv => {
                cnn_models = budgets
                    .iter()
                    .map(|&b| match sampling_search(b, split, &scale.cnn_search(seed)) {
                        Ok(o) => Ok(Some(o)),
                        Err(Error::NoFeasibleModel { .. }) => Ok(None),
                        Err(e) => Err(e),
                    })
                    .collect::<Result<Vec<_>>>()?;
                selections = cnn_models
                    .iter()
                    .enumerate()
                    .map(|(i, o)| {
                        o.as_ref().map(|o| Selection {
                            key: i,
                            spec: o.model.arch().to_string(),
                            footprint_bytes: o.footprint.total_bytes,
                            footprint_centi_kb: o.footprint.centi_kb(),
                            validation_accuracy: o.history.best_validation_accuracy,
                            model: &o.model as &dyn StoredModel,
                        })
                    })
                    .collect();
            }
            Family::ProtoNN => {
                let grid = &scale.proto_grid;
                let input_dim = split.train.first().map_or(INPUT_DIM, |t| t.image.data().len());
                let limit = budgets
                    .iter()
                    .copied()
                    .filter(|&b| !grid.feasible_cells(b, input_dim).is_empty())
                    .max();
                proto_candidates = match limit {
                    Some(l) => protonn_grid_train(l, &split.train, &split.validation, grid, &scale.proto_train(seed))?,
                    None => Vec::new(),
                };
                selections = select_all(&proto_candidates, &budgets, protonn::select_candidate)?
                    .into_iter()
                    .map(|s| {
                        s.map(|(key, c)| Selection {
                            key,
                            spec: format!(
                                "d={} m={} rho={} gamma={} lr={}",
                                c.cell.spec.dim, c.cell.spec.prototypes, c.cell.spec.density, c.cell.gamma, c.cell.learning_rate
                            ),
                            footprint_bytes: c.footprint.total_bytes,
                            footprint_centi_kb: c.footprint.centi_kb(),
                            validation_accuracy: c.history.best_validation_accuracy,
                            model: &c.model as &dyn StoredModel,
                        })
                    })
                    .collect();
            }
            Family::Bonsai => {
                let limit = budgets.iter().copied().max().unwrap_or(0);
                bonsai_entries = bonsai_sweep(&split.train, &split.validation, &scale.bonsai_sweep(limit, seed))?;
                selections = select_all(&bonsai_entries, &budgets, bonsai::select_for_budget)?
                    .into_iter()
                    .map(|s| {
                        s.map(|(key, e)| Selection {
                            key,
                            spec: format!("h={} d={}", e.spec.depth, e.spec.dim),
                            footprint_bytes: e.footprint.total_bytes,
                            footprint_centi_kb: e.footprint.centi_kb(),
                            validation_accuracy: e.validation_accuracy,
                            model: &e.model as &dyn StoredModel,
                        })
                    })
                    .collect();
            }
            Family::FastGrnn(mode) => {
                grnn_entries = fastgrnn_sweep_scaled(mode, &budgets, split, scale, seed)?;
                selections = select_all(&grnn_entries, &budgets, fastgrnn::select_for_budget)?
                    .into_iter()
                    .map(|s| {
                        s.map(|(key, e)| Selection {
                            key,
                            spec: e.spec.to_string(),
                            footprint_bytes: e.footprint.total_bytes,
                            footprint_centi_kb: e.footprint.centi_kb(),
                            validation_accuracy: e.validation_accuracy,
                            model: &e.model as &dyn StoredModel,
                        })
                    })
                    .collect();
            }
        }

        let mut scored: BTreeMap<usize, f64> = BTreeMap::new();
        for (&budget_kb, sel) in budgets.iter().zip(&selections) {
            let result = match sel {
                None => CellResult::NoFeasibleModel,
                Some(s) => {
                    let test_accuracy = match scored.get(&s.key) {
                        Some(&a) => a,
                        None => {
                            let a = evaluate(s.model, split.test.read())?;
                            scored.insert(s.key, a);
                            a
                        }
                    };
                    if let Some(dir) = &config.output_dir {
                        let path = dir.join(format!("{family}-{budget_kb}kb.bin"));
                        crate::codec::write_file(&path, &s.model.to_bytes()?)?;
                    }
                    CellResult::Model(ModelCell {
                        spec: s.spec.clone(),
                        footprint_bytes: Some(s.footprint_bytes),
                        footprint_centi_kb: s.footprint_centi_kb,
                        validation_accuracy: Some(s.validation_accuracy),
                        test_accuracy,
                    })
                }
            };
            report.entries.push(ReportEntry {
                family,
                budget_kb,
                result,
            });
        }
        report.evaluated_models += scored.len();
    }
    if let Some(dir) = &config.output_dir {
        let path = dir.join("results.csv");
        fs::write(&path, emit_report(&report, ReportFormat::Csv)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

/// FastGRNN sweep keeping only the scale's number of candidates per budget.
fn fastgrnn_sweep_scaled(
    mode: SeqMode,
    budgets: &[u32],
    split: &DatasetSplit,
    scale: &ScaleConfig,
    seed: u64,
) -> Result<Vec<fastgrnn::TrainedCandidate>> {
    let cfg = scale.fastgrnn_sweep(seed);
    if scale.fastgrnn_candidates >= 3 {
        return fastgrnn_sweep(mode, budgets, &split.train, &split.validation, &cfg);
    }
    let mut out = Vec::new();
    for &b in budgets {
        for spec in fastgrnn::build_candidates(b, mode)
            .into_iter()
            .take(scale.fastgrnn_candidates)
        {
            let run = fastgrnn::fastgrnn_train(spec, &split.train, &split.validation, &cfg.train_config(b))?;
            out.push(fastgrnn::TrainedCandidate {
                budget_kb: b,
                spec,
                footprint: spec.footprint(),
                validation_accuracy: run.history.best_validation_accuracy,
                model: run.model,
            });
        }
    }
    Ok(out)
}

/// The comparison table's published cells, for rendering checks.
pub fn reference_report() -> EvalReport {
    let rows: [(Family, [Option<(f64, u64)>; 5]); 6] = [
        (
            Family::DirectConv,
            [Some((0.604, 539)), Some((0.629, 865)), Some((0.6433, 1991)), Some((0.657, 5823)), Some((0.657, 5823))],
        ),
        (Family::ProtoNN, [None, None, Some((0.147, 2477)), Some((0.147, 2477)), Some((0.147, 2477))]),
        (
            Family::Bonsai,
            [Some((0.149, 788)), Some((0.153, 1543)), Some((0.221, 3085)), Some((0.325, 6086)), Some((0.377, 9452))],
        ),
        (
            Family::FastGrnn(SeqMode::RowMajor),
            [Some((0.471, 757)), Some((0.515, 1423)), Some((0.541, 3117)), Some((0.572, 6356)), Some((0.587, 11850))],
        ),
        (
            Family::FastGrnn(SeqMode::ChannelMajor),
            [Some((0.482, 757)), Some((0.533, 1580)), Some((0.553, 3007)), Some((0.589, 6356)), Some((0.589, 6356))],
        ),
        (
            Family::FastGrnn(SeqMode::Multi),
            [Some((0.447, 794)), Some((0.477, 1506)), Some((0.527, 2875)), Some((0.558, 6387)), Some((0.558, 12409))],
        ),
    ];
    let mut entries = Vec::new();
    for (family, cells) in rows {
        for (b, cell) in BUDGETS_KB.iter().zip(cells) {
            entries.push(ReportEntry {
                family,
                budget_kb: *b,
                result: match cell {
                    Some((acc, centi)) => CellResult::Model(ModelCell {
                        spec: String::new(),
                        footprint_bytes: None,
                        footprint_centi_kb: centi,
                        validation_accuracy: None,
                        test_accuracy: acc,
                    }),
                    None => CellResult::NoFeasibleModel,
                },
            });
        }
    }
    EvalReport {
        entries,
        evaluated_models: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budgets_are_the_five_sizes() {
        assert!(Budget::new(24).is_err());
        assert_eq!("64KB".parse::<Budget>().unwrap().kb(), 64);
        assert_eq!(Budget::all().len(), 5);
    }

    #[test]
    fn families_parse_and_print() {
        for f in Family::ALL {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
        assert_eq!(Family::parse_list("bonsai, fastgrnn").unwrap().len(), 4);
        assert!("svm".parse::<Family>().is_err());
    }

    #[test]
    fn config_round_trips_through_text() {
        let c = ExperimentConfig {
            families: vec![Family::ProtoNN, Family::FastGrnn(SeqMode::Multi)],
            budgets: vec![Budget::new(8).unwrap(), Budget::new(32).unwrap()],
            seed: 7,
            scale: Scale::Full,
            data_dir: Some("/data/cifar".into()),
            output_dir: Some("out".into()),
            standardize: true,
        };
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("budgets = 12").is_err());
    }

    #[test]
    fn reference_cells_render_like_the_table() {
        let r = reference_report();
        let md = emit_report(&r, ReportFormat::Markdown).unwrap();
        assert!(md.contains("**0.657 [58.23KB]**"));
        assert!(md.contains("| ProtoNN | -- | -- | 0.147 [24.77KB] |"));
        assert!(md.contains("**0.643 [19.91KB]**"));
    }

    #[test]
    fn empty_report_is_header_only() {
        let md = emit_report(&EvalReport::default(), ReportFormat::Markdown).unwrap();
        assert_eq!(md.lines().count(), 2);
        let csv = emit_report(&EvalReport::default(), ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert_eq!(parse_report_csv(&csv).unwrap(), EvalReport::default());
    }

    #[test]
    fn csv_round_trips() {
        let mut r = reference_report();
        if let CellResult::Model(m) = &mut r.entries[0].result {
            m.spec = "A, C1(8,3), D*".into();
            m.footprint_bytes = Some(5519);
            m.validation_accuracy = Some(0.1 + 0.2);
        }
        let csv = emit_report(&r, ReportFormat::Csv).unwrap();
        assert_eq!(parse_report_csv(&csv).unwrap(), r);
        assert!(parse_report_csv("family\nx").is_err());
    }

    #[test]
    fn evaluate_rejects_empty_data() {
        use crate::directconv::{ArchSpec, CnnModel, LayerSpec};
        let m = CnnModel::init(ArchSpec::custom(vec![LayerSpec::Logits]).unwrap(), 0);
        assert!(evaluate(&m, &[]).is_err());
    }
}
