//! One function per subcommand: resolve params, read inputs, write artifacts.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use vesselmatch::assignment::DecodeRule;
use vesselmatch::eval::{self, MetricsReport, RecallForm, SkippedCase, DROP_PROBABILITIES};
use vesselmatch::explain::{self, FeatureReport, NodeReport, DEFAULT_TAU};
use vesselmatch::features::{FeatureConfig, FeatureManifest, FEATURE_MANIFEST_VERSION};
use vesselmatch::graph::{GraphFileMeta, IndividualGraph, ViewAngle};
use vesselmatch::model::{self, EagmnParams};
use vesselmatch::pgm::Graymap;
use vesselmatch::pipeline::{self, Prediction, TrainConfig};
use vesselmatch::rng;
use vesselmatch::skeleton::{self, BinaryMask, ExtractConfig, DEFAULT_PRUNE_LEN};
use vesselmatch::synthetic::{self, TreeGrammarConfig};

use crate::config::{out_dir, resolve, CliResult, Failure, Output, REPORT_FORMAT_VERSION};
use crate::dataset::{self, CaseEntry, Dataset, DatasetManifest, Split, DATASET_FORMAT_VERSION, MANIFEST_FILE};

const VIEWS: [&str; 2] = ["LAO", "RAO"];
const DECODE_RULES: [&str; 2] = ["hungarian", "row-argmax"];
const RECALL_FORMS: [&str; 2] = ["standard", "true-negative"];

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON file with parameters; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [env: VESSELMATCH_OUT_DIR] [default: out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn start<P: Serialize>(common: &Common, invoked_as: &str, command: &str, params: &P) -> CliResult<Output> {
    Output::create(out_dir(common.out.clone()), invoked_as, command, params)
}

fn graph_meta(out: &Output) -> GraphFileMeta {
    GraphFileMeta {
        feature_manifest_version: Some(FEATURE_MANIFEST_VERSION),
        run_config_hash: Some(out.hash.clone()),
    }
}

fn open_dataset(path: Option<&Path>) -> CliResult<Option<Dataset>> {
    Ok(path.map(Dataset::open).transpose()?)
}

fn load_weights(path: &Path) -> CliResult<EagmnParams> {
    Ok(model::load_params(path)?)
}

// ---------------------------------------------------------------------------
// synth

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Root seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Number of cases [default: 130]
    #[arg(long)]
    count: Option<usize>,
    /// Leading cases used for training [default: 100]
    #[arg(long)]
    train: Option<usize>,
    /// Templates taken per view from the remaining cases [default: 5]
    #[arg(long)]
    templates_per_view: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub seed: u64,
    pub count: usize,
    pub train: usize,
    pub templates_per_view: usize,
    pub grammar: TreeGrammarConfig,
    pub features: FeatureConfig,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            count: 130,
            train: 100,
            templates_per_view: 5,
            grammar: TreeGrammarConfig::default(),
            features: FeatureConfig::default(),
        }
    }
}

pub fn synth(args: SynthArgs) -> CliResult<()> {
    let p: SynthParams = resolve(args.common.config.as_deref(), &args)?;
    if p.train > p.count {
        return Err(Failure::usage(format!(
            "train = {} exceeds count = {}",
            p.train, p.count
        )));
    }
    p.grammar.validate()?;
    let out = start(&args.common, "synth", "synth", &p)?;
    let stamp = out.stamp();
    let meta = graph_meta(&out);
    let mut graphs = Vec::with_capacity(p.count);
    let mut entries = Vec::with_capacity(p.count);
    for i in 0..p.count {
        let id = format!("case-{i:04}");
        let case_seed = rng::derive_indexed(p.seed, "synthetic/case", i as u64);
        let case = synthetic::generate_case(&p.grammar, &p.features, case_seed)?;
        let mut g = case.graph;
        g.case_id = Some(id.clone());
        let graph_file = format!("cases/{id}.json");
        let mask_file = format!("cases/{id}.mask.pgm");
        out.bytes(&graph_file, (g.to_json(&meta)? + "\n").as_bytes())?;
        out.bytes(&mask_file, &case.mask.to_pgm().encode_with_comment(Some(&stamp)))?;
        let intensity = match &case.mask.intensity {
            Some(plane) => {
                let name = format!("cases/{id}.intensity.pgm");
                let map = Graymap {
                    width: case.mask.width,
                    height: case.mask.height,
                    pixels: plane.clone(),
                };
                out.bytes(&name, &map.encode_with_comment(Some(&stamp)))?;
                Some(name)
            }
            None => None,
        };
        entries.push(CaseEntry {
            id,
            seed: case_seed,
            split: Split::Test,
            view_angle: g.view_angle,
            nodes: g.len(),
            graph: graph_file,
            mask: mask_file,
            intensity,
        });
        graphs.push(g);
    }
    for e in &mut entries[..p.train] {
        e.split = Split::Train;
    }
    let pool = graphs.split_off(p.train);
    let (templates, _) = pipeline::select_templates(pool, p.templates_per_view);
    for t in &templates {
        if let Some(e) = entries.iter_mut().find(|e| Some(&e.id) == t.case_id.as_ref()) {
            e.split = Split::Template;
        }
    }
    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        run_config_hash: out.hash.clone(),
        seed: p.seed,
        feature_manifest: FeatureManifest::for_config(&p.features),
        cases: entries,
    };
    out.json(MANIFEST_FILE, &manifest)?;
    let count = |s| manifest.cases.iter().filter(|c| c.split == s).count();
    println!(
        "wrote {} cases ({} train, {} template, {} test) to {}",
        p.count,
        count(Split::Train),
        count(Split::Template),
        count(Split::Test),
        out.path("").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// extract

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Binary mask PGM files (foreground >= 128)
    #[arg(long = "mask", value_name = "PGM")]
    masks: Vec<PathBuf>,
    /// Intensity PGM per mask, in the same order
    #[arg(long = "intensity", value_name = "PGM")]
    intensities: Vec<PathBuf>,
    #[arg(long = "view", value_parser = VIEWS)]
    #[serde(rename = "view_angle")]
    view: Option<String>,
    /// Spur length below which leaf segments are pruned [default: 5]
    #[arg(long)]
    prune_len: Option<usize>,
    /// Pixel nearest the root, as X,Y
    #[arg(long, value_name = "X,Y", value_parser = parse_point)]
    root: Option<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractParams {
    pub masks: Vec<PathBuf>,
    pub intensities: Vec<PathBuf>,
    pub view_angle: Option<ViewAngle>,
    pub prune_len: usize,
    pub root: Option<[f64; 2]>,
    pub features: FeatureConfig,
}

impl Default for ExtractParams {
    fn default() -> Self {
        ExtractParams {
            masks: Vec::new(),
            intensities: Vec::new(),
            view_angle: None,
            prune_len: DEFAULT_PRUNE_LEN,
            root: None,
            features: FeatureConfig::default(),
        }
    }
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok([num(x)?, num(y)?])
}

fn case_stem(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.strip_suffix(".mask").map(str::to_string).unwrap_or(stem)
}

pub fn extract(args: ExtractArgs) -> CliResult<()> {
    let p: ExtractParams = resolve(args.common.config.as_deref(), &args)?;
    if p.masks.is_empty() {
        return Err(Failure::usage("no --mask given"));
    }
    if !p.intensities.is_empty() && p.intensities.len() != p.masks.len() {
        return Err(Failure::usage(format!(
            "{} intensity files for {} masks",
            p.intensities.len(),
            p.masks.len()
        )));
    }
    let view = p.view_angle.ok_or_else(|| Failure::usage("--view is required"))?;
    let cfg = ExtractConfig {
        prune_len: p.prune_len,
        features: p.features,
        root_hint: p.root.map(|[x, y]| (x, y)),
    };
    let out = start(&args.common, "extract", "extract", &p)?;
    let meta = graph_meta(&out);
    for (k, mask_path) in p.masks.iter().enumerate() {
        let mask = Graymap::read(mask_path)?;
        let intensity = p.intensities.get(k).map(|i| Graymap::read(i)).transpose()?;
        let mask = BinaryMask::from_pgm(&mask, intensity.as_ref())?;
        let stem = case_stem(mask_path);
        let mut extraction = skeleton::extract_graph(&mask, view, &cfg)
            .map_err(|e| Failure::from(anyhow::Error::from(e).context(mask_path.display().to_string())))?;
        extraction.graph.case_id = Some(stem.clone());
        let name = format!("{stem}.json");
        out.bytes(&name, (extraction.graph.to_json(&meta)? + "\n").as_bytes())?;
        println!(
            "{}: {} segments -> {}",
            mask_path.display(),
            extraction.graph.len(),
            out.path(&name).display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train / init

#[derive(Args, Debug, Serialize)]
pub struct ModelFlags {
    /// Dataset directory (uses its train split)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Labeled graph JSON files, instead of a dataset
    #[arg(long = "graph", value_name = "JSON")]
    graphs: Vec<PathBuf>,
    /// Adam learning rate [default: 1e-4]
    #[arg(long)]
    lr: Option<f64>,
    /// Seed for initialization and pair sampling [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Hidden width of every network [default: 64]
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    attention_rounds: Option<usize>,
    #[arg(long)]
    conv_rounds: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
    /// Optimizer steps [default: 2000]
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
pub struct InitArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub dataset: Option<PathBuf>,
    pub graphs: Vec<PathBuf>,
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub hidden: usize,
    pub attention_rounds: usize,
    pub conv_rounds: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainParams {
            dataset: None,
            graphs: Vec::new(),
            steps: t.steps,
            lr: t.lr,
            seed: t.seed,
            hidden: t.hidden,
            attention_rounds: t.attention_rounds,
            conv_rounds: t.conv_rounds,
        }
    }
}

impl TrainParams {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            lr: self.lr,
            seed: self.seed,
            hidden: self.hidden,
            attention_rounds: self.attention_rounds,
            conv_rounds: self.conv_rounds,
        }
    }
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let p: TrainParams = resolve(args.common.config.as_deref(), &args)?;
    run_training(&args.common, "train", p)
}

/// Same as `train` with zero steps, hashed as such, so both write the
/// same weights.
pub fn init(args: InitArgs) -> CliResult<()> {
    let mut p: TrainParams = resolve(args.common.config.as_deref(), &args)?;
    p.steps = 0;
    run_training(&args.common, "init", p)
}

fn run_training(common: &Common, invoked_as: &str, p: TrainParams) -> CliResult<()> {
    let ds = open_dataset(p.dataset.as_deref())?;
    let graphs = dataset::select(&p.graphs, ds.as_ref(), Split::Train, "training graphs")?;
    let manifest = match &ds {
        Some(d) => Some(d.manifest.feature_manifest.clone()),
        None => {
            let m = FeatureManifest::for_config(&FeatureConfig::default());
            graphs.first().filter(|g| g.feature_dim() == m.names.len()).map(|_| m)
        }
    };
    let out = start(common, invoked_as, "train", &p)?;
    let outcome = pipeline::train(&p.train_config(), &graphs, manifest)?;
    let mut params = outcome.params;
    params.run_config_hash = Some(out.hash.clone());
    out.bytes("weights.bin", &model::params_to_bytes(&params)?)?;
    if invoked_as == "train" {
        let mut csv = String::from("step,loss\n");
        for (k, l) in outcome.losses.iter().enumerate() {
            csv.push_str(&format!("{k},{l}\n"));
        }
        out.csv("losses.csv", &csv)?;
    }
    let last = outcome.losses.last().map_or("n/a".to_string(), |l| format!("{l:.6}"));
    println!(
        "{} graphs, {} steps, final loss {last} -> {}",
        graphs.len(),
        p.steps,
        out.path("weights.bin").display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// infer / eval

#[derive(Args, Debug, Serialize)]
pub struct EvalSet {
    /// Trained weights file
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Dataset directory (uses its test and template splits)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Test graph JSON files
    #[arg(long = "test", value_name = "JSON")]
    tests: Vec<PathBuf>,
    /// Labeled template graph JSON files
    #[arg(long = "template", value_name = "JSON")]
    templates: Vec<PathBuf>,
    #[arg(long, value_parser = DECODE_RULES)]
    decode: Option<String>,
}

fn required(path: &Option<PathBuf>, flag: &str) -> CliResult<PathBuf> {
    path.clone()
        .ok_or_else(|| Failure::usage(format!("{flag} is required")))
}

struct Inputs {
    params: EagmnParams,
    tests: Vec<IndividualGraph>,
    templates: Vec<IndividualGraph>,
}

fn load_inputs(
    weights: &Option<PathBuf>,
    ds: Option<&PathBuf>,
    tests: &[PathBuf],
    templates: &[PathBuf],
) -> CliResult<Inputs> {
    let weights = required(weights, "--weights")?;
    let ds = open_dataset(ds.map(PathBuf::as_path))?;
    Ok(Inputs {
        params: load_weights(&weights)?,
        tests: dataset::select(tests, ds.as_ref(), Split::Test, "test graphs")?,
        templates: dataset::select(templates, ds.as_ref(), Split::Template, "templates")?,
    })
}

#[derive(Args, Debug, Serialize)]
pub struct InferArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    set: EvalSet,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferParams {
    pub weights: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub tests: Vec<PathBuf>,
    pub templates: Vec<PathBuf>,
    pub decode: DecodeRule,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionsFile {
    pub format_version: u32,
    pub run_config_hash: String,
    pub weights_run_config_hash: Option<String>,
    pub decode: DecodeRule,
    pub predictions: Vec<Prediction>,
    pub skipped_cases: Vec<SkippedCase>,
}

pub fn infer(args: InferArgs) -> CliResult<()> {
    let p: InferParams = resolve(args.common.config.as_deref(), &args)?;
    let inputs = load_inputs(&p.weights, p.dataset.as_ref(), &p.tests, &p.templates)?;
    let out = start(&args.common, "infer", "infer", &p)?;
    let (predictions, skipped_cases) = eval::predict_all(&inputs.params, &inputs.tests, &inputs.templates, p.decode)?;
    let file = PredictionsFile {
        format_version: REPORT_FORMAT_VERSION,
        run_config_hash: out.hash.clone(),
        weights_run_config_hash: inputs.params.run_config_hash.clone(),
        decode: p.decode,
        predictions,
        skipped_cases,
    };
    out.json("predictions.json", &file)?;
    println!(
        "{} predictions, {} skipped -> {}",
        file.predictions.len(),
        file.skipped_cases.len(),
        out.path("predictions.json").display()
    );
    for s in &file.skipped_cases {
        eprintln!("skipped {}: {}", s.case_id, s.reason);
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// predictions.json written by `infer`
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, value_parser = RECALL_FORMS)]
    recall: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub predictions: Option<PathBuf>,
    pub recall: RecallForm,
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    format_version: u32,
    run_config_hash: &'a str,
    predictions_run_config_hash: &'a str,
    recall: RecallForm,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

pub fn read_predictions(path: &Path) -> CliResult<PredictionsFile> {
    let text = vesselmatch::io::read_text(path)?;
    let file: PredictionsFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Data(anyhow::anyhow!("predictions {}: {e}", path.display())))?;
    if file.format_version > REPORT_FORMAT_VERSION {
        return Err(vesselmatch::Error::Version {
            found: file.format_version,
            supported: REPORT_FORMAT_VERSION,
        }
        .into());
    }
    Ok(file)
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let p: EvalParams = resolve(args.common.config.as_deref(), &args)?;
    let preds = read_predictions(&required(&p.predictions, "--predictions")?)?;
    let out = start(&args.common, "eval", "eval", &p)?;
    let report = eval::compute_metrics(&eval::pooled_pairs(&preds.predictions), p.recall)?;
    out.csv("metrics.csv", &report.to_csv())?;
    out.json(
        "metrics.json",
        &MetricsFile {
            format_version: REPORT_FORMAT_VERSION,
            run_config_hash: &out.hash,
            predictions_run_config_hash: &preds.run_config_hash,
            recall: p.recall,
            report: &report,
        },
    )?;
    print!("{}", report.to_table());
    Ok(())
}

// ---------------------------------------------------------------------------
// robustness

#[derive(Args, Debug, Serialize)]
pub struct RobustnessArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    set: EvalSet,
    /// Drop probabilities [default: 0 and 0.05..0.20 in steps of 0.025]
    #[arg(long = "probabilities", value_delimiter = ',')]
    probabilities: Vec<f64>,
    /// Seed of the drop streams [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = RECALL_FORMS)]
    recall: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessParams {
    pub weights: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub tests: Vec<PathBuf>,
    pub templates: Vec<PathBuf>,
    pub decode: DecodeRule,
    pub probabilities: Vec<f64>,
    pub seed: u64,
    pub recall: RecallForm,
}

impl Default for RobustnessParams {
    fn default() -> Self {
        RobustnessParams {
            weights: None,
            dataset: None,
            tests: Vec::new(),
            templates: Vec::new(),
            decode: DecodeRule::default(),
            probabilities: std::iter::once(0.0).chain(DROP_PROBABILITIES).collect(),
            seed: 0,
            recall: RecallForm::default(),
        }
    }
}

pub fn robustness(args: RobustnessArgs) -> CliResult<()> {
    let p: RobustnessParams = resolve(args.common.config.as_deref(), &args)?;
    let inputs = load_inputs(&p.weights, p.dataset.as_ref(), &p.tests, &p.templates)?;
    let out = start(&args.common, "robustness", "robustness", &p)?;
    let report = eval::robustness_sweep(
        &inputs.params,
        &inputs.tests,
        &inputs.templates,
        &p.probabilities,
        p.seed,
        p.decode,
        p.recall,
    )?;
    out.csv("robustness.csv", &report.to_csv())?;
    out.json("robustness.json", &Stamped::new(&out, &report))?;
    println!("probability  dropped  weighted_acc");
    for c in &report.cells {
        println!(
            "{:>11}  {:>7}  {:.4}",
            c.probability, c.dropped_segments, c.report.weighted.acc
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct Stamped<'a, T> {
    format_version: u32,
    run_config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

impl<'a, T> Stamped<'a, T> {
    fn new(out: &'a Output, body: &'a T) -> Self {
        Stamped {
            format_version: REPORT_FORMAT_VERSION,
            run_config_hash: &out.hash,
            body,
        }
    }
}

// ---------------------------------------------------------------------------
// explain

#[derive(Args, Debug, Serialize)]
pub struct ExplainFeaturesArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long = "test", value_name = "JSON")]
    tests: Vec<PathBuf>,
    #[arg(long = "template", value_name = "JSON")]
    templates: Vec<PathBuf>,
    /// Fidelity target in (0, 1] [default: 0.8]
    #[arg(long)]
    tau: Option<f64>,
    /// Pairs to explain [default: 10]
    #[arg(long)]
    max_pairs: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainFeaturesParams {
    pub weights: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub tests: Vec<PathBuf>,
    pub templates: Vec<PathBuf>,
    pub tau: f64,
    pub max_pairs: usize,
}

impl Default for ExplainFeaturesParams {
    fn default() -> Self {
        ExplainFeaturesParams {
            weights: None,
            dataset: None,
            tests: Vec::new(),
            templates: Vec::new(),
            tau: DEFAULT_TAU,
            max_pairs: 10,
        }
    }
}

#[derive(Serialize)]
struct ExplainedPair<'a> {
    test: &'a str,
    template: &'a str,
}

#[derive(Serialize)]
struct FeatureFile<'a> {
    pairs_explained: Vec<ExplainedPair<'a>>,
    #[serde(flatten)]
    report: &'a FeatureReport,
}

/// Each test graph with the first same-view template that is at least as large.
fn explanation_pairs(
    tests: &[IndividualGraph],
    templates: &[IndividualGraph],
    limit: usize,
) -> Vec<(IndividualGraph, IndividualGraph)> {
    tests
        .iter()
        .filter_map(|t| {
            templates
                .iter()
                .find(|tpl| tpl.view_angle == t.view_angle && tpl.len() >= t.len())
                .map(|tpl| (t.clone(), tpl.clone()))
        })
        .take(limit)
        .collect()
}

pub fn explain_features(args: ExplainFeaturesArgs) -> CliResult<()> {
    let p: ExplainFeaturesParams = resolve(args.common.config.as_deref(), &args)?;
    let inputs = load_inputs(&p.weights, p.dataset.as_ref(), &p.tests, &p.templates)?;
    let pairs = explanation_pairs(&inputs.tests, &inputs.templates, p.max_pairs);
    let out = start(&args.common, "explain-features", "explain-features", &p)?;
    let report = explain::explain_features(&inputs.params, &pairs, p.tau)?;
    let names = |g: &IndividualGraph| g.case_id.clone().unwrap_or_default();
    let ids: Vec<(String, String)> = pairs.iter().map(|(a, b)| (names(a), names(b))).collect();
    let file = FeatureFile {
        pairs_explained: ids
            .iter()
            .map(|(a, b)| ExplainedPair { test: a, template: b })
            .collect(),
        report: &report,
    };
    out.json("feature_importance.json", &Stamped::new(&out, &file))?;
    for r in report.ranking.iter().take(10) {
        println!(
            "{:<24} {:>3}  {:.2}",
            r.feature_name, r.selection_count, r.fraction_of_pairs
        );
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ExplainNodesArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Test graph JSON
    #[arg(long)]
    test: Option<PathBuf>,
    /// Template graph JSON, at least as large as the test graph
    #[arg(long)]
    template: Option<PathBuf>,
    /// Fidelity target in (0, 1] [default: 0.8]
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainNodesParams {
    pub weights: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub tau: f64,
}

impl Default for ExplainNodesParams {
    fn default() -> Self {
        ExplainNodesParams {
            weights: None,
            test: None,
            template: None,
            tau: DEFAULT_TAU,
        }
    }
}

#[derive(Serialize)]
struct NodeFile<'a> {
    test: Option<&'a str>,
    template: Option<&'a str>,
    #[serde(flatten)]
    report: &'a NodeReport,
}

pub fn explain_nodes(args: ExplainNodesArgs) -> CliResult<()> {
    let p: ExplainNodesParams = resolve(args.common.config.as_deref(), &args)?;
    let params = load_weights(&required(&p.weights, "--weights")?)?;
    let test = dataset::read_graphs(&[required(&p.test, "--test")?])?.remove(0);
    let template = dataset::read_graphs(&[required(&p.template, "--template")?])?.remove(0);
    let out = start(&args.common, "explain-nodes", "explain-nodes", &p)?;
    let report = explain::explain_nodes(&params, &test, &template, p.tau)?;
    let file = NodeFile {
        test: test.case_id.as_deref(),
        template: template.case_id.as_deref(),
        report: &report,
    };
    out.json("node_importance.json", &Stamped::new(&out, &file))?;
    println!(
        "fidelity {:.3} -> {:.3} after restoring {} of {} template nodes",
        report.initial_fidelity,
        report.final_fidelity,
        report.nodes.len(),
        template.len()
    );
    Ok(())
}
