//! `cek`: command line front end for cek-core.
//!
//! Six subcommands cover the pipeline end to end: `simulate` draws seeded
//! datasets with a ground-truth sidecar, `fit` learns CPTs for a given
//! structure, `estimate` runs the treatment-effect estimators, `intervene`
//! answers do-queries on a model file, `check-support` audits common
//! support, and `compare` scores every estimator against simulated truth.
//!
//! Exit codes: 0 success, 2 usage, 3 estimation/model domain errors
//! (violated support, empty bins, invalid models, out-of-range states),
//! 4 file I/O and malformed-file errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cek_core::data::{
    build_strata, check_support, fit_mle, load_csv, write_csv, CsvSchema, DataError, Dataset,
    StratumIndex,
};
use cek_core::estimators::{
    ate_adjustment, ate_dr, ate_iptw, ate_plugin_predicted, ate_stratified, estimate_all,
    AteReport, EstimateConfig, EstimateError, EstimateRun, OutcomeBackend, PropensityBackend,
    SupportPolicy,
};
use cek_core::logistic::{FeatureSpec, LogisticError};
use cek_core::model::{
    CausalGraph, CausalModel, InterventionQuery, ModelError, ModelSpec, NodeSpec, DEFAULT_ENUM_CAP,
};
use cek_core::outcome::{
    fit_outcome_logistic, fit_stratum_means, import_predictions_csv, predict_both_arms,
    ArmPredictions, OutcomeError, OutcomeKind, OutcomeModel,
};
use cek_core::propensity::{
    bin_scores, import_scores_csv, propensity_logistic, propensity_sample_proportion, ClipBounds,
    PropensityError, PropensityScores, Provenance,
};
use cek_core::simulate::{
    builtin, builtin_scenarios, load_truth_csv, sample, write_truth_csv, Scenario, SimulateError,
};

// ---------------------------------------------------------------------------
// Error-to-exit-code mapping

/// Every failure the binary can report, keyed by exit-code class.
#[derive(Debug)]
enum CliError {
    /// Bad flags or flag values: exit 2.
    Usage(String),
    /// Estimation, support, or model domain errors: exit 3.
    Domain(String),
    /// Missing or malformed files: exit 4.
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Io(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) | DataError::Csv(_) => CliError::Io(e.to_string()),
            DataError::Model(inner) => inner.into(),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Parse(_) => CliError::Io(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::UnknownScenario(_) | SimulateError::EmptySample => {
                CliError::Usage(e.to_string())
            }
            SimulateError::Io(_) | SimulateError::TruthFile { .. } => CliError::Io(e.to_string()),
            SimulateError::Model(inner) => inner.into(),
            SimulateError::Data(inner) => inner.into(),
        }
    }
}

impl From<PropensityError> for CliError {
    fn from(e: PropensityError) -> Self {
        match e {
            PropensityError::Io(_) | PropensityError::ScoresFile { .. } => {
                CliError::Io(e.to_string())
            }
            PropensityError::BadClipBounds { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<OutcomeError> for CliError {
    fn from(e: OutcomeError) -> Self {
        match e {
            OutcomeError::Io(_) | OutcomeError::PredictionsFile { .. } => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Propensity(inner) => inner.into(),
            EstimateError::Outcome(inner) => inner.into(),
            EstimateError::Data(inner) => inner.into(),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<LogisticError> for CliError {
    fn from(e: LogisticError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Prefix I/O-class messages with the file they concern.
fn with_file(err: impl Into<CliError>, path: &Path) -> CliError {
    match err.into() {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Argument declarations

#[derive(Parser)]
#[command(name = "cek", version, about = "Causal effect estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an observational dataset plus a hidden-truth sidecar
    Simulate(SimulateArgs),
    /// Fit maximum-likelihood CPTs for a model structure from data
    Fit(FitArgs),
    /// Estimate the average treatment effect from a dataset
    Estimate(EstimateArgs),
    /// Evaluate p(target | do(...)) on a model file
    Intervene(InterveneArgs),
    /// Report strata that violate common support
    CheckSupport(CheckSupportArgs),
    /// Compare every estimator against simulated ground truth
    Compare(CompareArgs),
}

/// Flags shared by every command that reads a data CSV.
#[derive(Args)]
struct DataArgs {
    /// Input data CSV
    #[arg(long)]
    data: PathBuf,
    /// Covariate columns, comma separated; default: every column that is
    /// neither the treatment nor the outcome
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    /// Treatment column name
    #[arg(long, default_value = "z")]
    treatment_col: String,
    /// Outcome column name
    #[arg(long, default_value = "y")]
    outcome_col: String,
    /// Read the outcome as real-valued instead of binary codes
    #[arg(long)]
    real_outcome: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Built-in scenario name (triangle, randomized, mediator)
    #[arg(long, conflicts_with = "model")]
    scenario: Option<String>,
    /// Model description JSON to sample from instead of a built-in scenario
    #[arg(long)]
    model: Option<PathBuf>,
    /// Treatment node (used with --model)
    #[arg(long, default_value = "z")]
    treatment: String,
    /// Outcome node (used with --model)
    #[arg(long, default_value = "y")]
    outcome: String,
    /// Number of records to draw
    #[arg(long)]
    n: usize,
    /// Generator seed; runs are reproducible byte for byte
    #[arg(long)]
    seed: u64,
    /// Observed-data CSV destination; the truth sidecar lands next to it
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Model JSON naming the nodes and edges; any cpts entry is ignored
    #[arg(long)]
    model: PathBuf,
    /// Destination for the fitted model JSON
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Which estimator to run, or `all` for every one plus identity checks
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    /// Propensity-score backend
    #[arg(long, value_enum, default_value = "sample-proportion")]
    propensity: PropensityArg,
    /// record,score CSV (for --propensity external)
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Outcome-model backend
    #[arg(long, value_enum, default_value = "stratum-mean")]
    outcome: OutcomeArg,
    /// record,yhat1,yhat0 CSV (for --outcome external)
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Number of propensity-score bins for the stratified estimator
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// What to do with strata where one treatment arm is empty
    #[arg(long, value_enum, default_value = "error")]
    support: SupportArg,
    /// Clip bounds LO,HI applied to propensity scores
    #[arg(long)]
    clip: Option<String>,
    /// Saturated encoding for logistic backends (default: one-hot)
    #[arg(long)]
    saturated: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

#[derive(Args)]
struct InterveneArgs {
    /// Model description JSON
    #[arg(long)]
    model: PathBuf,
    /// Intervention NODE=STATE; repeat for joint interventions
    #[arg(long = "do", value_name = "NODE=STATE", required = true)]
    assignments: Vec<String>,
    /// Node whose interventional distribution to report
    #[arg(long)]
    target: String,
    /// Also print the conditional p(target | node=state) for contrast
    #[arg(long)]
    contrast: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

#[derive(Args)]
struct CheckSupportArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Truth sidecar; default: the data path with a .truth.csv extension
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Number of propensity-score bins for the stratified estimator
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Adjustment,
    Iptw,
    Stratified,
    PluginPredicted,
    Dr,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PropensityArg {
    SampleProportion,
    Logistic,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutcomeArg {
    StratumMean,
    Logistic,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SupportArg {
    Error,
    Drop,
    Clip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Table,
    Structured,
}

// ---------------------------------------------------------------------------
// Entry point

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Fit(args) => run_fit(args),
        Command::Estimate(args) => run_estimate(args),
        Command::Intervene(args) => run_intervene(args),
        Command::CheckSupport(args) => run_check_support(args),
        Command::Compare(args) => run_compare(args),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing

/// Enumeration cap for exact queries; CEK_ENUM_CAP overrides the default.
fn enum_cap() -> Result<u64, CliError> {
    match std::env::var("CEK_ENUM_CAP") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Usage(format!("CEK_ENUM_CAP must be a positive integer, got {v:?}"))
        }),
        Err(_) => Ok(DEFAULT_ENUM_CAP),
    }
}

/// Default covariates: every header column that holds neither role.
fn resolve_covariates(args: &DataArgs) -> Result<Vec<String>, CliError> {
    if !args.covariates.is_empty() {
        return Ok(args.covariates.clone());
    }
    let file = fs::File::open(&args.data).map_err(|e| with_file(e, &args.data))?;
    let mut header = String::new();
    BufReader::new(file).read_line(&mut header).map_err(|e| with_file(e, &args.data))?;
    Ok(header
        .trim()
        .split(',')
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty() && *c != args.treatment_col && *c != args.outcome_col)
        .collect())
}

fn load_dataset(args: &DataArgs) -> Result<(Dataset, Vec<String>), CliError> {
    let covariates = resolve_covariates(args)?;
    let schema = CsvSchema {
        covariates: covariates.clone(),
        treatment: args.treatment_col.clone(),
        outcome: args.outcome_col.clone(),
        real_outcome: args.real_outcome,
    };
    let ds = load_csv(&args.data, &schema).map_err(|e| with_file(e, &args.data))?;
    Ok((ds, covariates))
}

fn parse_clip(flag: &Option<String>) -> Result<ClipBounds, CliError> {
    let Some(text) = flag else { return Ok(ClipBounds::default()) };
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| CliError::Usage(format!("--clip wants LO,HI, got {text:?}")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("--clip bound {s:?} is not a number")))
    };
    ClipBounds::new(parse(lo)?, parse(hi)?).map_err(|e| CliError::Usage(e.to_string()))
}

fn model_from_file(path: &Path) -> Result<CausalModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| with_file(e, path))?;
    let spec = ModelSpec::from_json(&text).map_err(|e| with_file(e, path))?;
    Ok(CausalModel::from_spec(&spec)?.with_enum_cap(enum_cap()?))
}

/// `NODE=STATE` → (node, state).
fn parse_assignment(text: &str) -> Result<(String, usize), CliError> {
    let err = || CliError::Usage(format!("--do wants NODE=STATE, got {text:?}"));
    let (node, state) = text.split_once('=').ok_or_else(err)?;
    let node = node.trim();
    if node.is_empty() {
        return Err(err());
    }
    Ok((node.to_string(), state.trim().parse().map_err(|_| err())?))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

// ---------------------------------------------------------------------------
// simulate

fn run_simulate(args: SimulateArgs) -> Result<i32, CliError> {
    let scenario = match (&args.scenario, &args.model) {
        (Some(name), None) => {
            let mut s = builtin(name).map_err(|e| {
                let known: Vec<String> =
                    builtin_scenarios().into_iter().map(|s| s.name).collect();
                CliError::Usage(format!("{e}; known scenarios: {}", known.join(", ")))
            })?;
            s.model = s.model.with_enum_cap(enum_cap()?);
            s.n = args.n;
            s.seed = args.seed;
            s
        }
        (None, Some(path)) => Scenario {
            name: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "model".into()),
            model: model_from_file(path)?,
            treatment: args.treatment.clone(),
            outcome: args.outcome.clone(),
            n: args.n,
            seed: args.seed,
        },
        _ => {
            return Err(CliError::Usage(
                "exactly one of --scenario or --model is required".into(),
            ))
        }
    };
    let sim = sample(&scenario)?;
    write_csv(&sim.dataset, &args.out).map_err(|e| with_file(e, &args.out))?;
    let truth = truth_path(&args.out);
    write_truth_csv(&truth, &sim).map_err(|e| with_file(e, &truth))?;
    println!(
        "true_ate={} scenario={} n={} seed={}",
        sim.true_ate, sim.scenario, scenario.n, scenario.seed
    );
    println!("wrote {} and {}", args.out.display(), truth.display());
    Ok(0)
}

/// `d.csv` → `d.truth.csv`.
fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.csv")
}

// ---------------------------------------------------------------------------
// fit

/// The slice of a model file `fit` needs; cpts and extra keys are ignored.
#[derive(Deserialize)]
struct StructureFile {
    nodes: Vec<NodeSpec>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

fn run_fit(args: FitArgs) -> Result<i32, CliError> {
    let text = fs::read_to_string(&args.model).map_err(|e| with_file(e, &args.model))?;
    let structure: StructureFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.model.display())))?;
    let graph = CausalGraph::new(structure.nodes, &structure.edges)?;
    let (ds, _) = load_dataset(&args.data)?;
    let fit = fit_mle(&ds, &graph)?;
    for row in &fit.unobserved_rows {
        println!(
            "warning: node `{}` parent configuration {:?} unobserved; row filled uniformly",
            row.node, row.parent_states
        );
    }
    let model = CausalModel::new(graph, fit.cpts);
    let json = model.to_spec().to_json();
    fs::write(&args.out, json + "\n").map_err(|e| with_file(e, &args.out))?;
    println!(
        "fitted {} nodes from {} records; wrote {}",
        model.graph().node_count(),
        ds.n(),
        args.out.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// estimate

fn feature_spec(saturated: bool, covariates: &[String]) -> FeatureSpec {
    if saturated {
        FeatureSpec::saturated(covariates)
    } else {
        FeatureSpec::one_hot(covariates)
    }
}

fn support_policy(arg: SupportArg, clip: ClipBounds) -> SupportPolicy {
    match arg {
        SupportArg::Error => SupportPolicy::Error,
        SupportArg::Drop => SupportPolicy::DropAndRenormalize,
        SupportArg::Clip => SupportPolicy::ClipPropensity(clip),
    }
}

fn scores_file<'a>(args: &'a EstimateArgs) -> Result<&'a PathBuf, CliError> {
    args.scores
        .as_ref()
        .ok_or_else(|| CliError::Usage("--propensity external requires --scores FILE".into()))
}

fn predictions_file<'a>(args: &'a EstimateArgs) -> Result<&'a PathBuf, CliError> {
    args.predictions
        .as_ref()
        .ok_or_else(|| CliError::Usage("--outcome external requires --predictions FILE".into()))
}

fn build_scores(
    args: &EstimateArgs,
    ds: &Dataset,
    index: &StratumIndex,
    covariates: &[String],
    clip: ClipBounds,
) -> Result<PropensityScores, CliError> {
    match args.propensity {
        PropensityArg::SampleProportion => Ok(propensity_sample_proportion(index, clip)),
        PropensityArg::Logistic => {
            Ok(propensity_logistic(ds, &feature_spec(args.saturated, covariates), clip)?)
        }
        PropensityArg::External => {
            let path = scores_file(args)?;
            import_scores_csv(path, ds.n(), clip).map_err(|e| with_file(e, path))
        }
    }
}

fn build_predictions(
    args: &EstimateArgs,
    ds: &Dataset,
    index: &StratumIndex,
    covariates: &[String],
) -> Result<ArmPredictions, CliError> {
    let model = match args.outcome {
        OutcomeArg::StratumMean => fit_stratum_means(ds, index),
        OutcomeArg::Logistic => {
            fit_outcome_logistic(ds, &feature_spec(args.saturated, covariates))?
        }
        OutcomeArg::External => {
            let path = predictions_file(args)?;
            import_predictions_csv(path, ds.n()).map_err(|e| with_file(e, path))?
        }
    };
    Ok(predict_both_arms(&model, ds)?)
}

fn run_estimate(args: EstimateArgs) -> Result<i32, CliError> {
    if args.scores.is_some() && args.propensity != PropensityArg::External {
        return Err(CliError::Usage("--scores needs --propensity external".into()));
    }
    if args.predictions.is_some() && args.outcome != OutcomeArg::External {
        return Err(CliError::Usage("--predictions needs --outcome external".into()));
    }
    let clip = parse_clip(&args.clip)?;
    let policy = support_policy(args.support, clip);
    let (ds, covariates) = load_dataset(&args.data)?;

    if args.method == MethodArg::All {
        let propensity = match args.propensity {
            PropensityArg::SampleProportion => PropensityBackend::SampleProportion,
            PropensityArg::Logistic => {
                PropensityBackend::Logistic(feature_spec(args.saturated, &covariates))
            }
            PropensityArg::External => {
                let path = scores_file(&args)?;
                let scores =
                    import_scores_csv(path, ds.n(), clip).map_err(|e| with_file(e, path))?;
                PropensityBackend::External(scores.per_record().to_vec())
            }
        };
        let outcome = match args.outcome {
            OutcomeArg::StratumMean => OutcomeBackend::StratumMean,
            OutcomeArg::Logistic => {
                OutcomeBackend::Logistic(feature_spec(args.saturated, &covariates))
            }
            OutcomeArg::External => {
                let path = predictions_file(&args)?;
                let model =
                    import_predictions_csv(path, ds.n()).map_err(|e| with_file(e, path))?;
                let OutcomeModel::External { yhat1, yhat0 } = model else { unreachable!() };
                OutcomeBackend::External { yhat1, yhat0 }
            }
        };
        let config = EstimateConfig {
            covariates: covariates.clone(),
            propensity,
            outcome,
            k: args.k,
            support: policy,
            clip,
        };
        let run = estimate_all(&ds, &config)?;
        match args.format {
            FormatArg::Structured => print_json(&run),
            FormatArg::Table => print_run_table(&run),
        }
        return Ok(0);
    }

    let index = build_strata(&ds, &covariates)?;
    let report = match args.method {
        MethodArg::Adjustment => ate_adjustment(&index, policy)?,
        method => {
            // score-based estimators share the support gate estimate-all uses
            let support = check_support(&index);
            if policy == SupportPolicy::Error && !support.is_clean() {
                return Err(EstimateError::Support(
                    support.violations.iter().map(|v| v.label.clone()).collect(),
                )
                .into());
            }
            let scores = build_scores(&args, &ds, &index, &covariates, clip)?;
            match method {
                MethodArg::Iptw => ate_iptw(&ds, &scores)?,
                MethodArg::Stratified => {
                    // the K given on the command line is used as-is; too many
                    // bins for the data is an error, not a silent adjustment
                    let bins = bin_scores(&scores, ds.treatment(), args.k)?;
                    ate_stratified(&ds, &bins)?
                }
                MethodArg::PluginPredicted => {
                    let preds = build_predictions(&args, &ds, &index, &covariates)?;
                    ate_plugin_predicted(&ds, &scores, &preds)?
                }
                MethodArg::Dr => {
                    let preds = build_predictions(&args, &ds, &index, &covariates)?;
                    ate_dr(&ds, &scores, &preds)?
                }
                MethodArg::Adjustment | MethodArg::All => unreachable!(),
            }
        }
    };
    match args.format {
        FormatArg::Structured => print_json(&report),
        FormatArg::Table => print_report_table(&report),
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// intervene

#[derive(Serialize, Deserialize)]
struct InterveneOutput {
    target: String,
    #[serde(rename = "do")]
    assignments: BTreeMap<String, usize>,
    /// p(target = s | do(assignments)) for every state s.
    distribution: Vec<f64>,
    /// p(target = s | assignments) when --contrast is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    contrast: Option<Vec<f64>>,
}

fn run_intervene(args: InterveneArgs) -> Result<i32, CliError> {
    let model = model_from_file(&args.model)?;
    let mut assignments = BTreeMap::new();
    for text in &args.assignments {
        let (node, state) = parse_assignment(text)?;
        if assignments.insert(node.clone(), state).is_some() {
            return Err(CliError::Usage(format!("--do names node `{node}` twice")));
        }
    }
    let query = InterventionQuery {
        do_assignments: assignments.clone(),
        target: args.target.clone(),
        evidence: BTreeMap::new(),
    };
    let distribution = model.interventional_distribution(&query)?;
    let contrast = if args.contrast {
        let conditional = InterventionQuery {
            do_assignments: BTreeMap::new(),
            target: args.target.clone(),
            evidence: assignments.clone(),
        };
        Some(model.interventional_distribution(&conditional)?)
    } else {
        None
    };
    let output = InterveneOutput { target: args.target, assignments, distribution, contrast };
    match args.format {
        FormatArg::Structured => print_json(&output),
        FormatArg::Table => {
            let given = output
                .assignments
                .iter()
                .map(|(n, s)| format!("{n}={s}"))
                .collect::<Vec<_>>()
                .join(", ");
            println!("p({} | do({})):", output.target, given);
            for (s, p) in output.distribution.iter().enumerate() {
                println!("  {}={s}  {p:.12}", output.target);
            }
            if let Some(contrast) = &output.contrast {
                println!("p({} | {}):", output.target, given);
                for (s, p) in contrast.iter().enumerate() {
                    println!("  {}={s}  {p:.12}", output.target);
                }
            }
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// check-support

fn run_check_support(args: CheckSupportArgs) -> Result<i32, CliError> {
    let (ds, covariates) = load_dataset(&args.data)?;
    let index = build_strata(&ds, &covariates)?;
    let report = check_support(&index);
    match args.format {
        FormatArg::Structured => print_json(&report),
        FormatArg::Table => {
            println!(
                "strata={} records={} violations={} violating_mass={:.12}",
                index.len(),
                index.n(),
                report.violations.len(),
                report.violating_mass
            );
            for v in &report.violations {
                println!(
                    "violated  {}  n={} treated={} control={} mass={:.12}",
                    v.label, v.n, v.n_treated, v.n_control, v.mass
                );
            }
        }
    }
    Ok(if report.is_clean() { 0 } else { 3 })
}

// ---------------------------------------------------------------------------
// compare

#[derive(Serialize, Deserialize)]
struct CompareRow {
    method: String,
    estimate: f64,
    /// Signed estimate minus true effect.
    error: f64,
}

#[derive(Serialize, Deserialize)]
struct CompareOutput {
    scenario: String,
    seed: u64,
    n: usize,
    true_ate: f64,
    rows: Vec<CompareRow>,
}

fn run_compare(args: CompareArgs) -> Result<i32, CliError> {
    let (ds, covariates) = load_dataset(&args.data)?;
    let truth_file = args.truth.clone().unwrap_or_else(|| truth_path(&args.data.data));
    let truth = load_truth_csv(&truth_file).map_err(|e| with_file(e, &truth_file))?;
    let config = EstimateConfig {
        covariates: covariates.clone(),
        k: args.k,
        ..EstimateConfig::default()
    };
    let run = estimate_all(&ds, &config)?;
    let mut rows = vec![CompareRow {
        method: "naive-difference".into(),
        estimate: run.naive_difference,
        error: run.naive_difference - truth.true_ate,
    }];
    for report in &run.reports {
        rows.push(CompareRow {
            method: report.method.as_str().into(),
            estimate: report.estimate,
            error: report.estimate - truth.true_ate,
        });
    }
    let output = CompareOutput {
        scenario: truth.scenario,
        seed: truth.seed,
        n: ds.n(),
        true_ate: truth.true_ate,
        rows,
    };
    match args.format {
        FormatArg::Structured => print_json(&output),
        FormatArg::Table => {
            println!(
                "scenario={} seed={} n={} true_ate={}",
                output.scenario, output.seed, output.n, output.true_ate
            );
            println!("{:<20}{:>18}{:>18}", "method", "estimate", "error");
            for row in &output.rows {
                println!("{:<20}{:>18.12}{:>18.12}", row.method, row.estimate, row.error);
            }
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// table rendering

fn provenance_label(p: Provenance) -> &'static str {
    match p {
        Provenance::SampleProportion => "sample-proportion",
        Provenance::Logistic => "logistic",
        Provenance::External => "external",
    }
}

fn kind_label(k: OutcomeKind) -> &'static str {
    match k {
        OutcomeKind::StratumMean => "stratum-mean",
        OutcomeKind::Logistic => "logistic",
        OutcomeKind::External => "external",
    }
}

fn policy_label(p: SupportPolicy) -> String {
    match p {
        SupportPolicy::Error => "error".into(),
        SupportPolicy::DropAndRenormalize => "drop-and-renormalize".into(),
        SupportPolicy::ClipPropensity(c) => format!("clip-propensity[{},{}]", c.low, c.high),
    }
}

/// One sentence naming which double-robustness legs the inputs satisfy.
fn leg_note(propensity_leg: bool, outcome_leg: bool) -> &'static str {
    match (propensity_leg, outcome_leg) {
        (true, true) => {
            "both robustness legs in effect (sample-proportion scores, stratum-mean predictions)"
        }
        (true, false) => {
            "propensity leg in effect (sample-proportion scores); outcome leg is not"
        }
        (false, true) => {
            "outcome leg in effect (stratum-mean predictions); propensity leg is not"
        }
        (false, false) => "neither robustness leg in effect",
    }
}

fn print_report_details(report: &AteReport) {
    if let Some(p) = report.inputs.propensity {
        println!("{:<12}{}", "propensity", provenance_label(p));
    }
    if let Some(k) = report.inputs.outcome_model {
        println!("{:<12}{}", "outcome", kind_label(k));
    }
    if let Some(k) = report.inputs.k {
        println!("{:<12}{}", "k", k);
    }
    if let Some(policy) = report.inputs.support_policy {
        println!("{:<12}{}", "support", policy_label(policy));
    }
    let d = &report.diagnostics;
    if !d.support_violations.is_empty() {
        println!("support violations: {}", d.support_violations.join("; "));
    }
    if let Some(mass) = d.dropped_mass {
        println!("dropped mass: {mass:.12}");
    }
    if !d.fallback_cells.is_empty() {
        println!("fallback cells: {}", d.fallback_cells.join("; "));
    }
    if !d.clipped_records.is_empty() {
        println!("clipped records: {}", d.clipped_records.len());
    }
    if let (Some(pl), Some(ol)) = (d.propensity_leg, d.outcome_leg) {
        println!("note: {}", leg_note(pl, ol));
    }
}

fn print_report_table(report: &AteReport) {
    println!("{:<12}{}", "method", report.method.as_str());
    println!("{:<12}{:.12}", "estimate", report.estimate);
    println!("{:<12}{}", "n", report.inputs.n);
    print_report_details(report);
}

fn print_run_table(run: &EstimateRun) {
    println!("{:<20}{:>18}", "method", "estimate");
    for report in &run.reports {
        println!("{:<20}{:>18.12}", report.method.as_str(), report.estimate);
    }
    println!("{:<20}{:>18.12}", "naive-difference", run.naive_difference);
    for report in &run.reports {
        let d = &report.diagnostics;
        if let (Some(pl), Some(ol)) = (d.propensity_leg, d.outcome_leg) {
            println!("note: dr: {}", leg_note(pl, ol));
        }
        if !d.fallback_cells.is_empty() {
            println!(
                "note: {}: fallback cells: {}",
                report.method.as_str(),
                d.fallback_cells.join("; ")
            );
        }
        if !d.clipped_records.is_empty() {
            println!(
                "note: {}: clipped records: {}",
                report.method.as_str(),
                d.clipped_records.len()
            );
        }
    }
    println!("identity checks (tolerance 1e-12)");
    for check in &run.checks {
        let holds = match check.holds {
            Some(true) => "yes",
            Some(false) => "no",
            None => "-",
        };
        let gap = match check.gap {
            Some(g) => format!("{g:.3e}"),
            None => "-".into(),
        };
        println!(
            "{:<26}applicable={:<5}holds={:<5}gap={}",
            check.name,
            if check.applicable { "yes" } else { "no" },
            holds,
            gap
        );
    }
}
