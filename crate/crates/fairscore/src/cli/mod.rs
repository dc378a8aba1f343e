//! Command-line front end: fit, transform, preprocess, evaluate, synth and
//! pipeline subcommands operating on CSV files and model files.
//!
//! Exit codes: 0 success, 2 input/schema error, 3 solver non-convergence
//! (the model file is still written), 4 internal invariant violation.

pub mod csv_io;
pub mod general_spec;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use thiserror::Error;

use crate::constraints::{ConstraintKind, ConstraintSpec};
use crate::data::Dataset;
use crate::metrics::compute_report;
use crate::model_format::{model_to_string_with, parse_model_full, ModelBindings};
use crate::pipeline::{
    self, FitOptions, FstMode, FstModel, PipelineError, TransformOutput,
};
use crate::solver::{lambda_l1_bound, AdmmConfig};
use crate::synth::{generate, SynthConfig, FEATURE_NAMES};

use csv_io::{bind_dataset, fmt_float, read_table, write_csv, BoundData, ColumnBindings, CsvTable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Schema(String),
    #[error("solver did not converge (model written with converged = false)")]
    NonConvergence,
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::NonConvergence => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Solver(inner) => CliError::Internal(inner.to_string()),
            other => CliError::Schema(other.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read `{}`: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Schema(format!("cannot write `{}`: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintArg {
    Msp,
    Geo,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Post,
    Pre,
    Batch,
}

impl From<ModeArg> for FstMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Post => FstMode::PostProcess,
            ModeArg::Pre => FstMode::PreProcess,
            ModeArg::Batch => FstMode::Batch,
        }
    }
}

/// Column-binding flags shared by the commands that read raw datasets.
#[derive(Debug, Clone, Args)]
pub struct BindingArgs {
    /// Protected-group column name
    #[arg(long)]
    pub protected_col: Option<String>,
    /// Binary label column name
    #[arg(long)]
    pub label_col: Option<String>,
    /// Pre-computed base score column name
    #[arg(long)]
    pub score_col: Option<String>,
    /// Comma-separated feature column names
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
}

impl BindingArgs {
    fn to_bindings(&self) -> ColumnBindings {
        ColumnBindings {
            protected_col: self.protected_col.clone(),
            label_col: self.label_col.clone(),
            score_col: self.score_col.clone(),
            feature_cols: self.features.clone(),
        }
    }
}

/// Solver and estimation flags shared by fit-like commands.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Fairness criterion
    #[arg(long, value_enum, default_value = "msp")]
    pub constraint: ConstraintArg,
    /// Constraint tolerance
    #[arg(long, default_value_t = 0.02)]
    pub epsilon: f64,
    /// Processing mode
    #[arg(long, value_enum, default_value = "post")]
    pub mode: ModeArg,
    /// Truncation floor for probability estimates
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    /// Ridge strength for the internal estimators
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    /// ADMM penalty parameter
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// ADMM iteration cap
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    /// Also fit group-posterior models for protected-blind transforms
    #[arg(long, default_value_t = false)]
    pub fit_group_model: bool,
    /// JSON file describing general linear constraints
    #[arg(long)]
    pub general_spec: Option<PathBuf>,
}

impl SolverArgs {
    fn admm_config(&self) -> AdmmConfig {
        AdmmConfig { rho: self.rho, max_iter: self.max_iter, ..AdmmConfig::default() }
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            mode: self.mode.into(),
            delta: self.delta,
            l2_reg: self.l2,
            fit_group_model: self.fit_group_model,
            fit_threshold: true,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training CSV
    #[arg(long)]
    pub train: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub bindings: BindingArgs,
    /// Output model file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Fitted model file
    #[arg(long)]
    pub model: PathBuf,
    /// Input data CSV
    #[arg(long)]
    pub data: PathBuf,
    /// JSON general-constraint spec (general models only)
    #[arg(long)]
    pub general_spec: Option<PathBuf>,
    /// Output scores CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Fitted model file (must be fitted in pre-processing mode)
    #[arg(long)]
    pub model: PathBuf,
    /// Training CSV to re-weight
    #[arg(long)]
    pub train: PathBuf,
    /// Output weighted CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Scores CSV (e.g. the output of `transform`)
    #[arg(long)]
    pub data: PathBuf,
    /// Column holding the scores to evaluate
    #[arg(long, default_value = "transformed_score")]
    pub score_col: String,
    /// Label column, enables label-based metrics
    #[arg(long)]
    pub label_col: Option<String>,
    /// Protected column, enables fairness gaps
    #[arg(long)]
    pub protected_col: Option<String>,
    /// Column holding the pre-transform scores, enables the cross-entropy
    /// utility
    #[arg(long)]
    pub original_col: Option<String>,
    /// Binarization threshold; taken from --model when omitted
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Model file supplying the threshold
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Also write the report to this path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Total samples across both splits
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    /// Fraction held out as test.csv
    #[arg(long, default_value_t = 0.25)]
    pub test_frac: f64,
    /// Probability of group 1
    #[arg(long, default_value_t = 0.5)]
    pub group_frac: f64,
    /// Per-group positive base rates, comma separated
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.7, 0.3])]
    pub base_rates: Vec<f64>,
    /// Feature signal strength
    #[arg(long, default_value_t = 2.0)]
    pub signal: f64,
    /// RNG seed
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory for train.csv / test.csv
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Training CSV
    #[arg(long)]
    pub train: PathBuf,
    /// Data to transform and evaluate (defaults to the training CSV)
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub bindings: BindingArgs,
    /// Output directory for model.txt, scores.csv and report.txt
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the transform on labeled training data
    Fit(FitArgs),
    /// Apply a fitted model to a dataset
    Transform(TransformArgs),
    /// Emit the weighted pre-processing dataset
    Preprocess(PreprocessArgs),
    /// Compute utility and fairness metrics from a scores CSV
    Evaluate(EvaluateArgs),
    /// Generate a seeded synthetic two-group dataset
    Synth(SynthArgs),
    /// Fit, transform and evaluate in one pass
    Pipeline(PipelineArgs),
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Fit(args) => cmd_fit(&args).map(|_| ()),
        Command::Transform(args) => cmd_transform(&args),
        Command::Preprocess(args) => cmd_preprocess(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Pipeline(args) => cmd_pipeline(&args),
    }
}

struct LoadedModel {
    model: FstModel,
    bindings: ModelBindings,
}

fn load_model(path: &Path) -> Result<LoadedModel, CliError> {
    let text = read_file(path)?;
    let (model, bindings) =
        parse_model_full(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    Ok(LoadedModel { model, bindings: bindings.unwrap_or_default() })
}

fn bound_from_bindings(
    table: &CsvTable,
    bindings: &ColumnBindings,
    model: Option<&FstModel>,
) -> Result<BoundData, CliError> {
    let known = model.map(|m| m.group_names.as_slice());
    bind_dataset(table, bindings, known)
}

fn fit_core(
    train_table: &CsvTable,
    solver: &SolverArgs,
    bindings: &ColumnBindings,
) -> Result<(FstModel, Dataset), CliError> {
    let bound = bind_dataset(train_table, bindings, None)?;
    let config = solver.admm_config();
    let opts = solver.fit_options();
    let mut model = match solver.constraint {
        ConstraintArg::Msp => {
            let spec = ConstraintSpec::new(ConstraintKind::MeanScoreParity, solver.epsilon)
                .map_err(|e| CliError::Schema(e.to_string()))?;
            pipeline::fit(&bound.dataset, &spec, &config, &opts)?
        }
        ConstraintArg::Geo => {
            let spec =
                ConstraintSpec::new(ConstraintKind::GeneralizedEqualizedOdds, solver.epsilon)
                    .map_err(|e| CliError::Schema(e.to_string()))?;
            pipeline::fit(&bound.dataset, &spec, &config, &opts)?
        }
        ConstraintArg::General => {
            let spec_path = solver.general_spec.as_ref().ok_or_else(|| {
                CliError::Schema("--constraint general requires --general-spec".into())
            })?;
            let raw = fs::read(spec_path).map_err(|e| {
                CliError::Schema(format!("cannot read `{}`: {e}", spec_path.display()))
            })?;
            let gspec = general_spec::parse_general_spec(&raw)?;
            let constraint = general_spec::to_constraint(&gspec, train_table)?;
            let features = crate::constraints::build_features_general(&constraint)
                .map_err(|e| CliError::Schema(e.to_string()))?;
            let spec = ConstraintSpec::new(
                ConstraintKind::GeneralLinear(constraint),
                solver.epsilon,
            )
            .map_err(|e| CliError::Schema(e.to_string()))?;
            pipeline::fit_with_features(&bound.dataset, &spec, &features, &config, &opts)?
        }
    };
    model.group_names = bound.group_names.clone();
    Ok((model, bound.dataset))
}

fn print_fit_summary(model: &FstModel) {
    let l1: f64 = model.lambda.iter().map(|l| l.abs()).sum();
    let lambda_str: Vec<String> = model.lambda.iter().map(|&v| fmt_float(v)).collect();
    println!("lambda = [{}]", lambda_str.join(", "));
    println!("iterations = {}", model.dual.iterations);
    println!("objective = {}", fmt_float(model.dual.objective));
    println!("lambda_l1 = {}", fmt_float(l1));
    println!(
        "lambda_l1_bound = {} (log 2 / epsilon)",
        fmt_float(lambda_l1_bound(model.spec.epsilon))
    );
    println!("converged = {}", model.dual.converged);
}

pub fn cmd_fit(args: &FitArgs) -> Result<FstModel, CliError> {
    let table = read_table(
        fs::File::open(&args.train)
            .map_err(|e| CliError::Schema(format!("cannot read `{}`: {e}", args.train.display())))?,
    )?;
    let bindings = args.bindings.to_bindings();
    let (model, _) = fit_core(&table, &args.solver, &bindings)?;

    let stored = ModelBindings {
        protected_col: bindings.protected_col.clone(),
        label_col: bindings.label_col.clone(),
        score_col: bindings.score_col.clone(),
        feature_cols: bindings.feature_cols.clone(),
    };
    let text = model_to_string_with(&model, Some(&stored))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&args.out, &text)?;
    print_fit_summary(&model);
    println!("model written to {}", args.out.display());
    if !model.dual.converged {
        return Err(CliError::NonConvergence);
    }
    Ok(model)
}

fn transform_for_table(
    loaded: &LoadedModel,
    table: &CsvTable,
    general_spec_path: Option<&Path>,
) -> Result<TransformOutput, CliError> {
    let bindings = ColumnBindings {
        protected_col: loaded.bindings.protected_col.clone(),
        label_col: None,
        score_col: loaded.bindings.score_col.clone(),
        feature_cols: loaded.bindings.feature_cols.clone(),
    };
    // the protected column is optional at transform time when a group model exists
    let bindings = ColumnBindings {
        protected_col: bindings
            .protected_col
            .filter(|c| table.headers.iter().any(|h| h == c)),
        ..bindings
    };
    let bound = bound_from_bindings(table, &bindings, Some(&loaded.model))?;

    if let ConstraintKind::GeneralLinear(_) = loaded.model.spec.kind {
        let spec_path = general_spec_path.ok_or_else(|| {
            CliError::Schema("transforming with a general model requires --general-spec".into())
        })?;
        let raw = fs::read(spec_path)
            .map_err(|e| CliError::Schema(format!("cannot read `{}`: {e}", spec_path.display())))?;
        let gspec = general_spec::parse_general_spec(&raw)?;
        let constraint = general_spec::to_constraint(&gspec, table)?;
        let features = crate::constraints::build_features_general(&constraint)
            .map_err(|e| CliError::Schema(e.to_string()))?;
        let scores = bound
            .dataset
            .base_scores()
            .map(<[f64]>::to_vec)
            .ok_or_else(|| CliError::Schema("general transform needs a score column".into()))?;
        return Ok(pipeline::transform_with_features(&loaded.model, &features, &scores)?);
    }
    Ok(pipeline::transform_details(&loaded.model, &bound.dataset)?)
}

pub fn cmd_transform(args: &TransformArgs) -> Result<(), CliError> {
    let loaded = load_model(&args.model)?;
    let table = read_table(
        fs::File::open(&args.data)
            .map_err(|e| CliError::Schema(format!("cannot read `{}`: {e}", args.data.display())))?,
    )?;
    let out = transform_for_table(&loaded, &table, args.general_spec.as_deref())?;

    let mut headers = table.headers.clone();
    headers.push("original_score".into());
    headers.push("mu".into());
    headers.push("transformed_score".into());
    if out.predictions.is_some() {
        headers.push("binary_prediction".into());
    }
    let rows = table.rows.iter().enumerate().map(|(i, row)| {
        let mut r = row.clone();
        r.push(fmt_float(out.original[i]));
        r.push(fmt_float(out.mu[i]));
        r.push(fmt_float(out.transformed[i]));
        if let Some(preds) = &out.predictions {
            r.push(preds[i].to_string());
        }
        r
    });
    write_csv(&args.out, &headers, rows)?;
    println!("{} rows written to {}", table.rows.len(), args.out.display());
    Ok(())
}

pub fn cmd_preprocess(args: &PreprocessArgs) -> Result<(), CliError> {
    let loaded = load_model(&args.model)?;
    if loaded.model.mode != FstMode::PreProcess {
        return Err(CliError::Schema(
            "preprocess requires a model fitted with --mode pre".into(),
        ));
    }
    let table = read_table(
        fs::File::open(&args.train).map_err(|e| {
            CliError::Schema(format!("cannot read `{}`: {e}", args.train.display()))
        })?,
    )?;
    let out = transform_for_table(&loaded, &table, None)?;

    let feature_cols = &loaded.bindings.feature_cols;
    let mut idx = Vec::new();
    for col in feature_cols {
        idx.push(table.column_index(col)?);
    }
    let mut headers: Vec<String> = feature_cols.clone();
    headers.push("y_prime".into());
    headers.push("weight".into());

    let mut rows = Vec::with_capacity(2 * table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let feats: Vec<String> = idx.iter().map(|&j| row[j].clone()).collect();
        let r = out.transformed[i];
        let mut neg = feats.clone();
        neg.push("0".into());
        neg.push(fmt_float(1.0 - r));
        rows.push(neg);
        let mut pos = feats;
        pos.push("1".into());
        pos.push(fmt_float(r));
        rows.push(pos);
    }
    write_csv(&args.out, &headers, rows.into_iter())?;
    println!("{} rows written to {}", 2 * table.rows.len(), args.out.display());
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let table = read_table(
        fs::File::open(&args.data)
            .map_err(|e| CliError::Schema(format!("cannot read `{}`: {e}", args.data.display())))?,
    )?;
    let score_idx = table.column_index(&args.score_col)?;
    let mut scores = Vec::with_capacity(table.rows.len());
    for (row, raw) in table.column(score_idx).enumerate() {
        let v: f64 = raw.trim().parse().map_err(|_| {
            CliError::Schema(format!(
                "row {}, column `{}`: `{raw}` is not a number",
                row + 2,
                args.score_col
            ))
        })?;
        scores.push(v);
    }

    let labels = match &args.label_col {
        Some(col) => {
            let idx = table.column_index(col)?;
            let mut out = Vec::with_capacity(table.rows.len());
            for (row, raw) in table.column(idx).enumerate() {
                match raw.trim() {
                    "0" => out.push(0u8),
                    "1" => out.push(1u8),
                    other => {
                        return Err(CliError::Schema(format!(
                            "row {}, column `{col}`: label `{other}` is not 0 or 1",
                            row + 2
                        )))
                    }
                }
            }
            Some(out)
        }
        None => None,
    };

    let mut group_names: Vec<String> = Vec::new();
    let groups = match &args.protected_col {
        Some(col) => {
            let idx = table.column_index(col)?;
            let mut ids = Vec::with_capacity(table.rows.len());
            for raw in table.column(idx) {
                let value = raw.trim();
                let id = match group_names.iter().position(|g| g == value) {
                    Some(id) => id,
                    None => {
                        group_names.push(value.to_string());
                        group_names.len() - 1
                    }
                };
                ids.push(id);
            }
            Some(ids)
        }
        None => None,
    };

    let original = match &args.original_col {
        Some(col) => {
            let idx = table.column_index(col)?;
            let mut out = Vec::with_capacity(table.rows.len());
            for (row, raw) in table.column(idx).enumerate() {
                let v: f64 = raw.trim().parse().map_err(|_| {
                    CliError::Schema(format!(
                        "row {}, column `{col}`: `{raw}` is not a number",
                        row + 2
                    ))
                })?;
                out.push(v);
            }
            Some(out)
        }
        None => None,
    };

    let threshold = match (args.threshold, &args.model) {
        (Some(t), _) => Some(t),
        (None, Some(path)) => load_model(path)?.model.threshold,
        (None, None) => None,
    };

    let rep = compute_report(
        &scores,
        labels.as_deref(),
        groups.as_deref(),
        original.as_deref(),
        threshold,
    )
    .map_err(|e| CliError::Schema(e.to_string()))?;
    let rendered = report::render_report(&rep, &group_names);
    print!("{rendered}");
    if let Some(path) = &args.out {
        write_file(path, &rendered)?;
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    if args.base_rates.len() != 2 {
        return Err(CliError::Schema("--base-rates takes exactly two values".into()));
    }
    let cfg = SynthConfig {
        n: args.n,
        test_fraction: args.test_frac,
        group1_fraction: args.group_frac,
        base_rates: [args.base_rates[0], args.base_rates[1]],
        signal: args.signal,
        seed: args.seed,
    };
    let data = generate(&cfg);
    fs::create_dir_all(&args.out_dir).map_err(|e| {
        CliError::Schema(format!("cannot create `{}`: {e}", args.out_dir.display()))
    })?;

    let write_split = |name: &str, ds: &Dataset| -> Result<(), CliError> {
        let mut headers: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        headers.push("group".into());
        headers.push("label".into());
        let groups = ds.protected().expect("synthetic data has groups");
        let labels = ds.labels().expect("synthetic data has labels");
        let rows = (0..ds.len()).map(|i| {
            let mut row: Vec<String> =
                ds.features()[i].iter().map(|&v| fmt_float(v)).collect();
            row.push(groups[i].to_string());
            row.push(labels[i].to_string());
            row
        });
        write_csv(&args.out_dir.join(name), &headers, rows)
    };
    write_split("train.csv", &data.train)?;
    if let Some(test) = &data.test {
        write_split("test.csv", test)?;
    }
    println!(
        "wrote {} (and test split: {}) under {}",
        "train.csv",
        data.test.is_some(),
        args.out_dir.display()
    );
    Ok(())
}

pub fn cmd_pipeline(args: &PipelineArgs) -> Result<(), CliError> {
    fs::create_dir_all(&args.out_dir).map_err(|e| {
        CliError::Schema(format!("cannot create `{}`: {e}", args.out_dir.display()))
    })?;
    let train_table = read_table(
        fs::File::open(&args.train).map_err(|e| {
            CliError::Schema(format!("cannot read `{}`: {e}", args.train.display()))
        })?,
    )?;
    let bindings = args.bindings.to_bindings();
    let (mut model, _train_ds) = fit_core(&train_table, &args.solver, &bindings)?;

    let data_path = args.data.as_ref().unwrap_or(&args.train);
    let data_table = read_table(
        fs::File::open(data_path)
            .map_err(|e| CliError::Schema(format!("cannot read `{}`: {e}", data_path.display())))?,
    )?;

    // batch mode refits the dual variables on the evaluation data
    if args.solver.mode == ModeArg::Batch && args.data.is_some() {
        let bound = bind_dataset(&data_table, &bindings, Some(model.group_names.as_slice()))?;
        model = pipeline::fit_batch(&model, &bound.dataset, &args.solver.admm_config())?;
    }

    let stored = ModelBindings {
        protected_col: bindings.protected_col.clone(),
        label_col: bindings.label_col.clone(),
        score_col: bindings.score_col.clone(),
        feature_cols: bindings.feature_cols.clone(),
    };
    let model_text = model_to_string_with(&model, Some(&stored))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&args.out_dir.join("model.txt"), &model_text)?;
    print_fit_summary(&model);

    let loaded = LoadedModel { model, bindings: stored };
    let out = transform_for_table(&loaded, &data_table, None)?;
    let mut headers = data_table.headers.clone();
    headers.push("original_score".into());
    headers.push("mu".into());
    headers.push("transformed_score".into());
    if out.predictions.is_some() {
        headers.push("binary_prediction".into());
    }
    let rows = data_table.rows.iter().enumerate().map(|(i, row)| {
        let mut r = row.clone();
        r.push(fmt_float(out.original[i]));
        r.push(fmt_float(out.mu[i]));
        r.push(fmt_float(out.transformed[i]));
        if let Some(preds) = &out.predictions {
            r.push(preds[i].to_string());
        }
        r
    });
    write_csv(&args.out_dir.join("scores.csv"), &headers, rows)?;

    // evaluate on the transformed scores
    let labels = match &bindings.label_col {
        Some(col) => {
            if let Ok(idx) = data_table.column_index(col) {
                let mut out_l = Vec::with_capacity(data_table.rows.len());
                let mut ok = true;
                for raw in data_table.column(idx) {
                    match raw.trim() {
                        "0" => out_l.push(0u8),
                        "1" => out_l.push(1u8),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    Some(out_l)
                } else {
                    None
                }
            } else {
                None
            }
        }
        None => None,
    };
    let groups = match &bindings.protected_col {
        Some(col) => data_table.column_index(col).ok().map(|idx| {
            data_table
                .column(idx)
                .map(|raw| {
                    loaded
                        .model
                        .group_names
                        .iter()
                        .position(|g| g == raw.trim())
                        .unwrap_or(0)
                })
                .collect::<Vec<usize>>()
        }),
        None => None,
    };
    let rep = compute_report(
        &out.transformed,
        labels.as_deref(),
        groups.as_deref(),
        Some(&out.original),
        loaded.model.threshold,
    )
    .map_err(|e| CliError::Internal(e.to_string()))?;
    let rendered = report::render_report(&rep, &loaded.model.group_names);
    write_file(&args.out_dir.join("report.txt"), &rendered)?;
    print!("{rendered}");
    if !loaded.model.dual.converged {
        return Err(CliError::NonConvergence);
    }
    Ok(())
}
