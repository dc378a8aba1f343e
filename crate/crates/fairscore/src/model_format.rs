//! Versioned text serialization for fitted models.
//!
//! The format is line-oriented `key = value` with a `fairscore-model v1`
//! header. Vector- and matrix-valued fields are JSON arrays on a single
//! line; floats are written in shortest round-trip form, so a write/read
//! cycle reproduces the model bit for bit. Keys are emitted in a fixed order
//! to keep files diffable.

use std::fmt::Write as _;

use thiserror::Error;

use crate::constraints::{ConstraintKind, ConstraintSpec, GeneralConstraint, ProbabilityEstimates};
use crate::estimators::{LogisticModel, MultinomialModel};
use crate::pipeline::{DualSummary, FstMode, FstModel, GroupModel, ScoreSource};

pub const MODEL_HEADER: &str = "fairscore-model v1";

/// CSV column bindings stored alongside a model fitted through the CLI, so
/// `transform`/`preprocess` runs do not need the binding flags repeated.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelBindings {
    pub protected_col: Option<String>,
    pub label_col: Option<String>,
    pub score_col: Option<String>,
    pub feature_cols: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("missing or unsupported header line (expected `{MODEL_HEADER}`)")]
    BadHeader,
    #[error("line {0}: expected `key = value`")]
    BadLine(usize),
    #[error("line {line}: bad value for `{key}`: {detail}")]
    BadValue { line: usize, key: String, detail: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("model contains a non-finite number under `{0}`")]
    NonFinite(&'static str),
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
}

fn push_kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable value")
}

fn check_finite(values: &[f64], key: &'static str) -> Result<(), ModelFormatError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ModelFormatError::NonFinite(key));
    }
    Ok(())
}

fn mode_str(mode: FstMode) -> &'static str {
    match mode {
        FstMode::PostProcess => "post",
        FstMode::PreProcess => "pre",
        FstMode::Batch => "batch",
    }
}

fn write_multinomial(out: &mut String, prefix: &str, m: &MultinomialModel) {
    push_kv(out, &format!("{prefix}.n_classes"), m.n_classes);
    push_kv(out, &format!("{prefix}.l2_reg"), json(&m.l2_reg));
    push_kv(out, &format!("{prefix}.weights"), json(&m.weights));
    push_kv(out, &format!("{prefix}.intercepts"), json(&m.intercepts));
}

/// Serialize a model to the v1 text format.
pub fn model_to_string(model: &FstModel) -> Result<String, ModelFormatError> {
    model_to_string_with(model, None)
}

/// As [`model_to_string`], optionally embedding CLI column bindings.
pub fn model_to_string_with(
    model: &FstModel,
    bindings: Option<&ModelBindings>,
) -> Result<String, ModelFormatError> {
    check_finite(&model.lambda, "lambda")?;
    let mut out = String::new();
    out.push_str(MODEL_HEADER);
    out.push('\n');
    push_kv(&mut out, "mode", mode_str(model.mode));
    let kind = match &model.spec.kind {
        ConstraintKind::MeanScoreParity => "msp",
        ConstraintKind::GeneralizedEqualizedOdds => "geo",
        ConstraintKind::GeneralLinear(_) => "general",
    };
    push_kv(&mut out, "constraint.kind", kind);
    push_kv(&mut out, "constraint.epsilon", json(&model.spec.epsilon));
    if let ConstraintKind::GeneralLinear(g) = &model.spec.kind {
        push_kv(&mut out, "general.coefficients", json(&g.coefficients));
        push_kv(&mut out, "general.bounds", json(&g.bounds));
        push_kv(&mut out, "general.marginals", json(&g.marginals));
    }
    push_kv(&mut out, "group_count", model.group_count);
    push_kv(&mut out, "group_names", json(&model.group_names));
    push_kv(&mut out, "estimates.delta", json(&model.estimates.delta));
    push_kv(&mut out, "estimates.p_a", json(&model.estimates.p_a));
    push_kv(&mut out, "estimates.p_y", json(&model.estimates.p_y.to_vec()));
    push_kv(&mut out, "estimates.p_a_given_y.0", json(&model.estimates.p_a_given_y[0]));
    push_kv(&mut out, "estimates.p_a_given_y.1", json(&model.estimates.p_a_given_y[1]));
    push_kv(&mut out, "lambda", json(&model.lambda));
    push_kv(&mut out, "dual.objective", json(&model.dual.objective));
    push_kv(&mut out, "dual.primal_residual", json(&model.dual.primal_residual));
    push_kv(&mut out, "dual.dual_residual", json(&model.dual.dual_residual));
    push_kv(&mut out, "dual.iterations", model.dual.iterations);
    push_kv(&mut out, "dual.converged", model.dual.converged);
    match &model.score_source {
        ScoreSource::External => push_kv(&mut out, "score_model.kind", "external"),
        ScoreSource::Logistic(m) => {
            check_finite(&m.weights, "score_model.weights")?;
            push_kv(&mut out, "score_model.kind", "logistic");
            push_kv(&mut out, "score_model.weights", json(&m.weights));
            push_kv(&mut out, "score_model.intercept", json(&m.intercept));
            push_kv(&mut out, "score_model.l2_reg", json(&m.l2_reg));
        }
    }
    match &model.group_model {
        None => push_kv(&mut out, "group_model.kind", "none"),
        Some(GroupModel::Msp(m)) => {
            push_kv(&mut out, "group_model.kind", "msp");
            write_multinomial(&mut out, "group_model.msp", m);
        }
        Some(GroupModel::Geo(models)) => {
            push_kv(&mut out, "group_model.kind", "geo");
            write_multinomial(&mut out, "group_model.y0", &models[0]);
            write_multinomial(&mut out, "group_model.y1", &models[1]);
        }
    }
    if let Some(t) = model.threshold {
        push_kv(&mut out, "threshold", json(&t));
    }
    if let Some(b) = bindings {
        if let Some(c) = &b.protected_col {
            push_kv(&mut out, "bindings.protected_col", json(c));
        }
        if let Some(c) = &b.label_col {
            push_kv(&mut out, "bindings.label_col", json(c));
        }
        if let Some(c) = &b.score_col {
            push_kv(&mut out, "bindings.score_col", json(c));
        }
        push_kv(&mut out, "bindings.feature_cols", json(&b.feature_cols));
    }
    Ok(out)
}

struct Fields {
    entries: Vec<(String, String, usize)>,
}

impl Fields {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, line)| (v.as_str(), *line))
    }

    fn require(&self, key: &'static str) -> Result<(&str, usize), ModelFormatError> {
        self.get(key).ok_or(ModelFormatError::MissingKey(key))
    }

    fn parse_json<T: serde::de::DeserializeOwned>(
        &self,
        key: &'static str,
    ) -> Result<T, ModelFormatError> {
        let (raw, line) = self.require(key)?;
        serde_json::from_str(raw).map_err(|e| ModelFormatError::BadValue {
            line,
            key: key.to_string(),
            detail: e.to_string(),
        })
    }

    fn parse_json_opt<T: serde::de::DeserializeOwned>(
        &self,
        key: &'static str,
    ) -> Result<Option<T>, ModelFormatError> {
        match self.get(key) {
            None => Ok(None),
            Some((raw, line)) => serde_json::from_str(raw).map(Some).map_err(|e| {
                ModelFormatError::BadValue { line, key: key.to_string(), detail: e.to_string() }
            }),
        }
    }
}

const KNOWN_PREFIXES: &[&str] = &[
    "mode",
    "constraint.",
    "general.",
    "group_count",
    "group_names",
    "estimates.",
    "lambda",
    "dual.",
    "score_model.",
    "group_model.",
    "threshold",
    "bindings.",
];

fn split_fields(input: &str) -> Result<Fields, ModelFormatError> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == MODEL_HEADER => {}
        _ => return Err(ModelFormatError::BadHeader),
    }
    let mut entries: Vec<(String, String, usize)> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or(ModelFormatError::BadLine(line_no))?;
        let key = key.trim().to_string();
        if !KNOWN_PREFIXES.iter().any(|p| key == *p || key.starts_with(p)) {
            return Err(ModelFormatError::UnknownKey(key));
        }
        if entries.iter().any(|(k, _, _)| *k == key) {
            return Err(ModelFormatError::DuplicateKey(key));
        }
        entries.push((key, value.trim().to_string(), line_no));
    }
    Ok(Fields { entries })
}

fn read_multinomial(fields: &Fields, prefix: &str) -> Result<MultinomialModel, ModelFormatError> {
    let key = |suffix: &str| -> String { format!("{prefix}.{suffix}") };
    let get = |suffix: &str| -> Result<(&str, usize), ModelFormatError> {
        fields
            .get(&key(suffix))
            .ok_or(ModelFormatError::MissingKey("group_model.*"))
    };
    let (raw_classes, line) = get("n_classes")?;
    let n_classes: usize = raw_classes.parse().map_err(|_| ModelFormatError::BadValue {
        line,
        key: key("n_classes"),
        detail: "expected an integer".into(),
    })?;
    let parse_j = |suffix: &str| -> Result<serde_json::Value, ModelFormatError> {
        let (raw, line) = get(suffix)?;
        serde_json::from_str(raw).map_err(|e| ModelFormatError::BadValue {
            line,
            key: key(suffix),
            detail: e.to_string(),
        })
    };
    let weights: Vec<Vec<f64>> = serde_json::from_value(parse_j("weights")?)
        .map_err(|e| ModelFormatError::Inconsistent(e.to_string()))?;
    let intercepts: Vec<f64> = serde_json::from_value(parse_j("intercepts")?)
        .map_err(|e| ModelFormatError::Inconsistent(e.to_string()))?;
    let l2_reg: f64 = serde_json::from_value(parse_j("l2_reg")?)
        .map_err(|e| ModelFormatError::Inconsistent(e.to_string()))?;
    if n_classes < 2 || weights.len() != n_classes - 1 || intercepts.len() != n_classes - 1 {
        return Err(ModelFormatError::Inconsistent(format!(
            "{prefix}: {} weight rows / {} intercepts for {n_classes} classes",
            weights.len(),
            intercepts.len()
        )));
    }
    Ok(MultinomialModel { weights, intercepts, n_classes, l2_reg })
}

/// Parse the v1 text format back into a model. Never panics on malformed
/// input; every defect maps to a [`ModelFormatError`].
pub fn parse_model(input: &str) -> Result<FstModel, ModelFormatError> {
    parse_model_full(input).map(|(model, _)| model)
}

/// As [`parse_model`], also returning embedded CLI bindings when present.
pub fn parse_model_full(
    input: &str,
) -> Result<(FstModel, Option<ModelBindings>), ModelFormatError> {
    let fields = split_fields(input)?;

    let (mode_raw, line) = fields.require("mode")?;
    let mode = match mode_raw {
        "post" => FstMode::PostProcess,
        "pre" => FstMode::PreProcess,
        "batch" => FstMode::Batch,
        other => {
            return Err(ModelFormatError::BadValue {
                line,
                key: "mode".into(),
                detail: format!("unknown mode `{other}`"),
            })
        }
    };

    let epsilon: f64 = fields.parse_json("constraint.epsilon")?;
    let (kind_raw, line) = fields.require("constraint.kind")?;
    let kind = match kind_raw {
        "msp" => ConstraintKind::MeanScoreParity,
        "geo" => ConstraintKind::GeneralizedEqualizedOdds,
        "general" => {
            let coefficients: Vec<Vec<f64>> = fields.parse_json("general.coefficients")?;
            let bounds: Vec<f64> = fields.parse_json("general.bounds")?;
            let marginals: Vec<Vec<f64>> = fields.parse_json("general.marginals")?;
            ConstraintKind::GeneralLinear(GeneralConstraint {
                coefficients,
                bounds,
                marginals,
                posteriors: Vec::new(),
            })
        }
        other => {
            return Err(ModelFormatError::BadValue {
                line,
                key: "constraint.kind".into(),
                detail: format!("unknown constraint `{other}`"),
            })
        }
    };
    let spec = ConstraintSpec::new(kind, epsilon)
        .map_err(|e| ModelFormatError::Inconsistent(e.to_string()))?;

    let (gc_raw, line) = fields.require("group_count")?;
    let group_count: usize = gc_raw.parse().map_err(|_| ModelFormatError::BadValue {
        line,
        key: "group_count".into(),
        detail: "expected an integer".into(),
    })?;
    if group_count == 0 || group_count > 1_000_000 {
        return Err(ModelFormatError::Inconsistent(format!(
            "implausible group_count {group_count}"
        )));
    }
    let group_names: Vec<String> = fields.parse_json("group_names")?;
    if group_names.len() != group_count {
        return Err(ModelFormatError::Inconsistent(format!(
            "{} group names for {group_count} groups",
            group_names.len()
        )));
    }

    let delta: f64 = fields.parse_json("estimates.delta")?;
    let p_a: Vec<f64> = fields.parse_json("estimates.p_a")?;
    let p_y_vec: Vec<f64> = fields.parse_json("estimates.p_y")?;
    if p_y_vec.len() != 2 {
        return Err(ModelFormatError::Inconsistent("estimates.p_y must have 2 entries".into()));
    }
    let p_a_y0: Vec<f64> = fields.parse_json("estimates.p_a_given_y.0")?;
    let p_a_y1: Vec<f64> = fields.parse_json("estimates.p_a_given_y.1")?;
    if p_a.len() != group_count || p_a_y0.len() != group_count || p_a_y1.len() != group_count {
        return Err(ModelFormatError::Inconsistent(
            "estimate vectors do not match group_count".into(),
        ));
    }
    let estimates = ProbabilityEstimates {
        p_a,
        p_y: [p_y_vec[0], p_y_vec[1]],
        p_a_given_y: [p_a_y0, p_a_y1],
        delta,
    };

    let lambda: Vec<f64> = fields.parse_json("lambda")?;
    if lambda.iter().any(|v| !v.is_finite()) {
        return Err(ModelFormatError::NonFinite("lambda"));
    }

    let dual = DualSummary {
        objective: fields.parse_json("dual.objective")?,
        primal_residual: fields.parse_json("dual.primal_residual")?,
        dual_residual: fields.parse_json("dual.dual_residual")?,
        iterations: {
            let (raw, line) = fields.require("dual.iterations")?;
            raw.parse().map_err(|_| ModelFormatError::BadValue {
                line,
                key: "dual.iterations".into(),
                detail: "expected an integer".into(),
            })?
        },
        converged: {
            let (raw, line) = fields.require("dual.converged")?;
            raw.parse().map_err(|_| ModelFormatError::BadValue {
                line,
                key: "dual.converged".into(),
                detail: "expected true/false".into(),
            })?
        },
    };

    let (sm_kind, line) = fields.require("score_model.kind")?;
    let score_source = match sm_kind {
        "external" => ScoreSource::External,
        "logistic" => ScoreSource::Logistic(LogisticModel {
            weights: fields.parse_json("score_model.weights")?,
            intercept: fields.parse_json("score_model.intercept")?,
            l2_reg: fields.parse_json("score_model.l2_reg")?,
        }),
        other => {
            return Err(ModelFormatError::BadValue {
                line,
                key: "score_model.kind".into(),
                detail: format!("unknown score model `{other}`"),
            })
        }
    };

    let (gm_kind, line) = fields.require("group_model.kind")?;
    let group_model = match gm_kind {
        "none" => None,
        "msp" => Some(GroupModel::Msp(read_multinomial(&fields, "group_model.msp")?)),
        "geo" => Some(GroupModel::Geo(Box::new([
            read_multinomial(&fields, "group_model.y0")?,
            read_multinomial(&fields, "group_model.y1")?,
        ]))),
        other => {
            return Err(ModelFormatError::BadValue {
                line,
                key: "group_model.kind".into(),
                detail: format!("unknown group model `{other}`"),
            })
        }
    };

    let threshold: Option<f64> = fields.parse_json_opt("threshold")?;
    if let Some(t) = threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(ModelFormatError::Inconsistent(format!(
                "threshold {t} outside [0, 1]"
            )));
        }
    }

    if let ScoreSource::Logistic(m) = &score_source {
        if m.weights.iter().any(|v| !v.is_finite()) || !m.intercept.is_finite() {
            return Err(ModelFormatError::NonFinite("score_model"));
        }
    }

    let bindings = {
        let protected_col: Option<String> = fields.parse_json_opt("bindings.protected_col")?;
        let label_col: Option<String> = fields.parse_json_opt("bindings.label_col")?;
        let score_col: Option<String> = fields.parse_json_opt("bindings.score_col")?;
        let feature_cols: Option<Vec<String>> = fields.parse_json_opt("bindings.feature_cols")?;
        if protected_col.is_none()
            && label_col.is_none()
            && score_col.is_none()
            && feature_cols.is_none()
        {
            None
        } else {
            Some(ModelBindings {
                protected_col,
                label_col,
                score_col,
                feature_cols: feature_cols.unwrap_or_default(),
            })
        }
    };

    let model = FstModel {
        spec,
        estimates,
        lambda,
        dual,
        score_source,
        group_model,
        mode,
        threshold,
        group_count,
        group_names,
    };
    Ok((model, bindings))
}
