//! End-to-end orchestration: estimate probabilities, solve the dual, apply
//! the closed-form transform, and the pre-processing / batch variants.

use thiserror::Error;

use crate::constraints::{
    build_features_general, build_features_geo, build_features_msp, estimate_marginals,
    ConstraintError, ConstraintFeatures, ConstraintKind, ConstraintSpec, GeneralConstraint,
    GeoGroupInfo, GroupInfo, ProbabilityEstimates,
};
use crate::data::{Dataset, WeightedDataset};
use crate::estimators::{
    fit_logistic, fit_multinomial, predict_proba, predict_proba_multi, EstimatorError,
    LogisticModel, MultinomialModel,
};
use crate::solver::{solve_dual_admm, AdmmConfig, DualSolution, SolverError};
use crate::transform::{clamp_score, transform_score_raw};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("training data must carry labels")]
    MissingLabels,
    #[error("training data must carry protected group ids")]
    MissingProtected,
    #[error("no score source: provide base scores or feature columns")]
    MissingScores,
    #[error("group {0} has no samples in the training data")]
    EmptyGroup(usize),
    #[error("no group information: protected ids absent and no group model was fitted")]
    MissingGroupInfo,
    #[error("model was fitted in {actual:?} mode, operation requires {required:?}")]
    ModeMismatch { required: FstMode, actual: FstMode },
    #[error("general linear constraints need explicit features; use fit_with_features/transform_with_features")]
    GeneralNeedsFeatures,
    #[error("general constraint posteriors cover {got} rows, dataset has {expected}")]
    GeneralRowMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FstMode {
    PostProcess,
    PreProcess,
    Batch,
}

/// Where per-sample scores come from at transform time.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreSource {
    /// The caller supplies scores with the data.
    External,
    /// An internal logistic model predicts them from the features.
    Logistic(LogisticModel),
}

/// Group-posterior models for the case where the protected attribute is not
/// observed at transform time.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupModel {
    /// `p(a | x)` for MSP.
    Msp(MultinomialModel),
    /// `p(a | x, y)` for GEO, one model per label value.
    Geo(Box<[MultinomialModel; 2]>),
}

/// Compact solver summary kept with the model (the per-sample multipliers are
/// not persisted).
#[derive(Debug, Clone, PartialEq)]
pub struct DualSummary {
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&DualSolution> for DualSummary {
    fn from(s: &DualSolution) -> Self {
        Self {
            objective: s.objective,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            iterations: s.iterations,
            converged: s.converged,
        }
    }
}

/// A fitted score-transformation model.
#[derive(Debug, Clone)]
pub struct FstModel {
    pub spec: ConstraintSpec,
    pub estimates: ProbabilityEstimates,
    pub lambda: Vec<f64>,
    pub dual: DualSummary,
    pub score_source: ScoreSource,
    pub group_model: Option<GroupModel>,
    pub mode: FstMode,
    pub threshold: Option<f64>,
    pub group_count: usize,
    pub group_names: Vec<String>,
}

/// Fit-time options beyond the constraint itself.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub mode: FstMode,
    /// Truncation floor for the probability estimates.
    pub delta: f64,
    /// Ridge strength for the internal estimators.
    pub l2_reg: f64,
    /// Also fit group-posterior models so the protected attribute is not
    /// needed at transform time.
    pub fit_group_model: bool,
    /// Select an accuracy-maximizing binarization threshold on the training
    /// labels.
    pub fit_threshold: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FstMode::PostProcess,
            delta: 1e-3,
            l2_reg: 1e-3,
            fit_group_model: false,
            fit_threshold: true,
        }
    }
}

fn default_group_names(k: usize) -> Vec<String> {
    (0..k).map(|g| g.to_string()).collect()
}

/// Clamped per-sample scores for a dataset: base scores win over the internal
/// model, matching the rule that an existing base classifier is trusted.
fn resolve_scores(source: &ScoreSource, data: &Dataset) -> Result<Vec<f64>, PipelineError> {
    if let Some(base) = data.base_scores() {
        return Ok(base.iter().map(|&s| clamp_score(s)).collect());
    }
    match source {
        ScoreSource::Logistic(model) => Ok(predict_proba(model, data.features())?),
        ScoreSource::External => Err(PipelineError::MissingScores),
    }
}

fn build_preset_features(
    kind: &ConstraintKind,
    scores: &[f64],
    data: &Dataset,
    est: &ProbabilityEstimates,
    group_model: Option<&GroupModel>,
) -> Result<ConstraintFeatures, PipelineError> {
    match kind {
        ConstraintKind::MeanScoreParity => {
            if let Some(protected) = data.protected() {
                Ok(build_features_msp(GroupInfo::Observed(protected), est)?)
            } else if let Some(GroupModel::Msp(model)) = group_model {
                let posterior = predict_proba_multi(model, data.features())?;
                Ok(build_features_msp(GroupInfo::Posterior(&posterior), est)?)
            } else {
                Err(PipelineError::MissingGroupInfo)
            }
        }
        ConstraintKind::GeneralizedEqualizedOdds => {
            if let Some(protected) = data.protected() {
                Ok(build_features_geo(scores, GeoGroupInfo::Observed(protected), est)?)
            } else if let Some(GroupModel::Geo(models)) = group_model {
                let y0 = predict_proba_multi(&models[0], data.features())?;
                let y1 = predict_proba_multi(&models[1], data.features())?;
                Ok(build_features_geo(scores, GeoGroupInfo::Posterior { y0: &y0, y1: &y1 }, est)?)
            } else {
                Err(PipelineError::MissingGroupInfo)
            }
        }
        ConstraintKind::GeneralLinear(_) => Err(PipelineError::GeneralNeedsFeatures),
    }
}

fn fit_group_models(
    kind: &ConstraintKind,
    data: &Dataset,
    l2_reg: f64,
) -> Result<Option<GroupModel>, PipelineError> {
    let protected = data.protected().ok_or(PipelineError::MissingProtected)?;
    let labels = data.labels().ok_or(PipelineError::MissingLabels)?;
    let k = data.group_count();
    match kind {
        ConstraintKind::MeanScoreParity => {
            let model = fit_multinomial(data.features(), protected, k, l2_reg)?;
            Ok(Some(GroupModel::Msp(model)))
        }
        ConstraintKind::GeneralizedEqualizedOdds => {
            let mut per_y = Vec::with_capacity(2);
            for y in 0..2u8 {
                let idx: Vec<usize> =
                    (0..data.len()).filter(|&i| labels[i] == y).collect();
                let x: Vec<Vec<f64>> = idx.iter().map(|&i| data.features()[i].clone()).collect();
                let a: Vec<usize> = idx.iter().map(|&i| protected[i]).collect();
                per_y.push(fit_multinomial(&x, &a, k, l2_reg)?);
            }
            let boxed: Box<[MultinomialModel; 2]> =
                Box::new([per_y.remove(0), per_y.remove(0)]);
            Ok(Some(GroupModel::Geo(boxed)))
        }
        ConstraintKind::GeneralLinear(_) => Ok(None),
    }
}

fn general_features_for(
    general: &GeneralConstraint,
    n: usize,
) -> Result<ConstraintFeatures, PipelineError> {
    let features = build_features_general(general)?;
    if features.len() != n {
        return Err(PipelineError::GeneralRowMismatch { got: features.len(), expected: n });
    }
    Ok(features)
}

/// Fit the full model on labeled training data: estimate scores and
/// marginals, build constraint features, and solve the dual. Solver
/// non-convergence is reported through `model.dual.converged`, not an error.
pub fn fit(
    train: &Dataset,
    spec: &ConstraintSpec,
    config: &AdmmConfig,
    opts: &FitOptions,
) -> Result<FstModel, PipelineError> {
    let labels = train.labels().ok_or(PipelineError::MissingLabels)?;
    let protected = train.protected().ok_or(PipelineError::MissingProtected)?;
    let k = train.group_count();
    for g in 0..k {
        if !protected.contains(&g) {
            return Err(PipelineError::EmptyGroup(g));
        }
    }

    let score_source = if train.base_scores().is_some() {
        ScoreSource::External
    } else if train.feature_dim() > 0 {
        let weights = train
            .weights()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![1.0; train.len()]);
        ScoreSource::Logistic(fit_logistic(train.features(), labels, &weights, opts.l2_reg)?)
    } else {
        return Err(PipelineError::MissingScores);
    };
    let scores = resolve_scores(&score_source, train)?;

    let estimates = estimate_marginals(train, opts.delta)?;
    let group_model = if opts.fit_group_model {
        fit_group_models(&spec.kind, train, opts.l2_reg)?
    } else {
        None
    };

    let features = match &spec.kind {
        ConstraintKind::GeneralLinear(general) => general_features_for(general, train.len())?,
        _ => build_preset_features(&spec.kind, &scores, train, &estimates, None)?,
    };
    let solution = solve_dual_admm(&features, &scores, spec.epsilon, config)?;

    let threshold = if opts.fit_threshold {
        let transformed: Vec<f64> = features
            .multipliers(&solution.lambda)
            .iter()
            .zip(&scores)
            .map(|(&mu, &r)| transform_score_raw(mu, r))
            .collect();
        Some(select_threshold(&transformed, labels)?)
    } else {
        None
    };

    Ok(FstModel {
        spec: spec.clone(),
        estimates,
        lambda: solution.lambda.clone(),
        dual: DualSummary::from(&solution),
        score_source,
        group_model,
        mode: opts.mode,
        threshold,
        group_count: k,
        group_names: default_group_names(k),
    })
}

/// Transform output with the intermediate quantities the CLI reports.
#[derive(Debug, Clone)]
pub struct TransformOutput {
    pub original: Vec<f64>,
    pub mu: Vec<f64>,
    pub transformed: Vec<f64>,
    pub predictions: Option<Vec<u8>>,
}

/// Apply the fitted transform to new data.
pub fn transform(model: &FstModel, data: &Dataset) -> Result<Vec<f64>, PipelineError> {
    Ok(transform_details(model, data)?.transformed)
}

/// As [`transform`], also returning scores, multipliers and thresholded
/// predictions when a threshold is set.
pub fn transform_details(
    model: &FstModel,
    data: &Dataset,
) -> Result<TransformOutput, PipelineError> {
    let scores = resolve_scores(&model.score_source, data)?;
    let features = match &model.spec.kind {
        ConstraintKind::GeneralLinear(_) => return Err(PipelineError::GeneralNeedsFeatures),
        kind => build_preset_features(
            kind,
            &scores,
            data,
            &model.estimates,
            model.group_model.as_ref(),
        )?,
    };
    Ok(apply_transform(model, &features, scores))
}

/// Apply the fitted multipliers to caller-built constraint features. This is
/// the entry point for general linear constraints, where event posteriors
/// for the new rows come from the caller.
pub fn transform_with_features(
    model: &FstModel,
    features: &ConstraintFeatures,
    scores: &[f64],
) -> Result<TransformOutput, PipelineError> {
    if features.dim() != model.lambda.len() {
        return Err(PipelineError::Solver(SolverError::DimensionMismatch(format!(
            "{} feature columns for {} dual variables",
            features.dim(),
            model.lambda.len()
        ))));
    }
    let scores: Vec<f64> = scores.iter().map(|&s| clamp_score(s)).collect();
    Ok(apply_transform(model, features, scores))
}

fn apply_transform(
    model: &FstModel,
    features: &ConstraintFeatures,
    scores: Vec<f64>,
) -> TransformOutput {
    let mu = features.multipliers(&model.lambda);
    let transformed: Vec<f64> = mu
        .iter()
        .zip(&scores)
        .map(|(&m, &r)| transform_score_raw(m, r))
        .collect();
    let predictions = model
        .threshold
        .map(|t| transformed.iter().map(|&s| (s > t) as u8).collect());
    TransformOutput { original: scores, mu, transformed, predictions }
}

/// Emit the weighted pre-processing dataset: for every source row, a
/// negative copy with weight `1 - r'` and a positive copy with weight `r'`.
pub fn preprocess(model: &FstModel, train: &Dataset) -> Result<WeightedDataset, PipelineError> {
    if model.mode != FstMode::PreProcess {
        return Err(PipelineError::ModeMismatch {
            required: FstMode::PreProcess,
            actual: model.mode,
        });
    }
    let out = transform_details(model, train)?;
    Ok(weighted_from_transformed(train, &out.transformed))
}

pub(crate) fn weighted_from_transformed(
    train: &Dataset,
    transformed: &[f64],
) -> WeightedDataset {
    let n = train.len();
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    let mut weights = Vec::with_capacity(2 * n);
    for (row, &r) in train.features().iter().zip(transformed) {
        features.push(row.clone());
        labels.push(0u8);
        weights.push(1.0 - r);
        features.push(row.clone());
        labels.push(1u8);
        weights.push(r);
    }
    WeightedDataset { features, labels, weights }
}

/// Smallest threshold maximizing 0/1 accuracy of `1(score > t)`, scanning
/// midpoints of consecutive distinct sorted scores plus the endpoints 0, 1.
pub fn select_threshold(scores: &[f64], labels: &[u8]) -> Result<f64, PipelineError> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(PipelineError::Solver(SolverError::DimensionMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        ))));
    }
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let mut candidates = vec![0.0];
    candidates.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(1.0);

    let mut best_t = 0.0;
    let mut best_hits = usize::MIN;
    for &t in &candidates {
        let hits = scores
            .iter()
            .zip(labels)
            .filter(|(&s, &y)| ((s > t) as u8) == y)
            .count();
        if hits > best_hits {
            best_hits = hits;
            best_t = t;
        }
    }
    Ok(best_t)
}

/// Refit the dual variables on a (possibly unlabeled) batch of data, keeping
/// the score model fixed. For MSP the group marginal is re-estimated from the
/// batch, so the constraint tracks the batch's group mix; GEO keeps the
/// label-dependent training estimates since the batch has no labels.
pub fn fit_batch(
    model: &FstModel,
    test: &Dataset,
    config: &AdmmConfig,
) -> Result<FstModel, PipelineError> {
    let scores = resolve_scores(&model.score_source, test)?;
    let mut estimates = model.estimates.clone();

    if model.spec.kind == ConstraintKind::MeanScoreParity {
        let k = model.group_count;
        let mut mass = vec![0.0f64; k];
        if let Some(protected) = test.protected() {
            for &a in protected {
                if a >= k {
                    return Err(PipelineError::Constraint(ConstraintError::UnknownGroup(a)));
                }
                mass[a] += 1.0;
            }
        } else if let Some(GroupModel::Msp(m)) = &model.group_model {
            for row in predict_proba_multi(m, test.features())? {
                for (acc, p) in mass.iter_mut().zip(&row) {
                    *acc += p;
                }
            }
        } else {
            return Err(PipelineError::MissingGroupInfo);
        }
        let total: f64 = mass.iter().sum();
        let mut p_a: Vec<f64> = mass.iter().map(|m| m / total).collect();
        crate::constraints::floor_and_renormalize(&mut p_a, estimates.delta);
        estimates.p_a = p_a;
    }

    let features = match &model.spec.kind {
        ConstraintKind::GeneralLinear(_) => return Err(PipelineError::GeneralNeedsFeatures),
        kind => build_preset_features(
            kind,
            &scores,
            test,
            &estimates,
            model.group_model.as_ref(),
        )?,
    };
    let solution = solve_dual_admm(&features, &scores, model.spec.epsilon, config)?;

    let mut updated = model.clone();
    updated.estimates = estimates;
    updated.lambda = solution.lambda.clone();
    updated.dual = DualSummary::from(&solution);
    Ok(updated)
}

/// Fit with caller-built constraint features (general linear constraints).
pub fn fit_with_features(
    train: &Dataset,
    spec: &ConstraintSpec,
    features: &ConstraintFeatures,
    config: &AdmmConfig,
    opts: &FitOptions,
) -> Result<FstModel, PipelineError> {
    let labels = train.labels().ok_or(PipelineError::MissingLabels)?;
    let score_source = if train.base_scores().is_some() {
        ScoreSource::External
    } else if train.feature_dim() > 0 {
        let weights = train
            .weights()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![1.0; train.len()]);
        ScoreSource::Logistic(fit_logistic(train.features(), labels, &weights, opts.l2_reg)?)
    } else {
        return Err(PipelineError::MissingScores);
    };
    let scores = resolve_scores(&score_source, train)?;
    let k = train.group_count().max(1);
    let estimates = if train.protected().is_some() {
        estimate_marginals(train, opts.delta)?
    } else {
        ProbabilityEstimates {
            p_a: vec![1.0 / k as f64; k],
            p_y: [0.5, 0.5],
            p_a_given_y: [vec![1.0 / k as f64; k], vec![1.0 / k as f64; k]],
            delta: opts.delta,
        }
    };
    let solution = solve_dual_admm(features, &scores, spec.epsilon, config)?;
    let threshold = if opts.fit_threshold {
        let transformed: Vec<f64> = features
            .multipliers(&solution.lambda)
            .iter()
            .zip(&scores)
            .map(|(&mu, &r)| transform_score_raw(mu, r))
            .collect();
        Some(select_threshold(&transformed, labels)?)
    } else {
        None
    };
    Ok(FstModel {
        spec: spec.clone(),
        estimates,
        lambda: solution.lambda.clone(),
        dual: DualSummary::from(&solution),
        score_source,
        group_model: None,
        mode: opts.mode,
        threshold,
        group_count: k,
        group_names: default_group_names(k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{cross_entropy_utility, msp_gap};
    use crate::synth::{generate, SynthConfig};

    fn msp_spec(epsilon: f64) -> ConstraintSpec {
        ConstraintSpec::new(ConstraintKind::MeanScoreParity, epsilon).unwrap()
    }

    fn geo_spec(epsilon: f64) -> ConstraintSpec {
        ConstraintSpec::new(ConstraintKind::GeneralizedEqualizedOdds, epsilon).unwrap()
    }

    fn biased_fixture(n: usize, seed: u64) -> Dataset {
        let cfg = SynthConfig {
            n,
            test_fraction: 0.0,
            group1_fraction: 0.5,
            base_rates: [0.7, 0.3],
            signal: 2.0,
            seed,
        };
        generate(&cfg).train
    }

    #[test]
    fn feasible_fixture_gives_identity_transform() {
        let scores = vec![0.3, 0.7, 0.3, 0.7, 0.5, 0.5];
        let data = Dataset::new(
            vec![vec![0.0]; 6],
            Some(vec![0, 0, 0, 1, 1, 1]),
            2,
            Some(vec![0, 1, 0, 1, 0, 1]),
            Some(scores.clone()),
            None,
        )
        .unwrap();
        let model = fit(&data, &msp_spec(0.5), &AdmmConfig::default(), &FitOptions::default())
            .unwrap();
        assert!(model.dual.converged);
        let l1: f64 = model.lambda.iter().map(|l| l.abs()).sum();
        assert!(l1 <= 1e-4);
        let out = transform(&model, &data).unwrap();
        for (o, s) in out.iter().zip(&scores) {
            assert!((o - s).abs() <= 1e-6);
        }
    }

    #[test]
    fn biased_fixture_msp_gap_shrinks() {
        let data = biased_fixture(800, 11);
        let eps = 0.02;
        let model = fit(&data, &msp_spec(eps), &AdmmConfig::default(), &FitOptions::default())
            .unwrap();
        assert!(model.dual.converged);
        let out = transform_details(&model, &data).unwrap();
        let groups = data.protected().unwrap();
        let before = msp_gap(&out.original, groups).unwrap();
        let after = msp_gap(&out.transformed, groups).unwrap();
        assert!(after <= eps + 0.005, "gap after = {after}");
        assert!(after < before);
    }

    #[test]
    fn single_sample_composition() {
        let data = Dataset::new(
            vec![vec![0.0]; 4],
            Some(vec![0, 0, 1, 1]),
            2,
            Some(vec![1, 1, 0, 0]),
            Some(vec![0.9, 0.8, 0.2, 0.1]),
            None,
        )
        .unwrap();
        let model = fit(&data, &msp_spec(0.05), &AdmmConfig::default(), &FitOptions::default())
            .unwrap();
        let out = transform_details(&model, &data).unwrap();
        let est = &model.estimates;
        for i in 0..4 {
            let a = data.protected().unwrap()[i];
            let f: Vec<f64> = (0..2)
                .map(|g| ((a == g) as u8 as f64) / est.p_a[g] - 1.0)
                .collect();
            let mu: f64 = f.iter().zip(&model.lambda).map(|(x, l)| x * l).sum();
            assert!((out.mu[i] - mu).abs() < 1e-12);
            let expected = transform_score_raw(mu, out.original[i]);
            assert_eq!(out.transformed[i], expected);
        }
    }

    #[test]
    fn mirrored_groups_move_toward_each_other() {
        let data = Dataset::new(
            vec![vec![0.0]; 6],
            Some(vec![0, 0, 0, 1, 1, 1]),
            2,
            Some(vec![1, 1, 1, 0, 0, 0]),
            Some(vec![0.8, 0.9, 0.7, 0.2, 0.1, 0.3]),
            None,
        )
        .unwrap();
        let model = fit(&data, &msp_spec(0.05), &AdmmConfig::default(), &FitOptions::default())
            .unwrap();
        let out = transform_details(&model, &data).unwrap();
        let mean = |v: &[f64], lo: usize| v[lo..lo + 3].iter().sum::<f64>() / 3.0;
        let before_gap = mean(&out.original, 0) - mean(&out.original, 3);
        let after_gap = mean(&out.transformed, 0) - mean(&out.transformed, 3);
        assert!(after_gap.abs() < before_gap.abs());
        assert!(after_gap.abs() <= 0.05 + 0.005);
    }

    #[test]
    fn preprocess_rows_and_weights() {
        let data = Dataset::new(
            vec![vec![1.0], vec![2.0]],
            Some(vec![0, 1]),
            2,
            Some(vec![0, 1]),
            Some(vec![0.3, 1.0]),
            None,
        )
        .unwrap();
        // lambda = 0 model keeps scores: r' = (0.3, clamped 1)
        let mut opts = FitOptions::default();
        opts.mode = FstMode::PreProcess;
        let model = fit(&data, &msp_spec(5.0), &AdmmConfig::default(), &opts).unwrap();
        let weighted = preprocess(&model, &data).unwrap();
        assert_eq!(weighted.len(), 4);
        assert_eq!(weighted.labels, vec![0, 1, 0, 1]);
        assert_eq!(weighted.features[0], vec![1.0]);
        assert_eq!(weighted.features[1], vec![1.0]);
        assert!((weighted.weights[0] - 0.7).abs() < 1e-9);
        assert!((weighted.weights[1] - 0.3).abs() < 1e-9);
        // every pair sums to exactly 1
        for pair in weighted.weights.chunks(2) {
            assert_eq!(pair[0] + pair[1], 1.0);
        }
        // r' = 0.5 gives all weights 0.5
        let w = weighted_from_transformed(&data, &[0.5, 0.5]);
        assert!(w.weights.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn preprocess_requires_preprocess_mode() {
        let data = biased_fixture(50, 3);
        let model = fit(&data, &msp_spec(0.1), &AdmmConfig::default(), &FitOptions::default())
            .unwrap();
        assert!(matches!(
            preprocess(&model, &data),
            Err(PipelineError::ModeMismatch { .. })
        ));
    }

    #[test]
    fn threshold_examples() {
        let t = select_threshold(&[0.2, 0.6, 0.8], &[0, 1, 1]).unwrap();
        assert!((t - 0.4).abs() < 1e-12);
        let t = select_threshold(&[0.2, 0.6, 0.8], &[1, 1, 1]).unwrap();
        assert_eq!(t, 0.0);
        // all thresholds tie: the smallest candidate wins
        let t = select_threshold(&[0.5, 0.5], &[0, 1]).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn batch_refit_matches_on_same_data() {
        let data = biased_fixture(500, 5);
        let model = fit(&data, &msp_spec(0.05), &AdmmConfig::default(), &FitOptions::default())
            .unwrap();
        let refit = fit_batch(&model, &data, &AdmmConfig::default()).unwrap();
        for (a, b) in model.lambda.iter().zip(&refit.lambda) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn batch_refit_tracks_shifted_group_mix() {
        let train = biased_fixture(2000, 7);
        let eps = 0.02;
        let model =
            fit(&train, &msp_spec(eps), &AdmmConfig::default(), &FitOptions::default()).unwrap();

        // shift the group mix: keep all of group 0, drop most of group 1
        let protected = train.protected().unwrap();
        let keep: Vec<usize> = (0..train.len())
            .filter(|&i| protected[i] == 0 || i % 4 == 0)
            .collect();
        let shifted = Dataset::new(
            keep.iter().map(|&i| train.features()[i].clone()).collect(),
            Some(keep.iter().map(|&i| protected[i]).collect()),
            2,
            None,
            None,
            None,
        )
        .unwrap();

        let batch = fit_batch(&model, &shifted, &AdmmConfig::default()).unwrap();
        assert!(batch.dual.converged);
        let out = transform(&batch, &shifted).unwrap();
        let gap = msp_gap(&out, shifted.protected().unwrap()).unwrap();
        assert!(gap <= eps + 0.005, "batch msp gap = {gap}");
    }

    #[test]
    fn geo_fit_attains_constraint() {
        let data = biased_fixture(800, 13);
        let eps = 0.02;
        let model = fit(&data, &geo_spec(eps), &AdmmConfig::default(), &FitOptions::default())
            .unwrap();
        assert!(model.dual.converged);
        let out = transform_details(&model, &data).unwrap();
        let gg = crate::metrics::geo_gap(
            &out.transformed,
            data.protected().unwrap(),
            data.labels().unwrap(),
        )
        .unwrap();
        assert!(gg.gap <= eps + 0.015, "geo gap = {}", gg.gap);
    }

    #[test]
    fn epsilon_loosens_utility() {
        let data = biased_fixture(600, 17);
        let mut last = f64::INFINITY;
        for eps in [0.02, 0.05, 0.1, 0.2] {
            let model =
                fit(&data, &msp_spec(eps), &AdmmConfig::default(), &FitOptions::default())
                    .unwrap();
            let out = transform_details(&model, &data).unwrap();
            let ce = cross_entropy_utility(&out.original, &out.transformed).unwrap();
            assert!(ce <= last + 1e-4, "eps {eps}: {ce} > {last}");
            last = ce;
        }
    }

    #[test]
    fn unobserved_groups_via_posterior_model() {
        let train = biased_fixture(1200, 23);
        let mut opts = FitOptions::default();
        opts.fit_group_model = true;
        let eps = 0.05;
        let model = fit(&train, &msp_spec(eps), &AdmmConfig::default(), &opts).unwrap();

        // strip the protected column from the transform-time data
        let blind = Dataset::new(train.features().to_vec(), None, 2, None, None, None).unwrap();
        let out = transform(&model, &blind).unwrap();
        let gap = msp_gap(&out, train.protected().unwrap()).unwrap();
        let base = resolve_scores(&model.score_source, &train).unwrap();
        let gap_before = msp_gap(&base, train.protected().unwrap()).unwrap();
        assert!(gap < gap_before, "posterior transform did not reduce the gap");
    }
}
