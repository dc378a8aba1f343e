//! Built-in probabilistic classifiers: weighted binary logistic regression
//! and multinomial logistic regression, both fitted by damped Newton steps
//! (iteratively reweighted least squares).
//!
//! Features are standardized per column at fit time and the standardization
//! is folded back into the stored parameters, so prediction works on raw
//! features. The ridge penalty applies to the original-space weights, never
//! the intercept.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::transform::clamp_score;

const IRLS_MAX_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-8;
const RIDGE_JITTER: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("feature row {row} has {got} columns, expected {expected}")]
    DimensionMismatch { row: usize, got: usize, expected: usize },
    #[error("labels/weights length {got} does not match {expected} samples")]
    LengthMismatch { got: usize, expected: usize },
    #[error("sample weights must be non-negative and not all zero")]
    BadWeights,
    #[error("feature at row {row}, column {col} is not finite")]
    BadFeature { row: usize, col: usize },
    #[error("label at row {0} is out of range")]
    BadLabel(usize),
    #[error("did not converge in {0} iterations (perfect separation with no ridge?)")]
    NonConvergence(usize),
}

/// Binary logistic model: `p(y=1|x) = sigmoid(intercept + weights . x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub l2_reg: f64,
}

/// Multinomial logistic model with the first class pinned as reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialModel {
    /// `weights[k]` are the coefficients of class `k + 1` against class 0.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub n_classes: usize,
    pub l2_reg: f64,
}

fn validate_features(x: &[Vec<f64>]) -> Result<usize, EstimatorError> {
    let n = x.len();
    if n < 2 {
        return Err(EstimatorError::TooFewSamples(n));
    }
    let p = x[0].len();
    for (row, xi) in x.iter().enumerate() {
        if xi.len() != p {
            return Err(EstimatorError::DimensionMismatch { row, got: xi.len(), expected: p });
        }
        for (col, v) in xi.iter().enumerate() {
            if !v.is_finite() {
                return Err(EstimatorError::BadFeature { row, col });
            }
        }
    }
    Ok(p)
}

fn validate_weights(w: &[f64], n: usize) -> Result<(), EstimatorError> {
    if w.len() != n {
        return Err(EstimatorError::LengthMismatch { got: w.len(), expected: n });
    }
    let mut total = 0.0;
    for &v in w {
        if !v.is_finite() || v < 0.0 {
            return Err(EstimatorError::BadWeights);
        }
        total += v;
    }
    if total <= 0.0 {
        return Err(EstimatorError::BadWeights);
    }
    Ok(())
}

/// Weighted per-column mean and standard deviation; constant columns get
/// sigma = 1 so they pass through unscaled.
fn standardize(x: &[Vec<f64>], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = x[0].len();
    let total: f64 = w.iter().sum();
    let mut mean = vec![0.0; p];
    for (xi, &wi) in x.iter().zip(w) {
        for j in 0..p {
            mean[j] += wi * xi[j];
        }
    }
    for m in &mut mean {
        *m /= total;
    }
    let mut var = vec![0.0; p];
    for (xi, &wi) in x.iter().zip(w) {
        for j in 0..p {
            let c = xi[j] - mean[j];
            var[j] += wi * c * c;
        }
    }
    let sigma: Vec<f64> = var
        .iter()
        .map(|v| {
            let s = (v / total).sqrt();
            if s < 1e-12 {
                1.0
            } else {
                s
            }
        })
        .collect();
    (mean, sigma)
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Penalized weighted log-likelihood in the standardized parameter space.
/// `params` is (w_1..w_p, intercept); `pen[j]` the per-coordinate ridge.
fn logistic_objective(
    xs: &DMatrix<f64>,
    y: &[u8],
    w: &[f64],
    pen: &[f64],
    params: &DVector<f64>,
) -> f64 {
    let eta = xs * params;
    let mut ll = 0.0;
    for i in 0..y.len() {
        let z = eta[i];
        // log sigmoid(z) and log sigmoid(-z) without overflow
        let log_p = if z >= 0.0 { -((-z).exp().ln_1p()) } else { z - z.exp().ln_1p() };
        let log_q = log_p - z;
        ll += w[i] * if y[i] == 1 { log_p } else { log_q };
    }
    let mut penalty = 0.0;
    for (j, &pj) in pen.iter().enumerate() {
        penalty += 0.5 * pj * params[j] * params[j];
    }
    ll - penalty
}

struct IrlsFit {
    params: DVector<f64>,
    objective_history: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Damped Newton on the penalized weighted log-likelihood. The design matrix
/// `xs` already carries the intercept column of ones.
fn irls(xs: &DMatrix<f64>, y: &[u8], w: &[f64], pen: &[f64]) -> IrlsFit {
    let n = xs.nrows();
    let q = xs.ncols();
    let mut params = DVector::<f64>::zeros(q);
    let mut objective = logistic_objective(xs, y, w, pen, &params);
    let mut history = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..IRLS_MAX_ITER {
        iterations = iter + 1;
        let eta = xs * &params;
        let mut grad = DVector::<f64>::zeros(q);
        let mut hess = DMatrix::<f64>::zeros(q, q);
        for i in 0..n {
            let p = sigmoid(eta[i]);
            let resid = w[i] * (y[i] as f64 - p);
            let curv = w[i] * p * (1.0 - p);
            for a in 0..q {
                let xa = xs[(i, a)];
                grad[a] += resid * xa;
                if curv > 0.0 && xa != 0.0 {
                    for b in 0..q {
                        hess[(a, b)] += curv * xa * xs[(i, b)];
                    }
                }
            }
        }
        for j in 0..q {
            grad[j] -= pen[j] * params[j];
            hess[(j, j)] += pen[j];
        }

        let step = solve_with_jitter(&hess, &grad);
        // step halving keeps the objective non-decreasing
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &params + alpha * &step;
            let cand_obj = logistic_objective(xs, y, w, pen, &cand);
            if cand_obj >= objective {
                params = cand;
                objective = cand_obj;
                history.push(objective);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            converged = true; // cannot improve further in this direction
            break;
        }
        if (alpha * step.amax()) < IRLS_TOL {
            converged = true;
            break;
        }
    }
    IrlsFit { params, objective_history: history, converged, iterations }
}

fn solve_with_jitter(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = h.clone().cholesky() {
        return chol.solve(g);
    }
    let mut jitter = RIDGE_JITTER;
    loop {
        let mut hj = h.clone();
        for i in 0..hj.nrows() {
            hj[(i, i)] += jitter;
        }
        if let Some(chol) = hj.cholesky() {
            return chol.solve(g);
        }
        jitter *= 10.0;
        if jitter > 1.0 {
            return DVector::zeros(g.len());
        }
    }
}

fn standardized_design(x: &[Vec<f64>], mean: &[f64], sigma: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let p = mean.len();
    DMatrix::from_fn(n, p + 1, |i, j| {
        if j < p {
            (x[i][j] - mean[j]) / sigma[j]
        } else {
            1.0
        }
    })
}

pub(crate) fn fit_logistic_impl(
    x: &[Vec<f64>],
    y: &[u8],
    sample_weights: &[f64],
    l2_reg: f64,
) -> Result<(LogisticModel, Vec<f64>), EstimatorError> {
    let p = validate_features(x)?;
    let n = x.len();
    if y.len() != n {
        return Err(EstimatorError::LengthMismatch { got: y.len(), expected: n });
    }
    if let Some(row) = y.iter().position(|&v| v > 1) {
        return Err(EstimatorError::BadLabel(row));
    }
    validate_weights(sample_weights, n)?;

    let (mean, sigma) = standardize(x, sample_weights);
    let xs = standardized_design(x, &mean, &sigma);
    // ridge on original-space weights == sigma^2-scaled ridge in standardized
    // space; intercept unpenalized
    let mut pen: Vec<f64> = sigma.iter().map(|s| l2_reg / (s * s)).collect();
    pen.push(0.0);

    let fit = irls(&xs, y, sample_weights, &pen);
    if !fit.converged {
        return Err(EstimatorError::NonConvergence(fit.iterations));
    }

    let mut weights = vec![0.0; p];
    let mut intercept = fit.params[p];
    for j in 0..p {
        weights[j] = fit.params[j] / sigma[j];
        intercept -= weights[j] * mean[j];
    }
    Ok((LogisticModel { weights, intercept, l2_reg }, fit.objective_history))
}

/// Fit a weighted binary logistic regression by IRLS with step halving.
pub fn fit_logistic(
    x: &[Vec<f64>],
    y: &[u8],
    sample_weights: &[f64],
    l2_reg: f64,
) -> Result<LogisticModel, EstimatorError> {
    fit_logistic_impl(x, y, sample_weights, l2_reg).map(|(m, _)| m)
}

/// Predicted positive-class probabilities, clamped into the score range.
pub fn predict_proba(model: &LogisticModel, x: &[Vec<f64>]) -> Result<Vec<f64>, EstimatorError> {
    let p = model.weights.len();
    let mut out = Vec::with_capacity(x.len());
    for (row, xi) in x.iter().enumerate() {
        if xi.len() != p {
            return Err(EstimatorError::DimensionMismatch { row, got: xi.len(), expected: p });
        }
        let z = model.intercept + xi.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>();
        out.push(clamp_score(sigmoid(z)));
    }
    Ok(out)
}

fn softmax_probs(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        let e = (z - max).exp();
        *o = e;
        total += e;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn multinomial_objective(
    xs: &DMatrix<f64>,
    labels: &[usize],
    pen: &[f64],
    params: &DVector<f64>,
    n_classes: usize,
) -> f64 {
    let q = xs.ncols();
    let n = xs.nrows();
    let mut logits = vec![0.0; n_classes];
    let mut probs = vec![0.0; n_classes];
    let mut ll = 0.0;
    for i in 0..n {
        logits[0] = 0.0;
        for k in 1..n_classes {
            let off = (k - 1) * q;
            let mut z = 0.0;
            for j in 0..q {
                z += xs[(i, j)] * params[off + j];
            }
            logits[k] = z;
        }
        softmax_probs(&logits, &mut probs);
        ll += probs[labels[i]].max(1e-300).ln();
    }
    let mut penalty = 0.0;
    for k in 0..n_classes - 1 {
        for j in 0..q {
            let pj = pen[j];
            let v = params[k * q + j];
            penalty += 0.5 * pj * v * v;
        }
    }
    ll - penalty
}

/// Fit a multinomial logistic regression (reference class 0 pinned at zero)
/// by damped Newton. Class probabilities are renormalized at prediction so
/// every row sums to 1.
pub fn fit_multinomial(
    x: &[Vec<f64>],
    a: &[usize],
    n_classes: usize,
    l2_reg: f64,
) -> Result<MultinomialModel, EstimatorError> {
    let p = validate_features(x)?;
    let n = x.len();
    if a.len() != n {
        return Err(EstimatorError::LengthMismatch { got: a.len(), expected: n });
    }
    if let Some(row) = a.iter().position(|&c| c >= n_classes) {
        return Err(EstimatorError::BadLabel(row));
    }
    if n_classes < 2 {
        return Err(EstimatorError::BadLabel(0));
    }

    let uniform = vec![1.0; n];
    let (mean, sigma) = standardize(x, &uniform);
    let xs = standardized_design(x, &mean, &sigma);
    let q = p + 1;
    let km1 = n_classes - 1;
    let mut pen: Vec<f64> = sigma.iter().map(|s| l2_reg / (s * s)).collect();
    pen.push(0.0);

    let mut params = DVector::<f64>::zeros(km1 * q);
    let mut objective = multinomial_objective(&xs, a, &pen, &params, n_classes);
    let mut converged = false;
    let mut iterations = 0;

    let mut logits = vec![0.0; n_classes];
    let mut probs_row = vec![0.0; n_classes];
    for iter in 0..IRLS_MAX_ITER {
        iterations = iter + 1;
        let mut grad = DVector::<f64>::zeros(km1 * q);
        let mut hess = DMatrix::<f64>::zeros(km1 * q, km1 * q);
        for i in 0..n {
            logits[0] = 0.0;
            for k in 1..n_classes {
                let off = (k - 1) * q;
                let mut z = 0.0;
                for j in 0..q {
                    z += xs[(i, j)] * params[off + j];
                }
                logits[k] = z;
            }
            softmax_probs(&logits, &mut probs_row);
            for k in 0..km1 {
                let resid = ((a[i] == k + 1) as u8 as f64) - probs_row[k + 1];
                for j in 0..q {
                    grad[k * q + j] += resid * xs[(i, j)];
                }
                for l in 0..km1 {
                    let curv = probs_row[k + 1]
                        * (((k == l) as u8 as f64) - probs_row[l + 1]);
                    if curv == 0.0 {
                        continue;
                    }
                    for j in 0..q {
                        let xj = xs[(i, j)];
                        if xj == 0.0 {
                            continue;
                        }
                        for j2 in 0..q {
                            hess[(k * q + j, l * q + j2)] += curv * xj * xs[(i, j2)];
                        }
                    }
                }
            }
        }
        for k in 0..km1 {
            for j in 0..q {
                grad[k * q + j] -= pen[j] * params[k * q + j];
                hess[(k * q + j, k * q + j)] += pen[j];
            }
        }

        let step = solve_with_jitter(&hess, &grad);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &params + alpha * &step;
            let cand_obj = multinomial_objective(&xs, a, &pen, &cand, n_classes);
            if cand_obj >= objective {
                params = cand;
                objective = cand_obj;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || (alpha * step.amax()) < IRLS_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EstimatorError::NonConvergence(iterations));
    }

    let mut weights = Vec::with_capacity(km1);
    let mut intercepts = Vec::with_capacity(km1);
    for k in 0..km1 {
        let mut w = vec![0.0; p];
        let mut b = params[k * q + p];
        for j in 0..p {
            w[j] = params[k * q + j] / sigma[j];
            b -= w[j] * mean[j];
        }
        weights.push(w);
        intercepts.push(b);
    }
    Ok(MultinomialModel { weights, intercepts, n_classes, l2_reg })
}

/// Per-row class probabilities; each row sums to 1.
pub fn predict_proba_multi(
    model: &MultinomialModel,
    x: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, EstimatorError> {
    let p = model.weights.first().map(|w| w.len()).unwrap_or(0);
    let mut out = Vec::with_capacity(x.len());
    let mut logits = vec![0.0; model.n_classes];
    for (row, xi) in x.iter().enumerate() {
        if xi.len() != p {
            return Err(EstimatorError::DimensionMismatch { row, got: xi.len(), expected: p });
        }
        logits[0] = 0.0;
        for k in 1..model.n_classes {
            let w = &model.weights[k - 1];
            logits[k] = model.intercepts[k - 1]
                + xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut probs = vec![0.0; model.n_classes];
        softmax_probs(&logits, &mut probs);
        out.push(probs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded_fixture(n: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        // deterministic small fixture: two features, labels from a noisy line
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            let a = 2.0 * next() - 1.0;
            let b = 2.0 * next() - 1.0;
            let eta = 1.2 * a - 0.7 * b + 0.3;
            let p = 1.0 / (1.0 + (-eta).exp());
            y.push((next() < p) as u8);
            x.push(vec![a, b]);
        }
        (x, y)
    }

    /// Plain gradient ascent on the same penalized objective, original space.
    fn gd_oracle(x: &[Vec<f64>], y: &[u8], w: &[f64], l2: f64, steps: usize) -> (Vec<f64>, f64) {
        let p = x[0].len();
        let mut weights = vec![0.0; p];
        let mut intercept = 0.0;
        let lr = 1e-3;
        for _ in 0..steps {
            let mut gw = vec![0.0; p];
            let mut gb = 0.0;
            for (xi, (&yi, &wi)) in x.iter().zip(y.iter().zip(w)) {
                let z = intercept + xi.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
                let pr = 1.0 / (1.0 + (-z).exp());
                let r = wi * (yi as f64 - pr);
                for j in 0..p {
                    gw[j] += r * xi[j];
                }
                gb += r;
            }
            for j in 0..p {
                gw[j] -= l2 * weights[j];
                weights[j] += lr * gw[j];
            }
            intercept += lr * gb;
        }
        (weights, intercept)
    }

    #[test]
    fn intercept_only_balanced() {
        let x = vec![vec![], vec![], vec![], vec![]];
        let y = vec![0, 1, 0, 1];
        let w = vec![1.0; 4];
        let m = fit_logistic(&x, &y, &w, 0.1).unwrap();
        let probs = predict_proba(&m, &x).unwrap();
        for p in probs {
            assert!((p - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn separable_data_positive_slope() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 - 4.5]).collect();
        let y: Vec<u8> = (0..10).map(|i| (i >= 5) as u8).collect();
        let w = vec![1.0; 10];
        let m = fit_logistic(&x, &y, &w, 0.1).unwrap();
        assert!(m.weights[0] > 0.0);
    }

    #[test]
    fn perfect_separation_without_ridge_fails() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 - 4.5]).collect();
        let y: Vec<u8> = (0..10).map(|i| (i >= 5) as u8).collect();
        let w = vec![1.0; 10];
        assert!(matches!(
            fit_logistic(&x, &y, &w, 0.0),
            Err(EstimatorError::NonConvergence(_))
        ));
    }

    #[test]
    fn matches_gradient_descent_oracle() {
        let (x, y) = seeded_fixture(20);
        let w = vec![1.0; 20];
        let m = fit_logistic(&x, &y, &w, 0.1).unwrap();
        let (ow, ob) = gd_oracle(&x, &y, &w, 0.1, 1_000_000);
        for j in 0..2 {
            assert!(
                (m.weights[j] - ow[j]).abs() < 1e-4,
                "weight {j}: {} vs {}",
                m.weights[j],
                ow[j]
            );
        }
        assert!((m.intercept - ob).abs() < 1e-4, "{} vs {ob}", m.intercept);

        let probs = predict_proba(&m, &x).unwrap();
        for (xi, pm) in x.iter().zip(&probs) {
            let z = ob + xi.iter().zip(&ow).map(|(a, b)| a * b).sum::<f64>();
            let po = 1.0 / (1.0 + (-z).exp());
            assert!((pm - po).abs() < 1e-4);
        }
    }

    #[test]
    fn prediction_clamped() {
        let m = LogisticModel { weights: vec![0.0], intercept: 50.0, l2_reg: 0.0 };
        let probs = predict_proba(&m, &[vec![0.0]]).unwrap();
        assert_eq!(probs[0], 1.0 - 1e-6);
        let m = LogisticModel { weights: vec![0.0], intercept: 0.0, l2_reg: 0.0 };
        assert_eq!(predict_proba(&m, &[vec![0.0]]).unwrap()[0], 0.5);
    }

    #[test]
    fn weighted_fit_equals_row_duplication() {
        let (x, y) = seeded_fixture(12);
        let mut w = vec![1.0; 12];
        w[3] = 3.0;
        w[7] = 2.0;
        let weighted = fit_logistic(&x, &y, &w, 0.05).unwrap();

        let mut x_dup = Vec::new();
        let mut y_dup = Vec::new();
        for i in 0..12 {
            for _ in 0..w[i] as usize {
                x_dup.push(x[i].clone());
                y_dup.push(y[i]);
            }
        }
        let dup = fit_logistic(&x_dup, &y_dup, &vec![1.0; x_dup.len()], 0.05).unwrap();
        for j in 0..2 {
            assert!((weighted.weights[j] - dup.weights[j]).abs() < 1e-6);
        }
        assert!((weighted.intercept - dup.intercept).abs() < 1e-6);
    }

    #[test]
    fn irls_objective_monotone() {
        let (x, y) = seeded_fixture(30);
        let w = vec![1.0; 30];
        let (_, history) = fit_logistic_impl(&x, &y, &w, 0.02).unwrap();
        for pair in history.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12, "objective decreased: {pair:?}");
        }
    }

    #[test]
    fn multinomial_matches_binary() {
        let (x, y) = seeded_fixture(24);
        let w = vec![1.0; 24];
        let bin = fit_logistic(&x, &y, &w, 0.1).unwrap();
        let classes: Vec<usize> = y.iter().map(|&v| v as usize).collect();
        let multi = fit_multinomial(&x, &classes, 2, 0.1).unwrap();
        let pb = predict_proba(&bin, &x).unwrap();
        let pm = predict_proba_multi(&multi, &x).unwrap();
        for (b, m) in pb.iter().zip(&pm) {
            assert!((b - m[1]).abs() < 1e-6, "{b} vs {}", m[1]);
        }
    }

    #[test]
    fn multinomial_intercept_only_recovers_frequencies() {
        let x = vec![vec![]; 8];
        let classes = vec![0, 1, 1, 1, 1, 1, 1, 0];
        let m = fit_multinomial(&x, &classes, 2, 0.3).unwrap();
        let probs = predict_proba_multi(&m, &x).unwrap();
        assert!((probs[0][0] - 0.25).abs() < 1e-8);
        assert!((probs[0][1] - 0.75).abs() < 1e-8);
    }

    #[test]
    fn multinomial_three_class_oracle() {
        // gradient-ascent oracle over the same softmax objective
        let (x, _) = seeded_fixture(30);
        let classes: Vec<usize> =
            x.iter().map(|xi| if xi[0] < -0.3 { 0 } else if xi[0] < 0.3 { 1 } else { 2 }).collect();
        let l2 = 0.2;
        let m = fit_multinomial(&x, &classes, 3, l2).unwrap();

        let q = 3usize; // 2 features + intercept
        let mut params = vec![0.0; 2 * q];
        let lr = 1e-3;
        for _ in 0..1_000_000 {
            let mut grad = vec![0.0; 2 * q];
            for (xi, &c) in x.iter().zip(&classes) {
                let mut logits = [0.0; 3];
                for k in 1..3 {
                    logits[k] = params[(k - 1) * q + 2]
                        + xi[0] * params[(k - 1) * q]
                        + xi[1] * params[(k - 1) * q + 1];
                }
                let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|z| (z - mx).exp()).collect();
                let tot: f64 = exps.iter().sum();
                for k in 0..2usize {
                    let r = ((c == k + 1) as u8 as f64) - exps[k + 1] / tot;
                    grad[k * q] += r * xi[0];
                    grad[k * q + 1] += r * xi[1];
                    grad[k * q + 2] += r;
                }
            }
            for k in 0..2 {
                for j in 0..2 {
                    grad[k * q + j] -= l2 * params[k * q + j];
                }
            }
            for (pp, g) in params.iter_mut().zip(&grad) {
                *pp += lr * g;
            }
        }
        for k in 0..2 {
            assert!((m.weights[k][0] - params[k * q]).abs() < 1e-4);
            assert!((m.weights[k][1] - params[k * q + 1]).abs() < 1e-4);
            assert!((m.intercepts[k] - params[k * q + 2]).abs() < 1e-4);
        }
    }

    #[test]
    fn multinomial_rows_sum_to_one() {
        let (x, _) = seeded_fixture(16);
        let classes: Vec<usize> = (0..16).map(|i| i % 3).collect();
        let m = fit_multinomial(&x, &classes, 3, 0.1).unwrap();
        let probs = predict_proba_multi(&m, &x).unwrap();
        for row in probs {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
