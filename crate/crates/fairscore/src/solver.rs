//! ADMM solvers for the empirical dual problem
//!
//! ```text
//! minimize (1/n) sum_i dual_term(lambda' f(x_i); r_i)  +  penalty(lambda)
//! ```
//!
//! where the penalty is `epsilon * ||lambda||_1` for the MSP/GEO presets and
//! `c' lambda` with `lambda >= 0` for general linear constraints.
//!
//! Two decompositions are provided. The primary one splits on the per-sample
//! multipliers: a scalar convex minimization per sample, an l1-penalized
//! quadratic in `lambda`, and a scaled dual update. The alternative splits on
//! auxiliary variables that absorb the group-probability scaling; its inner
//! steps are a small Newton solve and the same l1 quadratic. A grid-search
//! oracle is included for testing.

use thiserror::Error;

use crate::constraints::{ConstraintFeatures, FeatureKind, ProbabilityEstimates};
use crate::transform::{
    clamp_score, dual_term_hess_raw, dual_term_raw, transform_score_raw, Probability,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("empty problem")]
    EmptyInput,
    #[error("grid search supports at most 3 dual dimensions, got {0}")]
    GridTooLarge(usize),
    #[error("the alternative decomposition applies only to the MSP and GEO presets")]
    UnsupportedConstraint,
}

/// ADMM and subproblem tolerances. Defaults follow standard practice; the
/// penalty parameter `rho` is fixed at 1 and not tuned.
#[derive(Debug, Clone)]
pub struct AdmmConfig {
    pub rho: f64,
    pub max_iter: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub newton_max_iter: usize,
    pub newton_tol: f64,
    pub cd_tol: f64,
    pub cd_max_iter: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iter: 1000,
            tol_abs: 1e-6,
            tol_rel: 1e-4,
            newton_max_iter: 50,
            newton_tol: 1e-12,
            cd_tol: 1e-10,
            cd_max_iter: 10_000,
        }
    }
}

/// Result of a dual solve. `mu` is the final per-sample multiplier iterate,
/// which agrees with `features * lambda` up to the primal residual.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One row of the optional iteration trace.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub lambda_l1: f64,
}

/// Sub-level-set bound on the optimal `||lambda||_1` for the l1-penalized
/// presets: `log 2 / epsilon`.
pub fn lambda_l1_bound(epsilon: f64) -> f64 {
    std::f64::consts::LN_2 / epsilon
}

fn check_problem(
    features: &ConstraintFeatures,
    scores: &[f64],
    epsilon: f64,
) -> Result<(), SolverError> {
    if features.is_empty() || features.dim() == 0 {
        return Err(SolverError::EmptyInput);
    }
    if scores.len() != features.len() {
        return Err(SolverError::DimensionMismatch(format!(
            "{} scores for {} feature rows",
            scores.len(),
            features.len()
        )));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(SolverError::BadEpsilon(epsilon));
    }
    Ok(())
}

fn penalty_value(kind: &FeatureKind, lambda: &[f64], epsilon: f64) -> f64 {
    match kind {
        FeatureKind::Msp | FeatureKind::Geo => {
            epsilon * lambda.iter().map(|l| l.abs()).sum::<f64>()
        }
        FeatureKind::General { costs } => {
            costs.iter().zip(lambda).map(|(c, l)| c * l).sum()
        }
    }
}

/// Dual objective `(1/n) sum_i dual_term(lambda' f_i; r_i) + penalty(lambda)`.
pub fn dual_objective(
    lambda: &[f64],
    features: &ConstraintFeatures,
    scores: &[f64],
    epsilon: f64,
) -> Result<f64, SolverError> {
    check_problem(features, scores, epsilon)?;
    if lambda.len() != features.dim() {
        return Err(SolverError::DimensionMismatch(format!(
            "lambda has {} entries for {} feature columns",
            lambda.len(),
            features.dim()
        )));
    }
    let n = features.len();
    let mut total = 0.0;
    for i in 0..n {
        let mu: f64 = features.row(i).iter().zip(lambda).map(|(f, l)| f * l).sum();
        total += dual_term_raw(mu, scores[i]);
    }
    Ok(total / n as f64 + penalty_value(features.kind(), lambda, epsilon))
}

/// Unique minimizer of `(1/n) dual_term(mu; r) + (rho/2)(mu - a)^2`.
///
/// The first-order condition is `-(1/n) r*(mu; r) + rho (mu - a) = 0`; since
/// `r* in (0, 1)` the root is bracketed by `(a, a + 1/(n rho))`. Safeguarded
/// Newton: steps that leave the bracket fall back to bisection.
pub fn mu_update(r_i: Probability, a_i: f64, rho: f64, n: usize) -> f64 {
    mu_update_raw(r_i.get(), a_i, rho, n as f64, 50, 1e-12)
}

pub(crate) fn mu_update_raw(
    r: f64,
    a: f64,
    rho: f64,
    n: f64,
    max_iter: usize,
    tol: f64,
) -> f64 {
    let r = clamp_score(r);
    let inv_n = 1.0 / n;
    let deriv = |mu: f64| -inv_n * transform_score_raw(mu, r) + rho * (mu - a);
    let mut lo = a;
    let mut hi = a + inv_n / rho;
    // start at the fixed-point guess mu = a + r*(a)/(n rho)
    let mut mu = a + transform_score_raw(a, r) * inv_n / rho;
    for _ in 0..max_iter {
        let d1 = deriv(mu);
        if d1 > 0.0 {
            hi = mu;
        } else {
            lo = mu;
        }
        let d2 = inv_n * dual_term_hess_raw(mu, r) + rho;
        let step = d1 / d2;
        let next = mu - step;
        let next = if next <= lo || next >= hi {
            0.5 * (lo + hi)
        } else {
            next
        };
        if (next - mu).abs() <= tol * (1.0 + mu.abs()) {
            return next;
        }
        mu = next;
    }
    // bisection fallback on the maintained bracket
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= tol * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Penalty used by the quadratic `lambda` subproblem.
enum QuadPenalty<'a> {
    L1(f64),
    NonNegative(&'a [f64]),
}

/// Cyclic coordinate descent for
/// `min_lambda penalty(lambda) + lambda' v + lambda' F lambda`
/// with symmetric PSD `F` (row-major d x d). Each coordinate minimizer is an
/// exact soft-threshold (l1) or non-negative projection (linear costs).
/// Coordinates with a vanishing diagonal are frozen at zero.
fn quadratic_argmin(
    f_mat: &[f64],
    v: &[f64],
    penalty: &QuadPenalty<'_>,
    warm: &[f64],
    cd_tol: f64,
    cd_max_iter: usize,
) -> Vec<f64> {
    let d = v.len();
    let mut lambda = warm.to_vec();
    for _ in 0..cd_max_iter {
        let mut max_change = 0.0f64;
        for j in 0..d {
            let fjj = f_mat[j * d + j];
            let old = lambda[j];
            let new = if fjj < 1e-14 {
                0.0
            } else {
                // w = v_j + 2 sum_{k != j} F_jk lambda_k
                let mut w = v[j];
                for k in 0..d {
                    if k != j {
                        w += 2.0 * f_mat[j * d + k] * lambda[k];
                    }
                }
                match penalty {
                    QuadPenalty::L1(eps) => {
                        let mag = (w.abs() - eps).max(0.0) / (2.0 * fjj);
                        -w.signum() * mag
                    }
                    QuadPenalty::NonNegative(costs) => {
                        (-(costs[j] + w) / (2.0 * fjj)).max(0.0)
                    }
                }
            };
            lambda[j] = new;
            max_change = max_change.max((new - old).abs());
        }
        if max_change < cd_tol {
            break;
        }
    }
    lambda
}

fn build_f_matrix(features: &ConstraintFeatures, rho: f64) -> Vec<f64> {
    let d = features.dim();
    let mut f_mat = vec![0.0; d * d];
    for i in 0..features.len() {
        let row = features.row(i);
        for a in 0..d {
            let fa = row[a];
            if fa == 0.0 {
                continue;
            }
            for b in 0..d {
                f_mat[a * d + b] += 0.5 * rho * fa * row[b];
            }
        }
    }
    f_mat
}

fn quad_penalty<'a>(kind: &'a FeatureKind, epsilon: f64) -> QuadPenalty<'a> {
    match kind {
        FeatureKind::Msp | FeatureKind::Geo => QuadPenalty::L1(epsilon),
        FeatureKind::General { costs } => QuadPenalty::NonNegative(costs),
    }
}

/// The `lambda` step of the primary decomposition:
/// `argmin penalty(lambda) + lambda' v + lambda' F lambda` with
/// `F = (rho/2) sum_i f_i f_i'` and `v = -rho sum_i f_i (mu_i + c_i)`.
pub fn lambda_update(
    mu: &[f64],
    scaled_dual: &[f64],
    features: &ConstraintFeatures,
    epsilon: f64,
    rho: f64,
) -> Vec<f64> {
    let d = features.dim();
    let f_mat = build_f_matrix(features, rho);
    let mut v = vec![0.0; d];
    for i in 0..features.len() {
        let coef = rho * (mu[i] + scaled_dual[i]);
        for (vk, fk) in v.iter_mut().zip(features.row(i)) {
            *vk -= coef * fk;
        }
    }
    quadratic_argmin(
        &f_mat,
        &v,
        &quad_penalty(features.kind(), epsilon),
        &vec![0.0; d],
        1e-10,
        10_000,
    )
}

/// Primary ADMM decomposition (per-sample splitting).
pub fn solve_dual_admm(
    features: &ConstraintFeatures,
    scores: &[f64],
    epsilon: f64,
    config: &AdmmConfig,
) -> Result<DualSolution, SolverError> {
    solve_dual_admm_traced(features, scores, epsilon, config, None)
}

/// As [`solve_dual_admm`], optionally filling an iteration trace.
pub fn solve_dual_admm_traced(
    features: &ConstraintFeatures,
    scores: &[f64],
    epsilon: f64,
    config: &AdmmConfig,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<DualSolution, SolverError> {
    check_problem(features, scores, epsilon)?;
    let n = features.len();
    let d = features.dim();
    let rho = config.rho;
    let nf = n as f64;
    let penalty = quad_penalty(features.kind(), epsilon);

    let f_mat = build_f_matrix(features, rho);
    let mut lambda = vec![0.0f64; d];
    let mut mu = vec![0.0f64; n];
    let mut c = vec![0.0f64; n];
    let mut b_lambda = vec![0.0f64; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;

    for iter in 0..config.max_iter {
        iterations = iter + 1;
        // per-sample scalar prox step; the center is lambda' f_i - c_i
        for i in 0..n {
            let a_i = b_lambda[i] - c[i];
            mu[i] = mu_update_raw(
                scores[i],
                a_i,
                rho,
                nf,
                config.newton_max_iter,
                config.newton_tol,
            );
        }

        // lambda step on the cached quadratic
        let mut v = vec![0.0; d];
        for i in 0..n {
            let coef = rho * (mu[i] + c[i]);
            for (vk, fk) in v.iter_mut().zip(features.row(i)) {
                *vk -= coef * fk;
            }
        }
        let lambda_new =
            quadratic_argmin(&f_mat, &v, &penalty, &lambda, config.cd_tol, config.cd_max_iter);

        // residuals use B lambda for both the new and previous lambda
        let mut b_lambda_new = vec![0.0f64; n];
        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        let mut mu_sq = 0.0;
        let mut bl_sq = 0.0;
        let mut c_sq = 0.0;
        for i in 0..n {
            let row = features.row(i);
            let bl: f64 = row.iter().zip(&lambda_new).map(|(f, l)| f * l).sum();
            b_lambda_new[i] = bl;
            let r = mu[i] - bl;
            primal_sq += r * r;
            let s = bl - b_lambda[i];
            dual_sq += s * s;
            mu_sq += mu[i] * mu[i];
            bl_sq += bl * bl;
        }
        // scaled dual update c <- c + mu - B lambda
        for i in 0..n {
            c[i] += mu[i] - b_lambda_new[i];
            c_sq += c[i] * c[i];
        }
        lambda = lambda_new;
        b_lambda = b_lambda_new;

        primal_residual = primal_sq.sqrt();
        dual_residual = rho * dual_sq.sqrt();
        let eps_pri =
            nf.sqrt() * config.tol_abs + config.tol_rel * mu_sq.sqrt().max(bl_sq.sqrt());
        let eps_dual = nf.sqrt() * config.tol_abs + config.tol_rel * rho * c_sq.sqrt();

        if let Some(rows) = trace.as_mut() {
            rows.push(TraceRow {
                iteration: iterations,
                objective: dual_objective(&lambda, features, scores, epsilon)?,
                primal_residual,
                dual_residual,
                lambda_l1: lambda.iter().map(|l| l.abs()).sum(),
            });
        }

        if primal_residual <= eps_pri && dual_residual <= eps_dual {
            converged = true;
            break;
        }
    }

    let objective = dual_objective(&lambda, features, scores, epsilon)?;
    Ok(DualSolution {
        lambda,
        mu,
        objective,
        primal_residual,
        dual_residual,
        iterations,
        converged,
    })
}

/// Dense `d x d` solve with a ridge fallback for near-singular systems.
fn solve_spd(h: &nalgebra::DMatrix<f64>, g: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    if let Some(chol) = h.clone().cholesky() {
        return chol.solve(g);
    }
    let mut jitter = 1e-10;
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
            return nalgebra::DVector::zeros(g.len());
        }
    }
}

/// Data defining the alternative decomposition: `mu = B lambda_tilde` with
/// `lambda_tilde = M lambda` at feasibility. `M` is block diagonal over the
/// GEO label blocks (a single block for MSP).
struct AltProblem {
    b: Vec<f64>, // n x d row-major
    m: nalgebra::DMatrix<f64>,
}

fn build_alt_problem(
    features: &ConstraintFeatures,
    scores: &[f64],
    est: &ProbabilityEstimates,
) -> Result<AltProblem, SolverError> {
    let n = features.len();
    let d = features.dim();
    let k = est.group_count();
    let mut b = vec![0.0; n * d];
    let mut m = nalgebra::DMatrix::zeros(d, d);
    match features.kind() {
        FeatureKind::Msp => {
            if d != k {
                return Err(SolverError::DimensionMismatch(format!(
                    "{d} feature columns for {k} groups"
                )));
            }
            // B_{i,a} = p(a | x_i); recovered from f = mass/p_a - 1
            for i in 0..n {
                let row = features.row(i);
                for a in 0..k {
                    b[i * d + a] = est.p_a[a] * (row[a] + 1.0);
                }
            }
            for a in 0..k {
                for a2 in 0..k {
                    m[(a, a2)] = if a == a2 { 1.0 / est.p_a[a] - 1.0 } else { -1.0 };
                }
            }
        }
        FeatureKind::Geo => {
            if d != 2 * k {
                return Err(SolverError::DimensionMismatch(format!(
                    "{d} feature columns for {k} groups"
                )));
            }
            for i in 0..n {
                let row = features.row(i);
                let w = [(1.0 - scores[i]) / est.p_y[0], scores[i] / est.p_y[1]];
                for y in 0..2 {
                    for a in 0..k {
                        let col = y * k + a;
                        b[i * d + col] = est.p_a_given_y[y][a] * (row[col] + w[y]);
                    }
                }
            }
            for y in 0..2 {
                for a in 0..k {
                    for a2 in 0..k {
                        let v = if a == a2 {
                            1.0 / est.p_a_given_y[y][a] - 1.0
                        } else {
                            -1.0
                        };
                        m[(y * k + a, y * k + a2)] = v;
                    }
                }
            }
        }
        FeatureKind::General { .. } => return Err(SolverError::UnsupportedConstraint),
    }
    Ok(AltProblem { b, m })
}

/// Alternative ADMM decomposition for the MSP/GEO presets.
///
/// Splits on auxiliary variables `lambda_tilde` with `mu_i = b_i'
/// lambda_tilde`; each iteration runs a damped Newton solve in
/// `lambda_tilde`, the l1 quadratic in `lambda`, and a scaled dual update.
/// Returns the solution in the same `lambda` coordinates as
/// [`solve_dual_admm`].
pub fn solve_dual_admm_alt(
    features: &ConstraintFeatures,
    scores: &[f64],
    epsilon: f64,
    est: &ProbabilityEstimates,
    config: &AdmmConfig,
) -> Result<DualSolution, SolverError> {
    check_problem(features, scores, epsilon)?;
    let alt = build_alt_problem(features, scores, est)?;
    let n = features.len();
    let d = features.dim();
    let nf = n as f64;
    let rho = config.rho;

    let b_row = |i: usize| &alt.b[i * d..(i + 1) * d];
    let g_sum = |lt: &nalgebra::DVector<f64>, mu_buf: &mut Vec<f64>| -> f64 {
        let mut total = 0.0;
        for i in 0..n {
            let mu: f64 = b_row(i).iter().zip(lt.iter()).map(|(b, l)| b * l).sum();
            mu_buf[i] = mu;
            total += dual_term_raw(mu, scores[i]);
        }
        total / nf
    };

    // lambda quadratic: eps||lambda||_1 + (rho/2) ||M lambda - z||^2
    let mtm = alt.m.transpose() * &alt.m;
    let mut fq = vec![0.0; d * d];
    for a in 0..d {
        for b2 in 0..d {
            fq[a * d + b2] = 0.5 * rho * mtm[(a, b2)];
        }
    }
    let penalty = QuadPenalty::L1(epsilon);

    let mut lambda = nalgebra::DVector::<f64>::zeros(d);
    let mut lt = nalgebra::DVector::<f64>::zeros(d);
    let mut u = nalgebra::DVector::<f64>::zeros(d);
    let mut mu_buf = vec![0.0f64; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;

    for iter in 0..config.max_iter {
        iterations = iter + 1;
        let target = &alt.m * &lambda - &u;

        // damped Newton on phi(lt) = (1/n) sum g(b_i' lt) + (rho/2)||lt - target||^2
        let mut phi = g_sum(&lt, &mut mu_buf)
            + 0.5 * rho * (&lt - &target).norm_squared();
        for _ in 0..config.newton_max_iter {
            let mut grad = nalgebra::DVector::<f64>::zeros(d);
            let mut hess = nalgebra::DMatrix::<f64>::zeros(d, d);
            for i in 0..n {
                let row = b_row(i);
                let rs = transform_score_raw(mu_buf[i], scores[i]);
                let h = dual_term_hess_raw(mu_buf[i], scores[i]);
                for a in 0..d {
                    grad[a] -= rs * row[a] / nf;
                    if row[a] != 0.0 {
                        for b2 in 0..d {
                            hess[(a, b2)] += h * row[a] * row[b2] / nf;
                        }
                    }
                }
            }
            grad += rho * (&lt - &target);
            for a in 0..d {
                hess[(a, a)] += rho;
            }
            let grad_norm = grad.amax();
            if grad_norm <= 1e-11 {
                break;
            }
            let step = solve_spd(&hess, &grad);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let cand = &lt - alpha * &step;
                let cand_phi = g_sum(&cand, &mut mu_buf)
                    + 0.5 * rho * (&cand - &target).norm_squared();
                if cand_phi <= phi {
                    lt = cand;
                    phi = cand_phi;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted || step.amax() * alpha <= config.newton_tol {
                break;
            }
        }
        // restore mu_buf for the accepted lt
        g_sum(&lt, &mut mu_buf);

        // lambda step: v = -rho M' (lt + u)
        let z = &lt + &u;
        let vq = -rho * (alt.m.transpose() * &z);
        let lambda_new_vec = quadratic_argmin(
            &fq,
            vq.as_slice(),
            &penalty,
            lambda.as_slice(),
            config.cd_tol,
            config.cd_max_iter,
        );
        let lambda_new = nalgebra::DVector::from_vec(lambda_new_vec);

        let m_lambda_new = &alt.m * &lambda_new;
        let m_lambda_old = &alt.m * &lambda;
        primal_residual = (&lt - &m_lambda_new).norm();
        dual_residual = rho * (&m_lambda_new - &m_lambda_old).norm();
        u += &lt - &m_lambda_new;
        lambda = lambda_new;

        let df = d as f64;
        let eps_pri =
            df.sqrt() * config.tol_abs + config.tol_rel * lt.norm().max(m_lambda_new.norm());
        let eps_dual = df.sqrt() * config.tol_abs + config.tol_rel * rho * u.norm();
        if primal_residual <= eps_pri && dual_residual <= eps_dual {
            converged = true;
            break;
        }
    }

    g_sum(&lt, &mut mu_buf);
    let lambda_out: Vec<f64> = lambda.iter().copied().collect();
    let objective = dual_objective(&lambda_out, features, scores, epsilon)?;
    Ok(DualSolution {
        lambda: lambda_out,
        mu: mu_buf,
        objective,
        primal_residual,
        dual_residual,
        iterations,
        converged,
    })
}

/// Grid-search oracle for the dual, limited to `d <= 3`.
///
/// Minimizes [`dual_objective`] over the lattice `{j * grid_step}` inside
/// `[-half_width, half_width]^d` (default half-width `log 2 / epsilon`). The
/// full lattice at fine steps is intractable, so the search evaluates a
/// coarse sub-lattice and refines 5x around the incumbent until the final
/// step is `grid_step`; every evaluated point lies on the target lattice, and
/// convexity of the dual keeps the refinement from losing the minimizer.
pub fn brute_force_dual(
    features: &ConstraintFeatures,
    scores: &[f64],
    epsilon: f64,
    grid_half_width: Option<f64>,
    grid_step: f64,
) -> Result<Vec<f64>, SolverError> {
    check_problem(features, scores, epsilon)?;
    let d = features.dim();
    if d > 3 {
        return Err(SolverError::GridTooLarge(d));
    }
    let width = grid_half_width.unwrap_or_else(|| lambda_l1_bound(epsilon));
    let nonneg = matches!(features.kind(), FeatureKind::General { .. });

    let objective = |lambda: &[f64]| dual_objective(lambda, features, scores, epsilon).unwrap();

    // coarsest step: power of 5 times grid_step keeping <= ~41 points per axis
    let mut level = 0u32;
    while grid_step * 5f64.powi(level as i32) * 40.0 < 2.0 * width {
        level += 1;
    }
    let mut step = grid_step * 5f64.powi(level as i32);
    let mut center = vec![0.0f64; d];
    let mut best = center.clone();
    let mut best_val = objective(&best);
    let mut span = (width / step).floor() as i64;

    loop {
        let lo = |c: f64| -> i64 {
            let mut j = ((c - span as f64 * step) / step).round() as i64;
            if nonneg {
                j = j.max(0);
            }
            j.max((-width / step).floor() as i64)
        };
        let hi = |c: f64| -> i64 {
            (((c + span as f64 * step) / step).round() as i64).min((width / step).floor() as i64)
        };
        let ranges: Vec<(i64, i64)> = (0..d).map(|a| (lo(center[a]), hi(center[a]))).collect();
        let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'grid: loop {
            let cand: Vec<f64> = idx.iter().map(|&j| j as f64 * step).collect();
            let val = objective(&cand);
            if val < best_val {
                best_val = val;
                best = cand;
            }
            for a in 0..d {
                idx[a] += 1;
                if idx[a] <= ranges[a].1 {
                    continue 'grid;
                }
                idx[a] = ranges[a].0;
                if a == d - 1 {
                    break 'grid;
                }
            }
        }
        if level == 0 {
            break;
        }
        level -= 1;
        step /= 5.0;
        center = best.clone();
        span = 15; // +/- 3 coarse cells at the refined step
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{
        build_features_msp, estimate_marginals, GroupInfo,
    };
    use crate::data::Dataset;

    fn msp_fixture(groups: Vec<usize>, scores: Vec<f64>) -> (ConstraintFeatures, Vec<f64>) {
        let n = groups.len();
        let ds = Dataset::new(
            vec![vec![0.0]; n],
            Some(groups.clone()),
            2,
            Some(vec![0; n]),
            None,
            None,
        )
        .unwrap();
        let est = estimate_marginals(&ds, 1e-3).unwrap();
        let f = build_features_msp(GroupInfo::Observed(&groups), &est).unwrap();
        (f, scores)
    }

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    #[test]
    fn dual_objective_at_zero_is_negative_entropy() {
        let (f, scores) = msp_fixture(vec![0, 1, 0, 1], vec![0.5, 0.5, 0.5, 0.5]);
        let obj = dual_objective(&[0.0, 0.0], &f, &scores, 0.1).unwrap();
        assert!((obj + std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn dual_objective_single_sample() {
        // one sample, f = (1), r = 0.5, lambda = (1), eps = 0.1
        let f = single_column_features(vec![1.0]);
        let obj = dual_objective(&[1.0], &f, &[0.5], 0.1).unwrap();
        assert!((obj - (-0.9801536026031966)).abs() < 1e-12);
    }

    fn single_column_features(data: Vec<f64>) -> ConstraintFeatures {
        let n = data.len();
        ConstraintFeatures::from_parts(
            data,
            n,
            1,
            vec![crate::constraints::FeatureColumn::Group(0)],
            FeatureKind::Msp,
        )
    }

    #[test]
    fn dual_objective_dimension_mismatch() {
        let (f, scores) = msp_fixture(vec![0, 1], vec![0.5, 0.5]);
        assert!(matches!(
            dual_objective(&[0.0], &f, &scores, 0.1),
            Err(SolverError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn mu_update_examples() {
        // fixed point of mu = r*(mu; 0.5): real root of 2m^3 - 2m^2 - 2m + 1
        let m = mu_update(p(0.5), 0.0, 1.0, 1);
        assert!((m - 0.4030317167626848).abs() < 1e-9, "got {m}");

        // huge n: the quadratic dominates and mu ~ a
        let m = mu_update(p(0.5), 0.3, 1.0, 1_000_000_000);
        assert!((m - 0.3).abs() < 1e-6);

        // r* in (0, 1) brackets the minimizer in (a, a + 1/rho)
        let m = mu_update(p(0.5), 100.0, 1.0, 1);
        assert!(m > 100.0 && m < 101.0, "got {m}");
    }

    #[test]
    fn mu_update_matches_bisection_oracle() {
        // independent bisection on the first-order condition
        for &(r, a, rho, n) in &[
            (0.3, -1.5, 1.0, 1.0),
            (0.9, 0.2, 2.0, 4.0),
            (0.01, 5.0, 0.5, 10.0),
            (0.5, 0.0, 1.0, 1.0),
        ] {
            let deriv =
                |mu: f64| -transform_score_raw(mu, r) / n + rho * (mu - a);
            let (mut lo, mut hi) = (a, a + 1.0 / (n * rho));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if deriv(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let oracle = 0.5 * (lo + hi);
            let got = mu_update_raw(r, a, rho, n, 50, 1e-12);
            assert!((got - oracle).abs() < 1e-9, "r={r} a={a}: {got} vs {oracle}");
        }
    }

    #[test]
    fn lambda_quadratic_soft_threshold() {
        // d = 1: argmin eps|l| + l v + F l^2 via the closed form
        let sol = quadratic_argmin(&[1.0], &[-3.0], &QuadPenalty::L1(1.0), &[0.0], 1e-12, 1000);
        assert!((sol[0] - 1.0).abs() < 1e-12);

        // |v| <= eps pins the coordinate at zero
        let sol = quadratic_argmin(&[1.0], &[0.8], &QuadPenalty::L1(1.0), &[0.5], 1e-12, 1000);
        assert_eq!(sol[0], 0.0);

        // v = 0 gives the origin
        let sol =
            quadratic_argmin(&[1.0, 0.2, 0.2, 1.0], &[0.0, 0.0], &QuadPenalty::L1(0.5), &[0.3, -0.3], 1e-12, 1000);
        assert_eq!(sol, vec![0.0, 0.0]);
    }

    #[test]
    fn lambda_quadratic_nonnegative() {
        let costs = vec![0.1];
        let sol = quadratic_argmin(
            &[1.0],
            &[-3.0],
            &QuadPenalty::NonNegative(&costs),
            &[0.0],
            1e-12,
            1000,
        );
        assert!((sol[0] - 1.45).abs() < 1e-12);
        // cost dominates: projected to zero
        let sol = quadratic_argmin(
            &[1.0],
            &[1.0],
            &QuadPenalty::NonNegative(&costs),
            &[0.7],
            1e-12,
            1000,
        );
        assert_eq!(sol[0], 0.0);
    }

    #[test]
    fn admm_feasible_scores_give_zero_lambda() {
        // identical score distributions across groups, generous epsilon
        let (f, scores) = msp_fixture(
            vec![0, 0, 1, 1],
            vec![0.3, 0.7, 0.3, 0.7],
        );
        let sol = solve_dual_admm(&f, &scores, 0.1, &AdmmConfig::default()).unwrap();
        assert!(sol.converged);
        let l1: f64 = sol.lambda.iter().map(|l| l.abs()).sum();
        assert!(l1 <= 1e-4, "lambda = {:?}", sol.lambda);
    }

    #[test]
    fn admm_matches_grid_oracle_on_biased_fixture() {
        let (f, scores) = msp_fixture(vec![0, 0, 1, 1], vec![0.9, 0.9, 0.1, 0.1]);
        let cfg = AdmmConfig::default();
        let sol = solve_dual_admm(&f, &scores, 0.05, &cfg).unwrap();
        assert!(sol.converged);
        let grid = brute_force_dual(&f, &scores, 0.05, None, 2e-3).unwrap();
        let obj_grid = dual_objective(&grid, &f, &scores, 0.05).unwrap();
        assert!(
            (sol.objective - obj_grid).abs() <= 1e-3,
            "admm {} vs grid {}",
            sol.objective,
            obj_grid
        );
        // Lemma-style l1 bound
        let l1: f64 = sol.lambda.iter().map(|l| l.abs()).sum();
        assert!(l1 <= lambda_l1_bound(0.05) + 1e-6);
    }

    #[test]
    fn admm_large_epsilon_returns_zero() {
        let (f, scores) = msp_fixture(vec![0, 0, 1, 1], vec![0.9, 0.9, 0.1, 0.1]);
        let sol = solve_dual_admm(&f, &scores, 0.8, &AdmmConfig::default()).unwrap();
        let l1: f64 = sol.lambda.iter().map(|l| l.abs()).sum();
        assert!(l1 <= 1e-6, "lambda = {:?}", sol.lambda);
    }

    #[test]
    fn admm_deterministic() {
        let (f, scores) = msp_fixture(vec![0, 1, 0, 1, 0, 0], vec![0.8, 0.2, 0.9, 0.4, 0.7, 0.6]);
        let cfg = AdmmConfig::default();
        let a = solve_dual_admm(&f, &scores, 0.03, &cfg).unwrap();
        let b = solve_dual_admm(&f, &scores, 0.03, &cfg).unwrap();
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn alt_decomposition_agrees_with_primary() {
        let (f, scores) = msp_fixture(vec![0, 0, 1, 1], vec![0.9, 0.9, 0.1, 0.1]);
        let ds = Dataset::new(
            vec![vec![0.0]; 4],
            Some(vec![0, 0, 1, 1]),
            2,
            Some(vec![0; 4]),
            None,
            None,
        )
        .unwrap();
        let est = estimate_marginals(&ds, 1e-3).unwrap();
        let cfg = AdmmConfig::default();
        let a = solve_dual_admm(&f, &scores, 0.05, &cfg).unwrap();
        let b = solve_dual_admm_alt(&f, &scores, 0.05, &est, &cfg).unwrap();
        assert!(b.converged);
        assert!(
            (a.objective - b.objective).abs() <= 1e-4,
            "{} vs {}",
            a.objective,
            b.objective
        );
        // at convergence the auxiliary variables satisfy lt = M lambda
        assert!(b.primal_residual <= 1e-5);
    }

    #[test]
    fn grid_search_zero_when_feasible() {
        let (f, scores) = msp_fixture(vec![0, 0, 1, 1], vec![0.4, 0.6, 0.5, 0.5]);
        let grid = brute_force_dual(&f, &scores, 0.2, None, 1e-2).unwrap();
        assert!(grid.iter().all(|&l| l == 0.0), "grid = {grid:?}");
    }

    #[test]
    fn grid_search_single_sample_analytic() {
        // n = 1, f = (1), r = 0.9, eps = 0.5: stationarity -r*(l) + 0.5 = 0
        // gives r* = 0.5, i.e. lambda = 0.9/0.5 - 0.1/0.5 = 1.6 exactly
        let f = single_column_features(vec![1.0]);
        let step = 2e-3;
        let grid = brute_force_dual(&f, &[0.9], 0.5, None, step).unwrap();
        assert!((grid[0] - 1.6).abs() <= step + 1e-12, "grid = {grid:?}");
    }

    #[test]
    fn grid_search_mirrored_fixture_is_antisymmetric() {
        let (f, scores) = msp_fixture(vec![0, 0, 1, 1], vec![0.9, 0.8, 0.1, 0.2]);
        let step = 2e-3;
        let grid = brute_force_dual(&f, &scores, 0.02, None, step).unwrap();
        assert!(grid.iter().any(|&l| l != 0.0));
        assert!(
            (grid[0] + grid[1]).abs() <= 2.0 * step + 1e-12,
            "grid = {grid:?}"
        );
    }

    #[test]
    fn grid_search_rejects_high_dimensions() {
        let f = ConstraintFeatures::from_parts(
            vec![1.0, 1.0, 1.0, 1.0],
            1,
            4,
            (0..4).map(crate::constraints::FeatureColumn::Group).collect(),
            FeatureKind::Msp,
        );
        assert!(matches!(
            brute_force_dual(&f, &[0.5], 0.1, None, 0.1),
            Err(SolverError::GridTooLarge(4))
        ));
    }
}
