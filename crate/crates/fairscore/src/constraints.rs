//! Fairness-constraint machinery: empirical probability estimation with a
//! truncation floor, and per-sample constraint feature vectors `f(x)` such
//! that the multiplier decomposes as `mu(x) = lambda' f(x)`.

use thiserror::Error;

use crate::data::Dataset;

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has no protected column")]
    MissingProtected,
    #[error("dataset has no label column")]
    MissingLabels,
    #[error("truncation floor {delta} must lie in (0, 1/{categories})")]
    InvalidDelta { delta: f64, categories: usize },
    #[error("unknown group id {0}")]
    UnknownGroup(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("group posterior row {row} sums to {sum}, expected 1")]
    PosteriorNotNormalized { row: usize, sum: f64 },
    #[error("score {value} at row {row} is outside [0, 1]")]
    ScoreOutOfRange { value: f64, row: usize },
    #[error("event marginal at constraint {l}, event {j} is not in (0, 1]")]
    BadEventMarginal { l: usize, j: usize },
    #[error("event posterior at constraint {l}, event {j}, row {row} is outside [0, 1]")]
    BadEventPosterior { l: usize, j: usize, row: usize },
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
}

/// Which fairness criterion is being enforced.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    /// Group means of transformed scores within `epsilon` of the overall mean.
    MeanScoreParity,
    /// Group means within `epsilon` of the stratum mean, conditioned on the label.
    GeneralizedEqualizedOdds,
    /// Arbitrary linear inequalities on event-conditional mean scores.
    GeneralLinear(GeneralConstraint),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub kind: ConstraintKind,
    pub epsilon: f64,
}

impl ConstraintSpec {
    pub fn new(kind: ConstraintKind, epsilon: f64) -> Result<Self, ConstraintError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(ConstraintError::BadEpsilon(epsilon));
        }
        Ok(Self { kind, epsilon })
    }
}

/// `L` linear constraints `sum_j b[l][j] E[r' | E_lj] <= c[l]`, supplied with
/// per-sample event posteriors `Pr(E_lj | x_i)` and event marginals `Pr(E_lj)`.
/// Event probabilities for arbitrary events are the caller's responsibility.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralConstraint {
    /// `b[l][j]` coefficients, `L x J`.
    pub coefficients: Vec<Vec<f64>>,
    /// Right-hand bounds `c[l]`, length `L`.
    pub bounds: Vec<f64>,
    /// `Pr(E_lj)`, `L x J`, each in `(0, 1]`.
    pub marginals: Vec<Vec<f64>>,
    /// `Pr(E_lj | x_i)`, indexed `[l][j][i]`, each in `[0, 1]`.
    pub posteriors: Vec<Vec<Vec<f64>>>,
}

/// Empirical group / label marginals, floored at `delta` and renormalized.
///
/// Flooring keeps every stored probability at least `delta`; the remaining
/// mass of each distribution is rescaled so it still sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityEstimates {
    pub p_a: Vec<f64>,
    pub p_y: [f64; 2],
    /// `p_a_given_y[y][a]`
    pub p_a_given_y: [Vec<f64>; 2],
    pub delta: f64,
}

impl ProbabilityEstimates {
    pub fn group_count(&self) -> usize {
        self.p_a.len()
    }
}

/// Floor every entry at `delta`, then scale the un-floored entries down so the
/// distribution sums to 1 again. Repeats in the rare case rescaling pushes an
/// entry below the floor. Requires `delta < 1/len`.
pub(crate) fn floor_and_renormalize(probs: &mut [f64], delta: f64) {
    let k = probs.len();
    debug_assert!(delta > 0.0 && delta * (k as f64) < 1.0);
    let mut floored = vec![false; k];
    loop {
        let mut changed = false;
        for (p, fl) in probs.iter_mut().zip(floored.iter_mut()) {
            if !*fl && *p < delta {
                *p = delta;
                *fl = true;
                changed = true;
            }
        }
        let floored_mass: f64 = floored.iter().filter(|&&f| f).count() as f64 * delta;
        let free_mass: f64 = probs
            .iter()
            .zip(&floored)
            .filter(|(_, &f)| !f)
            .map(|(p, _)| *p)
            .sum();
        if free_mass > 0.0 {
            let scale = (1.0 - floored_mass) / free_mass;
            for (p, &f) in probs.iter_mut().zip(&floored) {
                if !f {
                    *p *= scale;
                }
            }
        }
        if !changed {
            break;
        }
        // re-check: rescaling may have pushed an un-floored entry below delta
        if probs.iter().zip(&floored).all(|(p, &f)| f || *p >= delta) {
            break;
        }
    }
}

fn counts_to_probs(counts: &[f64], total: f64, delta: f64) -> Vec<f64> {
    let mut probs: Vec<f64> = if total > 0.0 {
        counts.iter().map(|c| c / total).collect()
    } else {
        vec![1.0 / counts.len() as f64; counts.len()]
    };
    floor_and_renormalize(&mut probs, delta);
    probs
}

/// Empirical `p_A`, `p_Y` and `p_{A|Y}` from a labeled dataset, floored at `delta`.
///
/// A label stratum with no samples falls back to the marginal group
/// distribution for its conditional.
pub fn estimate_marginals(
    dataset: &Dataset,
    delta: f64,
) -> Result<ProbabilityEstimates, ConstraintError> {
    if dataset.is_empty() {
        return Err(ConstraintError::EmptyDataset);
    }
    let protected = dataset.protected().ok_or(ConstraintError::MissingProtected)?;
    let labels = dataset.labels().ok_or(ConstraintError::MissingLabels)?;
    let k = dataset.group_count();
    let categories = k.max(2);
    if !(delta > 0.0) || delta >= 1.0 / categories as f64 {
        return Err(ConstraintError::InvalidDelta { delta, categories });
    }

    let n = dataset.len() as f64;
    let mut group_counts = vec![0.0f64; k];
    let mut label_counts = [0.0f64; 2];
    let mut cell_counts = [vec![0.0f64; k], vec![0.0f64; k]];
    for (&a, &y) in protected.iter().zip(labels) {
        group_counts[a] += 1.0;
        label_counts[y as usize] += 1.0;
        cell_counts[y as usize][a] += 1.0;
    }

    let p_a = counts_to_probs(&group_counts, n, delta);
    let mut p_y = [label_counts[0] / n, label_counts[1] / n];
    floor_and_renormalize(&mut p_y, delta);
    let p_a_given_y = [0usize, 1usize].map(|y| {
        if label_counts[y] > 0.0 {
            counts_to_probs(&cell_counts[y], label_counts[y], delta)
        } else {
            p_a.clone()
        }
    });

    Ok(ProbabilityEstimates { p_a, p_y, p_a_given_y, delta })
}

/// Column identity of one dual coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureColumn {
    /// MSP: one coordinate per group.
    Group(usize),
    /// GEO: one coordinate per (group, label) pair.
    GroupLabel { group: usize, y: u8 },
    /// General linear: one coordinate per constraint row.
    Constraint(usize),
}

/// How the dual penalizes / restricts `lambda` for these features.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    /// Symmetric two-sided constraints folded to a signed `lambda` with an
    /// `epsilon * ||lambda||_1` penalty.
    Msp,
    /// Same folding, one block per label value.
    Geo,
    /// One-sided constraints: `lambda >= 0` with linear cost `c' lambda`.
    General { costs: Vec<f64> },
}

/// The `n x d` matrix with rows `f(x_i)`.
#[derive(Debug, Clone)]
pub struct ConstraintFeatures {
    data: Vec<f64>,
    n: usize,
    d: usize,
    columns: Vec<FeatureColumn>,
    kind: FeatureKind,
}

impl ConstraintFeatures {
    #[cfg(test)]
    pub(crate) fn from_parts(
        data: Vec<f64>,
        n: usize,
        d: usize,
        columns: Vec<FeatureColumn>,
        kind: FeatureKind,
    ) -> Self {
        debug_assert_eq!(data.len(), n * d);
        debug_assert_eq!(columns.len(), d);
        Self { data, n, d, columns, kind }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn columns(&self) -> &[FeatureColumn] {
        &self.columns
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    /// `mu_i = lambda' f(x_i)` for every sample.
    pub fn multipliers(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(lambda).map(|(f, l)| f * l).sum())
            .collect()
    }
}

/// Group information available when building features: either the observed
/// group ids, or per-sample posterior group probabilities when the protected
/// attribute is not available.
#[derive(Debug, Clone, Copy)]
pub enum GroupInfo<'a> {
    Observed(&'a [usize]),
    Posterior(&'a [Vec<f64>]),
}

/// As [`GroupInfo`], but conditioned on each label value for the GEO case.
#[derive(Debug, Clone, Copy)]
pub enum GeoGroupInfo<'a> {
    Observed(&'a [usize]),
    Posterior { y0: &'a [Vec<f64>], y1: &'a [Vec<f64>] },
}

fn check_posterior_rows(
    rows: &[Vec<f64>],
    k: usize,
    normalized: bool,
) -> Result<(), ConstraintError> {
    for (row, p) in rows.iter().enumerate() {
        if p.len() != k {
            return Err(ConstraintError::DimensionMismatch(format!(
                "posterior row {row} has {} entries, expected {k}",
                p.len()
            )));
        }
        if normalized {
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(ConstraintError::PosteriorNotNormalized { row, sum });
            }
        }
    }
    Ok(())
}

/// MSP features: `f_a(x_i) = 1(A_i = a) / p_A(a) - 1` for observed groups,
/// with the indicator replaced by `p(a | x_i)` when groups are inferred.
pub fn build_features_msp(
    groups: GroupInfo<'_>,
    est: &ProbabilityEstimates,
) -> Result<ConstraintFeatures, ConstraintError> {
    let k = est.group_count();
    let n = match groups {
        GroupInfo::Observed(ids) => {
            if let Some(&bad) = ids.iter().find(|&&a| a >= k) {
                return Err(ConstraintError::UnknownGroup(bad));
            }
            ids.len()
        }
        GroupInfo::Posterior(rows) => {
            check_posterior_rows(rows, k, true)?;
            rows.len()
        }
    };
    if n == 0 {
        return Err(ConstraintError::EmptyDataset);
    }
    let mut data = vec![0.0; n * k];
    for i in 0..n {
        for a in 0..k {
            let mass = match groups {
                GroupInfo::Observed(ids) => (ids[i] == a) as u8 as f64,
                GroupInfo::Posterior(rows) => rows[i][a],
            };
            data[i * k + a] = mass / est.p_a[a] - 1.0;
        }
    }
    Ok(ConstraintFeatures {
        data,
        n,
        d: k,
        columns: (0..k).map(FeatureColumn::Group).collect(),
        kind: FeatureKind::Msp,
    })
}

/// GEO features, one block per label value, ordered `y = 0` block then
/// `y = 1` block:
///
/// ```text
/// f_(a,0)(x_i) = (1 - r_i) / p_Y(0) * (1(A_i = a) / p_{A|Y}(a|0) - 1)
/// f_(a,1)(x_i) =       r_i / p_Y(1) * (1(A_i = a) / p_{A|Y}(a|1) - 1)
/// ```
///
/// The score itself stands in for `p(Y = 1 | x)`, so labels are never needed.
pub fn build_features_geo(
    scores: &[f64],
    groups: GeoGroupInfo<'_>,
    est: &ProbabilityEstimates,
) -> Result<ConstraintFeatures, ConstraintError> {
    let k = est.group_count();
    let n = scores.len();
    if n == 0 {
        return Err(ConstraintError::EmptyDataset);
    }
    if let Some((row, &value)) = scores
        .iter()
        .enumerate()
        .find(|(_, &s)| s.is_nan() || !(0.0..=1.0).contains(&s))
    {
        return Err(ConstraintError::ScoreOutOfRange { value, row });
    }
    match groups {
        GeoGroupInfo::Observed(ids) => {
            if ids.len() != n {
                return Err(ConstraintError::DimensionMismatch(format!(
                    "{} group ids for {n} scores",
                    ids.len()
                )));
            }
            if let Some(&bad) = ids.iter().find(|&&a| a >= k) {
                return Err(ConstraintError::UnknownGroup(bad));
            }
        }
        GeoGroupInfo::Posterior { y0, y1 } => {
            if y0.len() != n || y1.len() != n {
                return Err(ConstraintError::DimensionMismatch(format!(
                    "posteriors have {} / {} rows for {n} scores",
                    y0.len(),
                    y1.len()
                )));
            }
            check_posterior_rows(y0, k, true)?;
            check_posterior_rows(y1, k, true)?;
        }
    }

    let d = 2 * k;
    let mut data = vec![0.0; n * d];
    for (i, &r) in scores.iter().enumerate() {
        for y in 0..2usize {
            let weight = if y == 0 {
                (1.0 - r) / est.p_y[0]
            } else {
                r / est.p_y[1]
            };
            for a in 0..k {
                let mass = match groups {
                    GeoGroupInfo::Observed(ids) => (ids[i] == a) as u8 as f64,
                    GeoGroupInfo::Posterior { y0, y1 } => {
                        if y == 0 {
                            y0[i][a]
                        } else {
                            y1[i][a]
                        }
                    }
                };
                data[i * d + y * k + a] = weight * (mass / est.p_a_given_y[y][a] - 1.0);
            }
        }
    }
    let mut columns = Vec::with_capacity(d);
    for y in 0..2u8 {
        for a in 0..k {
            columns.push(FeatureColumn::GroupLabel { group: a, y });
        }
    }
    Ok(ConstraintFeatures { data, n, d, columns, kind: FeatureKind::Geo })
}

/// General linear features `f_l(x_i) = sum_j b[l][j] Pr(E_lj|x_i) / Pr(E_lj)`.
/// The resulting dual keeps `lambda >= 0` with linear cost `c' lambda`, which
/// the solver reads off [`FeatureKind::General`].
pub fn build_features_general(
    spec: &GeneralConstraint,
) -> Result<ConstraintFeatures, ConstraintError> {
    let l_count = spec.coefficients.len();
    if l_count == 0
        || spec.bounds.len() != l_count
        || spec.marginals.len() != l_count
        || spec.posteriors.len() != l_count
    {
        return Err(ConstraintError::DimensionMismatch(format!(
            "coefficients/bounds/marginals/posteriors have lengths {}/{}/{}/{}",
            l_count,
            spec.bounds.len(),
            spec.marginals.len(),
            spec.posteriors.len()
        )));
    }
    let j_count = spec.coefficients[0].len();
    let n = spec
        .posteriors
        .first()
        .and_then(|rows| rows.first())
        .map(|v| v.len())
        .unwrap_or(0);
    if n == 0 || j_count == 0 {
        return Err(ConstraintError::EmptyDataset);
    }
    for l in 0..l_count {
        if spec.coefficients[l].len() != j_count
            || spec.marginals[l].len() != j_count
            || spec.posteriors[l].len() != j_count
        {
            return Err(ConstraintError::DimensionMismatch(format!(
                "constraint {l} does not have {j_count} events"
            )));
        }
        for j in 0..j_count {
            let m = spec.marginals[l][j];
            if !(m > 0.0 && m <= 1.0) {
                return Err(ConstraintError::BadEventMarginal { l, j });
            }
            if spec.posteriors[l][j].len() != n {
                return Err(ConstraintError::DimensionMismatch(format!(
                    "posterior ({l}, {j}) has {} rows, expected {n}",
                    spec.posteriors[l][j].len()
                )));
            }
            for (row, &p) in spec.posteriors[l][j].iter().enumerate() {
                if p.is_nan() || !(0.0..=1.0).contains(&p) {
                    return Err(ConstraintError::BadEventPosterior { l, j, row });
                }
            }
        }
    }

    let mut data = vec![0.0; n * l_count];
    for i in 0..n {
        for l in 0..l_count {
            let mut v = 0.0;
            for j in 0..j_count {
                v += spec.coefficients[l][j] * spec.posteriors[l][j][i] / spec.marginals[l][j];
            }
            data[i * l_count + l] = v;
        }
    }
    Ok(ConstraintFeatures {
        data,
        n,
        d: l_count,
        columns: (0..l_count).map(FeatureColumn::Constraint).collect(),
        kind: FeatureKind::General { costs: spec.bounds.clone() },
    })
}
