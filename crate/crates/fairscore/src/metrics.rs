//! Utility and fairness evaluation metrics: Brier score, AUC, accuracy,
//! cross-entropy against the original scores, and the score-level (MSP/GEO)
//! and thresholded (SP/EO) group-gap metrics.

use thiserror::Error;

use crate::transform::bce_raw;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    Empty,
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("both classes must be present to compute AUC")]
    SingleClass,
    #[error("group {0} has no samples")]
    EmptyGroup(usize),
    #[error("label at row {0} is not 0 or 1")]
    BadLabel(usize),
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricsError> {
    if a == 0 {
        return Err(MetricsError::Empty);
    }
    if a != b {
        return Err(MetricsError::LengthMismatch(a, b));
    }
    Ok(())
}

/// Mean squared error between scores and binary outcomes.
pub fn brier_score(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    check_lengths(scores.len(), labels.len())?;
    let mut total = 0.0;
    for (&s, &y) in scores.iter().zip(labels) {
        let d = s - y as f64;
        total += d * d;
    }
    Ok(total / scores.len() as f64)
}

/// Mann-Whitney AUC with ties counted as 1/2, via average ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    check_lengths(scores.len(), labels.len())?;
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| scores[i].partial_cmp(&scores[j]).unwrap());
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // average rank for the tie block [i, j], ranks are 1-based
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    let rank_sum: f64 = labels
        .iter()
        .enumerate()
        .filter(|(_, &y)| y == 1)
        .map(|(k, _)| ranks[k])
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Fraction of samples where `1(score > threshold)` matches the label.
pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64, MetricsError> {
    check_lengths(scores.len(), labels.len())?;
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| ((s > threshold) as u8) == y)
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

fn group_means(values: &[f64], groups: &[usize]) -> Result<(Vec<f64>, f64), MetricsError> {
    check_lengths(values.len(), groups.len())?;
    let k = groups.iter().max().map(|&g| g + 1).unwrap_or(0);
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0usize; k];
    for (&v, &g) in values.iter().zip(groups) {
        sums[g] += v;
        counts[g] += 1;
    }
    if let Some(g) = counts.iter().position(|&c| c == 0) {
        return Err(MetricsError::EmptyGroup(g));
    }
    let overall = values.iter().sum::<f64>() / values.len() as f64;
    let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    Ok((means, overall))
}

/// Largest absolute deviation of a group mean score from the overall mean.
pub fn msp_gap(scores: &[f64], groups: &[usize]) -> Result<f64, MetricsError> {
    let (means, overall) = group_means(scores, groups)?;
    Ok(means.iter().map(|m| (m - overall).abs()).fold(0.0, f64::max))
}

/// GEO gap plus a flag for label strata with missing (group, label) cells,
/// which are skipped rather than treated as errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoGap {
    pub gap: f64,
    pub has_empty_cells: bool,
}

/// Largest absolute deviation of a (group, label)-cell mean score from its
/// label-stratum mean.
pub fn geo_gap(scores: &[f64], groups: &[usize], labels: &[u8]) -> Result<GeoGap, MetricsError> {
    check_lengths(scores.len(), groups.len())?;
    check_lengths(scores.len(), labels.len())?;
    if let Some(row) = labels.iter().position(|&y| y > 1) {
        return Err(MetricsError::BadLabel(row));
    }
    let k = groups.iter().max().map(|&g| g + 1).unwrap_or(0);
    let mut cell_sums = vec![[0.0f64; 2]; k];
    let mut cell_counts = vec![[0usize; 2]; k];
    let mut strat_sums = [0.0f64; 2];
    let mut strat_counts = [0usize; 2];
    for ((&s, &g), &y) in scores.iter().zip(groups).zip(labels) {
        let y = y as usize;
        cell_sums[g][y] += s;
        cell_counts[g][y] += 1;
        strat_sums[y] += s;
        strat_counts[y] += 1;
    }
    let mut gap = 0.0f64;
    let mut has_empty_cells = false;
    for y in 0..2 {
        if strat_counts[y] == 0 {
            has_empty_cells = true;
            continue;
        }
        let strat_mean = strat_sums[y] / strat_counts[y] as f64;
        for g in 0..k {
            if cell_counts[g][y] == 0 {
                has_empty_cells = true;
                continue;
            }
            let cell_mean = cell_sums[g][y] / cell_counts[g][y] as f64;
            gap = gap.max((cell_mean - strat_mean).abs());
        }
    }
    Ok(GeoGap { gap, has_empty_cells })
}

/// MSP gap of thresholded predictions.
pub fn sp_gap(binary_preds: &[u8], groups: &[usize]) -> Result<f64, MetricsError> {
    let as_scores: Vec<f64> = binary_preds.iter().map(|&p| p as f64).collect();
    msp_gap(&as_scores, groups)
}

/// GEO gap of thresholded predictions.
pub fn eo_gap(binary_preds: &[u8], groups: &[usize], labels: &[u8]) -> Result<GeoGap, MetricsError> {
    let as_scores: Vec<f64> = binary_preds.iter().map(|&p| p as f64).collect();
    geo_gap(&as_scores, groups, labels)
}

/// Mean cross-entropy of the transformed scores against the originals,
/// the utility the transform minimizes.
pub fn cross_entropy_utility(
    original_scores: &[f64],
    transformed_scores: &[f64],
) -> Result<f64, MetricsError> {
    check_lengths(original_scores.len(), transformed_scores.len())?;
    let total: f64 = original_scores
        .iter()
        .zip(transformed_scores)
        .map(|(&p, &q)| bce_raw(p, q))
        .sum();
    Ok(total / original_scores.len() as f64)
}

/// Per-group summary used in reports.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub group: usize,
    pub count: usize,
    pub mean_score: f64,
    pub base_rate: Option<f64>,
}

/// Everything the evaluate command reports. Optional entries are filled only
/// when the needed columns are present.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub n: usize,
    pub threshold: Option<f64>,
    pub brier: Option<f64>,
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
    pub cross_entropy: Option<f64>,
    pub msp_gap: Option<f64>,
    pub geo_gap: Option<f64>,
    pub geo_has_empty_cells: bool,
    pub sp_gap: Option<f64>,
    pub eo_gap: Option<f64>,
    pub eo_has_empty_cells: bool,
    pub groups: Vec<GroupStats>,
}

/// Compute every metric supported by the available columns.
pub fn compute_report(
    scores: &[f64],
    labels: Option<&[u8]>,
    groups: Option<&[usize]>,
    original_scores: Option<&[f64]>,
    threshold: Option<f64>,
) -> Result<MetricsReport, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = scores.len();
    let mut report = MetricsReport {
        n,
        threshold,
        brier: None,
        auc: None,
        accuracy: None,
        cross_entropy: None,
        msp_gap: None,
        geo_gap: None,
        geo_has_empty_cells: false,
        sp_gap: None,
        eo_gap: None,
        eo_has_empty_cells: false,
        groups: Vec::new(),
    };
    let preds: Option<Vec<u8>> =
        threshold.map(|t| scores.iter().map(|&s| (s > t) as u8).collect());

    if let Some(y) = labels {
        report.brier = Some(brier_score(scores, y)?);
        report.auc = auc(scores, y).ok();
        if let Some(t) = threshold {
            report.accuracy = Some(accuracy(scores, y, t)?);
        }
    }
    if let Some(orig) = original_scores {
        report.cross_entropy = Some(cross_entropy_utility(orig, scores)?);
    }
    if let Some(g) = groups {
        report.msp_gap = Some(msp_gap(scores, g)?);
        if let Some(p) = &preds {
            report.sp_gap = Some(sp_gap(p, g)?);
        }
        if let Some(y) = labels {
            let gg = geo_gap(scores, g, y)?;
            report.geo_gap = Some(gg.gap);
            report.geo_has_empty_cells = gg.has_empty_cells;
            if let Some(p) = &preds {
                let eg = eo_gap(p, g, y)?;
                report.eo_gap = Some(eg.gap);
                report.eo_has_empty_cells = eg.has_empty_cells;
            }
        }
        let k = g.iter().max().map(|&v| v + 1).unwrap_or(0);
        for grp in 0..k {
            let idx: Vec<usize> = (0..n).filter(|&i| g[i] == grp).collect();
            if idx.is_empty() {
                continue;
            }
            let mean_score = idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64;
            let base_rate = labels.map(|y| {
                idx.iter().map(|&i| y[i] as f64).sum::<f64>() / idx.len() as f64
            });
            report.groups.push(GroupStats {
                group: grp,
                count: idx.len(),
                mean_score,
                base_rate,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{clamp_score, transform_score_raw};

    #[test]
    fn brier_examples() {
        assert_eq!(brier_score(&[1.0, 0.0], &[1, 0]).unwrap(), 0.0);
        assert_eq!(brier_score(&[0.5, 0.5], &[0, 1]).unwrap(), 0.25);
        assert!((brier_score(&[0.8, 0.3], &[1, 0]).unwrap() - 0.065).abs() < 1e-12);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.5, 0.5, 0.5, 0.5], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!((auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(MetricsError::SingleClass)));
    }

    #[test]
    fn msp_gap_examples() {
        assert_eq!(msp_gap(&[0.4, 0.4, 0.4], &[0, 1, 0]).unwrap(), 0.0);
        let gap = msp_gap(&[0.9, 0.9, 0.1, 0.1], &[0, 0, 1, 1]).unwrap();
        assert!((gap - 0.4).abs() < 1e-12);
        assert_eq!(msp_gap(&[0.3, 0.9], &[0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn geo_gap_examples() {
        // scores independent of group within each label
        let g = geo_gap(
            &[0.2, 0.2, 0.8, 0.8],
            &[0, 1, 0, 1],
            &[0, 0, 1, 1],
        )
        .unwrap();
        assert_eq!(g.gap, 0.0);
        assert!(!g.has_empty_cells);

        // single group
        let g = geo_gap(&[0.2, 0.9], &[0, 0], &[0, 1]).unwrap();
        assert_eq!(g.gap, 0.0);

        // 2x2 cell means (0.2, 0.4 | y=0), (0.6, 0.8 | y=1), equal sizes
        let g = geo_gap(
            &[0.2, 0.4, 0.6, 0.8],
            &[0, 1, 0, 1],
            &[0, 0, 1, 1],
        )
        .unwrap();
        assert!((g.gap - 0.1).abs() < 1e-12);

        // an empty cell flips the flag instead of erroring
        let g = geo_gap(&[0.2, 0.4, 0.6], &[0, 1, 0], &[0, 0, 1]).unwrap();
        assert!(g.has_empty_cells);
    }

    #[test]
    fn sp_and_eo_examples() {
        assert_eq!(sp_gap(&[1, 1, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.0);
        let e = eo_gap(&[1, 0, 1, 0], &[0, 1, 0, 1], &[1, 0, 1, 0]).unwrap();
        assert_eq!(e.gap, 0.0);
        let s = sp_gap(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        let r = [0.3, 0.6];
        let same = cross_entropy_utility(&r, &r).unwrap();
        let entropy: f64 = r.iter().map(|&p| crate::transform::bce_raw(p, p)).sum::<f64>() / 2.0;
        assert!((same - entropy).abs() < 1e-15);
        assert!(cross_entropy_utility(&[1.0, 0.0], &[1.0, 0.0]).unwrap() < 1e-5);
        assert!(
            (cross_entropy_utility(&[0.5], &[0.292893]).unwrap() - 0.7872606026033601).abs()
                < 1e-12
        );
    }

    fn kl_bernoulli(p: f64, q: f64) -> f64 {
        let q = clamp_score(q);
        let mut kl = 0.0;
        if p > 0.0 {
            kl += p * (p / q).ln();
        }
        if p < 1.0 {
            kl += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
        }
        kl
    }

    #[test]
    fn kl_identity_and_gibbs() {
        let r = [0.12, 0.5, 0.77, 0.94, 0.31];
        let rp = [0.2, 0.45, 0.8, 0.9, 0.35];
        let ce = cross_entropy_utility(&r, &rp).unwrap();
        let base = cross_entropy_utility(&r, &r).unwrap();
        let kl: f64 = r.iter().zip(&rp).map(|(&p, &q)| kl_bernoulli(p, q)).sum::<f64>() / 5.0;
        assert!((ce - base - kl).abs() < 1e-10);
        assert!(ce >= base);
    }

    #[test]
    fn auc_invariant_under_transform() {
        let scores = [0.1, 0.35, 0.4, 0.8, 0.62, 0.35];
        let labels = [0u8, 1, 0, 1, 1, 0];
        let before = auc(&scores, &labels).unwrap();
        for mu in [-3.0, -0.5, 0.7, 2.0] {
            let transformed: Vec<f64> =
                scores.iter().map(|&r| transform_score_raw(mu, r)).collect();
            let after = auc(&transformed, &labels).unwrap();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn report_fills_available_fields() {
        let scores = [0.2, 0.8, 0.3, 0.7];
        let labels = [0u8, 1, 0, 1];
        let groups = [0usize, 0, 1, 1];
        let rep = compute_report(&scores, Some(&labels), Some(&groups), None, Some(0.5)).unwrap();
        assert_eq!(rep.n, 4);
        assert_eq!(rep.accuracy, Some(1.0));
        assert!(rep.msp_gap.is_some());
        assert_eq!(rep.groups.len(), 2);
        assert_eq!(rep.groups[0].count, 2);
    }

    proptest::proptest! {
        #[test]
        fn gaps_nonnegative_and_zero_on_uniform(
            scores in proptest::collection::vec(0.0f64..=1.0, 4..40),
        ) {
            let groups: Vec<usize> = (0..scores.len()).map(|i| i % 2).collect();
            let gap = msp_gap(&scores, &groups).unwrap();
            proptest::prop_assert!(gap >= 0.0);
            let constant = vec![0.42; scores.len()];
            proptest::prop_assert!(msp_gap(&constant, &groups).unwrap() < 1e-12);
        }
    }
}
