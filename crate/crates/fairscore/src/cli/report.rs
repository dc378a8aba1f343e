//! Plain-text report rendering with a fixed key order, so reports diff
//! cleanly between runs.

use crate::metrics::MetricsReport;

use super::csv_io::fmt_float;

fn line(out: &mut String, indent: usize, key: &str, value: impl AsRef<str>) {
    out.push_str(&"  ".repeat(indent));
    out.push_str(key);
    out.push_str(" = ");
    out.push_str(value.as_ref());
    out.push('\n');
}

fn section(out: &mut String, indent: usize, name: &str) {
    out.push_str(&"  ".repeat(indent));
    out.push_str(name);
    out.push_str(":\n");
}

pub fn render_report(report: &MetricsReport, group_names: &[String]) -> String {
    let mut out = String::new();
    out.push_str("report:\n");
    line(&mut out, 1, "n", report.n.to_string());
    if let Some(t) = report.threshold {
        line(&mut out, 1, "threshold", fmt_float(t));
    }
    section(&mut out, 1, "utility");
    if let Some(v) = report.brier {
        line(&mut out, 2, "brier", fmt_float(v));
    }
    if let Some(v) = report.auc {
        line(&mut out, 2, "auc", fmt_float(v));
    }
    if let Some(v) = report.accuracy {
        line(&mut out, 2, "accuracy", fmt_float(v));
    }
    if let Some(v) = report.cross_entropy {
        line(&mut out, 2, "cross_entropy", fmt_float(v));
    }
    section(&mut out, 1, "fairness");
    if let Some(v) = report.msp_gap {
        line(&mut out, 2, "msp_gap", fmt_float(v));
    }
    if let Some(v) = report.geo_gap {
        line(&mut out, 2, "geo_gap", fmt_float(v));
        line(&mut out, 2, "geo_empty_cells", report.geo_has_empty_cells.to_string());
    }
    if let Some(v) = report.sp_gap {
        line(&mut out, 2, "sp_gap", fmt_float(v));
    }
    if let Some(v) = report.eo_gap {
        line(&mut out, 2, "eo_gap", fmt_float(v));
        line(&mut out, 2, "eo_empty_cells", report.eo_has_empty_cells.to_string());
    }
    if !report.groups.is_empty() {
        section(&mut out, 1, "groups");
        for stats in &report.groups {
            let name = group_names
                .get(stats.group)
                .cloned()
                .unwrap_or_else(|| stats.group.to_string());
            section(&mut out, 2, &name);
            line(&mut out, 3, "count", stats.count.to_string());
            line(&mut out, 3, "mean_score", fmt_float(stats.mean_score));
            if let Some(b) = stats.base_rate {
                line(&mut out, 3, "base_rate", fmt_float(b));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::compute_report;

    #[test]
    fn stable_rendering() {
        let scores = [0.2, 0.8, 0.3, 0.7];
        let labels = [0u8, 1, 0, 1];
        let groups = [0usize, 0, 1, 1];
        let rep = compute_report(&scores, Some(&labels), Some(&groups), None, Some(0.5)).unwrap();
        let names = vec!["a".to_string(), "b".to_string()];
        let r1 = render_report(&rep, &names);
        let r2 = render_report(&rep, &names);
        assert_eq!(r1, r2);
        assert!(r1.starts_with("report:\n  n = 4\n"));
        assert!(r1.contains("  fairness:\n"));
        assert!(r1.contains("    a:\n"));
    }
}
