//! Evaluation metrics: average precision, ROC AUC, confusion counts, and
//! calendar-month breakdowns.
//!
//! AUC is computed in its rank (Mann–Whitney) form, where tied pairs count
//! one half — identical to the trapezoidal area under the ROC curve. AP is
//! the non-interpolated mean of precision at the rank of each positive,
//! with score ties broken by stable original order.

use std::collections::BTreeMap;

use chrono::DateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {scores} scores vs {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no positive labels: average precision is undefined")]
    NoPositives,
    #[error("single-class input: both classes are required")]
    SingleClass,
    #[error("non-finite score at index {index}")]
    NonFiniteScore { index: usize },
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore { index });
    }
    Ok(())
}

/// Non-interpolated average precision: rank by score descending (stable on
/// ties), then average `precision@rank` over the ranks of the positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(MetricsError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort: equal scores keep original order
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));
    let mut tp = 0usize;
    let mut sum = 0.0;
    for (rank0, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
            sum += tp as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / n_pos as f64)
}

/// ROC AUC as the Mann–Whitney statistic,
/// `(concordant + 0.5 · tied) / (n_pos · n_neg)`, computed via average
/// ranks in O(n log n).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));
    // average 1-based ranks within tied score groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        for &k in &order[i..j] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Confusion counts at a threshold: predicted positive iff
/// `score >= threshold`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion, MetricsError> {
    check_inputs(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// One scored, labeled transaction, as consumed by the report builders.
#[derive(Clone, Copy, Debug)]
pub struct Scored {
    pub timestamp: i64,
    pub score: f64,
    pub label: bool,
}

/// Per-month metrics. Months missing a class report counts with undefined
/// (absent) AP/AUC rather than failing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonthEntry {
    pub n_pos: usize,
    pub n_neg: usize,
    pub ap: Option<f64>,
    pub auc: Option<f64>,
}

fn month_key(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.format("%Y-%m").to_string())
        .unwrap_or_else(|| "invalid-ts".to_string())
}

/// Bucket by calendar month (UTC) and compute AP/AUC per bucket where both
/// classes are present. Never fails; degenerate buckets carry counts only.
pub fn monthly_report(scored: &[Scored]) -> BTreeMap<String, MonthEntry> {
    let mut buckets: BTreeMap<String, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for s in scored {
        let b = buckets.entry(month_key(s.timestamp)).or_default();
        b.0.push(s.score);
        b.1.push(s.label);
    }
    buckets
        .into_iter()
        .map(|(month, (scores, labels))| {
            let n_pos = labels.iter().filter(|&&l| l).count();
            let n_neg = labels.len() - n_pos;
            let entry = MonthEntry {
                n_pos,
                n_neg,
                ap: average_precision(&scores, &labels).ok(),
                auc: roc_auc(&scores, &labels).ok(),
            };
            (month, entry)
        })
        .collect()
}

/// Full evaluation report: global AP/AUC/confusion plus the per-month
/// breakdown.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_pos: usize,
    pub n_neg: usize,
    pub ap: f64,
    pub auc: f64,
    pub threshold: f64,
    pub confusion: Confusion,
    pub monthly: BTreeMap<String, MonthEntry>,
}

/// Build a [`MetricsReport`]. Errors if the input is empty or single-class
/// (global AP/AUC would be undefined); per-month degeneracy is tolerated.
pub fn metrics_report(scored: &[Scored], threshold: f64) -> Result<MetricsReport, MetricsError> {
    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();
    let labels: Vec<bool> = scored.iter().map(|s| s.label).collect();
    let ap = average_precision(&scores, &labels)?;
    let auc = roc_auc(&scores, &labels)?;
    let confusion = confusion_at(&scores, &labels, threshold)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    Ok(MetricsReport {
        n_pos,
        n_neg: labels.len() - n_pos,
        ap,
        auc,
        threshold,
        confusion,
        monthly: monthly_report(scored),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".to_string())
}

/// Render one report as an aligned plain-text table.
pub fn render_report(name: &str, r: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "model: {name}\n\
         n_pos: {}  n_neg: {}\n\
         AP:  {:.4}\n\
         AUC: {:.4}\n\
         confusion @ {:.2}: tp={} fp={} tn={} fn={}\n",
        r.n_pos, r.n_neg, r.ap, r.auc, r.threshold, r.confusion.tp, r.confusion.fp, r.confusion.tn,
        r.confusion.fn_
    ));
    if !r.monthly.is_empty() {
        out.push_str(&render_comparison(&[(name.to_string(), r.clone())]));
    }
    out
}

/// Render several models side by side: one row per model, AP and AUC
/// columns per calendar month plus overall.
pub fn render_comparison(rows: &[(String, MetricsReport)]) -> String {
    let mut months: Vec<String> = Vec::new();
    for (_, r) in rows {
        for m in r.monthly.keys() {
            if !months.contains(m) {
                months.push(m.clone());
            }
        }
    }
    months.sort();

    let mut header: Vec<String> = vec!["model".to_string()];
    for m in &months {
        header.push(format!("{m} AP"));
        header.push(format!("{m} AUC"));
    }
    header.push("overall AP".to_string());
    header.push("overall AUC".to_string());

    let mut body: Vec<Vec<String>> = Vec::new();
    for (name, r) in rows {
        let mut row = vec![name.clone()];
        for m in &months {
            let e = r.monthly.get(m);
            row.push(fmt_opt(e.and_then(|e| e.ap)));
            row.push(fmt_opt(e.and_then(|e| e.auc)));
        }
        row.push(format!("{:.4}", r.ap));
        row.push(format!("{:.4}", r.auc));
        body.push(row);
    }

    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let render_row = |cells: &[String]| {
        let mut line = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<w$}"));
        }
        line.trim_end().to_string() + "\n"
    };
    let mut out = render_row(&header);
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &body {
        out.push_str(&render_row(row));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SeededRng;

    #[test]
    fn ap_hand_example() {
        let ap = average_precision(&[0.9, 0.8, 0.1], &[true, false, true]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ap_perfect_and_all_positive() {
        let ap = average_precision(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap();
        assert_eq!(ap, 1.0);
        let ap = average_precision(&[0.3, 0.2, 0.9], &[true, true, true]).unwrap();
        assert_eq!(ap, 1.0);
    }

    #[test]
    fn ap_requires_a_positive() {
        assert!(matches!(
            average_precision(&[0.5], &[false]),
            Err(MetricsError::NoPositives)
        ));
    }

    #[test]
    fn auc_hand_example() {
        let auc = roc_auc(&[0.9, 0.8, 0.1], &[true, false, true]).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auc_perfect_and_all_tied() {
        let auc = roc_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap();
        assert_eq!(auc, 1.0);
        let auc = roc_auc(&[0.5, 0.5, 0.5], &[true, false, true]).unwrap();
        assert!((auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn auc_single_class_errors() {
        assert!(matches!(roc_auc(&[0.5, 0.2], &[true, true]), Err(MetricsError::SingleClass)));
    }

    #[test]
    fn auc_complement_without_ties() {
        let mut rng = SeededRng::new(3);
        for _ in 0..20 {
            let n = 30;
            let scores: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.below(2) == 1).collect();
            if !labels.contains(&true) || !labels.contains(&false) {
                continue;
            }
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = roc_auc(&scores, &labels).unwrap();
            let b = roc_auc(&neg, &labels).unwrap();
            assert!((a + b - 1.0).abs() < 1e-12);
        }
    }

    /// O(n^2) pairwise oracle for AUC.
    fn auc_pairwise(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_matches_pairwise_oracle() {
        let mut rng = SeededRng::new(17);
        for round in 0..25 {
            let n = 2 + rng.below(60) as usize;
            // coarse scores force ties in half the rounds
            let coarse = round % 2 == 0;
            let scores: Vec<f64> = (0..n)
                .map(|_| if coarse { rng.below(5) as f64 } else { rng.unit() })
                .collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.below(2) == 1).collect();
            labels[0] = true;
            if n > 1 {
                labels[1] = false;
            } else {
                continue;
            }
            let fast = roc_auc(&scores, &labels).unwrap();
            let slow = auc_pairwise(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12, "round {round}: {fast} vs {slow}");
        }
    }

    #[test]
    fn monotone_transform_invariance() {
        let mut rng = SeededRng::new(23);
        for _ in 0..20 {
            let n = 3 + rng.below(40) as usize;
            let scores: Vec<f64> = (0..n).map(|_| rng.range_f64(-2.0, 2.0)).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.below(3) == 0).collect();
            labels[0] = true;
            labels[1] = false;
            // strictly increasing map: a*exp(x) + b*x^3 + c*x with a,b,c > 0
            let (a, b, c) = (rng.range_f64(0.1, 2.0), rng.range_f64(0.1, 2.0), rng.range_f64(0.1, 2.0));
            let mapped: Vec<f64> = scores.iter().map(|&x| a * x.exp() + b * x.powi(3) + c * x).collect();
            let ap0 = average_precision(&scores, &labels).unwrap();
            let ap1 = average_precision(&mapped, &labels).unwrap();
            let auc0 = roc_auc(&scores, &labels).unwrap();
            let auc1 = roc_auc(&mapped, &labels).unwrap();
            assert!((ap0 - ap1).abs() < 1e-12);
            assert!((auc0 - auc1).abs() < 1e-12);
        }
    }

    #[test]
    fn confusion_thresholds() {
        let scores = [0.9, 0.2];
        let labels = [true, false];
        let c = confusion_at(&scores, &labels, 0.5).unwrap();
        assert_eq!(c, Confusion { tp: 1, fp: 0, tn: 1, fn_: 0 });
        let c = confusion_at(&scores, &labels, 0.0).unwrap();
        assert_eq!((c.fp, c.fn_), (1, 0));
        let c = confusion_at(&scores, &labels, 1.1).unwrap();
        assert_eq!((c.tp, c.tn), (0, 1));
        assert!(confusion_at(&scores, &labels[..1], 0.5).is_err());
    }

    #[test]
    fn monthly_single_bucket_equals_global() {
        // all July 2026
        let base = 1_783_000_000; // 2026-07-02T...
        let scored = vec![
            Scored { timestamp: base, score: 0.9, label: true },
            Scored { timestamp: base + 1000, score: 0.8, label: false },
            Scored { timestamp: base + 2000, score: 0.1, label: true },
        ];
        let m = monthly_report(&scored);
        assert_eq!(m.len(), 1);
        let entry = m.values().next().unwrap();
        assert_eq!(entry.ap.unwrap(), average_precision(&[0.9, 0.8, 0.1], &[true, false, true]).unwrap());
        assert_eq!(entry.auc.unwrap(), 0.5);
    }

    #[test]
    fn monthly_empty_and_degenerate() {
        assert!(monthly_report(&[]).is_empty());
        // one month with only negatives: counts present, metrics undefined
        let scored = vec![Scored { timestamp: 1_783_000_000, score: 0.4, label: false }];
        let m = monthly_report(&scored);
        let entry = m.values().next().unwrap();
        assert_eq!((entry.n_pos, entry.n_neg), (0, 1));
        assert!(entry.ap.is_none() && entry.auc.is_none());
    }

    #[test]
    fn monthly_identical_multisets_match() {
        let july = 1_783_000_000; // 2026-07
        let august = july + 31 * 86_400;
        let mut scored = Vec::new();
        for (i, &(s, l)) in [(0.9, true), (0.3, false), (0.7, true), (0.2, false)].iter().enumerate() {
            scored.push(Scored { timestamp: july + i as i64, score: s, label: l });
            scored.push(Scored { timestamp: august + i as i64, score: s, label: l });
        }
        let m = monthly_report(&scored);
        assert_eq!(m.len(), 2);
        let entries: Vec<&MonthEntry> = m.values().collect();
        assert_eq!(entries[0], entries[1]);
    }

    #[test]
    fn report_and_rendering() {
        let base = 1_783_000_000;
        let scored = vec![
            Scored { timestamp: base, score: 0.9, label: true },
            Scored { timestamp: base + 1, score: 0.2, label: false },
        ];
        let r = metrics_report(&scored, 0.5).unwrap();
        assert_eq!(r.ap, 1.0);
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.confusion.tp, 1);
        let text = render_report("tgtn", &r);
        assert!(text.contains("AP:  1.0000"));
        let table = render_comparison(&[("tgtn".to_string(), r)]);
        assert!(table.contains("2026-07 AP") && table.contains("overall AUC"), "{table}");
        // single-class input errors
        let bad = vec![Scored { timestamp: base, score: 0.9, label: true }];
        assert!(metrics_report(&bad, 0.5).is_err());
    }
}
