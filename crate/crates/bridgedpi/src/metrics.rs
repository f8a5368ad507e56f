//! Binary-classification metrics: ROC-AUC plus thresholded accuracy,
//! precision, recall, and F1.
//!
//! The AUC is computed from mid-ranks (the Mann–Whitney form): sort by
//! score, give tied scores the average of the rank positions they span, and
//! count how much of the positive mass outranks the negative mass. That is
//! exactly the probability a random positive scores above a random negative
//! with ties worth half, and it matches the trapezoidal area under the ROC
//! curve when tied scores are grouped into single sweep steps.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("empty input")]
    Empty,
    #[error("label at index {index} is {value}, expected 0 or 1")]
    BadLabel { index: usize, value: u8 },
    #[error("score at index {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error("ROC-AUC needs both classes, got only label {only}")]
    SingleClass { only: u8 },
}

fn validate(scores: &[f64], labels: &[u8]) -> Result<(), MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (index, &value) in labels.iter().enumerate() {
        if value > 1 {
            return Err(MetricsError::BadLabel { index, value });
        }
    }
    for (index, &s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(MetricsError::NonFiniteScore { index });
        }
    }
    Ok(())
}

/// Area under the ROC curve via mid-ranks. Ties get half credit. Errors if
/// either class is absent (the curve degenerates to a point).
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricsError> {
    validate(scores, labels)?;
    let n = scores.len();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass {
            only: if positives == 0 { 0 } else { 1 },
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    // finiteness was validated, so the comparator is total
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group spanning positions i+1..=j gets
        // the average rank of the group
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] == 1 {
                positive_rank_sum += mid_rank;
            }
        }
        i = j;
    }

    let p = positives as f64;
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

/// Thresholded metrics plus (when both classes are present) the AUC.
/// Degenerate denominators produce 0.0 with the corresponding flag set, so
/// downstream reports never divide by zero silently.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub auc: f64,
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// false when the input was single-class and `auc` is NaN
    pub auc_defined: bool,
    /// true when TP+FP = 0 (nothing predicted positive)
    pub degenerate_precision: bool,
    /// true when TP+FN = 0 (no positives present)
    pub degenerate_recall: bool,
}

/// Counts and ratios at a decision threshold; prediction rule is
/// `score >= threshold`. The `auc` field is left NaN here — use [`evaluate`]
/// for the combined report.
pub fn threshold_metrics(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<EvalReport, MetricsError> {
    validate(scores, labels)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = scores.len();
    let degenerate_precision = tp + fp == 0;
    let degenerate_recall = tp + fn_ == 0;
    let precision = if degenerate_precision {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if degenerate_recall {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(EvalReport {
        n,
        auc: f64::NAN,
        acc: (tp + tn) as f64 / n as f64,
        precision,
        recall,
        f1,
        tp,
        fp,
        tn,
        fn_,
        auc_defined: false,
        degenerate_precision,
        degenerate_recall,
    })
}

/// Full report: threshold metrics at `threshold` plus AUC when both classes
/// are present. A single-class input is not an error here — strata of a test
/// set can legitimately be one-sided — it just leaves `auc_defined` false.
pub fn evaluate(scores: &[f64], labels: &[u8], threshold: f64) -> Result<EvalReport, MetricsError> {
    let mut report = threshold_metrics(scores, labels, threshold)?;
    match roc_auc(scores, labels) {
        Ok(auc) => {
            report.auc = auc;
            report.auc_defined = true;
        }
        Err(MetricsError::SingleClass { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(report)
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "n,auc,acc,precision,recall,f1,tp,fp,tn,fn";

    pub fn to_csv_row(&self) -> String {
        let auc = if self.auc_defined {
            format!("{:.6}", self.auc)
        } else {
            "NA".to_string()
        };
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            self.n, auc, self.acc, self.precision, self.recall, self.f1, self.tp, self.fp,
            self.tn, self.fn_
        )
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let auc = if self.auc_defined {
            format!("{:.4}", self.auc)
        } else {
            "  NA ".to_string()
        };
        writeln!(f, "  n = {}  (TP {} / FP {} / TN {} / FN {})", self.n, self.tp, self.fp, self.tn, self.fn_)?;
        write!(
            f,
            "  AUC {auc}  ACC {:.4}  P {:.4}{}  R {:.4}{}  F1 {:.4}",
            self.acc,
            self.precision,
            if self.degenerate_precision { "*" } else { "" },
            self.recall,
            if self.degenerate_recall { "*" } else { "" },
            self.f1,
        )?;
        if self.degenerate_precision || self.degenerate_recall {
            write!(f, "  (* zero denominator)")?;
        }
        Ok(())
    }
}
