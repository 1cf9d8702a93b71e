use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Acc,
    Auc,
    Apr,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Acc => "acc",
            MetricKind::Auc => "auc",
            MetricKind::Apr => "apr",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acc" => Ok(MetricKind::Acc),
            "auc" => Ok(MetricKind::Auc),
            "apr" => Ok(MetricKind::Apr),
            other => Err(Error::Metric(format!("unknown metric {other:?}"))),
        }
    }
}

fn degenerate() -> Error {
    Error::Metric("degenerate labels: need both positive and negative examples".into())
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} scores, {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    Ok(())
}

/// Descending by score; indices of each run of equal scores are grouped.
fn tie_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(degenerate());
    }
    // walk from the lowest score up, counting negatives already passed
    let mut below = 0usize;
    let mut wins = 0.0f64;
    for g in tie_groups(scores).iter().rev() {
        let p = g.iter().filter(|&&i| labels[i]).count();
        let n = g.len() - p;
        wins += p as f64 * (below as f64 + 0.5 * n as f64);
        below += n;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Average precision: mean over positives of the precision at that
/// positive's score threshold (step interpolation, tied scores share a
/// threshold).
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y).count();
    if pos == 0 || pos == labels.len() {
        return Err(degenerate());
    }
    let (mut seen, mut seen_pos) = (0usize, 0usize);
    let mut total = 0.0f64;
    for g in tie_groups(scores) {
        let p = g.iter().filter(|&&i| labels[i]).count();
        seen += g.len();
        seen_pos += p;
        total += p as f64 * seen_pos as f64 / seen as f64;
    }
    Ok(total / pos as f64)
}

/// Fraction of rows whose argmax (lowest index on ties) is a positive class.
pub fn accuracy(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Metric(
            "accuracy needs equal, nonempty score and label lists".into(),
        ));
    }
    let mut correct = 0usize;
    for (s, y) in scores.iter().zip(labels) {
        if s.len() != y.len() {
            return Err(Error::Metric("row length mismatch".into()));
        }
        let pred = crate::model::predict_class(s).ok_or_else(|| Error::Metric("empty score row".into()))?;
        correct += usize::from(y[pred]);
    }
    Ok(correct as f64 / scores.len() as f64)
}

/// Result of [`compute_metric`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// Label columns left out because they had a single class.
    pub skipped_columns: Vec<usize>,
}

/// `scores[i][c]` and `labels[i][c]` per example and class.
///
/// `acc` uses the argmax. `auc`/`apr` apply to binary tasks (two classes,
/// ranked by the score margin of class 1 over class 0, or a single column)
/// and to multi-label tasks, averaged over columns with both labels present.
pub fn compute_metric(scores: &[Vec<f64>], labels: &[Vec<bool>], kind: MetricKind) -> Result<MetricValue> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!(
            "length mismatch: {} score rows, {} label rows",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Metric("no examples".into()));
    }
    if kind == MetricKind::Acc {
        return Ok(MetricValue {
            value: accuracy(scores, labels)?,
            skipped_columns: Vec::new(),
        });
    }
    let width = labels[0].len();
    if scores.iter().any(|s| s.len() != width) || labels.iter().any(|y| y.len() != width) {
        return Err(Error::Metric("ragged score or label rows".into()));
    }
    let single_label = labels.iter().all(|y| y.iter().filter(|&&v| v).count() == 1);
    let f = match kind {
        MetricKind::Auc => roc_auc,
        MetricKind::Apr => average_precision,
        MetricKind::Acc => unreachable!(),
    };
    if single_label {
        if width != 2 {
            return Err(Error::Metric(format!(
                "{kind} needs a binary or multi-label task, got {width}-way single-label"
            )));
        }
        let margin: Vec<f64> = scores.iter().map(|s| s[1] - s[0]).collect();
        let y: Vec<bool> = labels.iter().map(|y| y[1]).collect();
        return Ok(MetricValue {
            value: f(&margin, &y)?,
            skipped_columns: Vec::new(),
        });
    }
    let mut values = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..width {
        let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
        let y: Vec<bool> = labels.iter().map(|r| r[c]).collect();
        match f(&s, &y) {
            Ok(v) => values.push(v),
            Err(_) => skipped.push(c),
        }
    }
    if values.is_empty() {
        return Err(degenerate());
    }
    Ok(MetricValue {
        value: values.iter().sum::<f64>() / values.len() as f64,
        skipped_columns: skipped,
    })
}

/// Metric used for model selection on a dataset: `apr` when multi-label,
/// `auc` for two classes, `acc` otherwise.
pub fn default_metric(num_classes: usize, multi_label: bool) -> MetricKind {
    if multi_label {
        MetricKind::Apr
    } else if num_classes == 2 {
        MetricKind::Auc
    } else {
        MetricKind::Acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let s = [0.8, 0.6, 0.4, 0.2];
        let y = [true, false, true, false];
        assert!((roc_auc(&s, &y).unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        let err = roc_auc(&[0.1, 0.2], &[true, true]).unwrap_err().to_string();
        assert!(err.contains("degenerate labels"));
    }

    #[test]
    fn ap_examples() {
        // ranks: + - + -  => (1/1 + 2/3) / 2
        let v = average_precision(&[0.8, 0.6, 0.4, 0.2], &[true, false, true, false]).unwrap();
        assert!((v - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(average_precision(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_and_dispatch() {
        let s = vec![vec![0.1, 0.9], vec![0.7, 0.3], vec![0.5, 0.5]];
        let y = vec![vec![false, true], vec![true, false], vec![false, true]];
        assert!((compute_metric(&s, &y, MetricKind::Acc).unwrap().value - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(compute_metric(&s, &y, MetricKind::Auc).unwrap().value, 1.0);

        let s7 = vec![vec![0.0; 7]; 3];
        let mut y7 = vec![vec![false; 7]; 3];
        for (i, row) in y7.iter_mut().enumerate() {
            row[i] = true;
        }
        assert!(compute_metric(&s7, &y7, MetricKind::Auc).is_err());

        let ml_s = vec![vec![0.9, 0.2, 0.1], vec![0.1, 0.8, 0.3], vec![0.3, 0.1, 0.2]];
        let ml_y = vec![
            vec![true, false, true],
            vec![false, true, true],
            vec![false, false, true],
        ];
        let r = compute_metric(&ml_s, &ml_y, MetricKind::Auc).unwrap();
        assert_eq!(r.skipped_columns, vec![2]);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn selection_metric() {
        assert_eq!(default_metric(7, false), MetricKind::Acc);
        assert_eq!(default_metric(2, false), MetricKind::Auc);
        assert_eq!(default_metric(128, true), MetricKind::Apr);
        assert!("f1".parse::<MetricKind>().is_err());
    }
}
