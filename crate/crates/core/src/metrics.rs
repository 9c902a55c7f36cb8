//! Classification metrics: accuracy, precision, recall, F1, ROC/AUC and
//! one-vs-rest macro averaging.
//!
//! Ratios with a zero denominator evaluate to 0 and carry a `degenerate` flag
//! instead of failing, so batch evaluation stays total.

use std::fmt::Write as _;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::netcore::argmax;

/// One-vs-rest confusion counts for a single positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

fn ratio(num: usize, den: usize) -> MetricValue {
    if den == 0 {
        MetricValue {
            value: 0.0,
            degenerate: true,
        }
    } else {
        MetricValue {
            value: num as f64 / den as f64,
            degenerate: false,
        }
    }
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> MetricValue {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> MetricValue {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> MetricValue {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> MetricValue {
        let p = self.precision();
        let r = self.recall();
        let sum = p.value + r.value;
        if sum == 0.0 {
            MetricValue {
                value: 0.0,
                degenerate: true,
            }
        } else {
            MetricValue {
                value: 2.0 * p.value * r.value / sum,
                degenerate: p.degenerate || r.degenerate,
            }
        }
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], positive_class: usize) -> Result<ConfusionCounts> {
    if preds.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p == positive_class, y == positive_class) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// (false-positive rate, true-positive rate) pairs from (0, 0) to (1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

/// ROC curve over every distinct score threshold (`score >= t` is positive)
/// and its trapezoidal area.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != positives.len() {
        return Err(Error::Contract(format!(
            "{} scores for {} labels",
            scores.len(),
            positives.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("NaN score".into()));
    }
    let pos = positives.iter().filter(|&&p| p).count();
    let neg = positives.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC needs both positive and negative samples".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let next = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        let last = *points.last().expect("starts at origin");
        area += (next.0 - last.0) * (next.1 + last.1) / 2.0;
        points.push(next);
    }
    Ok((RocCurve { points }, area))
}

/// Unweighted mean over classes.
pub fn macro_average(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Contract("macro average of no classes".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub counts: ConfusionCounts,
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub f1: MetricValue,
    /// `None` when the class is absent from (or the only class in) the labels.
    pub auc: Option<f64>,
    pub roc: Option<RocCurve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Mean over classes with a defined AUC.
    pub macro_auc: Option<f64>,
}

/// Evaluates softmax outputs against true labels with one-vs-rest per-class metrics.
pub fn evaluate(probs: ArrayView2<f64>, labels: &[usize]) -> Result<ClassificationReport> {
    if probs.nrows() != labels.len() {
        return Err(Error::Contract(format!(
            "{} probability rows for {} labels",
            probs.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::UndefinedMetric("empty evaluation set".into()));
    }
    let classes = probs.ncols();
    let preds: Vec<usize> = probs.rows().into_iter().map(|r| argmax(r.iter().copied())).collect();
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    let mut per_class = Vec::with_capacity(classes);
    for c in 0..classes {
        let counts = confusion(&preds, labels, c)?;
        let scores: Vec<f64> = probs.column(c).to_vec();
        let positives: Vec<bool> = labels.iter().map(|&y| y == c).collect();
        let (roc, auc) = match roc_auc(&scores, &positives) {
            Ok((roc, auc)) => (Some(roc), Some(auc)),
            Err(Error::UndefinedMetric(_)) => (None, None),
            Err(e) => return Err(e),
        };
        per_class.push(ClassMetrics {
            class: c,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            auc,
            roc,
        });
    }
    let collect = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).collect::<Vec<_>>();
    let aucs: Vec<f64> = per_class.iter().filter_map(|m| m.auc).collect();
    Ok(ClassificationReport {
        accuracy: hits as f64 / labels.len() as f64,
        macro_precision: macro_average(&collect(|m| m.precision.value))?,
        macro_recall: macro_average(&collect(|m| m.recall.value))?,
        macro_f1: macro_average(&collect(|m| m.f1.value))?,
        macro_auc: macro_average(&aucs).ok(),
        per_class,
    })
}

impl ClassificationReport {
    /// CSV with header `metric,class,value`; averages use class `macro`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,class,value\n");
        let _ = writeln!(out, "accuracy,all,{:.6}", self.accuracy);
        for m in &self.per_class {
            let _ = writeln!(out, "precision,{},{:.6}", m.class, m.precision.value);
            let _ = writeln!(out, "recall,{},{:.6}", m.class, m.recall.value);
            let _ = writeln!(out, "f1,{},{:.6}", m.class, m.f1.value);
            if let Some(auc) = m.auc {
                let _ = writeln!(out, "auc,{},{:.6}", m.class, auc);
            }
        }
        let _ = writeln!(out, "precision,macro,{:.6}", self.macro_precision);
        let _ = writeln!(out, "recall,macro,{:.6}", self.macro_recall);
        let _ = writeln!(out, "f1,macro,{:.6}", self.macro_f1);
        if let Some(auc) = self.macro_auc {
            let _ = writeln!(out, "auc,macro,{auc:.6}");
        }
        out
    }
}

impl RocCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (x, y) in &self.points {
            let _ = writeln!(out, "{x:.6},{y:.6}");
        }
        out
    }
}
