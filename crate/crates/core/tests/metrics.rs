use ndarray::Array2;
use proptest::prelude::*;

use noisylab::metrics::{confusion, evaluate, macro_average, roc_auc, ConfusionCounts};

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(prop_oneof![0.0f64..1.0, Just(0.5)], n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, p)| p.iter().any(|&b| b) && p.iter().any(|&b| !b))
    })
}

#[test]
fn confusion_flip_symmetry() {
    let labels = [0, 1, 1, 0, 1, 0, 0];
    let preds = [0, 1, 0, 0, 1, 1, 1];
    let flipped: Vec<usize> = preds.iter().map(|p| 1 - p).collect();
    let a = confusion(&preds, &labels, 1).unwrap();
    let b = confusion(&flipped, &labels, 1).unwrap();
    assert_eq!((a.tp, a.fn_, a.tn, a.fp), (b.fn_, b.tp, b.fp, b.tn));
    let exact = confusion(&labels, &labels, 1).unwrap();
    assert_eq!((exact.fp, exact.fn_), (0, 0));
}

#[test]
fn macro_average_examples() {
    assert!((macro_average(&[0.4, 0.4, 0.4]).unwrap() - 0.4).abs() < 1e-15);
    assert_eq!(macro_average(&[1.0, 0.0]).unwrap(), 0.5);
    let (a, b) = (macro_average(&[0.2, 0.9, 0.4]).unwrap(), macro_average(&[0.9, 0.4, 0.2]).unwrap());
    assert!((a - b).abs() < 1e-15);
}

proptest! {
    #[test]
    fn roc_curve_is_monotone_and_anchored((scores, positives) in scored()) {
        let (roc, auc) = roc_auc(&scores, &positives).unwrap();
        prop_assert_eq!(roc.points[0], (0.0, 0.0));
        prop_assert_eq!(*roc.points.last().unwrap(), (1.0, 1.0));
        for w in roc.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!((0.0..=1.0).contains(&auc));
    }

    #[test]
    fn f1_lies_between_precision_and_recall(tp in 1usize..200, fp in 0usize..200, fn_ in 0usize..200, tn in 0usize..200) {
        let c = ConfusionCounts { tp, tn, fp, fn_ };
        let (p, r, f) = (c.precision().value, c.recall().value, c.f1().value);
        prop_assert!(f >= p.min(r) - 1e-15 && f <= p.max(r) + 1e-15);
        if fp == fn_ {
            prop_assert!((f - p).abs() < 1e-15);
        }
        prop_assert_eq!(c.total(), tp + tn + fp + fn_);
    }

    #[test]
    fn binary_macro_auc_is_the_binary_auc((scores, positives) in scored()) {
        let probs = Array2::from_shape_fn((scores.len(), 2), |(i, j)| if j == 1 { scores[i] } else { 1.0 - scores[i] });
        let labels: Vec<usize> = positives.iter().map(|&b| usize::from(b)).collect();
        let report = evaluate(probs.view(), &labels).unwrap();
        let (_, auc) = roc_auc(&scores, &positives).unwrap();
        prop_assert!((report.macro_auc.unwrap() - auc).abs() < 1e-12);
        for c in &report.per_class {
            prop_assert_eq!(c.counts.total(), labels.len());
        }
    }
}
