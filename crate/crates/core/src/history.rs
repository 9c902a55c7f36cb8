//! Per-sample training histories and the dynamics statistics derived from them.
//!
//! A history stores, for every sample and every epoch, the probability the
//! model assigned to the sample's observed label. Learning and forgetting
//! events are crossings of [`EVENT_THRESHOLD`] between consecutive epochs; a
//! value exactly at the threshold counts as below it.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::data::{Dataset, SampleId};
use crate::error::{Error, Result};
use crate::netcore::{NetworkParameters, TrainObserver};

/// Probability that separates "learned" from "not learned".
pub const EVENT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    sample_ids: Vec<SampleId>,
    // one column per epoch, each of length N
    columns: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSummary {
    pub mean_prob: Vec<f64>,
    pub learning_events: Vec<usize>,
    pub forgetting_events: Vec<usize>,
    pub mean_abs_gradient: Vec<f64>,
}

impl TrainingHistory {
    pub fn new(sample_ids: Vec<SampleId>) -> Self {
        TrainingHistory {
            sample_ids,
            columns: Vec::new(),
        }
    }

    pub fn for_dataset(ds: &Dataset) -> Self {
        Self::new(ds.ids().to_vec())
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn epoch_count(&self) -> usize {
        self.columns.len()
    }

    pub fn sample_ids(&self) -> &[SampleId] {
        &self.sample_ids
    }

    /// Appends one epoch of labeled-class probabilities.
    pub fn push_epoch(&mut self, epoch: usize, probs: Vec<f64>) -> Result<()> {
        let expected = self.columns.len() + 1;
        if epoch != expected {
            return Err(Error::Sequencing { expected, got: epoch });
        }
        if probs.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} samples",
                probs.len(),
                self.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Validation(format!("history value {bad} outside [0, 1]")));
        }
        self.columns.push(probs);
        Ok(())
    }

    /// Records the model's probability of each sample's observed label.
    pub fn record_epoch(&mut self, epoch: usize, model: &NetworkParameters, ds: &Dataset) -> Result<()> {
        if ds.ids() != self.sample_ids.as_slice() {
            return Err(Error::Contract("history and dataset ids are not aligned".into()));
        }
        let expected = self.columns.len() + 1;
        if epoch != expected {
            return Err(Error::Sequencing { expected, got: epoch });
        }
        let probs = model.label_probabilities(ds.features(), ds.labels())?;
        self.push_epoch(epoch, probs)
    }

    /// History vector `h_i` of one sample.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// The N x k history matrix.
    pub fn matrix(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), self.epoch_count()), |(i, t)| self.columns[t][i])
    }

    /// Rows at the given positions, in that order.
    pub fn subset(&self, rows: &[usize]) -> TrainingHistory {
        TrainingHistory {
            sample_ids: rows.iter().map(|&r| self.sample_ids[r]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
        }
    }

    /// Arithmetic mean of each row.
    pub fn mean_history(&self) -> Result<Vec<f64>> {
        if self.columns.is_empty() {
            return Err(Error::State("history has no recorded epochs".into()));
        }
        let k = self.columns.len() as f64;
        Ok((0..self.len())
            .map(|i| self.columns.iter().map(|c| c[i]).sum::<f64>() / k)
            .collect())
    }

    /// Row positions by descending mean; ties go to the smaller sample id.
    pub fn rank_by_mean(&self) -> Result<Vec<usize>> {
        let means = self.mean_history()?;
        Ok(rank_descending(&means, &self.sample_ids))
    }

    pub fn summary(&self) -> Result<DynamicsSummary> {
        let mean_prob = self.mean_history()?;
        let mut learning_events = Vec::with_capacity(self.len());
        let mut forgetting_events = Vec::with_capacity(self.len());
        let mut mean_abs_gradient = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let row = self.row(i);
            let (l, f) = count_events(&row);
            learning_events.push(l);
            forgetting_events.push(f);
            let grads = gradient_magnitudes(&row).unwrap_or_default();
            mean_abs_gradient.push(if grads.is_empty() {
                0.0
            } else {
                grads.iter().sum::<f64>() / grads.len() as f64
            });
        }
        Ok(DynamicsSummary {
            mean_prob,
            learning_events,
            forgetting_events,
            mean_abs_gradient,
        })
    }

    /// CSV with header `id,epoch_1,...,epoch_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id");
        for t in 1..=self.epoch_count() {
            let _ = write!(out, ",epoch_{t}");
        }
        out.push('\n');
        for (i, id) in self.sample_ids.iter().enumerate() {
            let _ = write!(out, "{id}");
            for c in &self.columns {
                let _ = write!(out, ",{:?}", c[i]);
            }
            out.push('\n');
        }
        out
    }
}

/// Positions sorted by descending value, ties by ascending id.
pub(crate) fn rank_descending(values: &[f64], ids: &[SampleId]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(ids[a].cmp(&ids[b])));
    order
}

/// Positions sorted by ascending value, ties by ascending id.
pub(crate) fn rank_ascending(values: &[f64], ids: &[SampleId]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(ids[a].cmp(&ids[b])));
    order
}

/// (learning, forgetting) crossings of [`EVENT_THRESHOLD`] between consecutive epochs.
pub fn count_events(row: &[f64]) -> (usize, usize) {
    count_events_at(row, EVENT_THRESHOLD)
}

pub fn count_events_at(row: &[f64], threshold: f64) -> (usize, usize) {
    row.windows(2).fold((0, 0), |(l, f), w| {
        match (w[0] > threshold, w[1] > threshold) {
            (false, true) => (l + 1, f),
            (true, false) => (l, f + 1),
            _ => (l, f),
        }
    })
}

/// |p_t - p_(t-1)| for t = 2..k.
pub fn gradient_magnitudes(row: &[f64]) -> Result<Vec<f64>> {
    if row.len() < 2 {
        return Err(Error::State(format!(
            "need at least two epochs for gradient magnitudes, got {}",
            row.len()
        )));
    }
    Ok(row.windows(2).map(|w| (w[1] - w[0]).abs()).collect())
}

/// Learning / forgetting events and gradient magnitudes of a group of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EventProfile {
    pub samples: usize,
    /// Learning events at each transition `t-1 -> t`, for t = 2..k.
    pub learning: Vec<usize>,
    pub forgetting: Vec<usize>,
    /// Histogram of |p_t - p_(t-1)| over equal-width bins of [0, 1].
    pub gradient_histogram: Vec<usize>,
}

impl EventProfile {
    /// Mean number of learning plus forgetting events per sample.
    pub fn total_event_frequency(&self) -> f64 {
        if self.samples == 0 {
            return 0.0;
        }
        let total: usize = self.learning.iter().chain(&self.forgetting).sum();
        total as f64 / self.samples as f64
    }
}

/// Event and gradient statistics over the history rows at `rows`.
pub fn event_profile(hist: &TrainingHistory, rows: &[usize], bins: usize) -> EventProfile {
    let transitions = hist.epoch_count().saturating_sub(1);
    let bins = bins.max(1);
    let mut p = EventProfile {
        samples: rows.len(),
        learning: vec![0; transitions],
        forgetting: vec![0; transitions],
        gradient_histogram: vec![0; bins],
    };
    for &r in rows {
        let row = hist.row(r);
        for (t, w) in row.windows(2).enumerate() {
            let (l, f) = count_events(w);
            p.learning[t] += l;
            p.forgetting[t] += f;
            let g = (w[1] - w[0]).abs();
            p.gradient_histogram[((g * bins as f64) as usize).min(bins - 1)] += 1;
        }
    }
    p
}

/// Training observer that appends a history column after every epoch.
pub struct HistoryRecorder<'a> {
    dataset: &'a Dataset,
    history: TrainingHistory,
}

impl<'a> HistoryRecorder<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        HistoryRecorder {
            dataset,
            history: TrainingHistory::for_dataset(dataset),
        }
    }

    pub fn into_history(self) -> TrainingHistory {
        self.history
    }
}

impl TrainObserver for HistoryRecorder<'_> {
    fn on_epoch_end(&mut self, epoch: usize, params: &NetworkParameters) -> Result<()> {
        self.history.record_epoch(epoch, params, self.dataset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_gaussian_dataset;

    fn history(rows: &[&[f64]]) -> TrainingHistory {
        let mut h = TrainingHistory::new((0..rows.len() as u64).collect());
        for t in 0..rows[0].len() {
            h.push_epoch(t + 1, rows.iter().map(|r| r[t]).collect()).unwrap();
        }
        h
    }

    #[test]
    fn means() {
        let h = history(&[&[1.0, 1.0, 1.0], &[0.2, 0.4, 0.9]]);
        let m = h.mean_history().unwrap();
        assert_eq!(m[0], 1.0);
        assert!((m[1] - 0.5).abs() < 1e-15);
        assert!(TrainingHistory::new(vec![1]).mean_history().is_err());
    }

    #[test]
    fn ranking_and_ties() {
        let h = history(&[&[0.9], &[0.1], &[0.5]]);
        assert_eq!(h.rank_by_mean().unwrap(), vec![0, 2, 1]);
        let flat = history(&[&[0.3], &[0.3], &[0.3]]);
        assert_eq!(flat.rank_by_mean().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn events() {
        assert_eq!(count_events(&[0.3, 0.6, 0.4, 0.7]), (2, 1));
        assert_eq!(count_events(&[0.1, 0.2, 0.3, 0.4]), (0, 0));
        assert_eq!(count_events(&[0.6, 0.4]), (0, 1));
        // exactly 0.5 counts as below
        assert_eq!(count_events(&[0.5, 0.6, 0.5]), (1, 1));
        assert_eq!(count_events(&[0.4, 0.5]), (0, 0));
        assert_eq!(count_events(&[0.9]), (0, 0));
    }

    #[test]
    fn gradients() {
        let g = gradient_magnitudes(&[0.2, 0.7]).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g[0] - 0.5).abs() < 1e-15);
        assert_eq!(gradient_magnitudes(&[0.4, 0.4, 0.4]).unwrap(), vec![0.0, 0.0]);
        assert!(gradient_magnitudes(&[0.4]).is_err());
    }

    #[test]
    fn sequencing_enforced() {
        let mut h = TrainingHistory::new(vec![0, 1]);
        assert!(matches!(
            h.push_epoch(2, vec![0.1, 0.2]),
            Err(Error::Sequencing { expected: 1, got: 2 })
        ));
        assert!(h.push_epoch(1, vec![0.1, 1.2]).is_err());
    }

    #[test]
    fn records_labeled_class_probability() {
        let ds = make_gaussian_dataset(10, 2, 2, 1.0, 1).unwrap();
        let model = crate::netcore::init_network(&[2, 3, 2], 4).unwrap();
        let mut h = TrainingHistory::for_dataset(&ds);
        h.record_epoch(1, &model, &ds).unwrap();
        h.record_epoch(2, &model, &ds).unwrap();
        assert_eq!(h.epoch_count(), 2);
        let probs = model.forward(ds.features()).unwrap();
        for i in 0..ds.len() {
            assert_eq!(h.row(i)[0], probs[(i, ds.labels()[i])]);
        }
        let zero = NetworkParameters::zeros(&[2, 3, 2]).unwrap();
        let mut z = TrainingHistory::for_dataset(&ds);
        z.record_epoch(1, &zero, &ds).unwrap();
        assert!(z.row(0).iter().all(|&p| p == 0.5));
    }

    #[test]
    fn csv_export_shape() {
        let h = history(&[&[0.25, 0.5], &[1.0, 0.0]]);
        assert_eq!(h.to_csv(), "id,epoch_1,epoch_2\n0,0.25,0.5\n1,1.0,0.0\n");
    }
}
