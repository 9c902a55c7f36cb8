use std::collections::{HashMap, HashSet};

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Stable sample identifier, preserved through subsetting and relabeling.
pub type SampleId = u64;

/// Features, observed labels and, for synthetic data, the hidden clean labels.
///
/// `noise_mask[i]` is present exactly when clean labels are, and is true iff the
/// observed label differs from the clean one.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    clean_labels: Option<Vec<usize>>,
    noise_mask: Option<Vec<bool>>,
    class_count: usize,
    ids: Vec<SampleId>,
}

impl Dataset {
    /// Dataset with ids `0..N` and no ground truth.
    pub fn new(features: Array2<f64>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        let ids = (0..labels.len() as SampleId).collect();
        Self::from_parts(features, labels, None, class_count, ids)
    }

    pub fn from_parts(
        features: Array2<f64>,
        labels: Vec<usize>,
        clean_labels: Option<Vec<usize>>,
        class_count: usize,
        ids: Vec<SampleId>,
    ) -> Result<Self> {
        let noise_mask = clean_labels
            .as_ref()
            .map(|clean| labels.iter().zip(clean).map(|(y, c)| y != c).collect());
        let ds = Dataset {
            features,
            labels,
            clean_labels,
            noise_mask,
            class_count,
            ids,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.class_count < 2 {
            return Err(Error::Validation(format!(
                "class count must be at least 2, got {}",
                self.class_count
            )));
        }
        if self.features.nrows() != n || self.ids.len() != n {
            return Err(Error::Validation(format!(
                "misaligned dataset: {} feature rows, {} labels, {} ids",
                self.features.nrows(),
                n,
                self.ids.len()
            )));
        }
        if let Some((i, &y)) = self.labels.iter().enumerate().find(|(_, &y)| y >= self.class_count) {
            return Err(Error::Validation(format!(
                "label {y} of sample {} out of range for {} classes",
                self.ids[i], self.class_count
            )));
        }
        match (&self.clean_labels, &self.noise_mask) {
            (Some(clean), Some(mask)) => {
                if clean.len() != n || mask.len() != n {
                    return Err(Error::Validation("clean labels misaligned with labels".into()));
                }
                if let Some(&c) = clean.iter().find(|&&c| c >= self.class_count) {
                    return Err(Error::Validation(format!(
                        "clean label {c} out of range for {} classes",
                        self.class_count
                    )));
                }
                let consistent = self
                    .labels
                    .iter()
                    .zip(clean)
                    .zip(mask)
                    .all(|((y, c), &m)| m == (y != c));
                if !consistent {
                    return Err(Error::Validation("noise mask disagrees with labels".into()));
                }
            }
            (None, None) => {}
            _ => {
                return Err(Error::Validation(
                    "noise mask must be present exactly when clean labels are".into(),
                ))
            }
        }
        let mut seen = HashSet::with_capacity(n);
        if let Some(dup) = self.ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::Validation(format!("duplicate sample id {dup}")));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("features must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn clean_labels(&self) -> Option<&[usize]> {
        self.clean_labels.as_deref()
    }

    pub fn noise_mask(&self) -> Option<&[bool]> {
        self.noise_mask.as_deref()
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    /// Fraction of observed labels that differ from the clean ones.
    pub fn noise_ratio(&self) -> Option<f64> {
        let mask = self.noise_mask.as_ref()?;
        if mask.is_empty() {
            return Some(0.0);
        }
        Some(mask.iter().filter(|&&m| m).count() as f64 / mask.len() as f64)
    }

    pub fn noisy_count(&self) -> Option<usize> {
        Some(self.noise_mask.as_ref()?.iter().filter(|&&m| m).count())
    }

    /// Map from sample id to row position.
    pub fn id_index(&self) -> HashMap<SampleId, usize> {
        self.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }

    /// Rows at the given positions, in that order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let pick = |v: &[usize]| rows.iter().map(|&r| v[r]).collect::<Vec<_>>();
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: pick(&self.labels),
            clean_labels: self.clean_labels.as_deref().map(pick),
            noise_mask: self
                .noise_mask
                .as_ref()
                .map(|m| rows.iter().map(|&r| m[r]).collect()),
            class_count: self.class_count,
            ids: rows.iter().map(|&r| self.ids[r]).collect(),
        }
    }

    /// Rows whose ids are in `ids`, in dataset order.
    pub fn subset_by_ids(&self, ids: &HashSet<SampleId>) -> Dataset {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| ids.contains(&self.ids[i])).collect();
        self.subset(&rows)
    }

    /// Same samples with new observed labels; the noise mask is recomputed.
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset> {
        if labels.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} samples",
                labels.len(),
                self.len()
            )));
        }
        Self::from_parts(
            self.features.clone(),
            labels,
            self.clean_labels.clone(),
            self.class_count,
            self.ids.clone(),
        )
    }

    /// Declares the current labels as ground truth (noise mask all false).
    pub fn with_labels_as_clean(&self) -> Dataset {
        Dataset {
            clean_labels: Some(self.labels.clone()),
            noise_mask: Some(vec![false; self.len()]),
            ..self.clone()
        }
    }

    /// Per-class sample counts of the observed labels.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}
