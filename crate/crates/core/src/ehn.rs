//! Easy / hard / noisy sample detection from training histories.
//!
//! A classifier is trained on the observed labels while its per-sample
//! labeled-class probabilities are recorded. Samples with the highest mean
//! probability form the easy set. The easy set is then re-corrupted with
//! synthetic noise at the dataset's noise ratio and a freshly initialised
//! classifier is trained on it; the histories of its non-easy part, paired
//! with the known corruption flags, teach a small MLP to tell hard histories
//! from noisy ones. That MLP finally splits the non-easy part of the original
//! dataset into hard and noisy sets.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::data::{check_noise_ratio, corrupt_labels, corruption_count, Dataset, NoiseKind, SampleId};
use crate::error::{Error, Result};
use crate::history::{rank_descending, HistoryRecorder, TrainingHistory};
use crate::netcore::{fit, init_network, LossConfig, NetworkParameters, TrainConfig};
use crate::seed::{derive_seed, rng_from};

/// Easy-sample ratio for a noise ratio: `0.1` at 80% noise or more, otherwise
/// `1 - 1.5 * rho` floored at `0.1`.
pub fn easy_ratio(rho: f64) -> f64 {
    if rho >= 0.8 {
        0.1
    } else {
        (1.0 - 1.5 * rho).clamp(0.1, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Part {
    Easy,
    Hard,
    Noisy,
}

impl Part {
    pub fn as_str(self) -> &'static str {
        match self {
            Part::Easy => "easy",
            Part::Hard => "hard",
            Part::Noisy => "noisy",
        }
    }
}

/// Disjoint easy / hard / noisy id sets covering a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EhnPartition {
    pub easy: BTreeSet<SampleId>,
    pub hard: BTreeSet<SampleId>,
    pub noisy: BTreeSet<SampleId>,
}

impl EhnPartition {
    pub fn part_of(&self, id: SampleId) -> Option<Part> {
        if self.easy.contains(&id) {
            Some(Part::Easy)
        } else if self.hard.contains(&id) {
            Some(Part::Hard)
        } else if self.noisy.contains(&id) {
            Some(Part::Noisy)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.easy.len() + self.hard.len() + self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that the three sets are pairwise disjoint and cover exactly `ids`.
    pub fn validate(&self, ids: &[SampleId]) -> Result<()> {
        if !self.easy.is_disjoint(&self.hard)
            || !self.easy.is_disjoint(&self.noisy)
            || !self.hard.is_disjoint(&self.noisy)
        {
            return Err(Error::Contract("partition sets overlap".into()));
        }
        let all: HashSet<SampleId> = ids.iter().copied().collect();
        if self.len() != all.len() || ids.iter().any(|id| self.part_of(*id).is_none()) {
            return Err(Error::Contract("partition does not cover the dataset".into()));
        }
        Ok(())
    }

    /// Ids of the hard and noisy sets together.
    pub fn suspects(&self) -> BTreeSet<SampleId> {
        self.hard.union(&self.noisy).copied().collect()
    }
}

/// Easy set: the top `floor(N * tau_e)` samples by mean history.
pub fn select_easy(ds: &Dataset, hist: &TrainingHistory, tau_e: f64) -> Result<BTreeSet<SampleId>> {
    Ok(select_easy_rows(ds, hist, tau_e)?
        .into_iter()
        .map(|r| ds.ids()[r])
        .collect())
}

fn easy_cut(n: usize, tau_e: f64) -> Result<usize> {
    if !(tau_e > 0.0 && tau_e <= 1.0) {
        return Err(Error::config_key("tau_e", format!("must lie in (0, 1], got {tau_e}")));
    }
    let cut = (n as f64 * tau_e).floor() as usize;
    if cut == 0 {
        return Err(Error::config_key(
            "tau_e",
            format!("easy ratio {tau_e} selects no samples out of {n}"),
        ));
    }
    Ok(cut)
}

fn select_easy_rows(ds: &Dataset, hist: &TrainingHistory, tau_e: f64) -> Result<Vec<usize>> {
    if hist.sample_ids() != ds.ids() {
        return Err(Error::Contract("history is not aligned with the dataset".into()));
    }
    let cut = easy_cut(ds.len(), tau_e)?;
    let mut order = hist.rank_by_mean()?;
    order.truncate(cut);
    Ok(order)
}

/// The easy set with synthetic label noise, and which of its labels were corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNoiseRecord {
    pub dataset: Dataset,
    pub is_noise: Vec<bool>,
}

/// Symmetrically corrupts exactly `round(rho * |D_e|)` labels of the easy set.
pub fn synthesize_noisy_easy(easy: &Dataset, rho: f64, seed: u64) -> Result<SyntheticNoiseRecord> {
    if easy.is_empty() {
        return Err(Error::State("easy set is empty".into()));
    }
    check_noise_ratio(rho, easy.class_count())?;
    let count = corruption_count(rho, easy.len());
    let mut rng = rng_from(seed);
    let (labels, is_noise) = corrupt_labels(
        easy.labels(),
        easy.class_count(),
        count,
        NoiseKind::Symmetric,
        &mut rng,
    );
    Ok(SyntheticNoiseRecord {
        dataset: easy.with_labels(labels)?,
        is_noise,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryClassifierConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    /// Share of (H_a', R') held out to measure the classifier.
    pub holdout_fraction: f64,
}

impl Default for HistoryClassifierConfig {
    fn default() -> Self {
        HistoryClassifierConfig {
            hidden: vec![64, 32],
            train: TrainConfig {
                epochs: 200,
                batch_size: 64,
                learning_rate: 0.01,
                momentum: 0.9,
                decay_start: 200,
                loss: LossConfig::cross_entropy(),
            },
            holdout_fraction: 0.2,
        }
    }
}

/// Inverse-frequency weights so both classes carry equal total weight.
fn balanced_weights(is_noise: &[bool]) -> Vec<f64> {
    let n = is_noise.len() as f64;
    let noisy = is_noise.iter().filter(|&&r| r).count() as f64;
    let clean = n - noisy;
    is_noise
        .iter()
        .map(|&r| if r { n / (2.0 * noisy) } else { n / (2.0 * clean) })
        .collect()
}

/// Trains the binary hard(0) / noisy(1) classifier on history rows.
pub fn train_history_classifier(
    rows: &Array2<f64>,
    is_noise: &[bool],
    cfg: &HistoryClassifierConfig,
    seed: u64,
) -> Result<NetworkParameters> {
    if rows.nrows() != is_noise.len() {
        return Err(Error::Dimension(format!(
            "{} history rows for {} noise flags",
            rows.nrows(),
            is_noise.len()
        )));
    }
    let noisy = is_noise.iter().filter(|&&r| r).count();
    if rows.nrows() < 2 || noisy == 0 || noisy == is_noise.len() {
        return Err(Error::DegenerateData(format!(
            "history classifier needs both classes; got {noisy} noisy of {} rows",
            is_noise.len()
        )));
    }
    let mut dims = vec![rows.ncols()];
    dims.extend(&cfg.hidden);
    dims.push(2);
    let init = init_network(&dims, derive_seed(seed, "init"))?;
    let labels: Vec<usize> = is_noise.iter().map(|&r| usize::from(r)).collect();
    let weights = balanced_weights(is_noise);
    let fitted = fit(
        init,
        rows.view(),
        &labels,
        Some(&weights),
        &cfg.train,
        derive_seed(seed, "shuffle"),
        &mut (),
    )?;
    Ok(fitted.params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EhnConfig {
    /// Epochs of recorded history (k).
    pub history_epochs: usize,
    pub easy_ratio: f64,
    /// Noise ratio used to corrupt the easy set.
    pub rho: f64,
    pub classifier_hidden: Vec<usize>,
    /// Training of the history-recording classifier; `epochs` is overridden by `history_epochs`.
    pub classifier_train: TrainConfig,
    pub history_classifier: HistoryClassifierConfig,
    pub seed: u64,
}

impl EhnConfig {
    fn classifier_dims(&self, ds: &Dataset) -> Vec<usize> {
        let mut dims = vec![ds.feature_dim()];
        dims.extend(&self.classifier_hidden);
        dims.push(ds.class_count());
        dims
    }

    fn history_train(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.history_epochs,
            ..self.classifier_train.clone()
        }
    }
}

/// Trains a fresh classifier on `ds` and records its k-epoch history.
pub fn record_training_history(
    ds: &Dataset,
    dims: &[usize],
    train: &TrainConfig,
    seed: u64,
) -> Result<(TrainingHistory, NetworkParameters, NetworkParameters)> {
    let init = init_network(dims, derive_seed(seed, "init"))?;
    let mut recorder = HistoryRecorder::new(ds);
    let fitted = fit(
        init.clone(),
        ds.features(),
        ds.labels(),
        None,
        train,
        derive_seed(seed, "shuffle"),
        &mut recorder,
    )?;
    Ok((recorder.into_history(), init, fitted.params))
}

/// Counts of ground-truth clean / noisy samples per assigned part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EhnConfusion {
    pub easy: (usize, usize),
    pub hard: (usize, usize),
    pub noisy: (usize, usize),
}

impl EhnConfusion {
    /// Share of truly noisy samples that ended up in the noisy set.
    pub fn noisy_recall(&self) -> f64 {
        let total = self.easy.1 + self.hard.1 + self.noisy.1;
        if total == 0 {
            0.0
        } else {
            self.noisy.1 as f64 / total as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("assigned,clean,noisy\n");
        for (name, (c, n)) in [("easy", self.easy), ("hard", self.hard), ("noisy", self.noisy)] {
            let _ = writeln!(out, "{name},{c},{n}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct EhnDiagnostics {
    /// History H of the classifier trained on the observed labels.
    pub history: TrainingHistory,
    /// History H_a of the classifier retrained on the corrupted easy set.
    pub synthetic_history: TrainingHistory,
    pub synthetic: SyntheticNoiseRecord,
    pub classifier_init: NetworkParameters,
    /// The history-recording classifier after its last epoch.
    pub classifier_final: NetworkParameters,
    pub retrain_init: NetworkParameters,
    /// Rows of (H_a', R') used for training / held out.
    pub history_rows_train: usize,
    pub history_rows_holdout: usize,
    pub holdout_accuracy: Option<f64>,
    /// Set when the history classifier could not be trained and all suspects went to the hard set.
    pub skipped_reason: Option<String>,
    /// Mean of mean-history over clean / corrupted samples of D_a.
    pub synthetic_mean_clean: Option<f64>,
    pub synthetic_mean_noisy: Option<f64>,
    pub confusion: Option<EhnConfusion>,
}

#[derive(Debug, Clone)]
pub struct EhnOutcome {
    pub partition: EhnPartition,
    pub history_classifier: Option<NetworkParameters>,
    pub diagnostics: EhnDiagnostics,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Full easy / hard / noisy detection on one dataset.
pub fn run_ehn(ds: &Dataset, cfg: &EhnConfig) -> Result<EhnOutcome> {
    if ds.len() < 2 {
        return Err(Error::DegenerateData("EHN detection needs at least two samples".into()));
    }
    if cfg.history_epochs < 1 {
        return Err(Error::config_key("pipeline.k", "must be at least 1"));
    }
    let dims = cfg.classifier_dims(ds);
    let train = cfg.history_train();

    let (history, classifier_init, classifier_final) =
        record_training_history(ds, &dims, &train, derive_seed(cfg.seed, "classifier"))?;
    let easy_rows = select_easy_rows(ds, &history, cfg.easy_ratio)?;
    let easy_ds = ds.subset(&easy_rows);

    let synthetic = synthesize_noisy_easy(&easy_ds, cfg.rho, derive_seed(cfg.seed, "synthetic-noise"))?;
    let (synthetic_history, retrain_init, _) = record_training_history(
        &synthetic.dataset,
        &dims,
        &train,
        derive_seed(cfg.seed, "classifier-retrain"),
    )?;
    let synthetic_means = synthetic_history.mean_history()?;
    let synthetic_mean_clean = mean_of(
        synthetic_means
            .iter()
            .zip(&synthetic.is_noise)
            .filter(|(_, &r)| !r)
            .map(|(m, _)| *m),
    );
    let synthetic_mean_noisy = mean_of(
        synthetic_means
            .iter()
            .zip(&synthetic.is_noise)
            .filter(|(_, &r)| r)
            .map(|(m, _)| *m),
    );

    // H_a' / R': everything below the easy cut of D_a.
    let order = rank_descending(&synthetic_means, synthetic.dataset.ids());
    let cut = easy_cut(synthetic.dataset.len(), cfg.easy_ratio)?;
    let mut tail: Vec<usize> = order[cut..].to_vec();
    tail.shuffle(&mut rng_from(derive_seed(cfg.seed, "history-holdout")));
    let holdout_len = if tail.len() >= 10 {
        (tail.len() as f64 * cfg.history_classifier.holdout_fraction).round() as usize
    } else {
        0
    };
    let (holdout_rows, train_rows) = tail.split_at(holdout_len);
    let h_a = synthetic_history.matrix();
    let train_x = h_a.select(Axis(0), train_rows);
    let train_r: Vec<bool> = train_rows.iter().map(|&r| synthetic.is_noise[r]).collect();

    let easy_ids: BTreeSet<SampleId> = easy_rows.iter().map(|&r| ds.ids()[r]).collect();
    let rest_rows: Vec<usize> = (0..ds.len()).filter(|r| !easy_ids.contains(&ds.ids()[*r])).collect();

    let mut partition = EhnPartition {
        easy: easy_ids,
        ..Default::default()
    };
    let mut skipped_reason = None;
    let mut holdout_accuracy = None;
    let history_classifier = if rest_rows.is_empty() {
        skipped_reason = Some("no samples below the easy cut".to_string());
        None
    } else {
        match train_history_classifier(
            &train_x,
            &train_r,
            &cfg.history_classifier,
            derive_seed(cfg.seed, "history-classifier"),
        ) {
            Ok(model) => Some(model),
            Err(Error::DegenerateData(msg)) => {
                skipped_reason = Some(msg);
                None
            }
            Err(e) => return Err(e),
        }
    };

    match &history_classifier {
        Some(model) => {
            if !holdout_rows.is_empty() {
                let x = h_a.select(Axis(0), holdout_rows);
                let preds = model.predict(x.view())?;
                let hits = preds
                    .iter()
                    .zip(holdout_rows)
                    .filter(|(p, &r)| (**p == 1) == synthetic.is_noise[r])
                    .count();
                holdout_accuracy = Some(hits as f64 / holdout_rows.len() as f64);
            }
            let h = history.matrix();
            let preds = model.predict(h.select(Axis(0), &rest_rows).view())?;
            for (&r, &p) in rest_rows.iter().zip(&preds) {
                if p == 1 {
                    partition.noisy.insert(ds.ids()[r]);
                } else {
                    partition.hard.insert(ds.ids()[r]);
                }
            }
        }
        None => partition.hard.extend(rest_rows.iter().map(|&r| ds.ids()[r])),
    }
    partition.validate(ds.ids())?;

    let confusion = ds.noise_mask().map(|mask| {
        let mut c = EhnConfusion::default();
        for (i, &noisy) in mask.iter().enumerate() {
            let slot = match partition.part_of(ds.ids()[i]).expect("validated partition") {
                Part::Easy => &mut c.easy,
                Part::Hard => &mut c.hard,
                Part::Noisy => &mut c.noisy,
            };
            if noisy {
                slot.1 += 1;
            } else {
                slot.0 += 1;
            }
        }
        c
    });

    Ok(EhnOutcome {
        partition,
        history_classifier,
        diagnostics: EhnDiagnostics {
            history,
            synthetic_history,
            synthetic,
            classifier_init,
            classifier_final,
            retrain_init,
            history_rows_train: train_rows.len(),
            history_rows_holdout: holdout_rows.len(),
            holdout_accuracy,
            skipped_reason,
            synthetic_mean_clean,
            synthetic_mean_noisy,
            confusion,
        },
    })
}

/// Per-sample CSV `id,mean_h,assigned,true_noisy` (the last column empty without ground truth).
pub fn diagnostics_csv(ds: &Dataset, outcome: &EhnOutcome) -> Result<String> {
    let means = outcome.diagnostics.history.mean_history()?;
    let mut out = String::from("id,mean_h,assigned,true_noisy\n");
    for (i, &id) in ds.ids().iter().enumerate() {
        let part = outcome
            .partition
            .part_of(id)
            .ok_or_else(|| Error::Contract(format!("sample {id} missing from partition")))?;
        let truth = ds.noise_mask().map_or(String::new(), |m| m[i].to_string());
        let _ = writeln!(out, "{id},{:.6},{},{truth}", means[i], part.as_str());
    }
    Ok(out)
}
