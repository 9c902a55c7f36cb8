//! Hard-sample-aware label correction.
//!
//! A correction model trained on the easy and hard sets pseudo-labels the hard
//! and noisy sets. The post-processing filter then drops samples whose pseudo
//! label contradicts their detected part (a noisy sample the model agrees with,
//! or a hard sample it disagrees with) and relabels the rest.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use crate::data::{estimate_noise_ratio, Dataset, EstimatorConfig, SampleId};
use crate::ehn::{easy_ratio, run_ehn, EhnConfig, EhnOutcome, EhnPartition, Part};
use crate::error::{Error, Result};
use crate::history::{rank_descending, TrainingHistory};
use crate::netcore::{fit, init_network, NetworkParameters, TrainConfig, TrainObserver};
use crate::seed::{derive_indexed, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleAction {
    Kept,
    Relabeled,
    Dropped,
}

impl SampleAction {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleAction::Kept => "kept",
            SampleAction::Relabeled => "relabeled",
            SampleAction::Dropped => "dropped",
        }
    }
}

/// Pseudo labels by sample id.
pub type PseudoLabels = BTreeMap<SampleId, usize>;

#[derive(Debug, Clone)]
pub struct CorrectionOutcome {
    /// The corrected dataset D_o.
    pub dataset: Dataset,
    pub dropped: BTreeSet<SampleId>,
    pub actions: BTreeMap<SampleId, SampleAction>,
}

impl CorrectionOutcome {
    pub fn count(&self, action: SampleAction) -> usize {
        self.actions.values().filter(|&&a| a == action).count()
    }
}

/// Trains the correction model from a fresh init on `train` (normally D_e and D_h).
pub fn train_correction_model(
    train: &Dataset,
    hidden: &[usize],
    cfg: &TrainConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<NetworkParameters> {
    let present = train.class_histogram().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::DegenerateData(format!(
            "correction set has {present} class(es) present; need at least 2"
        )));
    }
    let mut dims = vec![train.feature_dim()];
    dims.extend(hidden);
    dims.push(train.class_count());
    let init = init_network(&dims, derive_seed(seed, "init"))?;
    Ok(fit(
        init,
        train.features(),
        train.labels(),
        None,
        cfg,
        derive_seed(seed, "shuffle"),
        observer,
    )?
    .params)
}

/// Argmax pseudo label of every sample in `ds`; ties go to the lowest class.
pub fn generate_pseudo_labels(model: &NetworkParameters, ds: &Dataset) -> Result<PseudoLabels> {
    let preds = model.predict(ds.features())?;
    Ok(ds.ids().iter().copied().zip(preds).collect())
}

/// Applies the drop / relabel rule to the hard and noisy sets of `ds`.
///
/// A noisy sample is dropped when its pseudo label equals its label, a hard
/// sample when it differs; every other suspect takes its pseudo label. Easy
/// samples pass through untouched.
pub fn post_process(partition: &EhnPartition, ds: &Dataset, pseudo: &PseudoLabels) -> Result<CorrectionOutcome> {
    partition.validate(ds.ids())?;
    let mut labels = ds.labels().to_vec();
    let mut keep = Vec::with_capacity(ds.len());
    let mut dropped = BTreeSet::new();
    let mut actions = BTreeMap::new();
    for (i, &id) in ds.ids().iter().enumerate() {
        let part = partition.part_of(id).expect("validated partition");
        if part == Part::Easy {
            keep.push(i);
            actions.insert(id, SampleAction::Kept);
            continue;
        }
        let g = *pseudo
            .get(&id)
            .ok_or_else(|| Error::Contract(format!("no pseudo label for sample {id}")))?;
        if g >= ds.class_count() {
            return Err(Error::Contract(format!("pseudo label {g} out of range")));
        }
        let agrees = g == labels[i];
        let drop = match part {
            Part::Noisy => agrees,
            _ => !agrees,
        };
        if drop {
            dropped.insert(id);
            actions.insert(id, SampleAction::Dropped);
        } else {
            actions.insert(id, if agrees { SampleAction::Kept } else { SampleAction::Relabeled });
            labels[i] = g;
            keep.push(i);
        }
    }
    let dataset = ds.with_labels(labels)?.subset(&keep);
    Ok(CorrectionOutcome {
        dataset,
        dropped,
        actions,
    })
}

/// Relabels every suspect (hard or noisy) with its pseudo label, dropping nothing.
fn relabel_suspects(partition: &EhnPartition, ds: &Dataset, pseudo: &PseudoLabels) -> Result<Dataset> {
    let labels = ds
        .ids()
        .iter()
        .zip(ds.labels())
        .map(|(id, &y)| match partition.part_of(*id) {
            Some(Part::Easy) | None => y,
            Some(_) => pseudo.get(id).copied().unwrap_or(y),
        })
        .collect();
    ds.with_labels(labels)
}

/// Where later rounds take their noise ratio from.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoSource {
    /// Reuse the configured ratio every round.
    Fixed,
    /// Re-estimate on the relabeled data before each round after the first.
    Estimate(EstimatorConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionConfig {
    pub rounds: usize,
    /// EHN settings of the first round; `easy_ratio` and `rho` are replaced in later rounds.
    pub ehn: EhnConfig,
    /// Keep `ehn.easy_ratio` fixed instead of deriving it from each round's ratio.
    pub easy_ratio_fixed: bool,
    pub rho_source: RhoSource,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub round: usize,
    pub rho: f64,
    pub easy_ratio: f64,
    pub easy: usize,
    pub hard: usize,
    pub noisy: usize,
    /// Ground-truth noise ratio entering the round.
    pub noise_before: Option<f64>,
    /// Ground-truth noise ratio of the round's output.
    pub noise_after: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CorrectionRun {
    pub outcome: CorrectionOutcome,
    pub rounds: Vec<RoundSummary>,
    /// EHN result of the final round.
    pub ehn: EhnOutcome,
    pub model: NetworkParameters,
    pub pseudo_labels: PseudoLabels,
    /// Input dataset, aligned with `outcome.actions`.
    pub input: Dataset,
    /// Labels entering the final round, aligned with `ehn`.
    pub round_input: Dataset,
}

/// Runs `cfg.rounds` rounds of detection and pseudo-labeling; post-processing runs once, after the last.
pub fn run_label_correction(ds: &Dataset, cfg: &CorrectionConfig) -> Result<CorrectionRun> {
    if cfg.rounds == 0 {
        return Err(Error::config_key("pipeline.rounds", "must be at least 1"));
    }
    let mut current = ds.clone();
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut rho = cfg.ehn.rho;
    for round in 1..=cfg.rounds {
        if round > 1 {
            if let RhoSource::Estimate(est) = &cfg.rho_source {
                let est = EstimatorConfig {
                    seed: derive_indexed(est.seed, "round-estimate", round as u64),
                    ..est.clone()
                };
                rho = estimate_noise_ratio(&current, &est)?.rho;
            }
        }
        let ehn_cfg = EhnConfig {
            rho,
            easy_ratio: if cfg.easy_ratio_fixed { cfg.ehn.easy_ratio } else { easy_ratio(rho) },
            seed: derive_indexed(cfg.ehn.seed, "round", round as u64),
            ..cfg.ehn.clone()
        };
        let ehn = run_ehn(&current, &ehn_cfg)?;
        let mut train_ids: HashSet<SampleId> = ehn.partition.easy.iter().copied().collect();
        train_ids.extend(&ehn.partition.hard);
        let model = train_correction_model(
            &current.subset_by_ids(&train_ids),
            &cfg.hidden,
            &cfg.train,
            derive_indexed(cfg.seed, "round", round as u64),
            &mut (),
        )?;
        let suspects: HashSet<SampleId> = ehn.partition.suspects().into_iter().collect();
        let pseudo = generate_pseudo_labels(&model, &current.subset_by_ids(&suspects))?;
        let mut summary = RoundSummary {
            round,
            rho,
            easy_ratio: ehn_cfg.easy_ratio,
            easy: ehn.partition.easy.len(),
            hard: ehn.partition.hard.len(),
            noisy: ehn.partition.noisy.len(),
            noise_before: current.noise_ratio(),
            noise_after: None,
        };
        if round == cfg.rounds {
            let outcome = post_process(&ehn.partition, &current, &pseudo)?;
            summary.noise_after = outcome.dataset.noise_ratio();
            rounds.push(summary);
            // report actions against the original labels
            let mut outcome = outcome;
            let original = ds.id_index();
            let final_labels = outcome.dataset.id_index();
            for (id, action) in outcome.actions.iter_mut() {
                if *action == SampleAction::Dropped {
                    continue;
                }
                let old = ds.labels()[original[id]];
                let new = outcome.dataset.labels()[final_labels[id]];
                *action = if old == new { SampleAction::Kept } else { SampleAction::Relabeled };
            }
            return Ok(CorrectionRun {
                outcome,
                rounds,
                ehn,
                model,
                pseudo_labels: pseudo,
                input: ds.clone(),
                round_input: current,
            });
        }
        current = relabel_suspects(&ehn.partition, &current, &pseudo)?;
        summary.noise_after = current.noise_ratio();
        rounds.push(summary);
    }
    unreachable!("the final round returns")
}

/// Baseline filter: relabel everything by the model's argmax, then keep the
/// `keep_count` samples with the highest mean history.
pub fn baseline_drop_by_mean(
    ds: &Dataset,
    hist: &TrainingHistory,
    keep_count: usize,
    model: &NetworkParameters,
) -> Result<CorrectionOutcome> {
    if hist.sample_ids() != ds.ids() {
        return Err(Error::Contract("history is not aligned with the dataset".into()));
    }
    if keep_count > ds.len() {
        return Err(Error::Contract(format!(
            "cannot keep {keep_count} of {} samples",
            ds.len()
        )));
    }
    let preds = model.predict(ds.features())?;
    let means = hist.mean_history()?;
    let mut keep = rank_descending(&means, ds.ids());
    keep.truncate(keep_count);
    keep.sort_unstable();
    let kept: HashSet<usize> = keep.iter().copied().collect();
    let mut dropped = BTreeSet::new();
    let mut actions = BTreeMap::new();
    for (i, &id) in ds.ids().iter().enumerate() {
        let action = if !kept.contains(&i) {
            dropped.insert(id);
            SampleAction::Dropped
        } else if preds[i] == ds.labels()[i] {
            SampleAction::Kept
        } else {
            SampleAction::Relabeled
        };
        actions.insert(id, action);
    }
    let dataset = ds.with_labels(preds)?.subset(&keep);
    Ok(CorrectionOutcome {
        dataset,
        dropped,
        actions,
    })
}

/// CSV `round,est_rho,tau_e,easy,hard,noisy,noise_ratio_d,noise_ratio_out`.
pub fn rounds_csv(rounds: &[RoundSummary]) -> String {
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    let mut out = String::from("round,est_rho,tau_e,easy,hard,noisy,noise_ratio_d,noise_ratio_out\n");
    for r in rounds {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{},{},{},{}",
            r.round,
            r.rho,
            r.easy_ratio,
            r.easy,
            r.hard,
            r.noisy,
            fmt(r.noise_before),
            fmt(r.noise_after)
        );
    }
    out
}

/// Per-sample CSV `id,action,old_label,new_label,partition,true_noisy,final_noisy`.
pub fn outcome_csv(run: &CorrectionRun) -> String {
    let ds = &run.input;
    let out_index = run.outcome.dataset.id_index();
    let mut out = String::from("id,action,old_label,new_label,partition,true_noisy,final_noisy\n");
    for (i, &id) in ds.ids().iter().enumerate() {
        let action = run.outcome.actions.get(&id).copied().unwrap_or(SampleAction::Kept);
        let (new_label, final_noisy) = match out_index.get(&id) {
            Some(&j) => (
                run.outcome.dataset.labels()[j].to_string(),
                run.outcome
                    .dataset
                    .noise_mask()
                    .map_or(String::new(), |m| m[j].to_string()),
            ),
            None => (String::new(), String::new()),
        };
        let part = run.ehn.partition.part_of(id).map_or("", Part::as_str);
        let truth = ds.noise_mask().map_or(String::new(), |m| m[i].to_string());
        let _ = writeln!(
            out,
            "{id},{},{},{new_label},{part},{truth},{final_noisy}",
            action.as_str(),
            ds.labels()[i]
        );
    }
    out
}
