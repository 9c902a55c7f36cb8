//! Noise-suppressing co-learning with an EMA teacher.
//!
//! Two networks start from the same weights. Every epoch the teacher scores
//! the whole corrected set and the lowest-confidence `floor(|D_o| * tau)`
//! samples are discarded for that epoch. The student trains on the remaining
//! rows of each batch with focal loss, and the teacher follows it by an
//! exponential moving average after every iteration. The teacher is returned.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use ndarray::Axis;
use rand::seq::SliceRandom;

use crate::data::{Dataset, SampleId};
use crate::error::{Error, Result};
use crate::history::rank_ascending;
use crate::netcore::{
    accuracy, ema_update_in_place, init_network, train_step, LossConfig, NetworkParameters, OptimizerState,
    TrainConfig,
};
use crate::seed::{derive_seed, rng_from};

/// Default discard ratio: a tenth of the noise ratio.
pub fn discard_ratio(rho: f64) -> f64 {
    0.1 * rho
}

/// The `floor(|D_o| * tau)` samples with the lowest labeled-class probability
/// under `teacher`; ties go to the smaller id.
pub fn select_discard_set(teacher: &NetworkParameters, ds: &Dataset, tau: f64) -> Result<BTreeSet<SampleId>> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::config_key("pipeline.tau", format!("must lie in [0, 1), got {tau}")));
    }
    let count = (ds.len() as f64 * tau).floor() as usize;
    if count == 0 {
        return Ok(BTreeSet::new());
    }
    let probs = teacher.label_probabilities(ds.features(), ds.labels())?;
    let order = rank_ascending(&probs, ds.ids());
    Ok(order[..count].iter().map(|&r| ds.ids()[r]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsheConfig {
    pub hidden: Vec<usize>,
    /// Epochs, batching and learning-rate schedule; the loss is replaced by focal loss.
    pub train: TrainConfig,
    pub discard_ratio: f64,
    pub ema_momentum: f64,
    pub gamma: f64,
    pub seed: u64,
}

/// Per-epoch record of a co-learning run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub discarded: usize,
    pub mean_loss: f64,
    pub skipped_batches: usize,
    pub student_test_acc: Option<f64>,
    pub teacher_test_acc: Option<f64>,
}

/// Hooks into the co-learning loop.
pub trait NsheObserver {
    fn on_discard_set(&mut self, _epoch: usize, _discard: &BTreeSet<SampleId>) {}

    /// Rows actually used by one iteration, after discarding.
    fn on_batch(&mut self, _epoch: usize, _rows: &[usize]) {}

    fn on_iteration(&mut self, _student: &NetworkParameters, _teacher: &NetworkParameters) {}

    fn on_epoch_end(&mut self, _epoch: usize, _student: &NetworkParameters, _teacher: &NetworkParameters) {}
}

impl NsheObserver for () {}

#[derive(Debug, Clone)]
pub struct NsheOutcome {
    pub teacher: NetworkParameters,
    pub student: NetworkParameters,
    pub init: NetworkParameters,
    pub log: Vec<EpochLog>,
}

pub(crate) fn network_dims(ds: &Dataset, hidden: &[usize]) -> Vec<usize> {
    let mut dims = vec![ds.feature_dim()];
    dims.extend(hidden);
    dims.push(ds.class_count());
    dims
}

/// Co-learning on the corrected dataset; `test` only feeds the epoch log.
pub fn run_nshe(
    ds: &Dataset,
    cfg: &NsheConfig,
    test: Option<&Dataset>,
    observer: &mut dyn NsheObserver,
) -> Result<NsheOutcome> {
    cfg.train.validate()?;
    if !(0.0..1.0).contains(&cfg.ema_momentum) {
        return Err(Error::config_key(
            "pipeline.m",
            format!("must lie in [0, 1), got {}", cfg.ema_momentum),
        ));
    }
    let loss = LossConfig::focal(cfg.gamma)?;
    if ds.is_empty() {
        return Err(Error::DegenerateData("co-learning needs a non-empty dataset".into()));
    }
    let init = init_network(&network_dims(ds, &cfg.hidden), derive_seed(cfg.seed, "init"))?;
    let mut student = init.clone();
    let mut teacher = init.clone();
    let mut opt = OptimizerState::new(&student, cfg.train.learning_rate, cfg.train.momentum)?;
    let mut rng = rng_from(derive_seed(cfg.seed, "shuffle"));
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let index = ds.id_index();
    let features = ds.features();
    let mut log = Vec::with_capacity(cfg.train.epochs);

    for epoch in 1..=cfg.train.epochs {
        opt.learning_rate = cfg.train.lr_at(epoch);
        let discard = select_discard_set(&teacher, ds, cfg.discard_ratio)?;
        observer.on_discard_set(epoch, &discard);
        let mut discarded = vec![false; ds.len()];
        for id in &discard {
            discarded[index[id]] = true;
        }
        order.shuffle(&mut rng);
        let (mut loss_sum, mut steps, mut skipped) = (0.0, 0usize, 0usize);
        for batch in order.chunks(cfg.train.batch_size) {
            let rows: Vec<usize> = batch.iter().copied().filter(|&r| !discarded[r]).collect();
            if rows.is_empty() {
                skipped += 1;
                continue;
            }
            observer.on_batch(epoch, &rows);
            let x = features.select(Axis(0), &rows);
            let y: Vec<usize> = rows.iter().map(|&r| ds.labels()[r]).collect();
            let step = train_step(&mut student, &mut opt, x.view(), &y, None, &loss)?;
            ema_update_in_place(&mut teacher, &student, cfg.ema_momentum)?;
            observer.on_iteration(&student, &teacher);
            loss_sum += step.loss;
            steps += 1;
        }
        if steps == 0 {
            return Err(Error::Starvation(format!(
                "every batch of epoch {epoch} was emptied by the discard set"
            )));
        }
        let (student_test_acc, teacher_test_acc) = match test {
            Some(t) => (
                Some(accuracy(&student, t.features(), t.labels())?),
                Some(accuracy(&teacher, t.features(), t.labels())?),
            ),
            None => (None, None),
        };
        log.push(EpochLog {
            epoch,
            learning_rate: opt.learning_rate,
            discarded: discard.len(),
            mean_loss: loss_sum / steps as f64,
            skipped_batches: skipped,
            student_test_acc,
            teacher_test_acc,
        });
        observer.on_epoch_end(epoch, &student, &teacher);
    }
    Ok(NsheOutcome {
        teacher,
        student,
        init,
        log,
    })
}

/// CSV `epoch,lr,discarded,mean_train_loss,test_acc_student,test_acc_teacher`.
pub fn epoch_log_csv(log: &[EpochLog]) -> String {
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    let mut out = String::from("epoch,lr,discarded,mean_train_loss,test_acc_student,test_acc_teacher\n");
    for e in log {
        let _ = writeln!(
            out,
            "{},{:.6},{},{:.6},{},{}",
            e.epoch,
            e.learning_rate,
            e.discarded,
            e.mean_loss,
            fmt(e.student_test_acc),
            fmt(e.teacher_test_acc)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_gaussian_dataset;

    fn cfg(epochs: usize, tau: f64) -> NsheConfig {
        NsheConfig {
            hidden: vec![8],
            train: TrainConfig {
                epochs,
                batch_size: 16,
                learning_rate: 0.05,
                momentum: 0.9,
                decay_start: epochs,
                loss: LossConfig::cross_entropy(),
            },
            discard_ratio: tau,
            ema_momentum: 0.9,
            gamma: 2.0,
            seed: 3,
        }
    }

    #[test]
    fn discard_set_size_and_order() {
        let ds = make_gaussian_dataset(50, 3, 2, 1.0, 2).unwrap();
        let teacher = init_network(&[3, 4, 2], 1).unwrap();
        let n = select_discard_set(&teacher, &ds, 0.1).unwrap();
        assert_eq!(n.len(), 10);
        let probs = teacher.label_probabilities(ds.features(), ds.labels()).unwrap();
        let worst_kept = ds
            .ids()
            .iter()
            .zip(&probs)
            .filter(|(id, _)| !n.contains(id))
            .map(|(_, p)| *p)
            .fold(f64::INFINITY, f64::min);
        for (id, p) in ds.ids().iter().zip(&probs) {
            if n.contains(id) {
                assert!(*p <= worst_kept);
            }
        }
        assert!(select_discard_set(&teacher, &ds, 0.0).unwrap().is_empty());
        assert!(select_discard_set(&teacher, &ds, 1.0).is_err());
    }

    #[test]
    fn log_has_one_row_per_epoch() {
        let ds = make_gaussian_dataset(40, 3, 2, 1.0, 2).unwrap();
        let out = run_nshe(&ds, &cfg(3, 0.05), Some(&ds), &mut ()).unwrap();
        assert_eq!(out.log.len(), 3);
        assert!(out.log.iter().all(|e| e.discarded == 4));
        assert_eq!(epoch_log_csv(&out.log).lines().count(), 4);
    }
}
