//! Epoch loop shared by every plainly trained model in the pipeline.

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng_from;

use super::loss::LossConfig;
use super::network::NetworkParameters;
use super::optim::{lr_schedule, train_step, OptimizerState};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Last epoch trained at the initial learning rate.
    pub decay_start: usize,
    pub loss: LossConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }

    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_schedule(epoch, self.epochs, self.learning_rate, self.decay_start)
    }
}

/// Hooks into the epoch loop, used for history recording and instrumentation.
pub trait TrainObserver {
    /// Called with the dataset rows of every batch before its update.
    fn on_batch(&mut self, _epoch: usize, _rows: &[usize]) {}

    /// Called after the last update of each (1-based) epoch.
    fn on_epoch_end(&mut self, _epoch: usize, _params: &NetworkParameters) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: NetworkParameters,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD over `cfg.epochs` epochs, reshuffling each epoch from `shuffle_seed`.
pub fn fit(
    mut params: NetworkParameters,
    features: ArrayView2<f64>,
    labels: &[usize],
    sample_weights: Option<&[f64]>,
    cfg: &TrainConfig,
    shuffle_seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<FitOutcome> {
    cfg.validate()?;
    if features.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows for {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if features.nrows() == 0 {
        return Err(Error::DegenerateData("cannot train on an empty dataset".into()));
    }
    let mut opt = OptimizerState::new(&params, cfg.learning_rate, cfg.momentum)?;
    let mut rng = rng_from(shuffle_seed);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        opt.learning_rate = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for rows in order.chunks(cfg.batch_size) {
            observer.on_batch(epoch, rows);
            let x = features.select(Axis(0), rows);
            let y: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
            let w: Option<Vec<f64>> = sample_weights.map(|sw| rows.iter().map(|&r| sw[r]).collect());
            let step = train_step(&mut params, &mut opt, x.view(), &y, w.as_deref(), &cfg.loss)?;
            loss_sum += step.loss;
            batches += 1;
        }
        epoch_losses.push(loss_sum / batches as f64);
        observer.on_epoch_end(epoch, &params)?;
    }
    Ok(FitOutcome {
        params,
        epoch_losses,
    })
}

/// Fraction of rows whose argmax prediction equals the label.
pub fn accuracy(params: &NetworkParameters, features: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Ok(0.0);
    }
    let preds = params.predict(features)?;
    let hits = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}
