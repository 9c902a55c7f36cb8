use ndarray::ArrayView2;

use crate::error::{Error, Result};

use super::loss::LossConfig;
use super::network::NetworkParameters;

/// SGD with heavy-ball momentum: `v <- mu * v + g`, `theta <- theta - lr * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    momentum: f64,
    velocity: NetworkParameters,
}

impl OptimizerState {
    pub fn new(params: &NetworkParameters, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(OptimizerState {
            learning_rate,
            momentum,
            velocity: params.zeros_like(),
        })
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &NetworkParameters {
        &self.velocity
    }

    fn apply(&mut self, params: &mut NetworkParameters, grads: &NetworkParameters) -> Result<()> {
        params.ensure_same_shape(&self.velocity)?;
        let mu = self.momentum;
        self.velocity.zip_apply(grads, |v, g| *v = mu * *v + g)?;
        let lr = self.learning_rate;
        params.zip_apply(&self.velocity, |p, v| *p -= lr * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Mean loss at the parameters before the update.
    pub loss: f64,
    /// Set when the batch was empty and nothing was updated.
    pub empty_batch: bool,
}

/// One SGD step on the mean (optionally weighted) per-sample loss.
pub fn train_step(
    params: &mut NetworkParameters,
    opt: &mut OptimizerState,
    batch: ArrayView2<f64>,
    labels: &[usize],
    sample_weights: Option<&[f64]>,
    loss: &LossConfig,
) -> Result<StepOutcome> {
    if batch.nrows() == 0 {
        return Ok(StepOutcome {
            loss: 0.0,
            empty_batch: true,
        });
    }
    let lg = params.loss_and_gradients(batch, labels, sample_weights, loss)?;
    opt.apply(params, &lg.gradients)?;
    if !params.is_finite() {
        return Err(Error::State(
            "parameters became non-finite; lower the learning rate".into(),
        ));
    }
    Ok(StepOutcome {
        loss: lg.loss,
        empty_batch: false,
    })
}

/// Learning rate for a 1-based epoch: constant through `decay_start`, then linear
/// down to `initial_lr / (total_epochs - decay_start + 1)` at the final epoch.
pub fn lr_schedule(epoch: usize, total_epochs: usize, initial_lr: f64, decay_start: usize) -> f64 {
    let total = total_epochs.max(1);
    let epoch = epoch.clamp(1, total);
    if decay_start >= total || epoch <= decay_start {
        return initial_lr;
    }
    initial_lr * (total - epoch + 1) as f64 / (total - decay_start + 1) as f64
}
