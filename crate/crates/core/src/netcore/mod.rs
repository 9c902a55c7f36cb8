//! Minimal feedforward classifier training core.

mod checkpoint;
mod ema;
mod loss;
mod network;
mod optim;
mod trainer;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use ema::{ema_update, ema_update_in_place};
pub use loss::{cross_entropy, focal_loss, focal_weight, LossConfig, LossKind, PROB_FLOOR};
pub use network::{argmax, init_network, LossGradients, NetworkParameters};
pub use optim::{lr_schedule, train_step, OptimizerState, StepOutcome};
pub use trainer::{accuracy, fit, FitOutcome, TrainConfig, TrainObserver};
