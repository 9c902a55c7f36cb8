use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::netcore::{fit, init_network, TrainConfig};
use crate::seed::{derive_seed, rng_from};

use super::dataset::Dataset;

pub const MIN_ESTIMATION_SAMPLES: usize = 50;

/// Classifier used by the two-fold agreement estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEstimate {
    /// Estimated noise ratio, clipped to [0, 0.5].
    pub rho: f64,
    /// Mean cross-fold agreement between predictions and observed labels.
    pub agreement: f64,
    /// Ground-truth ratio, reported for diagnostics only when clean labels exist.
    pub true_rho: Option<f64>,
}

/// Inverts `a = (1 - rho)^2 + rho^2 / (C - 1)` on `[0, 0.5]`.
pub fn rho_from_agreement(agreement: f64, class_count: usize) -> f64 {
    let q = class_count as f64 / (class_count as f64 - 1.0);
    let disc = 1.0 - q * (1.0 - agreement.clamp(0.0, 1.0));
    let rho = if disc <= 0.0 { 1.0 / q } else { (1.0 - disc.sqrt()) / q };
    rho.clamp(0.0, 0.5)
}

fn fold_agreement(
    ds: &Dataset,
    train_rows: &[usize],
    eval_rows: &[usize],
    cfg: &EstimatorConfig,
    fold: &str,
) -> Result<(usize, usize)> {
    let train = ds.subset(train_rows);
    let eval = ds.subset(eval_rows);
    let mut dims = vec![ds.feature_dim()];
    dims.extend(&cfg.hidden);
    dims.push(ds.class_count());
    let init = init_network(&dims, derive_seed(cfg.seed, &format!("{fold}-init")))?;
    let fitted = fit(
        init,
        train.features(),
        train.labels(),
        None,
        &cfg.train,
        derive_seed(cfg.seed, &format!("{fold}-shuffle")),
        &mut (),
    )?;
    let preds = fitted.params.predict(eval.features())?;
    let agree = preds.iter().zip(eval.labels()).filter(|(p, y)| p == y).count();
    Ok((agree, eval.len()))
}

/// Two-fold agreement estimate of the label-noise ratio.
///
/// Each half trains a classifier that is scored against the observed labels of
/// the other half; the pooled agreement is mapped back to a ratio through the
/// symmetric-noise agreement model. Clean labels are only read afterwards, for
/// the diagnostic `true_rho`.
pub fn estimate_noise_ratio(ds: &Dataset, cfg: &EstimatorConfig) -> Result<NoiseEstimate> {
    if ds.len() < MIN_ESTIMATION_SAMPLES {
        return Err(Error::Estimation(format!(
            "need at least {MIN_ESTIMATION_SAMPLES} samples, got {}",
            ds.len()
        )));
    }
    let mut rows: Vec<usize> = (0..ds.len()).collect();
    rows.shuffle(&mut rng_from(derive_seed(cfg.seed, "halves")));
    let (a, b) = rows.split_at(rows.len() / 2);
    let (agree_ab, n_b) = fold_agreement(ds, a, b, cfg, "fold-a")?;
    let (agree_ba, n_a) = fold_agreement(ds, b, a, cfg, "fold-b")?;
    let agreement = (agree_ab + agree_ba) as f64 / (n_a + n_b) as f64;
    let rho = rho_from_agreement(agreement, ds.class_count());
    Ok(NoiseEstimate {
        rho,
        agreement,
        true_rho: ds.noise_ratio(),
    })
}
