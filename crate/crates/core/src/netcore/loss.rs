//! Per-sample classification losses on the probability of the labeled class.

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_FLOOR, 1]` before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    Focal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Focal exponent; ignored for cross-entropy.
    pub gamma: f64,
}

impl LossConfig {
    pub const CROSS_ENTROPY: LossConfig = LossConfig {
        kind: LossKind::CrossEntropy,
        gamma: 0.0,
    };

    pub fn cross_entropy() -> Self {
        Self::CROSS_ENTROPY
    }

    pub fn focal(gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!(
                "focal gamma must be finite and non-negative, got {gamma}"
            )));
        }
        Ok(LossConfig {
            kind: LossKind::Focal,
            gamma,
        })
    }

    /// Loss value for the probability of the labeled class.
    pub fn value(&self, p_t: f64) -> f64 {
        match self.kind {
            LossKind::CrossEntropy => cross_entropy(p_t),
            LossKind::Focal => focal_loss(p_t, self.gamma),
        }
    }

    /// Loss value and the scale `s` such that the gradient with respect to the
    /// logits is `s * (p - onehot(label))`.
    pub(crate) fn value_and_logit_scale(&self, p_t: f64) -> (f64, f64) {
        match self.kind {
            LossKind::CrossEntropy => (cross_entropy(p_t), 1.0),
            LossKind::Focal => (focal_loss(p_t, self.gamma), focal_logit_scale(p_t, self.gamma)),
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    if p.is_nan() {
        PROB_FLOOR
    } else {
        p.clamp(PROB_FLOOR, 1.0)
    }
}

// +0.0 folds the -0.0 of ln(1) into +0.0.
fn neg_ln(p: f64) -> f64 {
    -p.ln() + 0.0
}

pub fn cross_entropy(p_t: f64) -> f64 {
    neg_ln(clamp_prob(p_t))
}

/// `-(1 - p_t)^gamma * ln(p_t)` with `p_t` clamped away from zero.
pub fn focal_loss(p_t: f64, gamma: f64) -> f64 {
    let p = clamp_prob(p_t);
    (1.0 - p).powf(gamma) * neg_ln(p)
}

/// Weight `(1 - p_t)^gamma` that focal loss puts on a sample relative to cross-entropy.
pub fn focal_weight(p_t: f64, gamma: f64) -> f64 {
    (1.0 - clamp_prob(p_t)).powf(gamma)
}

/// d FL / d z_j = (1-p)^g * (1 - g * p ln p / (1-p)) * (p_j - [j = t]).
fn focal_logit_scale(p_t: f64, gamma: f64) -> f64 {
    let p = clamp_prob(p_t);
    let q = 1.0 - p;
    // p ln p / (1 - p) tends to -1 as p -> 1.
    let ratio = if q <= 1e-12 { -1.0 } else { p * p.ln() / q };
    q.powf(gamma) * (1.0 - gamma * ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn focal_at_certainty_is_zero() {
        assert_eq!(focal_loss(1.0, 2.0), 0.0);
        assert!(focal_loss(1.0, 2.0).is_sign_positive());
        assert_eq!(cross_entropy(1.0), 0.0);
    }

    #[test]
    fn focal_reference_values() {
        // gamma = 0 is plain cross-entropy: -ln 0.5.
        assert!((focal_loss(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        // 0.25 * ln 2
        assert!((focal_loss(0.5, 2.0) - 0.173_286_795_139_986_3).abs() < 1e-15);
    }

    #[test]
    fn non_positive_probabilities_are_clamped() {
        let v = focal_loss(0.0, 2.0);
        assert!(v.is_finite() && v > 0.0);
        assert!(focal_loss(-3.0, 1.0).is_finite());
        assert!(cross_entropy(f64::NAN).is_finite());
        assert!(focal_logit_scale(0.0, 0.5).is_finite());
        assert!(focal_logit_scale(1.0, 0.5).is_finite());
    }

    #[test]
    fn focal_is_decreasing_in_p() {
        let mut last = f64::INFINITY;
        for i in 1..=100 {
            let v = focal_loss(i as f64 / 100.0, 2.0);
            assert!(v < last || (v == 0.0 && last == 0.0));
            last = v;
        }
    }

    #[test]
    fn gamma_zero_scale_is_exactly_one() {
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            assert_eq!(focal_logit_scale(p, 0.0), 1.0);
        }
    }

    #[test]
    fn negative_gamma_rejected() {
        assert!(LossConfig::focal(-0.1).is_err());
        assert!(LossConfig::focal(f64::NAN).is_err());
    }
}
