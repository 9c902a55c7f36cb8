use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from;

use super::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Replacement drawn uniformly from the other classes.
    Symmetric,
    /// Class `c` becomes `(c + 1) mod C`.
    Asymmetric,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Symmetric => "symmetric",
            NoiseKind::Asymmetric => "asymmetric",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "symmetric" => Some(NoiseKind::Symmetric),
            "asymmetric" => Some(NoiseKind::Asymmetric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub ratio: f64,
    pub seed: u64,
}

/// Largest admissible noise ratio: 0.5 for two classes, just below 1 otherwise.
pub fn max_noise_ratio(class_count: usize) -> (f64, bool) {
    if class_count <= 2 {
        (0.5, true)
    } else {
        (1.0, false)
    }
}

pub fn check_noise_ratio(ratio: f64, class_count: usize) -> Result<()> {
    let (max, inclusive) = max_noise_ratio(class_count);
    let ok = ratio >= 0.0 && if inclusive { ratio <= max } else { ratio < max };
    if ok {
        Ok(())
    } else {
        let bracket = if inclusive { ']' } else { ')' };
        Err(Error::Config(format!(
            "noise ratio {ratio} outside [0, {max}{bracket} for {class_count} classes"
        )))
    }
}

/// Number of labels a ratio corrupts in a set of `n`: `round(ratio * n)`.
pub fn corruption_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64).round() as usize).min(n)
}

/// Changes exactly `count` labels chosen uniformly without replacement.
/// Returns the new labels and which positions changed.
pub fn corrupt_labels<R: Rng>(
    labels: &[usize],
    class_count: usize,
    count: usize,
    kind: NoiseKind,
    rng: &mut R,
) -> (Vec<usize>, Vec<bool>) {
    let mut out = labels.to_vec();
    let mut changed = vec![false; labels.len()];
    let count = count.min(labels.len());
    for i in sample(rng, labels.len(), count) {
        let y = labels[i];
        out[i] = match kind {
            NoiseKind::Asymmetric => (y + 1) % class_count,
            NoiseKind::Symmetric => {
                let offset = rng.random_range(1..class_count);
                (y + offset) % class_count
            }
        };
        changed[i] = true;
    }
    (out, changed)
}

/// Corrupts exactly `round(ratio * N)` observed labels; features, ids and clean labels are untouched.
pub fn inject_noise(ds: &Dataset, spec: &NoiseSpec) -> Result<Dataset> {
    if ds.clean_labels().is_none() {
        return Err(Error::State(
            "noise injection needs a dataset with clean labels".into(),
        ));
    }
    check_noise_ratio(spec.ratio, ds.class_count())?;
    let count = corruption_count(spec.ratio, ds.len());
    if count == 0 {
        return Ok(ds.clone());
    }
    let mut rng = rng_from(spec.seed);
    let (labels, _) = corrupt_labels(ds.labels(), ds.class_count(), count, spec.kind, &mut rng);
    ds.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_gaussian_dataset;

    fn spec(kind: NoiseKind, ratio: f64) -> NoiseSpec {
        NoiseSpec { kind, ratio, seed: 4 }
    }

    #[test]
    fn zero_noise_is_identity() {
        let ds = make_gaussian_dataset(20, 2, 3, 1.0, 1).unwrap();
        assert_eq!(inject_noise(&ds, &spec(NoiseKind::Symmetric, 0.0)).unwrap(), ds);
    }

    #[test]
    fn binary_flip_count_is_exact() {
        let ds = make_gaussian_dataset(500, 2, 2, 1.0, 1).unwrap();
        let noisy = inject_noise(&ds, &spec(NoiseKind::Symmetric, 0.4)).unwrap();
        assert_eq!(noisy.noisy_count(), Some(400));
        let changed = noisy.labels().iter().zip(ds.labels()).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 400);
        assert_eq!(noisy.features(), ds.features());
        assert_eq!(noisy.ids(), ds.ids());
        assert_eq!(noisy.clean_labels(), ds.clean_labels());
    }

    #[test]
    fn asymmetric_moves_to_adjacent_class() {
        let ds = make_gaussian_dataset(100, 12, 10, 1.0, 2).unwrap();
        let noisy = inject_noise(&ds, &spec(NoiseKind::Asymmetric, 0.4)).unwrap();
        let clean = noisy.clean_labels().unwrap();
        let mut corrupted = 0;
        for (i, &m) in noisy.noise_mask().unwrap().iter().enumerate() {
            if m {
                corrupted += 1;
                assert_eq!(noisy.labels()[i], (clean[i] + 1) % 10);
            }
        }
        assert_eq!(corrupted, 400);
    }

    #[test]
    fn ratio_range_guard() {
        let bin = make_gaussian_dataset(10, 2, 2, 1.0, 1).unwrap();
        assert!(matches!(
            inject_noise(&bin, &spec(NoiseKind::Symmetric, 0.6)),
            Err(Error::Config(_))
        ));
        assert!(inject_noise(&bin, &spec(NoiseKind::Symmetric, 0.5)).is_ok());
        let multi = make_gaussian_dataset(10, 3, 3, 1.0, 1).unwrap();
        assert!(inject_noise(&multi, &spec(NoiseKind::Symmetric, 0.8)).is_ok());
        assert!(inject_noise(&multi, &spec(NoiseKind::Symmetric, 1.0)).is_err());
        assert!(inject_noise(&multi, &spec(NoiseKind::Symmetric, -0.1)).is_err());
    }

    #[test]
    fn needs_ground_truth() {
        let ds = make_gaussian_dataset(10, 2, 2, 1.0, 1).unwrap();
        let bare = Dataset::new(ds.features().to_owned(), ds.labels().to_vec(), 2).unwrap();
        assert!(matches!(
            inject_noise(&bare, &spec(NoiseKind::Symmetric, 0.1)),
            Err(Error::State(_))
        ));
    }
}
