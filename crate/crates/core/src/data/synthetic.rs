use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::seed::{derive_seed, rng_from};

use super::dataset::Dataset;

/// Distance between class means at `overlap = 0`.
pub const MAX_SEPARATION: f64 = 12.0;

/// Pairwise distance between class means for a given overlap.
pub fn class_separation(overlap: f64) -> f64 {
    MAX_SEPARATION / (1.0 + overlap.max(0.0))
}

// Means sit on orthogonal axes when there are at most `dims` classes, otherwise
// on fixed pseudo-random directions; either way they depend only on the shape.
fn class_means(dims: usize, class_count: usize, separation: f64) -> Array2<f64> {
    let radius = separation / std::f64::consts::SQRT_2;
    let mut means = Array2::zeros((class_count, dims));
    if class_count <= dims {
        for c in 0..class_count {
            means[(c, c)] = radius;
        }
    } else {
        let mut rng = rng_from(derive_seed(class_count as u64 ^ ((dims as u64) << 32), "class-means"));
        for mut row in means.rows_mut() {
            row.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let norm = row.dot(&row).sqrt().max(1e-12);
            row.mapv_inplace(|v| v * radius / norm);
        }
    }
    means
}

/// Isotropic unit-variance Gaussian clusters, one per class, with clean labels.
///
/// Class means are `class_separation(overlap)` apart, so a larger `overlap`
/// pushes more samples toward the decision boundaries. Rows are shuffled so that
/// ids carry no class information.
pub fn make_gaussian_dataset(
    n_per_class: usize,
    dims: usize,
    class_count: usize,
    overlap: f64,
    seed: u64,
) -> Result<Dataset> {
    let n_per_class = n_per_class.max(1);
    let class_count = class_count.max(2);
    let dims = dims.max(1);
    let means = class_means(dims, class_count, class_separation(overlap));
    let n = n_per_class * class_count;
    let mut rng = rng_from(derive_seed(seed, "gaussian-samples"));
    let mut labels: Vec<usize> = (0..n).map(|i| i / n_per_class).collect();
    labels.shuffle(&mut rng);
    let mut features = Array2::zeros((n, dims));
    for (i, &y) in labels.iter().enumerate() {
        for j in 0..dims {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[(i, j)] = means[(y, j)] + z;
        }
    }
    Ok(Dataset::new(features, labels, class_count)?.with_labels_as_clean())
}
