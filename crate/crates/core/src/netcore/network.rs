use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from;

use super::loss::LossConfig;

/// Weights and biases of a fully connected ReLU network with a softmax head.
///
/// Layer `l` maps `layer_dims[l]` inputs to `layer_dims[l + 1]` outputs; its
/// weight matrix is stored as `(fan_in, fan_out)`. The same type carries
/// gradients and momentum buffers, which share the parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    layer_dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::Config(format!(
            "network needs at least an input and an output layer, got dims {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::Config(format!(
            "layer dimensions must be positive, got {layer_dims:?}"
        )));
    }
    Ok(())
}

/// Draws weights from U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases start at zero.
pub fn init_network(layer_dims: &[usize], seed: u64) -> Result<NetworkParameters> {
    check_dims(layer_dims)?;
    let mut rng = rng_from(seed);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(Array2::from_shape_fn((fan_in, fan_out), |_| {
            rng.random_range(-bound..bound)
        }));
        biases.push(Array1::zeros(fan_out));
    }
    Ok(NetworkParameters {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
    })
}

/// Gradients of the mean loss plus the loss itself, as produced by [`NetworkParameters::loss_and_gradients`].
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub loss: f64,
    pub gradients: NetworkParameters,
}

impl NetworkParameters {
    /// Builds a parameter set from explicit tensors, checking the shape chain.
    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
    ) -> Result<Self> {
        check_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::Dimension(format!(
                "expected {layers} layers, got {} weight and {} bias tensors",
                weights.len(),
                biases.len()
            )));
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if weights[l].dim() != (pair[0], pair[1]) || biases[l].len() != pair[1] {
                return Err(Error::Dimension(format!(
                    "layer {l}: weight {:?} / bias {} do not match dims {:?}",
                    weights[l].dim(),
                    biases[l].len(),
                    pair
                )));
            }
        }
        Ok(NetworkParameters {
            layer_dims,
            weights,
            biases,
        })
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        Ok(NetworkParameters {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims
                .windows(2)
                .map(|p| Array2::zeros((p[0], p[1])))
                .collect(),
            biases: layer_dims.windows(2).map(|p| Array1::zeros(p[1])).collect(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.layer_dims).expect("dims already validated")
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn class_count(&self) -> usize {
        *self.layer_dims.last().expect("at least two layers")
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Visits every scalar in layer order: weights (row-major) then biases, per layer.
    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    /// All scalars in [`iter_values`](Self::iter_values) order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.iter_values().collect()
    }

    /// Same layout with every scalar replaced from `values` (in `to_flat` order).
    pub fn with_flat(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.parameter_count() {
            return Err(Error::Dimension(format!(
                "{} values for {} parameters",
                values.len(),
                self.parameter_count()
            )));
        }
        let mut out = self.clone();
        let mut it = values.iter();
        for (w, b) in out.weights.iter_mut().zip(out.biases.iter_mut()) {
            w.iter_mut().chain(b.iter_mut()).for_each(|v| *v = *it.next().expect("length checked"));
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.iter_values().all(f64::is_finite)
    }

    pub fn same_shape(&self, other: &NetworkParameters) -> bool {
        self.layer_dims == other.layer_dims
    }

    pub(crate) fn ensure_same_shape(&self, other: &NetworkParameters) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "parameter layouts differ: {:?} vs {:?}",
                self.layer_dims, other.layer_dims
            )))
        }
    }

    /// Applies `f(self_value, other_value)` elementwise, writing into `self`.
    pub(crate) fn zip_apply(
        &mut self,
        other: &NetworkParameters,
        mut f: impl FnMut(&mut f64, f64),
    ) -> Result<()> {
        self.ensure_same_shape(other)?;
        for l in 0..self.weights.len() {
            Zip::from(&mut self.weights[l])
                .and(&other.weights[l])
                .for_each(|a, &b| f(a, b));
            Zip::from(&mut self.biases[l])
                .and(&other.biases[l])
                .for_each(|a, &b| f(a, b));
        }
        Ok(())
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &NetworkParameters) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .iter_values()
            .zip(other.iter_values())
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    /// Euclidean norm of `self - other` over all parameters.
    pub fn distance(&self, other: &NetworkParameters) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .iter_values()
            .zip(other.iter_values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    fn check_batch(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass keeping every layer's activation (input first, softmax last).
    fn activations(&self, batch: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let layers = self.weights.len();
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(layers + 1);
        acts.push(batch.to_owned());
        for l in 0..layers {
            let mut z = acts[l].dot(&self.weights[l]);
            z += &self.biases[l];
            if l + 1 < layers {
                z.mapv_inplace(|v| v.max(0.0));
            } else {
                softmax_rows(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    /// Softmax class probabilities, one row per input row.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        Ok(self
            .activations(batch)
            .pop()
            .expect("output layer always present"))
    }

    /// Class with the highest probability per row; ties resolve to the lowest class id.
    pub fn predict(&self, batch: ArrayView2<f64>) -> Result<Vec<usize>> {
        let probs = self.forward(batch)?;
        Ok(probs.rows().into_iter().map(|r| argmax(r.iter().copied())).collect())
    }

    /// Probability assigned to each row's given label.
    pub fn label_probabilities(&self, batch: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<f64>> {
        if labels.len() != batch.nrows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                batch.nrows()
            )));
        }
        let probs = self.forward(batch)?;
        labels
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                probs.get((i, y)).copied().ok_or_else(|| {
                    Error::Validation(format!("label {y} out of range for {} classes", probs.ncols()))
                })
            })
            .collect()
    }

    /// Mean (optionally weighted) loss over the batch and its gradient with respect to every parameter.
    ///
    /// With sample weights `w_i` the objective is `sum(w_i * l_i) / sum(w_i)`.
    pub fn loss_and_gradients(
        &self,
        batch: ArrayView2<f64>,
        labels: &[usize],
        sample_weights: Option<&[f64]>,
        loss: &LossConfig,
    ) -> Result<LossGradients> {
        self.check_batch(&batch)?;
        let rows = batch.nrows();
        if labels.len() != rows {
            return Err(Error::Dimension(format!("{} labels for {rows} rows", labels.len())));
        }
        if let Some(w) = sample_weights {
            if w.len() != rows {
                return Err(Error::Dimension(format!("{} weights for {rows} rows", w.len())));
            }
        }
        let classes = self.class_count();
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let mut gradients = self.zeros_like();
        if rows == 0 {
            return Ok(LossGradients { loss: 0.0, gradients });
        }

        let acts = self.activations(batch);
        let probs = acts.last().expect("output layer");
        let total_weight = match sample_weights {
            Some(w) => w.iter().sum::<f64>(),
            None => rows as f64,
        };

        // dL/dz at the output: w_i * c_i * (p - onehot) / W, with c_i the loss-specific scale.
        let mut delta = probs.clone();
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let sw = sample_weights.map_or(1.0, |w| w[i]);
            let p_t = probs[(i, y)];
            let (value, scale) = loss.value_and_logit_scale(p_t);
            total += sw * value;
            let mut row = delta.row_mut(i);
            row[y] -= 1.0;
            let factor = sw * scale / total_weight;
            row.mapv_inplace(|v| v * factor);
        }

        for l in (0..self.weights.len()).rev() {
            gradients.weights[l] = acts[l].t().dot(&delta);
            gradients.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.weights[l].t());
                Zip::from(&mut back)
                    .and(&acts[l])
                    .for_each(|g, &a| if a <= 0.0 { *g = 0.0 });
                delta = back;
            }
        }

        Ok(LossGradients {
            loss: total / total_weight,
            gradients,
        })
    }

    /// Mean loss only; used by finite-difference checks.
    pub fn mean_loss(
        &self,
        batch: ArrayView2<f64>,
        labels: &[usize],
        sample_weights: Option<&[f64]>,
        loss: &LossConfig,
    ) -> Result<f64> {
        let probs = self.forward(batch)?;
        let total_weight = match sample_weights {
            Some(w) => w.iter().sum::<f64>(),
            None => labels.len() as f64,
        };
        if labels.is_empty() {
            return Ok(0.0);
        }
        let total: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| sample_weights.map_or(1.0, |w| w[i]) * loss.value(probs[(i, y)]))
            .sum();
        Ok(total / total_weight)
    }
}

fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| (v / sum).max(0.0));
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}
