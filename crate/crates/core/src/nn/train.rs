use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, softmax, LayerSpec, MlpParams, NetError};
use crate::dataset::{Dataset, LabeledSample};

/// Lower clamp applied to probabilities inside the log.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    #[default]
    HeUniform,
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init: InitScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 300,
            batch_size: 32,
            seed: 7,
            init: InitScheme::HeUniform,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(NetError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NetError::Config("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch metrics, measured on the full sets after each epoch's updates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub train_accuracy: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_loss.len()
    }
}

fn sample_loss(p: &[f64], label: usize) -> f64 {
    -p[label].max(LOG_CLAMP).ln()
}

// Accumulates this sample's gradient into `grads`; returns (loss, correct).
fn accumulate(
    params: &MlpParams,
    sample: &LabeledSample,
    grads: &mut MlpParams,
) -> Result<(f64, bool), NetError> {
    let acts = params.activations(&sample.features)?;
    let label = sample.label.id();
    let logits = acts.last().expect("non-empty");
    if label >= logits.len() {
        return Err(NetError::ShapeMismatch);
    }
    let p = softmax(logits);
    let loss = sample_loss(&p, label);
    let correct = argmax(&p) == label;

    // dL/dz for softmax followed by cross-entropy
    let mut delta = p;
    delta[label] -= 1.0;

    for l in (0..params.layers.len()).rev() {
        let input: &[f64] = if l == 0 { &sample.features } else { &acts[l - 1] };
        let layer = &params.layers[l];
        let g = &mut grads.layers[l];
        for (o, d) in delta.iter().enumerate() {
            if *d == 0.0 {
                continue;
            }
            g.bias[o] += d;
            let row = &mut g.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
            for (gw, x) in row.iter_mut().zip(input) {
                *gw += d * x;
            }
        }
        if l > 0 {
            // ReLU derivative read off the post-activation value
            let prev = &acts[l - 1];
            let mut next = vec![0.0; layer.fan_in];
            for (o, d) in delta.iter().enumerate() {
                for (n, w) in next.iter_mut().zip(layer.row(o)) {
                    *n += w * d;
                }
            }
            for (n, a) in next.iter_mut().zip(prev) {
                if *a <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
    }
    Ok((loss, correct))
}

fn batch_loss_and_grad<'a>(
    params: &MlpParams,
    batch: impl ExactSizeIterator<Item = &'a LabeledSample>,
) -> Result<(f64, MlpParams), NetError> {
    let n = batch.len();
    if n == 0 {
        return Err(NetError::EmptyBatch);
    }
    let mut grads = MlpParams::zeros(&params.spec);
    let mut total = 0.0;
    for s in batch {
        total += accumulate(params, s, &mut grads)?.0;
    }
    let inv = 1.0 / n as f64;
    grads.iter_values_mut().for_each(|g| *g *= inv);
    Ok((total * inv, grads))
}

/// Mean categorical cross-entropy over `batch` and its exact gradient.
pub fn loss_and_grad(
    params: &MlpParams,
    batch: &[LabeledSample],
) -> Result<(f64, MlpParams), NetError> {
    batch_loss_and_grad(params, batch.iter())
}

/// `θ ← θ − η ∇θ`.
pub fn sgd_step(params: &mut MlpParams, grads: &MlpParams, learning_rate: f64) -> Result<(), NetError> {
    if !params.same_shape(grads) {
        return Err(NetError::ShapeMismatch);
    }
    for (p, g) in params.iter_values_mut().zip(grads.iter_values()) {
        *p -= learning_rate * g;
    }
    Ok(())
}

/// Mean loss and accuracy over a whole dataset.
pub(crate) fn dataset_metrics(params: &MlpParams, data: &Dataset) -> Result<(f64, f64), NetError> {
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in &data.samples {
        let (_, p) = super::forward(params, &s.features)?;
        loss += sample_loss(&p.0, s.label.id());
        correct += usize::from(p.top().0 == s.label.id());
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch SGD with seeded initialization and per-epoch shuffling.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    spec: &LayerSpec,
    config: &TrainConfig,
) -> Result<(MlpParams, TrainHistory), NetError> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    if spec.input_len() != crate::landmark::FEATURE_LEN || spec.output_len() < train_set.class_count {
        return Err(NetError::ShapeMismatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = match config.init {
        InitScheme::HeUniform => MlpParams::he_uniform(spec, &mut rng),
        InitScheme::Zeros => MlpParams::zeros(spec),
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = chunk.iter().map(|&i| &train_set.samples[i]);
            let (_, grads) = batch_loss_and_grad(&params, batch)?;
            sgd_step(&mut params, &grads, config.learning_rate)?;
        }
        let (train_loss, train_acc) = dataset_metrics(&params, train_set)?;
        if !train_loss.is_finite() || !params.is_finite() {
            return Err(NetError::Diverged {
                epoch,
                loss: train_loss,
            });
        }
        let (val_loss, val_acc) = dataset_metrics(&params, val_set)?;
        history.train_loss.push(train_loss);
        history.train_accuracy.push(train_acc);
        history.val_loss.push(val_loss);
        history.val_accuracy.push(val_acc);
    }
    Ok((params, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::GestureLabel;
    use crate::landmark::FeatureVector;

    fn sample(label: usize, values: &[f64]) -> LabeledSample {
        let mut v = [0.0; 42];
        v[..values.len()].copy_from_slice(values);
        LabeledSample {
            label: GestureLabel::new(label).unwrap(),
            features: FeatureVector::from_slice(&v).unwrap(),
        }
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let spec = LayerSpec::new(vec![42, 2]).unwrap();
        let mut p = MlpParams::zeros(&spec);
        p.layers[0].bias = vec![1000.0, -1000.0];
        let (loss, _) = loss_and_grad(&p, &[sample(0, &[])]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn uniform_prediction_loss_is_ln_m() {
        let p = MlpParams::zeros(&LayerSpec::gesture_default());
        let (loss, _) = loss_and_grad(&p, &[sample(3, &[0.1, 0.2])]).unwrap();
        assert!((loss - 8f64.ln()).abs() < 1e-9);
        assert!((loss - 2.0794415).abs() < 1e-7);
    }

    #[test]
    fn empty_batch_is_an_error() {
        let p = MlpParams::zeros(&LayerSpec::gesture_default());
        assert!(matches!(loss_and_grad(&p, &[]), Err(NetError::EmptyBatch)));
    }

    #[test]
    fn sgd_arithmetic() {
        let spec = LayerSpec::new(vec![1, 1]).unwrap();
        let mut p = MlpParams::zeros(&spec);
        p.layers[0].weights[0] = 1.0;
        let mut g = MlpParams::zeros(&spec);
        g.layers[0].weights[0] = 2.0;
        sgd_step(&mut p, &g, 0.1).unwrap();
        assert!((p.layers[0].weights[0] - 0.8).abs() < 1e-15);

        let before = p.clone();
        sgd_step(&mut p, &MlpParams::zeros(&spec), 0.5).unwrap();
        assert_eq!(p, before);
        sgd_step(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);

        let other = MlpParams::zeros(&LayerSpec::new(vec![2, 1]).unwrap());
        assert!(matches!(sgd_step(&mut p, &other, 0.1), Err(NetError::ShapeMismatch)));
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn divergence_is_reported() {
        let spec = LayerSpec::new(vec![42, 8, 2]).unwrap();
        let data = Dataset {
            samples: (0..20).map(|i| sample(i % 2, &[1e150 * (i as f64 + 1.0)])).collect(),
            class_count: 2,
        };
        let cfg = TrainConfig {
            learning_rate: 1e10,
            epochs: 5,
            ..Default::default()
        };
        assert!(matches!(
            train(&data, &data, &spec, &cfg),
            Err(NetError::Diverged { .. })
        ));
    }
}
