use serde::{Deserialize, Serialize};

use super::{forward, MlpParams, NetError};
use crate::dataset::Dataset;
use crate::gesture::{GestureEvent, GestureLabel};

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Accuracy plus confusion counts (`confusion[true][predicted]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn from_predictions(
        class_count: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Self {
        let mut confusion = vec![vec![0; class_count]; class_count];
        let mut total = 0usize;
        for (truth, pred) in pairs {
            confusion[truth][pred] += 1;
            total += 1;
        }
        let trace: usize = (0..class_count).map(|i| confusion[i][i]).sum();
        let accuracy = if total == 0 { 0.0 } else { trace as f64 / total as f64 };
        Self { accuracy, confusion }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum()
    }

    /// The most frequent off-diagonal cell as `(true, predicted, count)`.
    pub fn worst_confusion(&self) -> Option<(usize, usize, usize)> {
        let mut worst = None;
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                if t != p && c > 0 && worst.map_or(true, |(_, _, w)| c > w) {
                    worst = Some((t, p, c));
                }
            }
        }
        worst
    }
}

pub fn evaluate(params: &MlpParams, dataset: &Dataset) -> Result<EvalReport, NetError> {
    if dataset.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let m = params.spec.output_len();
    let mut pairs = Vec::with_capacity(dataset.len());
    for s in &dataset.samples {
        let (_, p) = forward(params, &s.features)?;
        pairs.push((s.label.id(), p.top().0));
    }
    Ok(EvalReport::from_predictions(m.max(dataset.class_count), pairs))
}

/// Most probable gesture, or `None` when its probability is below `threshold`.
pub fn predict(
    params: &MlpParams,
    features: &[f64],
    threshold: f64,
) -> Result<Option<GestureEvent>, NetError> {
    let (_, p) = forward(params, features)?;
    Ok(event_from_probabilities(&p.0, threshold))
}

pub(crate) fn event_from_probabilities(p: &[f64], threshold: f64) -> Option<GestureEvent> {
    let i = argmax(p);
    let confidence = p[i];
    if confidence < threshold {
        return None;
    }
    GestureLabel::new(i).map(|label| GestureEvent { label, confidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledSample;
    use crate::landmark::FeatureVector;
    use crate::nn::LayerSpec;

    fn balanced(per_class: usize) -> Dataset {
        let samples = GestureLabel::all()
            .flat_map(|l| {
                (0..per_class).map(move |k| LabeledSample {
                    label: l,
                    features: FeatureVector::from_slice(&[k as f64 * 0.01; 42]).unwrap(),
                })
            })
            .collect();
        Dataset {
            samples,
            class_count: 8,
        }
    }

    #[test]
    fn zero_model_predicts_class_zero() {
        let p = MlpParams::zeros(&LayerSpec::gesture_default());
        let r = evaluate(&p, &balanced(5)).unwrap();
        assert!((r.accuracy - 0.125).abs() < 1e-15);
        assert!(r.confusion.iter().all(|row| row[0] == 5));
        assert_eq!(r.correct() as f64 / r.total() as f64, r.accuracy);
    }

    #[test]
    fn small_set_accuracy_arithmetic() {
        // 93.5% of 8 × 50 validation samples
        let pairs = (0..400).map(|i| (i % 8, if i < 374 { i % 8 } else { (i + 7) % 8 }));
        let r = EvalReport::from_predictions(8, pairs);
        assert_eq!(r.correct(), 374);
        assert!((r.accuracy - 0.935).abs() < 1e-12);
    }

    #[test]
    fn worst_confusion_cell() {
        let r = EvalReport::from_predictions(8, [(0, 7), (0, 7), (1, 1), (2, 3)]);
        assert_eq!(r.worst_confusion(), Some((0, 7, 2)));
    }

    #[test]
    fn prediction_threshold() {
        let uniform = [0.125; 8];
        assert_eq!(event_from_probabilities(&uniform, 0.5), None);
        assert_eq!(
            event_from_probabilities(&uniform, 0.0).map(|e| e.label),
            Some(GestureLabel::FIST)
        );
        let mut peaked = [0.1 / 7.0; 8];
        peaked[0] = 0.9;
        let e = event_from_probabilities(&peaked, 0.8).unwrap();
        assert_eq!(e.label.id(), 0);
        assert_eq!(e.confidence, 0.9);

        let p = MlpParams::zeros(&LayerSpec::gesture_default());
        assert_eq!(predict(&p, &[0.0; 42], 0.5).unwrap(), None);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5, 0.1]), 1);
        assert_eq!(argmax(&[1.0]), 0);
    }
}
