use serde::{Deserialize, Serialize};

use super::QuantError;
use crate::nn::MlpParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneConfig {
    /// Fraction of each weight matrix to zero, smallest magnitudes first.
    pub target_sparsity: f64,
}

impl PruneConfig {
    pub fn new(target_sparsity: f64) -> Result<Self, QuantError> {
        if !(0.0..1.0).contains(&target_sparsity) {
            return Err(QuantError::Sparsity(target_sparsity));
        }
        Ok(Self { target_sparsity })
    }
}

/// Zeros the `⌊sparsity · len⌋` smallest-magnitude weights of every matrix.
/// Ties are broken by position; biases are untouched.
pub fn prune_magnitude(params: &MlpParams, config: &PruneConfig) -> MlpParams {
    let mut out = params.clone();
    for layer in &mut out.layers {
        let k = (config.target_sparsity * layer.weights.len() as f64).floor() as usize;
        if k == 0 {
            continue;
        }
        let mut order: Vec<usize> = (0..layer.weights.len()).collect();
        // stable sort keeps index order among equal magnitudes
        order.sort_by(|&a, &b| layer.weights[a].abs().total_cmp(&layer.weights[b].abs()));
        for &i in &order[..k] {
            layer.weights[i] = 0.0;
        }
    }
    out
}
