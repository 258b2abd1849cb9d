//! Plain-SGD training with per-epoch held-out accuracy.
//!
//! The optimizer is deliberately bare: fixed learning rate, no momentum, no
//! weight decay. Momentum would smear zero gradients across iterations and
//! break the exact cumulative-update bookkeeping in [`crate::learned`].

use crate::data::Dataset;
use crate::net::{forward_backward, ToyNet};
use octav_core::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;

/// Epoch count, batch size, learning rate, and shuffle seed for [`train_toy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 128, learning_rate: 0.05, shuffle_seed: 0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                reason: "epochs and batch size must be positive".to_string(),
            });
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter {
                reason: format!("learning rate must be positive, got {}", self.learning_rate),
            });
        }
        Ok(())
    }
}

/// Held-out accuracy measured after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyCurve {
    per_epoch: Vec<f64>,
}

impl AccuracyCurve {
    pub fn new(per_epoch: Vec<f64>) -> Self {
        Self { per_epoch }
    }

    pub fn per_epoch(&self) -> &[f64] {
        &self.per_epoch
    }

    pub fn len(&self) -> usize {
        self.per_epoch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_epoch.is_empty()
    }

    /// Accuracy after the last epoch.
    pub fn final_accuracy(&self) -> f64 {
        *self.per_epoch.last().expect("curve has at least one epoch")
    }

    /// Largest peak-to-trough drop within the last `tail` epochs. A smooth
    /// non-decreasing tail returns 0.
    pub fn max_late_drop(&self, tail: usize) -> f64 {
        let start = self.per_epoch.len().saturating_sub(tail);
        let window = &self.per_epoch[start..];
        let mut peak = f64::NEG_INFINITY;
        let mut drop = 0.0f64;
        for &a in window {
            peak = peak.max(a);
            drop = drop.max(peak - a);
        }
        drop
    }

    /// Writes `epoch,accuracy` rows with a header; epochs count from 1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,accuracy")?;
        for (i, a) in self.per_epoch.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, a)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("curve serializes")
    }
}

/// Trains `net` in place with plain SGD and returns the accuracy curve on the
/// held-out split. Identical seeds and inputs give bit-identical curves.
pub fn train_toy(net: &mut ToyNet, data: &Dataset, cfg: &TrainConfig) -> Result<AccuracyCurve> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut indices: Vec<usize> = (0..data.train_len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(cfg.batch_size) {
            let (bx, by) = data.train_batch(chunk);
            let (_, grads) = forward_backward(net, &bx, &by)?;
            for l in 0..net.layer_count() {
                net.apply_update(l, &grads.weights[l], cfg.learning_rate)?;
            }
        }
        curve.push(net.accuracy(data.test_x(), data.test_y())?);
    }
    Ok(AccuracyCurve::new(curve))
}
