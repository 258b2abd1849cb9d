//! Seeded Gaussian-blob classification fixtures.
//!
//! Each class is an isotropic Gaussian around its own random center. Labels
//! are assigned round-robin so both splits stay class-balanced, and the whole
//! dataset is a pure function of its configuration.

use octav_core::{Error, Result, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Shape and difficulty of a Gaussian-blob dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobConfig {
    pub classes: usize,
    pub dim: usize,
    pub train: usize,
    pub test: usize,
    /// Standard deviation of the class-center coordinates.
    pub center_scale: f64,
    /// Within-class standard deviation; larger values blur the classes.
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            dim: 16,
            train: 8000,
            test: 2000,
            center_scale: 2.0,
            noise: 1.0,
            seed: 1,
        }
    }
}

impl BlobConfig {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidParameter {
                reason: format!("need at least 2 classes, got {}", self.classes),
            });
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter {
                reason: "feature dimension must be positive".to_string(),
            });
        }
        if self.train < self.classes || self.test < self.classes {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "splits must cover every class: train {}, test {}, classes {}",
                    self.train, self.test, self.classes
                ),
            });
        }
        for (name, v) in [("center_scale", self.center_scale), ("noise", self.noise)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter {
                    reason: format!("{name} must be positive and finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// A train/test split of labeled feature rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    train_x: Tensor,
    train_y: Vec<usize>,
    test_x: Tensor,
    test_y: Vec<usize>,
    classes: usize,
}

impl Dataset {
    /// Samples a blob dataset. The same configuration always produces
    /// bit-identical data.
    pub fn gaussian_blobs(cfg: &BlobConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let center = Normal::new(0.0, cfg.center_scale).expect("finite std");
        let noise = Normal::new(0.0, cfg.noise).expect("finite std");

        let centers: Vec<f64> =
            (0..cfg.classes * cfg.dim).map(|_| center.sample(&mut rng)).collect();

        let mut draw_split = |count: usize| -> Result<(Tensor, Vec<usize>)> {
            let mut x = Vec::with_capacity(count * cfg.dim);
            let mut y = Vec::with_capacity(count);
            for i in 0..count {
                let label = i % cfg.classes;
                let c = &centers[label * cfg.dim..(label + 1) * cfg.dim];
                for &coord in c {
                    x.push(coord + noise.sample(&mut rng));
                }
                y.push(label);
            }
            Ok((Tensor::from_vec(x, &[count, cfg.dim])?, y))
        };

        let (train_x, train_y) = draw_split(cfg.train)?;
        let (test_x, test_y) = draw_split(cfg.test)?;
        Ok(Self { train_x, train_y, test_x, test_y, classes: cfg.classes })
    }

    pub fn train_x(&self) -> &Tensor {
        &self.train_x
    }

    pub fn train_y(&self) -> &[usize] {
        &self.train_y
    }

    pub fn test_x(&self) -> &Tensor {
        &self.test_x
    }

    pub fn test_y(&self) -> &[usize] {
        &self.test_y
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dim(&self) -> usize {
        self.train_x.shape()[1]
    }

    pub fn train_len(&self) -> usize {
        self.train_y.len()
    }

    pub fn test_len(&self) -> usize {
        self.test_y.len()
    }

    /// Gathers the training rows at `indices` into a batch.
    ///
    /// Panics if an index is out of range, like slice indexing.
    pub fn train_batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let dim = self.dim();
        let mut x = Vec::with_capacity(indices.len() * dim);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(&self.train_x.data()[i * dim..(i + 1) * dim]);
            y.push(self.train_y[i]);
        }
        let t = Tensor::from_vec(x, &[indices.len(), dim]).expect("batch shape is consistent");
        (t, y)
    }
}
