//! Desk-scale trainable per-point regressor with a semantic head and a
//! canonical offset head.
//!
//! The trunk is a small PointNet-style encoder: a shared per-point MLP, one
//! neighborhood context block (mean pool over the k nearest neighbors within
//! the frame) and one temporal context block (mean over the same point index
//! across frames). Everything runs in f64 with hand-written backprop so
//! analytic gradients can be checked against finite differences exactly.

mod net;
mod optim;
mod train;

pub use net::{backward, forward, prepare_sample, ForwardPass, PreparedSample, SemanticLoss};
pub use optim::{adamw_step, adamw_update, effective_lr, AdamState};
pub use train::{
    curve_to_csv, sample_loss_and_grads, sample_loss_and_grads_with, train, EpochRecord,
    LossBreakdown, TrainSample,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use thiserror::Error;

use crate::formats::{self, FormatError, NamedTensor};

pub const INPUT_DIM: usize = 7;
pub const ENC_WIDTH: usize = 64;
pub const TRUNK_WIDTH: usize = 128;
pub const NUM_CLASSES: usize = 6;
/// Neighborhood size of the spatial context block.
pub const NEIGHBORS: usize = 16;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("checkpoint does not match the architecture: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Dense layer, row-major weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w: vec![0.0; fan_in * fan_out],
            b: vec![0.0; fan_out],
            fan_in,
            fan_out,
        }
    }

    fn seeded(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self {
            w: (0..fan_in * fan_out)
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * limit)
                .collect(),
            b: vec![0.0; fan_out],
            fan_in,
            fan_out,
        }
    }

    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.fan_in);
        debug_assert_eq!(out.len(), self.fan_out);
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &self.w[o * self.fan_in..(o + 1) * self.fan_in];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *out_o = acc;
        }
    }

    /// Accumulates dL/dW += dz ⊗ x, dL/db += dz.
    pub fn accumulate(&mut self, dz: &[f64], x: &[f64]) {
        for (o, &g) in dz.iter().enumerate() {
            self.b[o] += g;
            let row = &mut self.w[o * self.fan_in..(o + 1) * self.fan_in];
            for (wi, xi) in row.iter_mut().zip(x) {
                *wi += g * xi;
            }
        }
    }

    /// Adds Wᵀ dz into dx.
    pub fn backprop_into(&self, dz: &[f64], dx: &mut [f64]) {
        for (o, &g) in dz.iter().enumerate() {
            let row = &self.w[o * self.fan_in..(o + 1) * self.fan_in];
            for (di, wi) in dx.iter_mut().zip(row) {
                *di += g * wi;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// All trainable parameters. The same struct doubles as gradient storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub enc1: Linear,
    pub enc2: Linear,
    pub neighborhood: Linear,
    pub temporal: Linear,
    pub sem_head: Linear,
    pub offset_head: Linear,
}

impl ModelParams {
    /// Bit-reproducible seeded initialization.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            enc1: Linear::seeded(&mut rng, INPUT_DIM, ENC_WIDTH),
            enc2: Linear::seeded(&mut rng, ENC_WIDTH, ENC_WIDTH),
            neighborhood: Linear::seeded(&mut rng, 2 * ENC_WIDTH, TRUNK_WIDTH),
            temporal: Linear::seeded(&mut rng, 2 * TRUNK_WIDTH, TRUNK_WIDTH),
            sem_head: Linear::seeded(&mut rng, TRUNK_WIDTH, NUM_CLASSES),
            offset_head: Linear::seeded(&mut rng, TRUNK_WIDTH, 3),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            enc1: Linear::zeros(self.enc1.fan_in, self.enc1.fan_out),
            enc2: Linear::zeros(self.enc2.fan_in, self.enc2.fan_out),
            neighborhood: Linear::zeros(self.neighborhood.fan_in, self.neighborhood.fan_out),
            temporal: Linear::zeros(self.temporal.fan_in, self.temporal.fan_out),
            sem_head: Linear::zeros(self.sem_head.fan_in, self.sem_head.fan_out),
            offset_head: Linear::zeros(self.offset_head.fan_in, self.offset_head.fan_out),
        }
    }

    pub fn layers(&self) -> [&Linear; 6] {
        [
            &self.enc1,
            &self.enc2,
            &self.neighborhood,
            &self.temporal,
            &self.sem_head,
            &self.offset_head,
        ]
    }

    pub fn layers_mut(&mut self) -> [&mut Linear; 6] {
        [
            &mut self.enc1,
            &mut self.enc2,
            &mut self.neighborhood,
            &mut self.temporal,
            &mut self.sem_head,
            &mut self.offset_head,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// Scales every parameter; used for gradient averaging over batches.
    pub fn scale(&mut self, factor: f64) {
        for layer in self.layers_mut() {
            for w in layer.w.iter_mut() {
                *w *= factor;
            }
            for b in layer.b.iter_mut() {
                *b *= factor;
            }
        }
    }

    pub fn add(&mut self, other: &ModelParams) {
        for (dst, src) in self.layers_mut().into_iter().zip(other.layers()) {
            for (a, b) in dst.w.iter_mut().zip(&src.w) {
                *a += b;
            }
            for (a, b) in dst.b.iter_mut().zip(&src.b) {
                *a += b;
            }
        }
    }

    const LAYER_NAMES: [&'static str; 6] = [
        "enc1",
        "enc2",
        "neighborhood",
        "temporal",
        "sem_head",
        "offset_head",
    ];

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut tensors = Vec::new();
        for (name, layer) in Self::LAYER_NAMES.iter().zip(self.layers()) {
            tensors.push(NamedTensor {
                name: format!("{name}.w"),
                shape: vec![layer.fan_out, layer.fan_in],
                data: layer.w.clone(),
            });
            tensors.push(NamedTensor {
                name: format!("{name}.b"),
                shape: vec![layer.fan_out],
                data: layer.b.clone(),
            });
        }
        formats::write_checkpoint(path, &tensors)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let tensors = formats::read_checkpoint(path)?;
        let mut params = ModelParams::seeded(0).zeros_like();
        if tensors.len() != 12 {
            return Err(ModelError::BadCheckpoint(format!(
                "expected 12 tensors, found {}",
                tensors.len()
            )));
        }
        for (i, (name, layer)) in Self::LAYER_NAMES
            .iter()
            .zip(params.layers_mut())
            .enumerate()
        {
            let wt = &tensors[2 * i];
            let bt = &tensors[2 * i + 1];
            if wt.name != format!("{name}.w")
                || bt.name != format!("{name}.b")
                || wt.shape != vec![layer.fan_out, layer.fan_in]
                || bt.shape != vec![layer.fan_out]
            {
                return Err(ModelError::BadCheckpoint(format!(
                    "tensor {i} mismatch: found {} {:?}",
                    wt.name, wt.shape
                )));
            }
            layer.w.copy_from_slice(&wt.data);
            layer.b.copy_from_slice(&bt.data);
        }
        Ok(params)
    }
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    pub plateau_patience: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if v <= 0.0 || v.is_nan() {
                return Err(ModelError::BadConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.weight_decay < 0.0 {
            return Err(ModelError::BadConfig("weight_decay must be non-negative".into()));
        }
        if self.plateau_patience < 1 {
            return Err(ModelError::BadConfig("plateau_patience must be at least 1".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ModelError::BadConfig("epochs and batch_size must be positive".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
            warmup_epochs: 10,
            plateau_patience: 10,
            epochs: 200,
            batch_size: 1,
            seed: 42,
        }
    }
}
