//! Deterministic single-threaded training loop.

use nalgebra::Vector3;

use super::net::{self, PreparedSample, SemanticLoss};
use super::optim::{adamw_step, effective_lr, AdamState};
use super::{ModelError, ModelParams, TrainConfig};
use crate::losses::OffsetField;

/// One training sample: prepared inputs, per-point class labels and offset
/// supervision.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub prepared: PreparedSample,
    pub labels: Vec<usize>,
    pub targets: Vec<Vector3<f64>>,
    pub mask: Vec<bool>,
}

impl TrainSample {
    pub fn from_offsets(prepared: PreparedSample, labels: Vec<usize>, field: &OffsetField) -> Self {
        Self {
            prepared,
            labels,
            targets: field.target.clone(),
            mask: field.mask.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub sem: f64,
    pub canon: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        crate::losses::total_loss(self.sem, self.canon)
    }
}

/// Loss curve entry for one epoch (means over the training set).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_sem: f64,
    pub l_canon: f64,
    pub lr: f64,
}

/// Forward + losses + exact backward for one sample.
pub fn sample_loss_and_grads(
    params: &ModelParams,
    sample: &TrainSample,
) -> Result<(LossBreakdown, ModelParams), ModelError> {
    sample_loss_and_grads_with(params, sample, SemanticLoss::Lovasz)
}

pub fn sample_loss_and_grads_with(
    params: &ModelParams,
    sample: &TrainSample,
    sem_loss: SemanticLoss,
) -> Result<(LossBreakdown, ModelParams), ModelError> {
    let pass = net::forward(params, &sample.prepared);
    let lg = net::output_losses(&pass, &sample.labels, &sample.targets, &sample.mask, sem_loss)
        .map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
    let grads = net::backward(params, &sample.prepared, &pass, &lg.dlogits, &lg.doffsets);
    Ok((
        LossBreakdown {
            sem: lg.sem,
            canon: lg.canon,
        },
        grads,
    ))
}

/// Trains the model end to end. Deterministic: seeded initialization, fixed
/// sample order, single-threaded accumulation. Returns the trained
/// parameters and the per-epoch loss curve.
pub fn train(
    samples: &[TrainSample],
    config: &TrainConfig,
    sem_loss: SemanticLoss,
) -> Result<(ModelParams, Vec<EpochRecord>), ModelError> {
    assert!(!samples.is_empty(), "training set must not be empty");
    config.validate()?;
    let mut params = ModelParams::seeded(config.seed);
    let mut state = AdamState::new(params.param_count());
    let mut curve = Vec::with_capacity(config.epochs);
    let batch = config.batch_size.max(1);

    for epoch in 1..=config.epochs {
        let mut sem_sum = 0.0;
        let mut canon_sum = 0.0;
        for chunk in samples.chunks(batch) {
            let mut grads = params.zeros_like();
            for sample in chunk {
                let (loss, g) = sample_loss_and_grads_with(&params, sample, sem_loss)?;
                if !loss.total().is_finite() {
                    return Err(ModelError::Diverged { epoch });
                }
                sem_sum += loss.sem;
                canon_sum += loss.canon;
                grads.add(&g);
            }
            grads.scale(1.0 / chunk.len() as f64);
            adamw_step(&mut params, &grads, &mut state, config, epoch);
        }
        let n = samples.len() as f64;
        let record = EpochRecord {
            epoch,
            l_sem: sem_sum / n,
            l_canon: canon_sum / n,
            lr: effective_lr(config, &state, epoch),
        };
        state.observe_epoch_loss(record.l_sem + record.l_canon, epoch, config);
        curve.push(record);
    }
    Ok((params, curve))
}

/// Loss curve serialization: `epoch,l_sem,l_canon,lr` per line.
pub fn curve_to_csv(curve: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,l_sem,l_canon,lr\n");
    for r in curve {
        out.push_str(&format!("{},{:.12},{:.12},{:.12}\n", r.epoch, r.l_sem, r.l_canon, r.lr));
    }
    out
}
