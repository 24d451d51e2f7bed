//! AdamW with decoupled weight decay, linear warmup and halve-on-plateau.

use super::{ModelParams, TrainConfig};

/// Optimizer state: first/second moments per parameter, a global step
/// counter for bias correction, and the plateau schedule bookkeeping.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr_scale: f64,
    best_loss: f64,
    stale_epochs: usize,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            lr_scale: 1.0,
            best_loss: f64::INFINITY,
            stale_epochs: 0,
        }
    }

    /// Feeds the monitored epoch loss into the plateau schedule: after the
    /// warmup phase, `patience` consecutive non-improving epochs halve the
    /// learning rate.
    pub fn observe_epoch_loss(&mut self, loss: f64, epoch: usize, config: &TrainConfig) {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.stale_epochs = 0;
            return;
        }
        self.stale_epochs += 1;
        if epoch > config.warmup_epochs && self.stale_epochs >= config.plateau_patience {
            self.lr_scale *= 0.5;
            self.stale_epochs = 0;
        }
    }
}

/// Learning rate at a 1-based epoch: linear warmup to the base rate, scaled
/// by any plateau halvings so far.
pub fn effective_lr(config: &TrainConfig, state: &AdamState, epoch: usize) -> f64 {
    let warmup = if config.warmup_epochs > 0 {
        (epoch as f64 / config.warmup_epochs as f64).min(1.0)
    } else {
        1.0
    };
    config.learning_rate * warmup * state.lr_scale
}

/// One decoupled-weight-decay Adam update over a flat parameter slice.
/// `lr` is the already-scheduled learning rate for this step.
pub fn adamw_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
    config: &TrainConfig,
) {
    debug_assert_eq!(params.len(), grads.len());
    let b1 = config.beta1;
    let b2 = config.beta2;
    let bias1 = 1.0 - b1.powi(step as i32);
    let bias2 = 1.0 - b2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        // Decoupled decay first, then the adaptive step.
        params[i] *= 1.0 - lr * config.weight_decay;
        params[i] -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

/// Applies one AdamW step to the whole model at the given 1-based epoch.
pub fn adamw_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    config: &TrainConfig,
    epoch: usize,
) {
    state.step += 1;
    let lr = effective_lr(config, state, epoch);
    let mut offset = 0;
    for (layer, glayer) in params.layers_mut().into_iter().zip(grads.layers()) {
        let nw = layer.w.len();
        adamw_update(
            &mut layer.w,
            &glayer.w,
            &mut state.m[offset..offset + nw],
            &mut state.v[offset..offset + nw],
            state.step,
            lr,
            config,
        );
        offset += nw;
        let nb = layer.b.len();
        adamw_update(
            &mut layer.b,
            &glayer.b,
            &mut state.m[offset..offset + nb],
            &mut state.v[offset..offset + nb],
            state.step,
            lr,
            config,
        );
        offset += nb;
    }
    debug_assert_eq!(offset, state.m.len());
}
