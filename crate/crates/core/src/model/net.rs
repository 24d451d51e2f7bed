//! Forward and backward passes of the per-point regressor.
//!
//! Neighborhoods and input features depend only on the sample, so they are
//! prepared once and reused across epochs. All reductions run in fixed index
//! order; outputs are bit-deterministic for a given sample and parameters.

use nalgebra::Vector3;

use super::{ModelParams, ENC_WIDTH, INPUT_DIM, NEIGHBORS, NUM_CLASSES, TRUNK_WIDTH};
use crate::losses::{
    self, ClassProbabilities, LossError, OffsetField,
};
use crate::sensing::SequenceSample;

/// Semantic objective selector; cross-entropy is the ablation alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticLoss {
    Lovasz,
    CrossEntropy,
}

/// Input tensors plus per-frame k-nearest-neighbor lists (CSR layout).
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub frames: usize,
    pub points_per_frame: usize,
    /// (x, y, z, r, g, b, s/(S-1)) per point, frame-major.
    pub features: Vec<f64>,
    neighbor_offsets: Vec<u32>,
    neighbor_ids: Vec<u32>,
}

impl PreparedSample {
    pub fn total_points(&self) -> usize {
        self.frames * self.points_per_frame
    }

    fn neighbors_of(&self, t: usize) -> &[u32] {
        let lo = self.neighbor_offsets[t] as usize;
        let hi = self.neighbor_offsets[t + 1] as usize;
        &self.neighbor_ids[lo..hi]
    }
}

/// Computes input features and k-nearest neighborhoods (excluding the point
/// itself; a lone point is its own neighborhood). Ties in the distance sort
/// resolve by point index.
pub fn prepare_sample(sample: &SequenceSample) -> PreparedSample {
    let s_total = sample.frames.len();
    let n = sample.points_per_frame();
    let mut features = Vec::with_capacity(s_total * n * INPUT_DIM);
    for (s, frame) in sample.frames.iter().enumerate() {
        let time = if s_total > 1 {
            s as f64 / (s_total - 1) as f64
        } else {
            0.0
        };
        for i in 0..n {
            let p = frame.positions[i];
            let c = frame.colors[i];
            features.extend_from_slice(&[p.x, p.y, p.z, c[0], c[1], c[2], time]);
        }
    }

    let mut neighbor_offsets = Vec::with_capacity(s_total * n + 1);
    let mut neighbor_ids = Vec::new();
    neighbor_offsets.push(0u32);
    for (s, frame) in sample.frames.iter().enumerate() {
        for i in 0..n {
            let p = frame.positions[i];
            if n == 1 {
                neighbor_ids.push((s * n + i) as u32);
            } else {
                let k = NEIGHBORS.min(n - 1);
                let mut cand: Vec<(u64, u32)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d = (frame.positions[j] - p).norm_squared();
                        (d.to_bits(), j as u32)
                    })
                    .collect();
                cand.select_nth_unstable(k - 1);
                let mut chosen: Vec<u32> = cand[..k].iter().map(|&(_, j)| j).collect();
                // Ascending index order fixes the summation order.
                chosen.sort_unstable();
                neighbor_ids.extend(chosen.into_iter().map(|j| (s * n) as u32 + j));
            }
            neighbor_offsets.push(neighbor_ids.len() as u32);
        }
    }
    PreparedSample {
        frames: s_total,
        points_per_frame: n,
        features,
        neighbor_offsets,
        neighbor_ids,
    }
}

/// Every intermediate activation of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub frames: usize,
    pub points_per_frame: usize,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    pooled: Vec<f64>,
    cat1: Vec<f64>,
    z3: Vec<f64>,
    a3: Vec<f64>,
    tmean: Vec<f64>,
    cat2: Vec<f64>,
    z4: Vec<f64>,
    a4: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub offsets: Vec<Vector3<f64>>,
}

fn relu_into(z: &[f64], a: &mut [f64]) {
    for (ai, &zi) in a.iter_mut().zip(z) {
        *ai = zi.max(0.0);
    }
}

/// Full forward pass: per-point encoder, neighborhood pooling, temporal
/// pooling, and the two heads. Softmax probabilities are included.
pub fn forward(params: &ModelParams, prep: &PreparedSample) -> ForwardPass {
    let total = prep.total_points();
    let (s_total, n) = (prep.frames, prep.points_per_frame);
    let mut pass = ForwardPass {
        frames: s_total,
        points_per_frame: n,
        z1: vec![0.0; total * ENC_WIDTH],
        a1: vec![0.0; total * ENC_WIDTH],
        z2: vec![0.0; total * ENC_WIDTH],
        a2: vec![0.0; total * ENC_WIDTH],
        pooled: vec![0.0; total * ENC_WIDTH],
        cat1: vec![0.0; total * 2 * ENC_WIDTH],
        z3: vec![0.0; total * TRUNK_WIDTH],
        a3: vec![0.0; total * TRUNK_WIDTH],
        tmean: vec![0.0; n * TRUNK_WIDTH],
        cat2: vec![0.0; total * 2 * TRUNK_WIDTH],
        z4: vec![0.0; total * TRUNK_WIDTH],
        a4: vec![0.0; total * TRUNK_WIDTH],
        logits: vec![0.0; total * NUM_CLASSES],
        probs: vec![0.0; total * NUM_CLASSES],
        offsets: vec![Vector3::zeros(); total],
    };

    for t in 0..total {
        let x = &prep.features[t * INPUT_DIM..(t + 1) * INPUT_DIM];
        let z1 = &mut pass.z1[t * ENC_WIDTH..(t + 1) * ENC_WIDTH];
        params.enc1.forward_into(x, z1);
        relu_into(z1, &mut pass.a1[t * ENC_WIDTH..(t + 1) * ENC_WIDTH]);
        let a1 = &pass.a1[t * ENC_WIDTH..(t + 1) * ENC_WIDTH];
        let z2 = &mut pass.z2[t * ENC_WIDTH..(t + 1) * ENC_WIDTH];
        params.enc2.forward_into(a1, z2);
        relu_into(z2, &mut pass.a2[t * ENC_WIDTH..(t + 1) * ENC_WIDTH]);
    }

    for t in 0..total {
        let nb = prep.neighbors_of(t);
        let pooled = &mut pass.pooled[t * ENC_WIDTH..(t + 1) * ENC_WIDTH];
        for &j in nb {
            let aj = &pass.a2[j as usize * ENC_WIDTH..(j as usize + 1) * ENC_WIDTH];
            for (p, a) in pooled.iter_mut().zip(aj) {
                *p += a;
            }
        }
        let inv = 1.0 / nb.len() as f64;
        for p in pooled.iter_mut() {
            *p *= inv;
        }
        let cat1 = &mut pass.cat1[t * 2 * ENC_WIDTH..(t + 1) * 2 * ENC_WIDTH];
        cat1[..ENC_WIDTH].copy_from_slice(&pass.a2[t * ENC_WIDTH..(t + 1) * ENC_WIDTH]);
        cat1[ENC_WIDTH..].copy_from_slice(pooled);
        let z3 = &mut pass.z3[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH];
        params.neighborhood.forward_into(cat1, z3);
        relu_into(z3, &mut pass.a3[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH]);
    }

    let inv_s = 1.0 / s_total as f64;
    for i in 0..n {
        let tm = &mut pass.tmean[i * TRUNK_WIDTH..(i + 1) * TRUNK_WIDTH];
        for s in 0..s_total {
            let a3 = &pass.a3[(s * n + i) * TRUNK_WIDTH..(s * n + i + 1) * TRUNK_WIDTH];
            for (m, a) in tm.iter_mut().zip(a3) {
                *m += a;
            }
        }
        for m in tm.iter_mut() {
            *m *= inv_s;
        }
    }

    for t in 0..total {
        let i = t % n;
        let cat2 = &mut pass.cat2[t * 2 * TRUNK_WIDTH..(t + 1) * 2 * TRUNK_WIDTH];
        cat2[..TRUNK_WIDTH].copy_from_slice(&pass.a3[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH]);
        cat2[TRUNK_WIDTH..]
            .copy_from_slice(&pass.tmean[i * TRUNK_WIDTH..(i + 1) * TRUNK_WIDTH]);
        let z4 = &mut pass.z4[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH];
        params.temporal.forward_into(cat2, z4);
        relu_into(z4, &mut pass.a4[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH]);

        let a4 = &pass.a4[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH];
        let logits = &mut pass.logits[t * NUM_CLASSES..(t + 1) * NUM_CLASSES];
        params.sem_head.forward_into(a4, logits);
        let mut off = [0.0; 3];
        params.offset_head.forward_into(a4, &mut off);
        pass.offsets[t] = Vector3::new(off[0], off[1], off[2]);

        let probs = &mut pass.probs[t * NUM_CLASSES..(t + 1) * NUM_CLASSES];
        softmax_into(logits, probs);
    }
    pass
}

fn softmax_into(logits: &[f64], probs: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = (z - max).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

/// Semantic + canonical losses of a forward pass, and the gradients at the
/// two output layers.
pub struct LossGrads {
    pub sem: f64,
    pub canon: f64,
    pub dlogits: Vec<f64>,
    pub doffsets: Vec<Vector3<f64>>,
}

pub(super) fn output_losses(
    pass: &ForwardPass,
    labels: &[usize],
    targets: &[Vector3<f64>],
    mask: &[bool],
    sem_loss: SemanticLoss,
) -> Result<LossGrads, LossError> {
    let total = pass.offsets.len();
    assert_eq!(labels.len(), total);
    let probs = ClassProbabilities {
        data: pass.probs.clone(),
        classes: NUM_CLASSES,
    };
    let (sem, dprobs) = match sem_loss {
        SemanticLoss::Lovasz => (
            losses::lovasz_softmax(&probs, labels)?,
            losses::lovasz_softmax_grad(&probs, labels)?,
        ),
        SemanticLoss::CrossEntropy => (
            losses::cross_entropy(&probs, labels)?,
            losses::cross_entropy_grad(&probs, labels)?,
        ),
    };
    // Chain rule through the softmax: dz_j = p_j (dp_j - sum_k dp_k p_k).
    let mut dlogits = vec![0.0; total * NUM_CLASSES];
    for t in 0..total {
        let p = &pass.probs[t * NUM_CLASSES..(t + 1) * NUM_CLASSES];
        let dp = &dprobs[t * NUM_CLASSES..(t + 1) * NUM_CLASSES];
        let dot: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
        for c in 0..NUM_CLASSES {
            dlogits[t * NUM_CLASSES + c] = p[c] * (dp[c] - dot);
        }
    }

    let field = OffsetField {
        predicted: pass.offsets.clone(),
        target: targets.to_vec(),
        mask: mask.to_vec(),
        frames: pass.frames,
        points_per_frame: pass.points_per_frame,
    };
    let canon = losses::l_canon(&field);
    let doffsets = losses::l_canon_grad(&field);
    Ok(LossGrads {
        sem,
        canon,
        dlogits,
        doffsets,
    })
}

/// Exact analytic gradients of the total loss with respect to every
/// parameter. Head parameters only ever receive their own term's gradient;
/// the shared trunk receives both.
pub fn backward(
    params: &ModelParams,
    prep: &PreparedSample,
    pass: &ForwardPass,
    dlogits: &[f64],
    doffsets: &[Vector3<f64>],
) -> ModelParams {
    let total = prep.total_points();
    let (s_total, n) = (prep.frames, prep.points_per_frame);
    let mut grads = params.zeros_like();

    let mut da4 = vec![0.0; total * TRUNK_WIDTH];
    for t in 0..total {
        let a4 = &pass.a4[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH];
        let dl = &dlogits[t * NUM_CLASSES..(t + 1) * NUM_CLASSES];
        grads.sem_head.accumulate(dl, a4);
        params
            .sem_head
            .backprop_into(dl, &mut da4[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH]);
        let doff = [doffsets[t].x, doffsets[t].y, doffsets[t].z];
        grads.offset_head.accumulate(&doff, a4);
        params
            .offset_head
            .backprop_into(&doff, &mut da4[t * TRUNK_WIDTH..(t + 1) * TRUNK_WIDTH]);
    }

    let mut da3 = vec![0.0; total * TRUNK_WIDTH];
    let mut dtmean = vec![0.0; n * TRUNK_WIDTH];
    let mut dcat2 = vec![0.0; 2 * TRUNK_WIDTH];
    for t in 0..total {
        let mut dz4 = [0.0; TRUNK_WIDTH];
        for c in 0..TRUNK_WIDTH {
            if pass.z4[t * TRUNK_WIDTH + c] > 0.0 {
                dz4[c] = da4[t * TRUNK_WIDTH + c];
            }
        }
        let cat2 = &pass.cat2[t * 2 * TRUNK_WIDTH..(t + 1) * 2 * TRUNK_WIDTH];
        grads.temporal.accumulate(&dz4, cat2);
        dcat2.fill(0.0);
        params.temporal.backprop_into(&dz4, &mut dcat2);
        for c in 0..TRUNK_WIDTH {
            da3[t * TRUNK_WIDTH + c] += dcat2[c];
        }
        let i = t % n;
        for c in 0..TRUNK_WIDTH {
            dtmean[i * TRUNK_WIDTH + c] += dcat2[TRUNK_WIDTH + c];
        }
    }
    // The temporal mean distributes its gradient evenly over frames.
    let inv_s = 1.0 / s_total as f64;
    for t in 0..total {
        let i = t % n;
        for c in 0..TRUNK_WIDTH {
            da3[t * TRUNK_WIDTH + c] += dtmean[i * TRUNK_WIDTH + c] * inv_s;
        }
    }

    let mut da2 = vec![0.0; total * ENC_WIDTH];
    let mut dcat1 = vec![0.0; 2 * ENC_WIDTH];
    for t in 0..total {
        let mut dz3 = [0.0; TRUNK_WIDTH];
        for c in 0..TRUNK_WIDTH {
            if pass.z3[t * TRUNK_WIDTH + c] > 0.0 {
                dz3[c] = da3[t * TRUNK_WIDTH + c];
            }
        }
        let cat1 = &pass.cat1[t * 2 * ENC_WIDTH..(t + 1) * 2 * ENC_WIDTH];
        grads.neighborhood.accumulate(&dz3, cat1);
        dcat1.fill(0.0);
        params.neighborhood.backprop_into(&dz3, &mut dcat1);
        for c in 0..ENC_WIDTH {
            da2[t * ENC_WIDTH + c] += dcat1[c];
        }
        // Mean pooling spreads the gradient over the neighborhood.
        let nb = prep.neighbors_of(t);
        let inv = 1.0 / nb.len() as f64;
        for &j in nb {
            let row = &mut da2[j as usize * ENC_WIDTH..(j as usize + 1) * ENC_WIDTH];
            for (d, g) in row.iter_mut().zip(&dcat1[ENC_WIDTH..]) {
                *d += g * inv;
            }
        }
    }

    for t in 0..total {
        let mut dz2 = [0.0; ENC_WIDTH];
        for c in 0..ENC_WIDTH {
            if pass.z2[t * ENC_WIDTH + c] > 0.0 {
                dz2[c] = da2[t * ENC_WIDTH + c];
            }
        }
        let a1 = &pass.a1[t * ENC_WIDTH..(t + 1) * ENC_WIDTH];
        grads.enc2.accumulate(&dz2, a1);
        let mut da1 = [0.0; ENC_WIDTH];
        params.enc2.backprop_into(&dz2, &mut da1);
        let mut dz1 = [0.0; ENC_WIDTH];
        for c in 0..ENC_WIDTH {
            if pass.z1[t * ENC_WIDTH + c] > 0.0 {
                dz1[c] = da1[c];
            }
        }
        let x = &prep.features[t * INPUT_DIM..(t + 1) * INPUT_DIM];
        grads.enc1.accumulate(&dz1, x);
    }

    grads
}
