//! Training objectives: per-point offset losses (L1 distance + angular
//! alignment), their masked sequence aggregate, and the Lovász-Softmax
//! surrogate of the Jaccard loss for semantics. All losses come with
//! analytic gradients checked against finite differences in the test suite.

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("no points given")]
    EmptyInput,
    #[error("invalid class probabilities: {0}")]
    InvalidProbabilities(String),
}

/// Norms below this are treated as degenerate by the angle loss.
pub const ANGLE_NORM_GUARD: f64 = 1e-8;

/// Predicted and target per-point offsets for one sequence sample, plus the
/// things mask. Arrays are laid out frame-major: index `s * n + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    pub predicted: Vec<Vector3<f64>>,
    pub target: Vec<Vector3<f64>>,
    pub mask: Vec<bool>,
    pub frames: usize,
    pub points_per_frame: usize,
}

impl OffsetField {
    pub fn from_targets(
        target: Vec<Vector3<f64>>,
        mask: Vec<bool>,
        frames: usize,
        points_per_frame: usize,
    ) -> Self {
        assert_eq!(target.len(), frames * points_per_frame);
        assert_eq!(mask.len(), target.len());
        Self {
            predicted: vec![Vector3::zeros(); target.len()],
            target,
            mask,
            frames,
            points_per_frame,
        }
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

/// L1 distance between predicted and target offset.
pub fn l_dist(predicted: Vector3<f64>, target: Vector3<f64>) -> f64 {
    (predicted - target).abs().sum()
}

/// Gradient of [`l_dist`] with respect to the prediction: elementwise sign.
pub fn l_dist_grad(predicted: Vector3<f64>, target: Vector3<f64>) -> Vector3<f64> {
    (predicted - target).map(|d| {
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Directional alignment loss `1 - cos(angle)`. Returns 0 when either
/// vector is shorter than [`ANGLE_NORM_GUARD`].
pub fn l_angle(predicted: Vector3<f64>, target: Vector3<f64>) -> f64 {
    let np = predicted.norm();
    let nt = target.norm();
    if np < ANGLE_NORM_GUARD || nt < ANGLE_NORM_GUARD {
        return 0.0;
    }
    1.0 - predicted.dot(&target) / (np * nt)
}

/// Gradient of [`l_angle`] with respect to the prediction; zero in the
/// degenerate regime.
pub fn l_angle_grad(predicted: Vector3<f64>, target: Vector3<f64>) -> Vector3<f64> {
    let np = predicted.norm();
    let nt = target.norm();
    if np < ANGLE_NORM_GUARD || nt < ANGLE_NORM_GUARD {
        return Vector3::zeros();
    }
    let dot = predicted.dot(&target);
    predicted * (dot / (np.powi(3) * nt)) - target / (np * nt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CanonNormalization {
    /// Divide by frames x points, regardless of how many points are masked.
    SequencePoints,
    /// Divide by the number of masked-in points instead; opt-in since the
    /// default intentionally down-weights sparse things classes.
    MaskedCount,
}

/// Masked aggregate of distance + angle losses over a sequence sample.
pub fn l_canon(field: &OffsetField) -> f64 {
    l_canon_normalized(field, CanonNormalization::SequencePoints)
}

pub fn l_canon_normalized(field: &OffsetField, norm: CanonNormalization) -> f64 {
    let mut sum = 0.0;
    let mut masked = 0usize;
    for i in 0..field.len() {
        if field.mask[i] {
            sum += l_dist(field.predicted[i], field.target[i])
                + l_angle(field.predicted[i], field.target[i]);
            masked += 1;
        }
    }
    sum / canon_denominator(field, norm, masked)
}

/// Gradient of [`l_canon`] with respect to every predicted offset.
pub fn l_canon_grad(field: &OffsetField) -> Vec<Vector3<f64>> {
    l_canon_grad_normalized(field, CanonNormalization::SequencePoints)
}

pub fn l_canon_grad_normalized(
    field: &OffsetField,
    norm: CanonNormalization,
) -> Vec<Vector3<f64>> {
    let masked = field.mask.iter().filter(|&&m| m).count();
    let denom = canon_denominator(field, norm, masked);
    field
        .predicted
        .iter()
        .zip(&field.target)
        .zip(&field.mask)
        .map(|((&p, &t), &m)| {
            if m {
                (l_dist_grad(p, t) + l_angle_grad(p, t)) / denom
            } else {
                Vector3::zeros()
            }
        })
        .collect()
}

fn canon_denominator(field: &OffsetField, norm: CanonNormalization, masked: usize) -> f64 {
    match norm {
        CanonNormalization::SequencePoints => (field.frames * field.points_per_frame).max(1) as f64,
        CanonNormalization::MaskedCount => masked.max(1) as f64,
    }
}

/// Row-stochastic per-point class probabilities, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilities {
    pub data: Vec<f64>,
    pub classes: usize,
}

impl ClassProbabilities {
    pub fn new(data: Vec<f64>, classes: usize) -> Result<Self, LossError> {
        if classes == 0 || !data.len().is_multiple_of(classes) {
            return Err(LossError::InvalidProbabilities(format!(
                "{} values do not form rows of {classes}",
                data.len()
            )));
        }
        for (row, chunk) in data.chunks(classes).enumerate() {
            if chunk.iter().any(|&p| p < 0.0) {
                return Err(LossError::InvalidProbabilities(format!(
                    "negative entry in row {row}"
                )));
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(LossError::InvalidProbabilities(format!(
                    "row {row} sums to {sum}"
                )));
            }
        }
        Ok(Self { data, classes })
    }

    pub fn points(&self) -> usize {
        self.data.len() / self.classes
    }

    pub fn prob(&self, point: usize, class: usize) -> f64 {
        self.data[point * self.classes + class]
    }
}

/// Lovász-Softmax loss over the classes present in the labels.
///
/// Per class, the error vector is `1 - p(c)` on positives and `p(c)` on
/// negatives; errors are sorted descending (stable, ties keep point order)
/// and weighted by the discrete gradient of the Jaccard loss along that
/// ordering. The result is averaged over present classes and lies in [0, 1].
pub fn lovasz_softmax(probs: &ClassProbabilities, labels: &[usize]) -> Result<f64, LossError> {
    lovasz_parts(probs, labels).map(|(loss, _)| loss)
}

/// Gradient of [`lovasz_softmax`] with respect to every probability entry,
/// in the same row-major layout.
pub fn lovasz_softmax_grad(
    probs: &ClassProbabilities,
    labels: &[usize],
) -> Result<Vec<f64>, LossError> {
    lovasz_parts(probs, labels).map(|(_, grad)| grad)
}

fn lovasz_parts(
    probs: &ClassProbabilities,
    labels: &[usize],
) -> Result<(f64, Vec<f64>), LossError> {
    let n = probs.points();
    if n == 0 || labels.is_empty() {
        return Err(LossError::EmptyInput);
    }
    assert_eq!(labels.len(), n);
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();

    let mut grad = vec![0.0; probs.data.len()];
    let mut total = 0.0;
    let inv_present = 1.0 / present.len() as f64;
    for &c in &present {
        let errors: Vec<f64> = (0..n)
            .map(|i| {
                if labels[i] == c {
                    1.0 - probs.prob(i, c)
                } else {
                    probs.prob(i, c)
                }
            })
            .collect();
        // Stable descending sort: equal errors keep ascending point order.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| errors[b].partial_cmp(&errors[a]).unwrap());

        let positives = labels.iter().filter(|&&l| l == c).count() as f64;
        let mut intersection = positives;
        let mut union = positives;
        let mut prev_jaccard = 0.0;
        for &i in &order {
            if labels[i] == c {
                intersection -= 1.0;
            } else {
                union += 1.0;
            }
            let jaccard = 1.0 - intersection / union;
            let g = jaccard - prev_jaccard;
            prev_jaccard = jaccard;
            total += errors[i] * g;
            let sign = if labels[i] == c { -1.0 } else { 1.0 };
            grad[i * probs.classes + c] += sign * g * inv_present;
        }
    }
    Ok((total * inv_present, grad))
}

/// Mean cross-entropy, the ablation alternative to [`lovasz_softmax`].
pub fn cross_entropy(probs: &ClassProbabilities, labels: &[usize]) -> Result<f64, LossError> {
    let n = probs.points();
    if n == 0 {
        return Err(LossError::EmptyInput);
    }
    assert_eq!(labels.len(), n);
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        total -= probs.prob(i, l).max(1e-300).ln();
    }
    Ok(total / n as f64)
}

/// Gradient of [`cross_entropy`] with respect to the probabilities.
pub fn cross_entropy_grad(
    probs: &ClassProbabilities,
    labels: &[usize],
) -> Result<Vec<f64>, LossError> {
    let n = probs.points();
    if n == 0 {
        return Err(LossError::EmptyInput);
    }
    let mut grad = vec![0.0; probs.data.len()];
    for (i, &l) in labels.iter().enumerate() {
        grad[i * probs.classes + l] = -1.0 / (probs.prob(i, l).max(1e-300) * n as f64);
    }
    Ok(grad)
}

/// Total training objective: unweighted sum of the semantic and canonical
/// terms.
pub fn total_loss(sem: f64, canon: f64) -> f64 {
    sem + canon
}
