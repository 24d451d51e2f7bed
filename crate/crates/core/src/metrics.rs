//! 4D panoptic segmentation scoring: per-class IoU pooled over frames,
//! S_cls, the association score S_assoc over sequence-pooled instance point
//! sets, and their geometric mean LSTQ.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::SegmentationResult;
use crate::scenegen::SemanticClass;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("incongruent inputs: ground truth has {gt} points, prediction {pred}")]
    Incongruent { gt: usize, pred: usize },
}

/// How classes absent from the ground truth enter the S_cls mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassAveraging {
    /// All six classes count; a class absent from both ground truth and
    /// prediction scores a vacuous IoU of 1.
    AllClasses,
    /// Average only over classes present in the ground truth.
    GtPresent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_class_iou: [f64; SemanticClass::COUNT],
    pub s_cls: f64,
    pub s_assoc: f64,
    pub lstq: f64,
}

impl MetricReport {
    /// Aligned plain-text table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14} {:>8}\n", "class", "IoU"));
        let names = ["body", "drawer", "hinged_door", "lid", "leg", "slider"];
        for (name, iou) in names.iter().zip(self.per_class_iou) {
            out.push_str(&format!("{name:<14} {iou:>8.4}\n"));
        }
        out.push_str(&format!("{:<14} {:>8.4}\n", "S_cls", self.s_cls));
        out.push_str(&format!("{:<14} {:>8.4}\n", "S_assoc", self.s_assoc));
        out.push_str(&format!("{:<14} {:>8.4}\n", "LSTQ", self.lstq));
        out
    }
}

/// Geometric mean of the semantic and association scores.
pub fn lstq(s_cls: f64, s_assoc: f64) -> f64 {
    (s_cls * s_assoc).sqrt()
}

/// Pools sequences and finalizes a [`MetricReport`]. Confusion counts pool
/// over every added sequence; each ground-truth things instance contributes
/// one association term to the outer mean.
#[derive(Debug, Clone, Default)]
pub struct MetricAccumulator {
    tp: [u64; SemanticClass::COUNT],
    fp: [u64; SemanticClass::COUNT],
    fn_: [u64; SemanticClass::COUNT],
    assoc_terms: Vec<f64>,
}

impl MetricAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sequence(
        &mut self,
        gt: &SegmentationResult,
        pred: &SegmentationResult,
    ) -> Result<(), MetricsError> {
        if gt.semantic.len() != pred.semantic.len() {
            return Err(MetricsError::Incongruent {
                gt: gt.semantic.len(),
                pred: pred.semantic.len(),
            });
        }
        for (g, p) in gt.semantic.iter().zip(&pred.semantic) {
            let gi = g.as_u16() as usize;
            let pi = p.as_u16() as usize;
            if gi == pi {
                self.tp[gi] += 1;
            } else {
                self.fn_[gi] += 1;
                self.fp[pi] += 1;
            }
        }
        self.assoc_terms.extend(sequence_assoc_terms(gt, pred));
        Ok(())
    }

    #[allow(clippy::needless_range_loop)] // c indexes three counter arrays in lockstep
    pub fn finalize(&self, averaging: ClassAveraging) -> MetricReport {
        let mut per_class_iou = [0.0; SemanticClass::COUNT];
        let mut sum = 0.0;
        let mut counted = 0usize;
        for c in 0..SemanticClass::COUNT {
            let denom = self.tp[c] + self.fp[c] + self.fn_[c];
            let iou = if denom == 0 {
                1.0
            } else {
                self.tp[c] as f64 / denom as f64
            };
            per_class_iou[c] = iou;
            let in_gt = self.tp[c] + self.fn_[c] > 0;
            match averaging {
                ClassAveraging::AllClasses => {
                    sum += iou;
                    counted += 1;
                }
                ClassAveraging::GtPresent => {
                    if in_gt {
                        sum += iou;
                        counted += 1;
                    }
                }
            }
        }
        let s_cls = if counted == 0 { 1.0 } else { sum / counted as f64 };
        let s_assoc = if self.assoc_terms.is_empty() {
            1.0
        } else {
            self.assoc_terms.iter().sum::<f64>() / self.assoc_terms.len() as f64
        };
        MetricReport {
            per_class_iou,
            s_cls,
            s_assoc,
            lstq: lstq(s_cls, s_assoc),
        }
    }
}

/// Per-class IoU and their mean over one or more pooled sequences.
pub fn s_cls(
    gt: &SegmentationResult,
    pred: &SegmentationResult,
    averaging: ClassAveraging,
) -> Result<(f64, [f64; SemanticClass::COUNT]), MetricsError> {
    let mut acc = MetricAccumulator::new();
    acc.add_sequence(gt, pred)?;
    let report = acc.finalize(averaging);
    Ok((report.s_cls, report.per_class_iou))
}

/// Association score over 4D (sequence-pooled) instance point sets.
///
/// For every ground-truth things instance `b`, every predicted things
/// instance `a` overlapping it contributes `|a∩b| · IoU(a,b)`, and the sum
/// is normalized by `|b|`. The score is the mean over ground-truth
/// instances. Stuff (id 0) never participates.
pub fn s_assoc(gt: &SegmentationResult, pred: &SegmentationResult) -> Result<f64, MetricsError> {
    if gt.semantic.len() != pred.semantic.len() {
        return Err(MetricsError::Incongruent {
            gt: gt.semantic.len(),
            pred: pred.semantic.len(),
        });
    }
    let terms = sequence_assoc_terms(gt, pred);
    Ok(if terms.is_empty() {
        1.0
    } else {
        terms.iter().sum::<f64>() / terms.len() as f64
    })
}

fn sequence_assoc_terms(gt: &SegmentationResult, pred: &SegmentationResult) -> Vec<f64> {
    let mut gt_size: BTreeMap<u32, u64> = BTreeMap::new();
    let mut pred_size: BTreeMap<u32, u64> = BTreeMap::new();
    let mut overlap: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for i in 0..gt.instance.len() {
        let g = gt.instance[i];
        let p = pred.instance[i];
        if g > 0 {
            *gt_size.entry(g).or_default() += 1;
        }
        if p > 0 {
            *pred_size.entry(p).or_default() += 1;
        }
        if g > 0 && p > 0 {
            *overlap.entry((g, p)).or_default() += 1;
        }
    }
    gt_size
        .iter()
        .map(|(&g, &b_size)| {
            let mut sum = 0.0;
            for (&(gg, p), &inter) in overlap.range((g, 0)..=(g, u32::MAX)) {
                debug_assert_eq!(gg, g);
                let union = b_size + pred_size[&p] - inter;
                let iou = inter as f64 / union as f64;
                sum += inter as f64 * iou;
            }
            sum / b_size as f64
        })
        .collect()
}
