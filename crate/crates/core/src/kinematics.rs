//! Rigid transforms, joint models, forward kinematics and canonical-space
//! ground truth.
//!
//! Part poses are products of per-joint displacements along the kinematic
//! chain from the root (body) to the part. Joint axes and anchors are
//! expressed in the origin frame at the zero configuration, and part meshes
//! are authored in that same frame, so the chain product alone poses a part.

use nalgebra::{Matrix3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::OffsetField;
use crate::scenegen::{Part, SemanticClass};
use crate::sensing::SequenceSample;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("joint {joint} value {value} outside limits [{lo}, {hi}]")]
    LimitViolation {
        joint: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("unknown part id {0}")]
    UnknownPart(usize),
    #[error("joint config has {got} values, model has {expected} joints")]
    ConfigLength { got: usize, expected: usize },
    #[error("{frames} frames but {states} articulation states")]
    FrameStateMismatch { frames: usize, states: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Proper rigid-body transform: `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation by `angle` radians about `axis` through the point `anchor`.
    pub fn rotation_about(axis: Unit<Vector3<f64>>, anchor: Vector3<f64>, angle: f64) -> Self {
        let rotation = nalgebra::Rotation3::from_axis_angle(&axis, angle)
            .matrix()
            .to_owned();
        let translation = anchor - rotation * anchor;
        Self {
            rotation,
            translation,
        }
    }

    pub fn translation_of(offset: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: offset,
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Closed-form inverse `(Rᵀ, −Rᵀ t)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, point: Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    pub fn apply_vector(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Max-abs deviation of `RᵀR` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.rotation.transpose() * self.rotation - Matrix3::identity();
        d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// Single-degree-of-freedom joint connecting two parts.
///
/// `axis` and `anchor` are given in the origin frame at the zero
/// configuration. Revolute limits are radians, prismatic limits meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Joint {
    pub id: usize,
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    pub anchor: Vector3<f64>,
    pub limits: (f64, f64),
    pub parent_part: usize,
    pub child_part: usize,
}

impl Joint {
    fn unit_axis(&self) -> Unit<Vector3<f64>> {
        Unit::new_normalize(self.axis)
    }
}

/// One value per joint, ordered by joint id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Part tree plus joints; the kinematic ground truth everything derives from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArticulatedModel {
    pub parts: Vec<Part>,
    pub joints: Vec<Joint>,
    pub root: usize,
}

impl ArticulatedModel {
    /// Checks the structural invariants: dense part ids, unit joint axes,
    /// ordered limits, and a joint tree rooted at the body part.
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let n = self.parts.len();
        if self.root >= n {
            return Err(KinematicsError::InvalidModel(format!(
                "root part {} out of range",
                self.root
            )));
        }
        for (i, part) in self.parts.iter().enumerate() {
            if part.id != i {
                return Err(KinematicsError::InvalidModel(format!(
                    "part ids not dense: slot {i} holds id {}",
                    part.id
                )));
            }
        }
        let mut parent_of = vec![None; n];
        for (i, joint) in self.joints.iter().enumerate() {
            if joint.id != i {
                return Err(KinematicsError::InvalidModel(format!(
                    "joint ids not dense: slot {i} holds id {}",
                    joint.id
                )));
            }
            if (joint.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(KinematicsError::InvalidModel(format!(
                    "joint {i} axis not unit length"
                )));
            }
            if joint.limits.0 >= joint.limits.1 {
                return Err(KinematicsError::InvalidModel(format!(
                    "joint {i} limits not ordered"
                )));
            }
            if joint.parent_part >= n || joint.child_part >= n {
                return Err(KinematicsError::InvalidModel(format!(
                    "joint {i} references missing part"
                )));
            }
            if joint.child_part == self.root {
                return Err(KinematicsError::InvalidModel(
                    "root part cannot be a joint child".into(),
                ));
            }
            if parent_of[joint.child_part].replace(i).is_some() {
                return Err(KinematicsError::InvalidModel(format!(
                    "part {} has more than one parent joint",
                    joint.child_part
                )));
            }
        }
        for part in 0..n {
            if part != self.root && parent_of[part].is_none() {
                return Err(KinematicsError::InvalidModel(format!(
                    "part {part} is not connected to the tree"
                )));
            }
            // Walking up must terminate at the root; a cycle would loop forever.
            let mut cur = part;
            let mut hops = 0;
            while cur != self.root {
                cur = self.joints[parent_of[cur].unwrap()].parent_part;
                hops += 1;
                if hops > n {
                    return Err(KinematicsError::InvalidModel(
                        "joint graph contains a cycle".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Joint ids along the chain from the root to `part`, root side first.
    pub fn chain_to(&self, part: usize) -> Result<Vec<usize>, KinematicsError> {
        if part >= self.parts.len() {
            return Err(KinematicsError::UnknownPart(part));
        }
        let mut chain = Vec::new();
        let mut cur = part;
        while cur != self.root {
            let joint = self
                .joints
                .iter()
                .find(|j| j.child_part == cur)
                .ok_or_else(|| {
                    KinematicsError::InvalidModel(format!("part {cur} has no parent joint"))
                })?;
            chain.push(joint.id);
            cur = joint.parent_part;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Midpoint of every joint's motion range.
    pub fn canonical_config(&self) -> JointConfig {
        JointConfig(
            self.joints
                .iter()
                .map(|j| 0.5 * (j.limits.0 + j.limits.1))
                .collect(),
        )
    }

    fn check_config(&self, q: &JointConfig) -> Result<(), KinematicsError> {
        if q.len() != self.joints.len() {
            return Err(KinematicsError::ConfigLength {
                got: q.len(),
                expected: self.joints.len(),
            });
        }
        Ok(())
    }
}

/// Displacement of a single joint at the given value.
///
/// Revolute joints rotate about their axis through the anchor; prismatic
/// joints translate along the axis. Values outside the joint limits are an
/// error, never clamped.
pub fn joint_transform(joint: &Joint, value: f64) -> Result<RigidTransform, KinematicsError> {
    let (lo, hi) = joint.limits;
    if value < lo - 1e-12 || value > hi + 1e-12 {
        return Err(KinematicsError::LimitViolation {
            joint: joint.id,
            value,
            lo,
            hi,
        });
    }
    Ok(match joint.kind {
        JointKind::Revolute => RigidTransform::rotation_about(joint.unit_axis(), joint.anchor, value),
        JointKind::Prismatic => RigidTransform::translation_of(value * joint.axis),
    })
}

/// Pose of `part` in the origin frame: the ordered product of joint
/// displacements along the root-to-part chain. The root pose is the identity.
pub fn part_pose(
    model: &ArticulatedModel,
    part: usize,
    q: &JointConfig,
) -> Result<RigidTransform, KinematicsError> {
    model.check_config(q)?;
    let chain = model.chain_to(part)?;
    let mut pose = RigidTransform::identity();
    for joint_id in chain {
        let t = joint_transform(&model.joints[joint_id], q.0[joint_id])?;
        pose = pose.compose(&t);
    }
    Ok(pose)
}

/// Maps a point observed at configuration `q_t` onto the same material point
/// at the canonical configuration `q_c`.
pub fn canonical_map(
    model: &ArticulatedModel,
    part: usize,
    q_t: &JointConfig,
    q_c: &JointConfig,
    x: Vector3<f64>,
) -> Result<Vector3<f64>, KinematicsError> {
    Ok(canonical_map_transform(model, part, q_t, q_c)?.apply(x))
}

/// The rigid map `pose(q_c) ∘ pose(q_t)⁻¹` used by [`canonical_map`];
/// exposed so per-frame maps can be reused across many points.
pub fn canonical_map_transform(
    model: &ArticulatedModel,
    part: usize,
    q_t: &JointConfig,
    q_c: &JointConfig,
) -> Result<RigidTransform, KinematicsError> {
    let pose_t = part_pose(model, part, q_t)?;
    let pose_c = part_pose(model, part, q_c)?;
    Ok(pose_c.compose(&pose_t.inverse()))
}

/// How per-point regression targets are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Centroid of the part's points after mapping the whole sequence into
    /// the canonical articulation state.
    Canonical,
    /// Spatial centroid of the part's points pooled over all frames, without
    /// canonicalization.
    Centroid4d,
}

/// Ground-truth offsets for a sequence sample.
///
/// Every things point receives the vector from its observed position to its
/// part's target (one target per part, shared by all frames). Stuff points
/// get a zero offset and a cleared mask. Parts that contribute no points are
/// skipped with a warning.
pub fn gt_offsets(
    sample: &SequenceSample,
    model: &ArticulatedModel,
    states: &[JointConfig],
    q_c: &JointConfig,
    mode: TargetMode,
) -> Result<OffsetField, KinematicsError> {
    let frames = sample.frames.len();
    if frames != states.len() {
        return Err(KinematicsError::FrameStateMismatch {
            frames,
            states: states.len(),
        });
    }
    let n = sample.points_per_frame();
    let n_parts = model.parts.len();

    // One accumulator per part: summed (possibly canonicalized) positions.
    let mut sums = vec![Vector3::zeros(); n_parts];
    let mut counts = vec![0usize; n_parts];
    for (s, frame) in sample.frames.iter().enumerate() {
        // Per-frame canonical maps, computed once per part.
        let mut maps: Vec<Option<RigidTransform>> = vec![None; n_parts];
        for (i, &pos) in frame.positions.iter().enumerate() {
            if frame.semantic[i] == SemanticClass::Body {
                continue;
            }
            let part = frame.instance[i] as usize;
            if part >= n_parts {
                return Err(KinematicsError::UnknownPart(part));
            }
            let pooled = match mode {
                TargetMode::Canonical => {
                    let map = match &maps[part] {
                        Some(m) => m,
                        None => {
                            maps[part] =
                                Some(canonical_map_transform(model, part, &states[s], q_c)?);
                            maps[part].as_ref().unwrap()
                        }
                    };
                    map.apply(pos)
                }
                TargetMode::Centroid4d => pos,
            };
            sums[part] += pooled;
            counts[part] += 1;
        }
    }

    let mut targets = vec![None; n_parts];
    for part in 0..n_parts {
        if counts[part] > 0 {
            targets[part] = Some(sums[part] / counts[part] as f64);
        } else if part != model.root {
            log::warn!("part {part} has no points in the sequence; skipping its target");
        }
    }

    let total = frames * n;
    let mut target = vec![Vector3::zeros(); total];
    let mut mask = vec![false; total];
    for (s, frame) in sample.frames.iter().enumerate() {
        for (i, &pos) in frame.positions.iter().enumerate() {
            if frame.semantic[i] == SemanticClass::Body {
                continue;
            }
            let part = frame.instance[i] as usize;
            if let Some(c) = targets[part] {
                let idx = s * n + i;
                target[idx] = c - pos;
                mask[idx] = true;
            }
        }
    }
    Ok(OffsetField::from_targets(target, mask, frames, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::Part;
    use crate::sensing::PointCloudFrame;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn vec3(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    fn revolute(id: usize, axis: Vector3<f64>, anchor: Vector3<f64>) -> Joint {
        Joint {
            id,
            kind: JointKind::Revolute,
            axis,
            anchor,
            limits: (0.0, FRAC_PI_2),
            parent_part: 0,
            child_part: id + 1,
        }
    }

    fn bare_part(id: usize, semantic: SemanticClass) -> Part {
        Part::new(id, semantic, Vec::new(), [0.5, 0.5, 0.5])
    }

    /// Body + door + a prismatic handle riding on the door.
    fn two_joint_model() -> ArticulatedModel {
        let mut slider = Joint {
            id: 1,
            kind: JointKind::Prismatic,
            axis: vec3(1.0, 0.0, 0.0),
            anchor: Vector3::zeros(),
            limits: (0.0, 0.5),
            parent_part: 1,
            child_part: 2,
        };
        slider.anchor = vec3(0.3, 0.0, 0.0);
        ArticulatedModel {
            parts: vec![
                bare_part(0, SemanticClass::Body),
                bare_part(1, SemanticClass::HingedDoor),
                bare_part(2, SemanticClass::Slider),
            ],
            joints: vec![revolute(0, vec3(0.0, 0.0, 1.0), Vector3::zeros()), slider],
            root: 0,
        }
    }

    #[test]
    fn revolute_zero_is_identity() {
        let j = revolute(0, vec3(0.3, -0.1, 0.9).normalize(), vec3(1.0, 2.0, 3.0));
        let t = joint_transform(&j, 0.0).unwrap();
        let p = vec3(0.2, -0.7, 1.1);
        assert_relative_eq!(t.apply(p), p, epsilon = 1e-12);
        assert!(t.orthonormality_error() <= 1e-9);
    }

    #[test]
    fn prismatic_translates_along_axis() {
        let j = Joint {
            id: 0,
            kind: JointKind::Prismatic,
            axis: vec3(0.0, 0.0, 1.0),
            anchor: vec3(5.0, 5.0, 5.0),
            limits: (0.0, 1.0),
            parent_part: 0,
            child_part: 1,
        };
        let t = joint_transform(&j, 0.3).unwrap();
        assert_relative_eq!(t.translation, vec3(0.0, 0.0, 0.3), epsilon = 1e-12);
        assert_relative_eq!(t.rotation, Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn revolute_quarter_turn_about_z() {
        let j = revolute(0, vec3(0.0, 0.0, 1.0), Vector3::zeros());
        let t = joint_transform(&j, FRAC_PI_2).unwrap();
        assert_relative_eq!(t.apply(vec3(1.0, 0.0, 0.0)), vec3(0.0, 1.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn out_of_limit_value_is_rejected() {
        let j = revolute(3, vec3(0.0, 0.0, 1.0), Vector3::zeros());
        let err = joint_transform(&j, 2.0).unwrap_err();
        assert!(err.to_string().contains("joint 3"));
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let t = RigidTransform::rotation_about(
            Unit::new_normalize(vec3(1.0, 2.0, -0.5)),
            vec3(0.4, -0.2, 0.9),
            1.234,
        );
        let id = t.compose(&t.inverse());
        assert!(id.orthonormality_error() <= 1e-9);
        assert_relative_eq!(id.rotation, Matrix3::identity(), epsilon = 1e-9);
        assert_relative_eq!(id.translation, Vector3::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn root_pose_is_identity() {
        let model = two_joint_model();
        let q = JointConfig(vec![0.7, 0.2]);
        let pose = part_pose(&model, 0, &q).unwrap();
        assert_relative_eq!(pose.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(pose.translation, Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn single_joint_chain_equals_joint_transform() {
        let model = two_joint_model();
        let q = JointConfig(vec![0.7, 0.0]);
        let pose = part_pose(&model, 1, &q).unwrap();
        let direct = joint_transform(&model.joints[0], 0.7).unwrap();
        assert_relative_eq!(pose.rotation, direct.rotation, epsilon = 1e-12);
        assert_relative_eq!(pose.translation, direct.translation, epsilon = 1e-12);
    }

    /// Brute-force oracle: the same chain as 4x4 homogeneous matrix products.
    #[test]
    fn two_joint_chain_matches_homogeneous_matrix_oracle() {
        let model = two_joint_model();
        let q = JointConfig(vec![0.9, 0.35]);
        let pose = part_pose(&model, 2, &q).unwrap();

        let mut oracle = nalgebra::Matrix4::<f64>::identity();
        for joint in &model.joints {
            let t = joint_transform(joint, q.0[joint.id]).unwrap();
            let mut h = nalgebra::Matrix4::<f64>::identity();
            h.fixed_view_mut::<3, 3>(0, 0).copy_from(&t.rotation);
            h.fixed_view_mut::<3, 1>(0, 3).copy_from(&t.translation);
            oracle *= h;
        }
        for p in [vec3(0.0, 0.0, 0.0), vec3(0.5, -0.2, 0.8), vec3(-1.0, 0.3, 0.1)] {
            let ours = pose.apply(p);
            let hp = oracle * nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
            assert_relative_eq!(ours, vec3(hp.x, hp.y, hp.z), epsilon = 1e-9);
        }
    }

    #[test]
    fn unknown_part_is_rejected() {
        let model = two_joint_model();
        let q = JointConfig(vec![0.0, 0.0]);
        assert!(matches!(
            part_pose(&model, 9, &q),
            Err(KinematicsError::UnknownPart(9))
        ));
    }

    #[test]
    fn canonical_map_is_identity_when_states_match() {
        let model = two_joint_model();
        let q = JointConfig(vec![0.4, 0.1]);
        let x = vec3(0.3, 0.2, 0.5);
        let y = canonical_map(&model, 2, &q, &q, x).unwrap();
        assert_relative_eq!(y, x, epsilon = 1e-9);
    }

    #[test]
    fn canonical_map_on_root_is_identity() {
        let model = two_joint_model();
        let qt = JointConfig(vec![0.9, 0.4]);
        let qc = JointConfig(vec![0.1, 0.0]);
        let x = vec3(-0.4, 0.8, 0.2);
        assert_relative_eq!(canonical_map(&model, 0, &qt, &qc, x).unwrap(), x, epsilon = 1e-12);
    }

    /// Door at 90 degrees mapped to a 45-degree canonical state must equal
    /// an explicit -45-degree axis-angle rotation about the hinge.
    #[test]
    fn door_canonical_map_matches_axis_angle_oracle() {
        let hinge = vec3(-0.4, 0.25, 0.0);
        let model = ArticulatedModel {
            parts: vec![
                bare_part(0, SemanticClass::Body),
                bare_part(1, SemanticClass::HingedDoor),
            ],
            joints: vec![revolute(0, vec3(0.0, 0.0, 1.0), hinge)],
            root: 0,
        };
        let q_t = JointConfig(vec![FRAC_PI_2]);
        let q_c = JointConfig(vec![FRAC_PI_2 / 2.0]);
        let x = vec3(0.1, 0.25, 0.6);
        let mapped = canonical_map(&model, 1, &q_t, &q_c, x).unwrap();

        let back = RigidTransform::rotation_about(
            Unit::new_normalize(vec3(0.0, 0.0, 1.0)),
            hinge,
            -FRAC_PI_2 / 2.0,
        );
        assert_relative_eq!(mapped, back.apply(x), epsilon = 1e-9);
    }

    #[test]
    fn canonical_config_is_midpoint() {
        let mut model = two_joint_model();
        model.joints[0].limits = (0.0, FRAC_PI_2);
        model.joints[1].limits = (0.1, 0.5);
        let q = model.canonical_config();
        assert_relative_eq!(q.0[0], FRAC_PI_2 / 2.0, epsilon = 1e-12);
        assert_relative_eq!(q.0[1], 0.3, epsilon = 1e-12);

        model.joints[1].limits = (-0.2, 0.2);
        assert_relative_eq!(model.canonical_config().0[1], 0.0, epsilon = 1e-12);
    }

    /// A point rigidly attached to a part at state q_t lands exactly on the
    /// same material point at state q_c under the canonical map.
    #[test]
    fn canonical_map_tracks_material_points() {
        let model = two_joint_model();
        let q_t = JointConfig(vec![1.1, 0.45]);
        let q_c = model.canonical_config();
        let local = vec3(0.42, -0.05, 0.31);
        let at_t = part_pose(&model, 2, &q_t).unwrap().apply(local);
        let at_c = part_pose(&model, 2, &q_c).unwrap().apply(local);
        let mapped = canonical_map(&model, 2, &q_t, &q_c, at_t).unwrap();
        assert_relative_eq!(mapped, at_c, epsilon = 1e-9);
    }

    fn door_model() -> ArticulatedModel {
        ArticulatedModel {
            parts: vec![
                bare_part(0, SemanticClass::Body),
                bare_part(1, SemanticClass::HingedDoor),
            ],
            joints: vec![revolute(0, vec3(0.0, 0.0, 1.0), vec3(-0.4, 0.25, 0.0))],
            root: 0,
        }
    }

    /// Two frames of a door with fixed material sampling. The door carries
    /// four sample points, the body two.
    fn door_sequence(states: &[JointConfig], model: &ArticulatedModel) -> SequenceSample {
        let door_local = [
            vec3(-0.3, 0.26, 0.1),
            vec3(-0.1, 0.26, 0.4),
            vec3(0.2, 0.26, -0.2),
            vec3(0.35, 0.26, 0.3),
        ];
        let body_pts = [vec3(0.0, -0.25, 0.0), vec3(0.2, -0.25, 0.3)];
        let frames = states
            .iter()
            .enumerate()
            .map(|(s, q)| {
                let pose = part_pose(model, 1, q).unwrap();
                let mut positions: Vec<Vector3<f64>> =
                    door_local.iter().map(|&p| pose.apply(p)).collect();
                positions.extend_from_slice(&body_pts);
                let n = positions.len();
                PointCloudFrame {
                    positions,
                    colors: vec![[0.5; 3]; n],
                    semantic: vec![
                        SemanticClass::HingedDoor,
                        SemanticClass::HingedDoor,
                        SemanticClass::HingedDoor,
                        SemanticClass::HingedDoor,
                        SemanticClass::Body,
                        SemanticClass::Body,
                    ],
                    instance: vec![1, 1, 1, 1, 0, 0],
                    state_index: s,
                }
            })
            .collect();
        SequenceSample { frames }
    }

    #[test]
    fn offsets_point_to_plain_centroid_when_already_canonical() {
        let model = door_model();
        let q_c = model.canonical_config();
        let sample = door_sequence(std::slice::from_ref(&q_c), &model);
        let field = gt_offsets(&sample, &model, std::slice::from_ref(&q_c), &q_c, TargetMode::Canonical)
            .unwrap();
        let centroid = sample.frames[0].positions[..4]
            .iter()
            .sum::<Vector3<f64>>()
            / 4.0;
        for i in 0..4 {
            let target = sample.frames[0].positions[i] + field.target[i];
            assert_relative_eq!(target, centroid, epsilon = 1e-9);
            assert!(field.mask[i]);
        }
        for i in 4..6 {
            assert_relative_eq!(field.target[i], Vector3::zeros(), epsilon = 1e-12);
            assert!(!field.mask[i]);
        }
    }

    #[test]
    fn applying_offsets_collapses_each_part_to_one_point() {
        let model = door_model();
        let q_c = model.canonical_config();
        let states = vec![JointConfig(vec![0.0]), JointConfig(vec![FRAC_PI_2])];
        let sample = door_sequence(&states, &model);
        let field = gt_offsets(&sample, &model, &states, &q_c, TargetMode::Canonical).unwrap();
        let n = sample.points_per_frame();
        let mut landed = Vec::new();
        for (s, frame) in sample.frames.iter().enumerate() {
            for i in 0..4 {
                landed.push(frame.positions[i] + field.target[s * n + i]);
            }
        }
        let spread = landed
            .iter()
            .map(|p| (p - landed[0]).norm())
            .fold(0.0f64, f64::max);
        assert!(spread <= 1e-9, "spread {spread}");
    }

    /// Direct centroid oracle on a closed/open door: canonical-mode targets
    /// of the two frames coincide; 4D-centroid targets sit between the two
    /// door positions.
    #[test]
    fn canonical_vs_centroid4d_targets_on_two_frame_door() {
        let model = door_model();
        let q_c = model.canonical_config();
        let states = vec![JointConfig(vec![0.0]), JointConfig(vec![FRAC_PI_2])];
        let sample = door_sequence(&states, &model);
        let n = sample.points_per_frame();

        let canon = gt_offsets(&sample, &model, &states, &q_c, TargetMode::Canonical).unwrap();
        let t_frame1 = sample.frames[0].positions[0] + canon.target[0];
        let t_frame2 = sample.frames[1].positions[0] + canon.target[n];
        assert_relative_eq!(t_frame1, t_frame2, epsilon = 1e-9);

        // Oracle: recompute both centroids by hand.
        let mapped: Vec<Vector3<f64>> = states
            .iter()
            .enumerate()
            .flat_map(|(s, q)| {
                sample.frames[s].positions[..4]
                    .iter()
                    .map(|&p| canonical_map(&model, 1, q, &q_c, p).unwrap())
                    .collect::<Vec<_>>()
            })
            .collect();
        let canon_oracle = mapped.iter().sum::<Vector3<f64>>() / mapped.len() as f64;
        assert_relative_eq!(t_frame1, canon_oracle, epsilon = 1e-9);

        let c4d = gt_offsets(&sample, &model, &states, &q_c, TargetMode::Centroid4d).unwrap();
        let raw: Vec<Vector3<f64>> = (0..2)
            .flat_map(|s| sample.frames[s].positions[..4].to_vec())
            .collect();
        let c4d_oracle = raw.iter().sum::<Vector3<f64>>() / raw.len() as f64;
        let c4d_target = sample.frames[0].positions[0] + c4d.target[0];
        assert_relative_eq!(c4d_target, c4d_oracle, epsilon = 1e-9);

        // The 4D centroid lies strictly between the closed and open door
        // centroids, away from both.
        let closed = sample.frames[0].positions[..4].iter().sum::<Vector3<f64>>() / 4.0;
        let open = sample.frames[1].positions[..4].iter().sum::<Vector3<f64>>() / 4.0;
        assert!((c4d_oracle - closed).norm() > 1e-3);
        assert!((c4d_oracle - open).norm() > 1e-3);
        assert!((c4d_oracle - closed).norm() < (open - closed).norm());
    }

    /// Canonical targets agree across any subset of states of the same
    /// trajectory; 4D centroids do not on a moving part.
    #[test]
    fn canonical_target_is_articulation_invariant_centroid4d_is_not() {
        let model = door_model();
        let q_c = model.canonical_config();
        let all: Vec<JointConfig> = (0..5)
            .map(|i| JointConfig(vec![FRAC_PI_2 * i as f64 / 4.0]))
            .collect();
        let subsets: [&[JointConfig]; 3] = [&all[0..2], &all[2..5], &all[..]];
        let mut canon_targets = Vec::new();
        let mut c4d_targets = Vec::new();
        for sub in subsets {
            let sample = door_sequence(sub, &model);
            let canon =
                gt_offsets(&sample, &model, sub, &q_c, TargetMode::Canonical).unwrap();
            let c4d = gt_offsets(&sample, &model, sub, &q_c, TargetMode::Centroid4d).unwrap();
            canon_targets.push(sample.frames[0].positions[0] + canon.target[0]);
            c4d_targets.push(sample.frames[0].positions[0] + c4d.target[0]);
        }
        for t in &canon_targets[1..] {
            assert!((t - canon_targets[0]).norm() <= 1e-6);
        }
        assert!((c4d_targets[1] - c4d_targets[0]).norm() > 1e-6);
    }

    #[test]
    fn frame_state_mismatch_is_rejected() {
        let model = door_model();
        let q_c = model.canonical_config();
        let states = vec![JointConfig(vec![0.0]), JointConfig(vec![1.0])];
        let sample = door_sequence(&states[..1], &model);
        assert!(matches!(
            gt_offsets(&sample, &model, &states, &q_c, TargetMode::Canonical),
            Err(KinematicsError::FrameStateMismatch { .. })
        ));
    }

    #[test]
    fn validate_accepts_tree_and_rejects_double_parent() {
        let mut model = two_joint_model();
        model.validate().unwrap();
        model.joints[1].child_part = 1;
        assert!(model.validate().is_err());
    }
}
