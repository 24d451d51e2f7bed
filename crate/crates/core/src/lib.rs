//! Desk-scale benchmark toolkit for 4D panoptic segmentation of articulated
//! objects.
//!
//! The crate generates synthetic point-cloud sequences of procedurally built
//! articulated objects, derives canonical-space ground truth for per-point
//! offset regression, trains a small per-point model, clusters canonical
//! points into instances and scores results with the LSTQ metric family.
//!
//! Modules mirror the pipeline stages:
//!
//! - [`scenegen`]: procedural articulated objects with semantic/instance labels
//! - [`kinematics`]: rigid transforms, forward kinematics, canonical mapping,
//!   ground-truth offsets
//! - [`trajectory`]: joint trajectory profiles and uniform state sampling
//! - [`sensing`]: camera sphere, ray-cast RGB-D rendering, fusion, farthest
//!   point sampling
//! - [`losses`]: Lovász-Softmax semantic loss and canonical offset losses
//! - [`model`]: tiny per-point regressor, manual backprop, AdamW, training loop
//! - [`clustering`]: density-based instance grouping in canonical space
//! - [`metrics`]: per-class IoU, S_cls, S_assoc, LSTQ
//! - [`formats`]: binary frame/prediction/checkpoint formats and JSON manifests
//! - [`dataset`]: on-disk dataset layout, generation and evaluation pipelines

pub mod clustering;
pub mod dataset;
pub mod formats;
pub mod kinematics;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod scenegen;
pub mod sensing;
pub mod trajectory;

pub use kinematics::{ArticulatedModel, Joint, JointConfig, JointKind, RigidTransform, TargetMode};
pub use scenegen::{Part, SemanticClass, TemplateKind};
pub use sensing::{CameraPose, PointCloudFrame, SequenceSample};
