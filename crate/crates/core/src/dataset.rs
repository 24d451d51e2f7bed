//! On-disk dataset layout and the end-to-end pipelines built on it:
//! generation, ground-truth oracle segmentation, training, prediction and
//! evaluation.
//!
//! Layout of a generated dataset:
//!
//! ```text
//! <root>/manifest.json                 run parameters + object index
//! <root>/objects/<id>/model.json       parts, joints, limits, colors
//! <root>/objects/<id>/states.json      trajectory profiles + joint states
//! <root>/objects/<id>/frames/state_###.a4df
//! ```
//!
//! Predictions live in their own tree, one subdirectory per (frames,
//! spacing) setting, indexed by `pred_manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{segment_instances, SegmentationResult};
use crate::formats::{self, FormatError};
use crate::kinematics::{
    gt_offsets, ArticulatedModel, JointConfig, KinematicsError, TargetMode,
};
use crate::losses::OffsetField;
use crate::metrics::{ClassAveraging, MetricAccumulator, MetricReport, MetricsError};
use crate::model::{
    forward, prepare_sample, train, EpochRecord, ModelError, ModelParams, SemanticLoss,
    TrainConfig, TrainSample,
};
use crate::scenegen::{
    bounding_radius, scenario, subset_templates, ProfileMenu, SceneError, SemanticClass, Subset,
};
use crate::sensing::{
    backproject, camera_positions, fuse_and_sample, render_posed, Intrinsics, PointCloudFrame,
    PosedModel, SensingError, SequenceSample,
};
use crate::trajectory::TrajectoryProfile;

pub const DATASET_FORMAT: &str = "artic-canon-dataset";
pub const PREDICTIONS_FORMAT: &str = "artic-canon-predictions";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trajectory error: {0}")]
    Trajectory(#[from] crate::trajectory::TrajectoryError),
    #[error("{0}")]
    Invalid(String),
}

/// How the frames of a sequence sample are chosen from a state clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingPolicy {
    /// Maximally spaced in time: worst-case inter-frame motion.
    Max,
    /// Consecutive states from the start of the clip.
    Adjacent,
}

impl SpacingPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "max" => Some(SpacingPolicy::Max),
            "adjacent" => Some(SpacingPolicy::Adjacent),
            _ => None,
        }
    }
}

impl std::fmt::Display for SpacingPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpacingPolicy::Max => "max",
            SpacingPolicy::Adjacent => "adjacent",
        })
    }
}

/// Frame indices for an `frames`-long sample over `n_states` states.
/// Maximal spacing uses floor(k (n-1) / (frames-1)); a single frame is
/// state 0 under both policies.
pub fn frame_indices(n_states: usize, frames: usize, spacing: SpacingPolicy) -> Vec<usize> {
    assert!(frames >= 1 && frames <= n_states);
    if frames == 1 {
        return vec![0];
    }
    match spacing {
        SpacingPolicy::Max => (0..frames)
            .map(|k| k * (n_states - 1) / (frames - 1))
            .collect(),
        SpacingPolicy::Adjacent => (0..frames).collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub subset: Subset,
    pub seed: u64,
    pub states: usize,
    pub views: usize,
    pub points: usize,
    pub image_size: usize,
    pub camera_scale: f64,
    pub frames: usize,
    pub spacing: SpacingPolicy,
    pub train_objects: usize,
    pub test_objects: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            subset: Subset::M,
            seed: 42,
            states: 100,
            views: 18,
            points: 2048,
            image_size: 128,
            camera_scale: 2.5,
            frames: 3,
            spacing: SpacingPolicy::Max,
            train_objects: 8,
            test_objects: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectEntry {
    pub id: String,
    pub template: String,
    pub split: String,
    pub dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub tool_version: String,
    #[serde(flatten)]
    pub config: GenerateConfig,
    pub objects: Vec<ObjectEntry>,
}

/// Per-object trajectory metadata and sampled joint states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatesFile {
    pub duration: f64,
    pub profiles: Vec<TrajectoryProfile>,
    pub states: Vec<Vec<f64>>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn frame_path(object_dir: &Path, state: usize) -> PathBuf {
    object_dir.join("frames").join(format!("state_{state:03}.a4df"))
}

/// Generates a dataset: seeded scenarios, per-state 360-degree fused clouds
/// downsampled to a fixed budget, model and trajectory JSON, and the run
/// manifest. Re-running with the same config reproduces every byte.
pub fn generate(root: &Path, config: &GenerateConfig) -> Result<RunManifest, PipelineError> {
    let count = config.train_objects + config.test_objects;
    let scenarios = scenario(
        config.seed,
        &subset_templates(config.subset),
        count,
        config.states,
        &ProfileMenu::default(),
    )?;

    fs::create_dir_all(root)?;
    let mut objects = Vec::with_capacity(count);
    for (i, scen) in scenarios.iter().enumerate() {
        let id = format!("obj_{i:03}");
        let split = if i < config.train_objects { "train" } else { "test" };
        let dir = format!("objects/{id}");
        let object_dir = root.join(&dir);
        fs::create_dir_all(object_dir.join("frames"))?;
        write_json(&object_dir.join("model.json"), &scen.model)?;
        write_json(
            &object_dir.join("states.json"),
            &StatesFile {
                duration: scen.profiles.first().map(|p| p.duration).unwrap_or(1.0),
                profiles: scen.profiles.clone(),
                states: scen.states.iter().map(|q| q.0.clone()).collect(),
            },
        )?;
        objects.push(ObjectEntry {
            id,
            template: scen.template.id().to_string(),
            split: split.to_string(),
            dir,
        });
    }

    // Render every (object, state) fused frame; tasks are independent and
    // write disjoint files, so parallel order cannot affect the output.
    let tasks: Vec<(usize, usize)> = (0..count)
        .flat_map(|o| (0..config.states).map(move |s| (o, s)))
        .collect();
    tasks
        .par_iter()
        .map(|&(obj_idx, state_idx)| -> Result<(), PipelineError> {
            let scen = &scenarios[obj_idx];
            let radius = bounding_radius(&scen.model, &scen.states);
            let cams = camera_positions(
                config.camera_scale * radius,
                config.views,
                Intrinsics::fit_sphere(
                    config.image_size,
                    config.image_size,
                    radius,
                    config.camera_scale * radius,
                ),
            );
            let posed = PosedModel::new(&scen.model, &scen.states[state_idx])?;
            let views: Vec<PointCloudFrame> = cams
                .iter()
                .map(|c| backproject(&render_posed(&posed, c), c, state_idx))
                .collect();
            let fused = fuse_and_sample(&views, config.points)?;
            let path = frame_path(&root.join(&objects[obj_idx].dir), state_idx);
            formats::write_frame(&path, &fused)?;
            Ok(())
        })
        .collect::<Result<Vec<_>, _>>()?;

    let manifest = RunManifest {
        format: DATASET_FORMAT.to_string(),
        version: 1,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        objects,
    };
    write_json(&root.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// A dataset on disk.
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: RunManifest,
}

impl Dataset {
    pub fn load(root: &Path) -> Result<Self, PipelineError> {
        let manifest: RunManifest = read_json(&root.join("manifest.json"))?;
        if manifest.format != DATASET_FORMAT {
            return Err(PipelineError::Invalid(format!(
                "{} is not a dataset manifest (format {})",
                root.display(),
                manifest.format
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn objects(&self, split: Option<&str>) -> Vec<&ObjectEntry> {
        self.manifest
            .objects
            .iter()
            .filter(|o| split.map(|s| o.split == s).unwrap_or(true))
            .collect()
    }

    pub fn load_model(&self, entry: &ObjectEntry) -> Result<ArticulatedModel, PipelineError> {
        let model: ArticulatedModel = read_json(&self.root.join(&entry.dir).join("model.json"))?;
        model.validate()?;
        Ok(model)
    }

    pub fn load_states(&self, entry: &ObjectEntry) -> Result<StatesFile, PipelineError> {
        read_json(&self.root.join(&entry.dir).join("states.json"))
    }

    pub fn load_frame(
        &self,
        entry: &ObjectEntry,
        state: usize,
    ) -> Result<PointCloudFrame, PipelineError> {
        Ok(formats::read_frame(
            &frame_path(&self.root.join(&entry.dir), state),
            state,
        )?)
    }

    /// Reads the chosen states into one sequence sample plus the matching
    /// joint configurations.
    pub fn assemble_sequence(
        &self,
        entry: &ObjectEntry,
        indices: &[usize],
    ) -> Result<(SequenceSample, Vec<JointConfig>), PipelineError> {
        let states = self.load_states(entry)?;
        let mut frames = Vec::with_capacity(indices.len());
        let mut configs = Vec::with_capacity(indices.len());
        for &idx in indices {
            if idx >= states.states.len() {
                return Err(PipelineError::Invalid(format!(
                    "state {idx} out of range for {}",
                    entry.id
                )));
            }
            frames.push(self.load_frame(entry, idx)?);
            configs.push(JointConfig(states.states[idx].clone()));
        }
        Ok((SequenceSample { frames }, configs))
    }

    /// Clustering scale for one object: its bounding radius over the clip.
    pub fn object_radius(&self, entry: &ObjectEntry) -> Result<f64, PipelineError> {
        let model = self.load_model(entry)?;
        let states = self.load_states(entry)?;
        let configs: Vec<JointConfig> = states.states.iter().map(|q| JointConfig(q.clone())).collect();
        Ok(bounding_radius(&model, &configs))
    }
}

/// Ground-truth segmentation of a sequence sample, straight from its labels.
pub fn gt_segmentation(sample: &SequenceSample) -> SegmentationResult {
    let mut semantic = Vec::with_capacity(sample.total_points());
    let mut instance = Vec::with_capacity(sample.total_points());
    for frame in &sample.frames {
        semantic.extend_from_slice(&frame.semantic);
        // Ground-truth instance ids are part ids; the body is part 0 which
        // doubles as the stuff id.
        instance.extend_from_slice(&frame.instance);
    }
    SegmentationResult {
        semantic,
        instance,
        frames: sample.frames.len(),
        points_per_frame: sample.points_per_frame(),
    }
}

pub const DEFAULT_EPS_SCALE: f64 = 0.05;
pub const DEFAULT_MIN_PTS: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionSetting {
    pub frames: usize,
    pub spacing: SpacingPolicy,
    pub dir: String,
    pub eps_scale: f64,
    pub min_pts: usize,
    pub source: String,
    pub objects: Vec<PredictionObject>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionObject {
    pub id: String,
    pub file: String,
    pub frame_indices: Vec<usize>,
    pub points_per_frame: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionManifest {
    pub format: String,
    pub version: u32,
    pub settings: Vec<PredictionSetting>,
}

impl PredictionManifest {
    pub fn load(root: &Path) -> Result<Self, PipelineError> {
        let m: PredictionManifest = read_json(&root.join("pred_manifest.json"))?;
        if m.format != PREDICTIONS_FORMAT {
            return Err(PipelineError::Invalid(format!(
                "{} is not a predictions manifest",
                root.display()
            )));
        }
        Ok(m)
    }

    pub fn save(&self, root: &Path) -> Result<(), PipelineError> {
        write_json(&root.join("pred_manifest.json"), self)
    }
}

#[derive(Debug, Clone)]
pub struct SegmentOptions {
    pub target_mode: TargetMode,
    pub eps_scale: f64,
    /// Absolute clustering radius in meters; overrides the per-object
    /// `eps_scale * bounding_radius` default.
    pub eps_override: Option<f64>,
    pub min_pts: usize,
    pub frames: Vec<usize>,
    pub spacing: SpacingPolicy,
    pub split: Option<String>,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            target_mode: TargetMode::Canonical,
            eps_scale: DEFAULT_EPS_SCALE,
            eps_override: None,
            min_pts: DEFAULT_MIN_PTS,
            frames: vec![3],
            spacing: SpacingPolicy::Max,
            split: None,
        }
    }
}

fn setting_dir(frames: usize, spacing: SpacingPolicy) -> String {
    format!("frames_{frames}_{spacing}")
}

/// Runs ground-truth offsets through instance clustering for every object
/// and prediction setting, writes prediction files, and reports metrics per
/// setting (semantics are ground truth, so S_cls is 1 by construction).
pub fn oracle_segment(
    dataset: &Dataset,
    out: &Path,
    opts: &SegmentOptions,
) -> Result<Vec<(PredictionSetting, MetricReport)>, PipelineError> {
    run_segmentation(dataset, out, opts, None)
}

/// Applies a trained model to every object: predicted semantics pick the
/// things mask, predicted offsets drive the clustering.
pub fn predict(
    dataset: &Dataset,
    params: &ModelParams,
    out: &Path,
    opts: &SegmentOptions,
) -> Result<Vec<(PredictionSetting, MetricReport)>, PipelineError> {
    run_segmentation(dataset, out, opts, Some(params))
}

fn run_segmentation(
    dataset: &Dataset,
    out: &Path,
    opts: &SegmentOptions,
    params: Option<&ModelParams>,
) -> Result<Vec<(PredictionSetting, MetricReport)>, PipelineError> {
    fs::create_dir_all(out)?;
    let entries = dataset.objects(opts.split.as_deref());
    let mut outcome = Vec::new();
    for &frames in &opts.frames {
        if frames == 0 || frames > dataset.manifest.config.states {
            return Err(PipelineError::Invalid(format!(
                "cannot take {frames} frames from a {}-state clip",
                dataset.manifest.config.states
            )));
        }
        let dir = setting_dir(frames, opts.spacing);
        fs::create_dir_all(out.join(&dir))?;
        let indices = frame_indices(dataset.manifest.config.states, frames, opts.spacing);
        let mut setting = PredictionSetting {
            frames,
            spacing: opts.spacing,
            dir: dir.clone(),
            eps_scale: opts.eps_scale,
            min_pts: opts.min_pts,
            source: if params.is_some() {
                "model".to_string()
            } else {
                format!("oracle_{:?}", opts.target_mode).to_lowercase()
            },
            objects: Vec::new(),
        };
        let mut acc = MetricAccumulator::new();
        for entry in &entries {
            let (sample, configs) = dataset.assemble_sequence(entry, &indices)?;
            let n = sample.points_per_frame();
            let eps = opts
                .eps_override
                .unwrap_or(opts.eps_scale * dataset.object_radius(entry)?);
            let positions: Vec<_> = sample
                .frames
                .iter()
                .flat_map(|f| f.positions.iter().copied())
                .collect();

            let seg = match params {
                None => {
                    let model = dataset.load_model(entry)?;
                    let field = gt_offsets(
                        &sample,
                        &model,
                        &configs,
                        &model.canonical_config(),
                        opts.target_mode,
                    )?;
                    let semantics: Vec<SemanticClass> = sample
                        .frames
                        .iter()
                        .flat_map(|f| f.semantic.iter().copied())
                        .collect();
                    segment_instances(
                        &field.target,
                        &positions,
                        &semantics,
                        sample.frames.len(),
                        n,
                        eps,
                        opts.min_pts,
                    )
                }
                Some(p) => {
                    let prepared = prepare_sample(&sample);
                    let pass = forward(p, &prepared);
                    let semantics: Vec<SemanticClass> = (0..pass.offsets.len())
                        .map(|t| {
                            let row =
                                &pass.probs[t * crate::model::NUM_CLASSES..(t + 1) * crate::model::NUM_CLASSES];
                            let best = row
                                .iter()
                                .enumerate()
                                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                                .map(|(c, _)| c)
                                .unwrap();
                            SemanticClass::from_u16(best as u16).unwrap()
                        })
                        .collect();
                    segment_instances(
                        &pass.offsets,
                        &positions,
                        &semantics,
                        sample.frames.len(),
                        n,
                        eps,
                        opts.min_pts,
                    )
                }
            };

            let file = format!("{dir}/{}.a4dp", entry.id);
            formats::write_predictions(&out.join(&file), &seg)?;
            setting.objects.push(PredictionObject {
                id: entry.id.clone(),
                file,
                frame_indices: indices.clone(),
                points_per_frame: n,
            });
            acc.add_sequence(&gt_segmentation(&sample), &seg)?;
        }
        let report = acc.finalize(ClassAveraging::AllClasses);
        outcome.push((setting, report));
    }
    let manifest = PredictionManifest {
        format: PREDICTIONS_FORMAT.to_string(),
        version: 1,
        settings: outcome.iter().map(|(s, _)| s.clone()).collect(),
    };
    manifest.save(out)?;
    Ok(outcome)
}

/// Builds training samples from the train split and runs the training loop.
pub fn train_on_dataset(
    dataset: &Dataset,
    config: &TrainConfig,
    sem_loss: SemanticLoss,
    target_mode: TargetMode,
    frames: usize,
    spacing: SpacingPolicy,
) -> Result<(ModelParams, Vec<EpochRecord>), PipelineError> {
    let indices = frame_indices(dataset.manifest.config.states, frames, spacing);
    let mut samples = Vec::new();
    // Manifest order is already sorted by object id, fixing the data order.
    for entry in dataset.objects(Some("train")) {
        let (sample, configs) = dataset.assemble_sequence(entry, &indices)?;
        let model = dataset.load_model(entry)?;
        let field: OffsetField = gt_offsets(
            &sample,
            &model,
            &configs,
            &model.canonical_config(),
            target_mode,
        )?;
        let labels: Vec<usize> = sample
            .frames
            .iter()
            .flat_map(|f| f.semantic.iter().map(|c| c.as_u16() as usize))
            .collect();
        samples.push(TrainSample::from_offsets(
            prepare_sample(&sample),
            labels,
            &field,
        ));
    }
    if samples.is_empty() {
        return Err(PipelineError::Invalid(
            "dataset has no training objects".into(),
        ));
    }
    Ok(train(&samples, config, sem_loss)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationOutcome {
    pub frames: usize,
    pub spacing: SpacingPolicy,
    pub source: String,
    pub report: MetricReport,
}

/// Scores stored predictions against the dataset's ground truth. With
/// several settings in the manifest this doubles as the frame-count sweep.
pub fn evaluate(
    dataset: &Dataset,
    predictions_root: &Path,
    frames_filter: Option<&[usize]>,
    averaging: ClassAveraging,
) -> Result<Vec<EvaluationOutcome>, PipelineError> {
    let manifest = PredictionManifest::load(predictions_root)?;
    let mut outcomes = Vec::new();
    for setting in &manifest.settings {
        if let Some(filter) = frames_filter {
            if !filter.contains(&setting.frames) {
                continue;
            }
        }
        let mut acc = MetricAccumulator::new();
        for obj in &setting.objects {
            let entry = dataset
                .manifest
                .objects
                .iter()
                .find(|e| e.id == obj.id)
                .ok_or_else(|| {
                    PipelineError::Invalid(format!("prediction for unknown object {}", obj.id))
                })?;
            let (sample, _) = dataset.assemble_sequence(entry, &obj.frame_indices)?;
            let gt = gt_segmentation(&sample);
            let pred = formats::read_predictions(
                &predictions_root.join(&obj.file),
                obj.frame_indices.len(),
                obj.points_per_frame,
            )?;
            if pred.points_per_frame != sample.points_per_frame() {
                return Err(MetricsError::Incongruent {
                    gt: gt.semantic.len(),
                    pred: pred.semantic.len(),
                }
                .into());
            }
            acc.add_sequence(&gt, &pred)?;
        }
        outcomes.push(EvaluationOutcome {
            frames: setting.frames,
            spacing: setting.spacing,
            source: setting.source.clone(),
            report: acc.finalize(averaging),
        });
    }
    if outcomes.is_empty() {
        return Err(PipelineError::Invalid(
            "no prediction settings matched the requested frame counts".into(),
        ));
    }
    Ok(outcomes)
}

/// Sweep CSV: one row per evaluated setting.
pub fn sweep_csv(outcomes: &[EvaluationOutcome]) -> String {
    let mut out = String::from("frames,spacing,source,s_cls,s_assoc,lstq\n");
    for o in outcomes {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6}\n",
            o.frames, o.spacing, o.source, o.report.s_cls, o.report.s_assoc, o.report.lstq
        ));
    }
    out
}
