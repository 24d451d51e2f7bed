//! Synthetic depth sensing: cameras on a viewing sphere, ray-cast RGB-D
//! rendering of posed box-shell parts, back-projection to labeled point
//! clouds, 360-degree fusion and farthest point sampling.
//!
//! Depth is the Euclidean distance along the (normalized) viewing ray, not
//! z-depth, so back-projection is exact: `point = origin + depth * dir`.

use nalgebra::{Unit, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::kinematics::{part_pose, ArticulatedModel, JointConfig, KinematicsError};
use crate::scenegen::{SemanticClass, Triangle};

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("sample budget {m} exceeds fused cloud size {available}")]
    SampleBudget { m: usize, available: usize },
    #[error("no points to fuse")]
    EmptyFusion,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Pinhole intrinsics in pixels; the principal point sits at the image
/// center and pixel centers are offset by half a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(width: usize, height: usize, focal: f64) -> Self {
        Self {
            focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    /// Focal length that frames a sphere of `radius` seen from `distance`
    /// with a 20% margin on the smaller image side.
    pub fn fit_sphere(width: usize, height: usize, radius: f64, distance: f64) -> Self {
        let ratio = (radius / distance).min(0.95);
        let half_angle = ratio.asin();
        let focal = (width.min(height) as f64 / 2.0) / (1.2 * half_angle.tan());
        Self::new(width, height, focal)
    }
}

/// Camera on the viewing sphere, always aimed at the object center.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub position: Vector3<f64>,
    pub look_at: Vector3<f64>,
    pub up_hint: Vector3<f64>,
    pub intrinsics: Intrinsics,
}

impl CameraPose {
    /// Orthonormal (right, down, forward) viewing basis.
    pub fn basis(&self) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let forward = Unit::new_normalize(self.look_at - self.position).into_inner();
        let mut right = forward.cross(&self.up_hint);
        if right.norm() < 1e-8 {
            right = forward.cross(&Vector3::new(0.0, 1.0, 0.0));
        }
        let right = Unit::new_normalize(right).into_inner();
        let down = forward.cross(&right);
        (right, down, forward)
    }

    /// World-space unit direction through the center of pixel (u, v).
    pub fn pixel_ray(&self, u: usize, v: usize) -> Vector3<f64> {
        let (right, down, forward) = self.basis();
        let px = (u as f64 + 0.5 - self.intrinsics.cx) / self.intrinsics.focal;
        let py = (v as f64 + 0.5 - self.intrinsics.cy) / self.intrinsics.focal;
        Unit::new_normalize(right * px + down * py + forward).into_inner()
    }

    /// Floating-point pixel coordinates of a world point, or `None` behind
    /// the camera. Pixel (u, v) has center coordinates (u + 0.5, v + 0.5).
    pub fn project(&self, point: Vector3<f64>) -> Option<(f64, f64)> {
        let (right, down, forward) = self.basis();
        let rel = point - self.position;
        let pz = forward.dot(&rel);
        if pz <= 0.0 {
            return None;
        }
        let u = self.intrinsics.cx + self.intrinsics.focal * right.dot(&rel) / pz;
        let v = self.intrinsics.cy + self.intrinsics.focal * down.dot(&rel) / pz;
        Some((u, v))
    }
}

/// Point on a sphere of radius `r` at altitude `theta` and azimuth `phi`.
pub fn sphere_point(r: f64, theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(
        r * theta.sin() * phi.cos(),
        r * theta.sin() * phi.sin(),
        r * theta.cos(),
    )
}

/// `count` cameras on an object-centric sphere of radius `r`, placed on a
/// Fibonacci lattice for near-uniform coverage, all aimed at the origin.
pub fn camera_positions(r: f64, count: usize, intrinsics: Intrinsics) -> Vec<CameraPose> {
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..count)
        .map(|j| {
            let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
            let theta = z.clamp(-1.0, 1.0).acos();
            let phi = golden_angle * j as f64;
            CameraPose {
                position: sphere_point(r, theta, phi),
                look_at: Vector3::zeros(),
                up_hint: Vector3::new(0.0, 0.0, 1.0),
                intrinsics,
            }
        })
        .collect()
}

/// Labeled single-frame point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudFrame {
    pub positions: Vec<Vector3<f64>>,
    pub colors: Vec<[f64; 3]>,
    pub semantic: Vec<SemanticClass>,
    pub instance: Vec<u32>,
    pub state_index: usize,
}

impl PointCloudFrame {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Frames of equal point count forming one 4D sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub frames: Vec<PointCloudFrame>,
}

impl SequenceSample {
    pub fn points_per_frame(&self) -> usize {
        self.frames.first().map(|f| f.len()).unwrap_or(0)
    }

    pub fn total_points(&self) -> usize {
        self.frames.iter().map(|f| f.len()).sum()
    }
}

/// Model posed at a fixed configuration, with world-space triangles and a
/// conservative bounding box per part. Reused across the views of one state.
pub struct PosedModel {
    parts: Vec<PosedPart>,
}

struct PosedPart {
    id: u32,
    semantic: SemanticClass,
    color: [f64; 3],
    triangles: Vec<Triangle>,
    bounds_min: Vector3<f64>,
    bounds_max: Vector3<f64>,
}

impl PosedModel {
    pub fn new(model: &ArticulatedModel, q: &JointConfig) -> Result<Self, KinematicsError> {
        let mut parts = Vec::with_capacity(model.parts.len());
        for part in &model.parts {
            let pose = part_pose(model, part.id, q)?;
            let triangles: Vec<Triangle> = part
                .mesh
                .iter()
                .map(|t| Triangle::new(pose.apply(t.a), pose.apply(t.b), pose.apply(t.c)))
                .collect();
            let mut lo = Vector3::repeat(f64::INFINITY);
            let mut hi = Vector3::repeat(f64::NEG_INFINITY);
            for t in &triangles {
                for v in [t.a, t.b, t.c] {
                    lo = lo.inf(&v);
                    hi = hi.sup(&v);
                }
            }
            parts.push(PosedPart {
                id: part.id as u32,
                semantic: part.semantic,
                color: part.color,
                triangles,
                bounds_min: lo,
                bounds_max: hi,
            });
        }
        Ok(Self { parts })
    }
}

/// Per-pixel output of one rendered view. Missed pixels are invalid and
/// carry an infinite depth.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub rgb: Vec<[f64; 3]>,
    pub semantic: Vec<SemanticClass>,
    pub instance: Vec<u32>,
    pub valid: Vec<bool>,
}

fn ray_aabb_hits(
    origin: Vector3<f64>,
    inv_dir: Vector3<f64>,
    lo: &Vector3<f64>,
    hi: &Vector3<f64>,
    t_best: f64,
) -> bool {
    let mut t_min: f64 = 0.0;
    let mut t_max = t_best;
    for i in 0..3 {
        let t1 = (lo[i] - origin[i]) * inv_dir[i];
        let t2 = (hi[i] - origin[i]) * inv_dir[i];
        let (near, far) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        t_min = t_min.max(near);
        t_max = t_max.min(far);
        if t_min > t_max {
            return false;
        }
    }
    true
}

/// Möller–Trumbore; returns the hit distance along the unit ray, if any.
fn ray_triangle(origin: Vector3<f64>, dir: Vector3<f64>, tri: &Triangle) -> Option<f64> {
    let e1 = tri.b - tri.a;
    let e2 = tri.c - tri.a;
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri.a;
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = inv * e2.dot(&q);
    (t > 1e-9).then_some(t)
}

/// Renders depth, color and labels of the posed model from one camera.
/// Every pixel takes the nearest ray-triangle hit over all parts.
pub fn render_posed(posed: &PosedModel, camera: &CameraPose) -> RenderOutput {
    let w = camera.intrinsics.width;
    let h = camera.intrinsics.height;
    let n = w * h;
    let mut out = RenderOutput {
        width: w,
        height: h,
        depth: vec![f64::INFINITY; n],
        rgb: vec![[0.0; 3]; n],
        semantic: vec![SemanticClass::Body; n],
        instance: vec![0; n],
        valid: vec![false; n],
    };
    let origin = camera.position;
    for v in 0..h {
        for u in 0..w {
            let idx = v * w + u;
            let dir = camera.pixel_ray(u, v);
            let inv_dir = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
            let mut best = f64::INFINITY;
            let mut hit: Option<&PosedPart> = None;
            for part in &posed.parts {
                if part.triangles.is_empty()
                    || !ray_aabb_hits(origin, inv_dir, &part.bounds_min, &part.bounds_max, best)
                {
                    continue;
                }
                for tri in &part.triangles {
                    if let Some(t) = ray_triangle(origin, dir, tri) {
                        if t < best {
                            best = t;
                            hit = Some(part);
                        }
                    }
                }
            }
            if let Some(part) = hit {
                out.depth[idx] = best;
                out.rgb[idx] = part.color;
                out.semantic[idx] = part.semantic;
                out.instance[idx] = part.id;
                out.valid[idx] = true;
            }
        }
    }
    out
}

/// Poses the model at `q` and renders one view.
pub fn render(
    model: &ArticulatedModel,
    q: &JointConfig,
    camera: &CameraPose,
) -> Result<RenderOutput, KinematicsError> {
    Ok(render_posed(&PosedModel::new(model, q)?, camera))
}

/// Lifts every valid pixel onto its viewing ray at the rendered depth,
/// keeping row-major pixel order.
pub fn backproject(render: &RenderOutput, camera: &CameraPose, state_index: usize) -> PointCloudFrame {
    let mut frame = PointCloudFrame {
        positions: Vec::new(),
        colors: Vec::new(),
        semantic: Vec::new(),
        instance: Vec::new(),
        state_index,
    };
    for v in 0..render.height {
        for u in 0..render.width {
            let idx = v * render.width + u;
            if !render.valid[idx] {
                continue;
            }
            let dir = camera.pixel_ray(u, v);
            frame.positions.push(camera.position + render.depth[idx] * dir);
            frame.colors.push(render.rgb[idx]);
            frame.semantic.push(render.semantic[idx]);
            frame.instance.push(render.instance[idx]);
        }
    }
    frame
}

/// Greedy farthest point sampling. The seed is the point farthest from the
/// centroid; ties always resolve to the smallest index, so the selection is
/// a pure function of the input order.
pub fn farthest_point_sampling(points: &[Vector3<f64>], m: usize) -> Vec<usize> {
    assert!(m <= points.len());
    if m == 0 {
        return Vec::new();
    }
    let n = points.len();
    let centroid = points.iter().sum::<Vector3<f64>>() / n as f64;
    let seed = argmax_dist(points.par_iter().map(|p| (p - centroid).norm_squared()));

    let mut selected = Vec::with_capacity(m);
    selected.push(seed);
    let mut min_dist: Vec<f64> = points
        .par_iter()
        .map(|p| (p - points[seed]).norm_squared())
        .collect();
    // Sentinel below any real distance keeps duplicates of already-selected
    // points eligible while the selected indices themselves never recur.
    min_dist[seed] = -1.0;
    while selected.len() < m {
        let last = points[*selected.last().unwrap()];
        let next = min_dist
            .par_iter_mut()
            .zip(points.par_iter())
            .enumerate()
            .map(|(i, (d, p))| {
                if *d >= 0.0 {
                    let cand = (p - last).norm_squared();
                    if cand < *d {
                        *d = cand;
                    }
                }
                (*d, i)
            })
            .reduce_with(better_candidate)
            .map(|(_, i)| i)
            .unwrap();
        min_dist[next] = -1.0;
        selected.push(next);
    }
    selected
}

fn argmax_dist(dists: impl IndexedParallelIterator<Item = f64>) -> usize {
    dists
        .enumerate()
        .map(|(i, d)| (d, i))
        .reduce_with(better_candidate)
        .map(|(_, i)| i)
        .unwrap()
}

/// Larger distance wins; exact ties go to the smaller index. Total order,
/// so parallel reduction order cannot change the result.
fn better_candidate(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Concatenates views in the given order and downsamples to exactly `m`
/// points by farthest point sampling. Labels travel with their points.
pub fn fuse_and_sample(views: &[PointCloudFrame], m: usize) -> Result<PointCloudFrame, SensingError> {
    let total: usize = views.iter().map(|v| v.len()).sum();
    if total == 0 {
        return Err(SensingError::EmptyFusion);
    }
    if m > total {
        return Err(SensingError::SampleBudget { m, available: total });
    }
    let state_index = views.iter().find(|v| !v.is_empty()).unwrap().state_index;
    let mut fused = PointCloudFrame {
        positions: Vec::with_capacity(total),
        colors: Vec::with_capacity(total),
        semantic: Vec::with_capacity(total),
        instance: Vec::with_capacity(total),
        state_index,
    };
    for v in views {
        fused.positions.extend_from_slice(&v.positions);
        fused.colors.extend_from_slice(&v.colors);
        fused.semantic.extend_from_slice(&v.semantic);
        fused.instance.extend_from_slice(&v.instance);
    }
    let keep = farthest_point_sampling(&fused.positions, m);
    Ok(PointCloudFrame {
        positions: keep.iter().map(|&i| fused.positions[i]).collect(),
        colors: keep.iter().map(|&i| fused.colors[i]).collect(),
        semantic: keep.iter().map(|&i| fused.semantic[i]).collect(),
        instance: keep.iter().map(|&i| fused.instance[i]).collect(),
        state_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::{build_template, Aabb, Dims, Part, TemplateKind};
    use crate::ArticulatedModel;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pole_camera_sits_on_top() {
        let p = sphere_point(2.5, 0.0, 1.234);
        assert_relative_eq!(p, Vector3::new(0.0, 0.0, 2.5), epsilon = 1e-12);
    }

    #[test]
    fn all_cameras_on_the_sphere() {
        let cams = camera_positions(2.5, 18, Intrinsics::new(16, 16, 20.0));
        assert_eq!(cams.len(), 18);
        for c in &cams {
            assert!((c.position.norm() - 2.5).abs() <= 1e-9);
            let (r, d, f) = c.basis();
            assert_relative_eq!(r.dot(&d), 0.0, epsilon = 1e-12);
            assert_relative_eq!(r.dot(&f), 0.0, epsilon = 1e-12);
            assert_relative_eq!(d.dot(&f), 0.0, epsilon = 1e-12);
        }
    }

    /// Brute-force pairwise angles: nearest-neighbor spacing varies by at
    /// most 2x, i.e. the lattice is near-uniform.
    #[test]
    fn fibonacci_lattice_is_near_uniform() {
        let cams = camera_positions(1.0, 18, Intrinsics::new(4, 4, 4.0));
        let mut nn = Vec::new();
        for (i, a) in cams.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (j, b) in cams.iter().enumerate() {
                if i != j {
                    let cos = a.position.dot(&b.position).clamp(-1.0, 1.0);
                    best = best.min(cos.acos());
                }
            }
            nn.push(best);
        }
        let min = nn.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = nn.iter().cloned().fold(0.0, f64::max);
        assert!(max <= 2.0 * min, "spacing ratio {}", max / min);
    }

    fn unit_box_model() -> ArticulatedModel {
        let body = Part::new(
            0,
            SemanticClass::Body,
            vec![Aabb::new([-0.5, -0.5, -0.5], [0.5, 0.5, 0.5])],
            [0.2, 0.4, 0.6],
        );
        ArticulatedModel {
            parts: vec![body],
            joints: vec![],
            root: 0,
        }
    }

    #[test]
    fn center_pixel_depth_matches_ray_plane_analysis() {
        let model = unit_box_model();
        let r = 2.5;
        let cam = CameraPose {
            position: Vector3::new(0.0, 0.0, r),
            look_at: Vector3::zeros(),
            up_hint: Vector3::new(0.0, 0.0, 1.0),
            intrinsics: Intrinsics::new(1, 1, 10.0),
        };
        let out = render(&model, &JointConfig(vec![]), &cam).unwrap();
        assert!(out.valid[0]);
        assert!((out.depth[0] - (r - 0.5)).abs() <= 1e-6);
        assert_eq!(out.rgb[0], [0.2, 0.4, 0.6]);
    }

    #[test]
    fn empty_model_renders_all_invalid() {
        let model = ArticulatedModel {
            parts: vec![Part::new(0, SemanticClass::Body, vec![], [0.0; 3])],
            joints: vec![],
            root: 0,
        };
        let cam = CameraPose {
            position: Vector3::new(0.0, 0.0, 2.0),
            look_at: Vector3::zeros(),
            up_hint: Vector3::new(0.0, 0.0, 1.0),
            intrinsics: Intrinsics::new(8, 8, 8.0),
        };
        let out = render(&model, &JointConfig(vec![]), &cam).unwrap();
        assert!(out.valid.iter().all(|&v| !v));
    }

    /// Every valid pixel's hit point lies inside (on) a box of the part it
    /// was labeled with.
    #[test]
    fn labels_match_point_in_box_oracle() {
        let model = build_template(
            TemplateKind::CabinetTwoDoor,
            Dims::new(0.8, 1.0, 0.5),
            3,
        )
        .unwrap();
        let q = JointConfig(vec![0.7, 0.3]);
        let cam = CameraPose {
            position: Vector3::new(1.8, 1.4, 1.1),
            look_at: Vector3::zeros(),
            up_hint: Vector3::new(0.0, 0.0, 1.0),
            intrinsics: Intrinsics::fit_sphere(48, 48, 1.0, 2.5),
        };
        let out = render(&model, &q, &cam).unwrap();
        assert!(out.valid.iter().any(|&v| v));
        for v in 0..48 {
            for u in 0..48 {
                let idx = v * 48 + u;
                if !out.valid[idx] {
                    continue;
                }
                let hit = cam.position + out.depth[idx] * cam.pixel_ray(u, v);
                let part = &model.parts[out.instance[idx] as usize];
                let pose = part_pose(&model, part.id, &q).unwrap();
                let local = pose.inverse().apply(hit);
                let inside = part
                    .boxes
                    .iter()
                    .any(|b| b.signed_distance(local) <= 1e-6);
                assert!(inside, "pixel ({u},{v}) labeled {}", part.id);
                assert_eq!(out.semantic[idx], part.semantic);
            }
        }
    }

    #[test]
    fn backprojection_reprojects_onto_source_pixels() {
        let model = build_template(TemplateKind::CabinetDoor, Dims::new(0.8, 1.0, 0.5), 1).unwrap();
        let cam = CameraPose {
            position: Vector3::new(1.5, 1.7, 0.9),
            look_at: Vector3::zeros(),
            up_hint: Vector3::new(0.0, 0.0, 1.0),
            intrinsics: Intrinsics::fit_sphere(32, 32, 1.0, 2.4),
        };
        let q = JointConfig(vec![0.4]);
        let out = render(&model, &q, &cam).unwrap();
        let frame = backproject(&out, &cam, 0);
        assert!(!frame.is_empty());
        // Walk valid pixels in the same row-major order as backproject.
        let mut k = 0;
        for v in 0..32 {
            for u in 0..32 {
                if !out.valid[v * 32 + u] {
                    continue;
                }
                let (pu, pv) = cam.project(frame.positions[k]).unwrap();
                assert!((pu - (u as f64 + 0.5)).abs() <= 0.5, "{pu} vs {u}");
                assert!((pv - (v as f64 + 0.5)).abs() <= 0.5, "{pv} vs {v}");
                k += 1;
            }
        }
        assert_eq!(k, frame.len());
    }

    #[test]
    fn center_pixel_backprojects_along_optical_axis() {
        let model = unit_box_model();
        let cam = CameraPose {
            position: Vector3::new(0.0, 0.0, 2.5),
            look_at: Vector3::zeros(),
            up_hint: Vector3::new(0.0, 0.0, 1.0),
            intrinsics: Intrinsics::new(1, 1, 10.0),
        };
        let out = render(&model, &JointConfig(vec![]), &cam).unwrap();
        let frame = backproject(&out, &cam, 0);
        assert_eq!(frame.len(), 1);
        assert_relative_eq!(
            frame.positions[0],
            Vector3::new(0.0, 0.0, 0.5),
            epsilon = 1e-9
        );
    }

    #[test]
    fn fps_identity_when_budget_equals_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vector3<f64>> = (0..20)
            .map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let mut sel = farthest_point_sampling(&pts, 20);
        sel.sort_unstable();
        assert_eq!(sel, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn fps_selects_distinct_indices_even_with_duplicates() {
        let mut pts = vec![Vector3::new(1.0, 0.0, 0.0); 5];
        pts.push(Vector3::new(0.0, 0.0, 0.0));
        let sel = farthest_point_sampling(&pts, 4);
        let set: std::collections::BTreeSet<usize> = sel.iter().copied().collect();
        assert_eq!(set.len(), 4, "indices must be distinct: {sel:?}");
    }

    #[test]
    fn fps_two_points_on_a_segment_are_the_extremes() {
        let pts: Vec<Vector3<f64>> = (0..11)
            .map(|i| Vector3::new(i as f64 * 0.1, 0.0, 0.0))
            .collect();
        let mut sel = farthest_point_sampling(&pts, 2);
        sel.sort_unstable();
        assert_eq!(sel, vec![0, 10]);
    }

    /// Exhaustive greedy oracle: recompute, for every candidate, its distance
    /// to the already-selected set from scratch.
    fn fps_oracle(points: &[Vector3<f64>], m: usize) -> Vec<usize> {
        let n = points.len();
        let centroid = points.iter().sum::<Vector3<f64>>() / n as f64;
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            let d = (p - centroid).norm();
            if d > best.0 {
                best = (d, i);
            }
        }
        let mut selected = vec![best.1];
        while selected.len() < m {
            let mut pick = (f64::NEG_INFINITY, usize::MAX);
            for (i, p) in points.iter().enumerate() {
                let d = selected
                    .iter()
                    .map(|&s| (p - points[s]).norm())
                    .fold(f64::INFINITY, f64::min);
                if d > pick.0 {
                    pick = (d, i);
                }
            }
            selected.push(pick.1);
        }
        selected
    }

    #[test]
    fn fps_matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let pts: Vec<Vector3<f64>> = (0..24)
                .map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen()))
                .collect();
            let mut ours = farthest_point_sampling(&pts, 8);
            let mut oracle = fps_oracle(&pts, 8);
            ours.sort_unstable();
            oracle.sort_unstable();
            assert_eq!(ours, oracle);
        }
    }

    /// The minimum pairwise distance of the selection never increases when
    /// the budget grows by one.
    #[test]
    fn fps_min_distance_is_monotone_in_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vector3<f64>> = (0..40)
            .map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let min_pair = |sel: &[usize]| {
            let mut best = f64::INFINITY;
            for i in 0..sel.len() {
                for j in i + 1..sel.len() {
                    best = best.min((pts[sel[i]] - pts[sel[j]]).norm());
                }
            }
            best
        };
        let mut prev = f64::INFINITY;
        for m in 2..=20 {
            let sel = farthest_point_sampling(&pts, m);
            assert_eq!(sel.len(), m);
            let d = min_pair(&sel);
            assert!(d <= prev + 1e-12);
            prev = d;
        }
    }

    #[test]
    fn fuse_rejects_oversized_budget() {
        let frame = PointCloudFrame {
            positions: vec![Vector3::zeros(); 3],
            colors: vec![[0.0; 3]; 3],
            semantic: vec![SemanticClass::Body; 3],
            instance: vec![0; 3],
            state_index: 0,
        };
        assert!(matches!(
            fuse_and_sample(&[frame], 4),
            Err(SensingError::SampleBudget { m: 4, available: 3 })
        ));
    }

    #[test]
    fn single_view_fusion_is_identity_up_to_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frame = PointCloudFrame {
            positions: (0..15)
                .map(|_| Vector3::new(rng.gen(), rng.gen(), rng.gen()))
                .collect(),
            colors: (0..15).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect(),
            semantic: vec![SemanticClass::Drawer; 15],
            instance: vec![1; 15],
            state_index: 2,
        };
        let fused = fuse_and_sample(std::slice::from_ref(&frame), 15).unwrap();
        assert_eq!(fused.state_index, 2);
        let mut got: Vec<_> = fused
            .positions
            .iter()
            .map(|p| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits()))
            .collect();
        let mut want: Vec<_> = frame
            .positions
            .iter()
            .map(|p| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits()))
            .collect();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
    }

    /// Fusing the same views in a different order yields the same point set
    /// after sampling (no exact ties in generic rendered data).
    #[test]
    fn fusion_order_does_not_change_the_selection_set() {
        let model = build_template(TemplateKind::LaptopLid, Dims::new(0.35, 0.24, 0.26), 2).unwrap();
        let q = JointConfig(vec![0.8]);
        let posed = PosedModel::new(&model, &q).unwrap();
        let cams = camera_positions(0.9, 6, Intrinsics::fit_sphere(24, 24, 0.36, 0.9));
        let views: Vec<PointCloudFrame> = cams
            .iter()
            .map(|c| backproject(&render_posed(&posed, c), c, 0))
            .collect();
        let a = fuse_and_sample(&views, 64).unwrap();
        let reversed: Vec<PointCloudFrame> = views.iter().rev().cloned().collect();
        let b = fuse_and_sample(&reversed, 64).unwrap();
        let key = |f: &PointCloudFrame| {
            let mut v: Vec<_> = f
                .positions
                .iter()
                .map(|p| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits()))
                .collect();
            v.sort_unstable();
            v
        };
        assert_eq!(key(&a), key(&b));
    }

    /// At the fully open state with 18 cameras, every things part keeps at
    /// least 1% of the fused points, and the body keeps the majority.
    #[test]
    fn fused_clouds_cover_all_moving_parts() {
        for kind in TemplateKind::all() {
            let model = build_template(kind, kind.default_dims(), 4).unwrap();
            let open = JointConfig(model.joints.iter().map(|j| j.limits.1).collect());
            let radius = crate::scenegen::bounding_radius(&model, std::slice::from_ref(&open));
            let posed = PosedModel::new(&model, &open).unwrap();
            let cams = camera_positions(
                2.5 * radius,
                18,
                Intrinsics::fit_sphere(64, 64, radius, 2.5 * radius),
            );
            let views: Vec<PointCloudFrame> = cams
                .iter()
                .map(|c| backproject(&render_posed(&posed, c), c, 0))
                .collect();
            let fused = fuse_and_sample(&views, 1024).unwrap();
            let mut counts = vec![0usize; model.parts.len()];
            for &inst in &fused.instance {
                counts[inst as usize] += 1;
            }
            for part in &model.parts {
                if part.semantic.is_things() {
                    assert!(
                        counts[part.id] as f64 >= 0.01 * fused.len() as f64,
                        "{kind}: part {} has {} of {} points",
                        part.id,
                        counts[part.id],
                        fused.len()
                    );
                    assert!(
                        counts[model.root] > counts[part.id],
                        "{kind}: body ({}) not the majority vs part {} ({})",
                        counts[model.root],
                        part.id,
                        counts[part.id]
                    );
                }
            }
        }
    }
}
