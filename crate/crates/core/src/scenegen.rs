//! Procedural construction of desk-scale articulated objects.
//!
//! Every part is a union of closed axis-aligned box shells authored in the
//! origin frame at the zero configuration. Seven templates cover the five
//! movable semantic classes plus two-part combinations. Construction is a
//! pure function of (template, dims, seed), so scenarios regenerate
//! byte-identically.
//!
//! Conventions: z is up, +y is out the front, x spans the width. Objects are
//! roughly centered on the origin.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{part_pose, ArticulatedModel, Joint, JointConfig, JointKind};
use crate::trajectory::{sample_states, ProfileKind, TrajectoryProfile};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("dims must be positive, got {0:?}")]
    InvalidDims(Dims),
    #[error("scenario construction failed: {0}")]
    Construction(String),
}

/// Semantic classes defined by movement affordance. `Body` is the unique
/// stuff class; all others are things and carry instance ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u16)]
pub enum SemanticClass {
    Body = 0,
    Drawer = 1,
    HingedDoor = 2,
    Lid = 3,
    Leg = 4,
    Slider = 5,
}

impl SemanticClass {
    pub const COUNT: usize = 6;

    pub fn all() -> [SemanticClass; 6] {
        use SemanticClass::*;
        [Body, Drawer, HingedDoor, Lid, Leg, Slider]
    }

    pub fn is_things(self) -> bool {
        self != SemanticClass::Body
    }

    pub fn as_u16(self) -> u16 {
        self as u16
    }

    pub fn from_u16(v: u16) -> Option<Self> {
        Self::all().into_iter().find(|c| c.as_u16() == v)
    }
}

/// Axis-aligned box, the building block of every part shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        debug_assert!(min.iter().zip(&max).all(|(a, b)| a < b));
        Self { min, max }
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let mut out = [Vector3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Vector3::new(
                if i & 1 == 0 { self.min[0] } else { self.max[0] },
                if i & 2 == 0 { self.min[1] } else { self.max[1] },
                if i & 4 == 0 { self.min[2] } else { self.max[2] },
            );
        }
        out
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn contains(&self, p: Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Signed distance: positive outside, negative inside.
    pub fn signed_distance(&self, p: Vector3<f64>) -> f64 {
        let c = self.center();
        let half = Vector3::new(
            0.5 * (self.max[0] - self.min[0]),
            0.5 * (self.max[1] - self.min[1]),
            0.5 * (self.max[2] - self.min[2]),
        );
        let q = (p - c).abs() - half;
        let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
        outside + q.x.max(q.y).max(q.z).min(0.0)
    }

    /// Closed shell of the box as 12 consistently outward-oriented triangles.
    pub fn shell(&self) -> Vec<Triangle> {
        let [x0, y0, z0] = self.min;
        let [x1, y1, z1] = self.max;
        let v = |x: f64, y: f64, z: f64| Vector3::new(x, y, z);
        // Each face as a CCW quad seen from outside.
        let faces = [
            // -x
            [v(x0, y0, z0), v(x0, y0, z1), v(x0, y1, z1), v(x0, y1, z0)],
            // +x
            [v(x1, y0, z0), v(x1, y1, z0), v(x1, y1, z1), v(x1, y0, z1)],
            // -y
            [v(x0, y0, z0), v(x1, y0, z0), v(x1, y0, z1), v(x0, y0, z1)],
            // +y
            [v(x0, y1, z0), v(x0, y1, z1), v(x1, y1, z1), v(x1, y1, z0)],
            // -z
            [v(x0, y0, z0), v(x0, y1, z0), v(x1, y1, z0), v(x1, y0, z0)],
            // +z
            [v(x0, y0, z1), v(x1, y0, z1), v(x1, y1, z1), v(x0, y1, z1)],
        ];
        let mut tris = Vec::with_capacity(12);
        for f in faces {
            tris.push(Triangle::new(f[0], f[1], f[2]));
            tris.push(Triangle::new(f[0], f[2], f[3]));
        }
        tris
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub c: Vector3<f64>,
}

impl Triangle {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>) -> Self {
        Self { a, b, c }
    }

    pub fn normal(&self) -> Vector3<f64> {
        (self.b - self.a).cross(&(self.c - self.a))
    }
}

/// Rigid part: a union of box shells with a semantic class and a flat color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PartDto", into = "PartDto")]
pub struct Part {
    pub id: usize,
    pub semantic: SemanticClass,
    /// Triangulated shell, derived from `boxes`.
    pub mesh: Vec<Triangle>,
    pub color: [f64; 3],
    /// Authoritative shape; serialized instead of the triangle list.
    pub boxes: Vec<Aabb>,
}

impl Part {
    pub fn new(id: usize, semantic: SemanticClass, boxes: Vec<Aabb>, color: [f64; 3]) -> Self {
        let mesh = boxes.iter().flat_map(Aabb::shell).collect();
        Self {
            id,
            semantic,
            mesh,
            color,
            boxes,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PartDto {
    id: usize,
    semantic: SemanticClass,
    color: [f64; 3],
    boxes: Vec<Aabb>,
}

impl From<PartDto> for Part {
    fn from(d: PartDto) -> Self {
        Part::new(d.id, d.semantic, d.boxes, d.color)
    }
}

impl From<Part> for PartDto {
    fn from(p: Part) -> Self {
        PartDto {
            id: p.id,
            semantic: p.semantic,
            color: p.color,
            boxes: p.boxes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub width: f64,
    pub height: f64,
    pub depth: f64,
}

impl Dims {
    pub fn new(width: f64, height: f64, depth: f64) -> Self {
        Self {
            width,
            height,
            depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    CabinetDoor,
    CabinetDrawer,
    CabinetTwoDoor,
    CabinetDoorDrawer,
    LaptopLid,
    SliderWindow,
    ScissorsLegs,
}

impl TemplateKind {
    pub fn all() -> [TemplateKind; 7] {
        use TemplateKind::*;
        [
            CabinetDoor,
            CabinetDrawer,
            CabinetTwoDoor,
            CabinetDoorDrawer,
            LaptopLid,
            SliderWindow,
            ScissorsLegs,
        ]
    }

    pub fn id(self) -> &'static str {
        use TemplateKind::*;
        match self {
            CabinetDoor => "cabinet_door",
            CabinetDrawer => "cabinet_drawer",
            CabinetTwoDoor => "cabinet_two_door",
            CabinetDoorDrawer => "cabinet_door_drawer",
            LaptopLid => "laptop_lid",
            SliderWindow => "slider_window",
            ScissorsLegs => "scissors_legs",
        }
    }

    pub fn parse(s: &str) -> Result<Self, SceneError> {
        Self::all()
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| SceneError::UnknownTemplate(s.to_string()))
    }

    /// Number of actuated joints (every joint is actuated).
    pub fn joint_count(self) -> usize {
        use TemplateKind::*;
        match self {
            CabinetDoor | CabinetDrawer | LaptopLid | SliderWindow => 1,
            CabinetTwoDoor | CabinetDoorDrawer | ScissorsLegs => 2,
        }
    }

    /// Plausible default size in meters.
    pub fn default_dims(self) -> Dims {
        use TemplateKind::*;
        match self {
            CabinetDoor | CabinetDrawer | CabinetTwoDoor | CabinetDoorDrawer => {
                Dims::new(0.8, 1.0, 0.5)
            }
            LaptopLid => Dims::new(0.35, 0.24, 0.26),
            SliderWindow => Dims::new(0.9, 0.9, 0.12),
            ScissorsLegs => Dims::new(0.5, 0.11, 0.12),
        }
    }
}

impl std::fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

const PANEL: f64 = 0.02; // door / lid / pane thickness
const WALL: f64 = 0.03; // cavity wall thickness
const GAP: f64 = 0.003; // clearance between moving parts and the body
const REVOLUTE_LIMIT: f64 = std::f64::consts::FRAC_PI_2;
const PRISMATIC_TRAVEL_RATIO: f64 = 0.4;

fn distinct_color(rng_seed: u64, index: usize) -> [f64; 3] {
    // Golden-angle hue walk, offset per object so parts differ across objects.
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let base: f64 = rng.gen();
    let hue = (base + index as f64 * 0.381_966).fract();
    hsv_to_rgb(hue, 0.65, 0.85)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.fract() * 6.0).rem_euclid(6.0);
    let i = h6.floor() as i64;
    let f = h6 - i as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn revolute(id: usize, axis: [f64; 3], anchor: Vector3<f64>, child: usize) -> Joint {
    Joint {
        id,
        kind: JointKind::Revolute,
        axis: Vector3::new(axis[0], axis[1], axis[2]),
        anchor,
        limits: (0.0, REVOLUTE_LIMIT),
        parent_part: 0,
        child_part: child,
    }
}

fn prismatic(id: usize, axis: [f64; 3], travel: f64, child: usize) -> Joint {
    Joint {
        id,
        kind: JointKind::Prismatic,
        axis: Vector3::new(axis[0], axis[1], axis[2]),
        anchor: Vector3::zeros(),
        limits: (0.0, travel),
        parent_part: 0,
        child_part: child,
    }
}

/// Open-front cavity: bottom, top, left, right and back walls.
fn cavity_boxes(w: f64, h: f64, d: f64) -> Vec<Aabb> {
    let (hw, hh, hd) = (w / 2.0, h / 2.0, d / 2.0);
    vec![
        Aabb::new([-hw, -hd, -hh], [hw, hd, -hh + WALL]),
        Aabb::new([-hw, -hd, hh - WALL], [hw, hd, hh]),
        Aabb::new([-hw, -hd, -hh + WALL], [-hw + WALL, hd, hh - WALL]),
        Aabb::new([hw - WALL, -hd, -hh + WALL], [hw, hd, hh - WALL]),
        Aabb::new(
            [-hw + WALL, -hd, -hh + WALL],
            [hw - WALL, -hd + WALL, hh - WALL],
        ),
    ]
}

/// Builds one of the shipped templates. Same inputs always produce an
/// identical model; the seed only picks the color palette.
pub fn build_template(
    kind: TemplateKind,
    dims: Dims,
    seed: u64,
) -> Result<ArticulatedModel, SceneError> {
    if dims.width <= 0.0 || dims.height <= 0.0 || dims.depth <= 0.0 {
        return Err(SceneError::InvalidDims(dims));
    }
    let (w, h, d) = (dims.width, dims.height, dims.depth);
    let (hw, hh, hd) = (w / 2.0, h / 2.0, d / 2.0);
    let color = |i: usize| distinct_color(seed, i);

    use SemanticClass::*;
    use TemplateKind::*;
    let (parts, joints) = match kind {
        CabinetDoor => {
            let body = vec![Aabb::new([-hw, -hd, -hh], [hw, hd, hh])];
            let door = vec![Aabb::new([-hw, hd + GAP, -hh], [hw, hd + GAP + PANEL, hh])];
            let hinge = Vector3::new(-hw, hd + GAP + PANEL / 2.0, 0.0);
            (
                vec![
                    Part::new(0, Body, body, color(0)),
                    Part::new(1, HingedDoor, door, color(1)),
                ],
                vec![revolute(0, [0.0, 0.0, 1.0], hinge, 1)],
            )
        }
        CabinetDrawer => {
            let body = cavity_boxes(w, h, d);
            let c = GAP;
            let drawer = vec![Aabb::new(
                [-hw + WALL + c, -hd + WALL + c, -hh + WALL + c],
                [hw - WALL - c, hd, hh - WALL - c],
            )];
            (
                vec![
                    Part::new(0, Body, body, color(0)),
                    Part::new(1, Drawer, drawer, color(1)),
                ],
                vec![prismatic(0, [0.0, 1.0, 0.0], PRISMATIC_TRAVEL_RATIO * d, 1)],
            )
        }
        CabinetTwoDoor => {
            // Full-width doors on opposite faces: upper door on the front,
            // hinged at the front-left vertical edge; lower door on the back,
            // hinged at the back-right vertical edge.
            let body = vec![Aabb::new([-hw, -hd, -hh], [hw, hd, hh])];
            let split = 0.005;
            let front_door = vec![Aabb::new(
                [-hw, hd + GAP, split],
                [hw, hd + GAP + PANEL, hh],
            )];
            let back_door = vec![Aabb::new(
                [-hw, -hd - GAP - PANEL, -hh],
                [hw, -hd - GAP, -split],
            )];
            let front_hinge = Vector3::new(-hw, hd + GAP + PANEL / 2.0, 0.0);
            let back_hinge = Vector3::new(hw, -hd - GAP - PANEL / 2.0, 0.0);
            (
                vec![
                    Part::new(0, Body, body, color(0)),
                    Part::new(1, HingedDoor, front_door, color(1)),
                    Part::new(2, HingedDoor, back_door, color(2)),
                ],
                vec![
                    revolute(0, [0.0, 0.0, 1.0], front_hinge, 1),
                    revolute(1, [0.0, 0.0, 1.0], back_hinge, 2),
                ],
            )
        }
        CabinetDoorDrawer => {
            // Oven-like: bottom-hinged door over the upper opening, drawer in
            // the lower half, separated by a shelf.
            let shelf_t = WALL;
            let mut body = cavity_boxes(w, h, d);
            body.push(Aabb::new(
                [-hw + WALL, -hd + WALL, -shelf_t / 2.0],
                [hw - WALL, hd, shelf_t / 2.0],
            ));
            let door_lo = shelf_t / 2.0 + GAP;
            let door = vec![Aabb::new(
                [-hw, hd + GAP, door_lo],
                [hw, hd + GAP + PANEL, hh],
            )];
            let hinge = Vector3::new(0.0, hd + GAP + PANEL / 2.0, door_lo);
            let c = GAP;
            let drawer = vec![Aabb::new(
                [-hw + WALL + c, -hd + WALL + c, -hh + WALL + c],
                [hw - WALL - c, hd, -shelf_t / 2.0 - c],
            )];
            (
                vec![
                    Part::new(0, Body, body, color(0)),
                    Part::new(1, HingedDoor, door, color(1)),
                    Part::new(2, Drawer, drawer, color(2)),
                ],
                vec![
                    revolute(0, [-1.0, 0.0, 0.0], hinge, 1),
                    prismatic(1, [0.0, 1.0, 0.0], PRISMATIC_TRAVEL_RATIO * d, 2),
                ],
            )
        }
        LaptopLid => {
            // dims: width x hinge depth (y) x unused; base is slightly larger
            // than the lid so the body keeps the point majority.
            let over = 0.05 * w;
            let base_t = 0.16 * dims.depth;
            let lid_t = 0.08 * dims.depth;
            let body = vec![Aabb::new(
                [-hw - over, -hd - over, -base_t],
                [hw + over, hd + over, 0.0],
            )];
            let lid = vec![Aabb::new([-hw, -hd, GAP], [hw, hd, GAP + lid_t])];
            let hinge = Vector3::new(0.0, hd, GAP + lid_t / 2.0);
            (
                vec![
                    Part::new(0, Body, body, color(0)),
                    Part::new(1, Lid, lid, color(1)),
                ],
                vec![revolute(0, [-1.0, 0.0, 0.0], hinge, 1)],
            )
        }
        SliderWindow => {
            let rail = 0.09 * h;
            let fy = d / 2.0;
            let body = vec![
                Aabb::new([-hw, -fy / 2.0, -hh], [hw, fy / 2.0, -hh + rail]),
                Aabb::new([-hw, -fy / 2.0, hh - rail], [hw, fy / 2.0, hh]),
                Aabb::new([-hw, -fy / 2.0, -hh + rail], [-hw + rail, fy / 2.0, hh - rail]),
                Aabb::new([hw - rail, -fy / 2.0, -hh + rail], [hw, fy / 2.0, hh - rail]),
            ];
            // Pane behind the frame plane, covering the left half opening.
            let pane_w = (w - 2.0 * rail) / 2.0 + 0.04 * w;
            let pane = vec![Aabb::new(
                [-hw + rail, -fy / 2.0 - GAP - PANEL, -hh + rail / 2.0],
                [-hw + rail + pane_w, -fy / 2.0 - GAP, hh - rail / 2.0],
            )];
            (
                vec![
                    Part::new(0, Body, body, color(0)),
                    Part::new(1, Slider, pane, color(1)),
                ],
                vec![prismatic(0, [1.0, 0.0, 0.0], PRISMATIC_TRAVEL_RATIO * w, 1)],
            )
        }
        ScissorsLegs => {
            // Central plate with two legs stacked in separate z layers,
            // rotating in opposite senses about the plate center.
            let plate = 0.36 * w;
            let plate_t = 0.18 * h;
            let leg_len = 0.52 * w;
            let leg_w = d / 2.0;
            let leg_t = 0.18 * h;
            let z0 = plate_t / 2.0;
            let body = vec![Aabb::new(
                [-plate / 2.0, -plate / 2.0, -z0],
                [plate / 2.0, plate / 2.0, z0],
            )];
            let leg_a = vec![Aabb::new(
                [0.02 * w, -leg_w / 2.0, z0 + GAP],
                [0.02 * w + leg_len, leg_w / 2.0, z0 + GAP + leg_t],
            )];
            let leg_b = vec![Aabb::new(
                [-0.02 * w - leg_len, -leg_w / 2.0, z0 + 2.0 * GAP + leg_t],
                [-0.02 * w, leg_w / 2.0, z0 + 2.0 * GAP + 2.0 * leg_t],
            )];
            (
                vec![
                    Part::new(0, Body, body, color(0)),
                    Part::new(1, Leg, leg_a, color(1)),
                    Part::new(2, Leg, leg_b, color(2)),
                ],
                vec![
                    revolute(0, [0.0, 0.0, 1.0], Vector3::zeros(), 1),
                    revolute(1, [0.0, 0.0, -1.0], Vector3::zeros(), 2),
                ],
            )
        }
    };

    let model = ArticulatedModel {
        parts,
        joints,
        root: 0,
    };
    model
        .validate()
        .map_err(|e| SceneError::Construction(e.to_string()))?;
    Ok(model)
}

/// Largest distance from the origin to any posed part vertex over the given
/// states. Drives the camera sphere radius and the clustering scale.
pub fn bounding_radius(model: &ArticulatedModel, states: &[JointConfig]) -> f64 {
    let mut r: f64 = 0.0;
    for q in states {
        for part in &model.parts {
            let pose = part_pose(model, part.id, q).expect("valid model and states");
            for b in &part.boxes {
                for corner in b.corners() {
                    r = r.max(pose.apply(corner).norm());
                }
            }
        }
    }
    r
}

/// The trajectory shapes a scenario generator may assign to joints.
#[derive(Debug, Clone)]
pub struct ProfileMenu {
    pub kinds: Vec<ProfileKind>,
    pub allow_inverted: bool,
}

impl Default for ProfileMenu {
    fn default() -> Self {
        Self {
            kinds: vec![
                ProfileKind::Power { exponent: 0.5 },
                ProfileKind::Power { exponent: 1.0 },
                ProfileKind::Power { exponent: 2.0 },
                ProfileKind::Sigmoid,
            ],
            allow_inverted: true,
        }
    }
}

/// One generated object with its articulation states and trajectory metadata.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub template: TemplateKind,
    pub dims: Dims,
    pub seed: u64,
    pub model: ArticulatedModel,
    pub profiles: Vec<TrajectoryProfile>,
    pub states: Vec<JointConfig>,
}

/// Deterministically generates `count` scenarios cycling through `templates`.
/// Dims are jittered ±10%, trajectory kinds and inversion come from the menu.
pub fn scenario(
    seed: u64,
    templates: &[TemplateKind],
    count: usize,
    n_states: usize,
    menu: &ProfileMenu,
) -> Result<Vec<Scenario>, SceneError> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let sub_seed: u64 = master.gen();
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed);
        let template = templates[i % templates.len()];
        let base = template.default_dims();
        let jitter = |rng: &mut ChaCha8Rng, v: f64| v * (0.9 + 0.2 * rng.gen::<f64>());
        let dims = Dims::new(
            jitter(&mut rng, base.width),
            jitter(&mut rng, base.height),
            jitter(&mut rng, base.depth),
        );
        let model = build_template(template, dims, sub_seed)?;
        let profiles: Vec<TrajectoryProfile> = model
            .joints
            .iter()
            .map(|j| {
                let kind = menu.kinds[rng.gen_range(0..menu.kinds.len())];
                let inverted = menu.allow_inverted && rng.gen::<bool>();
                TrajectoryProfile::new(kind, inverted, j.limits.0, j.limits.1, 1.0)
                    .map_err(|e| SceneError::Construction(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        let states =
            sample_states(&profiles, n_states).map_err(|e| SceneError::Construction(e.to_string()))?;
        out.push(Scenario {
            template,
            dims,
            seed: sub_seed,
            model,
            profiles,
            states,
        });
    }
    Ok(out)
}

/// Templates eligible for each dataset subset: S has one moving part per
/// object, D has two, M mixes both.
pub fn subset_templates(subset: Subset) -> Vec<TemplateKind> {
    use TemplateKind::*;
    match subset {
        Subset::S => vec![CabinetDoor, CabinetDrawer, LaptopLid, SliderWindow],
        Subset::D => vec![CabinetTwoDoor, CabinetDoorDrawer, ScissorsLegs],
        Subset::M => vec![
            CabinetDoor,
            CabinetTwoDoor,
            CabinetDrawer,
            CabinetDoorDrawer,
            LaptopLid,
            ScissorsLegs,
            SliderWindow,
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subset {
    S,
    D,
    M,
}

impl Subset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "S" | "s" => Some(Subset::S),
            "D" | "d" => Some(Subset::D),
            "M" | "m" => Some(Subset::M),
            _ => None,
        }
    }
}

impl std::fmt::Display for Subset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Subset::S => "S",
            Subset::D => "D",
            Subset::M => "M",
        })
    }
}
