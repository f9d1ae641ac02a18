//! Scene randomization.
//!
//! [`sample_scene`] is a pure function of `(config, assets, seed, index)`.
//! Each scene field draws from its own counter-based substream, so scenes can
//! be generated in any order on any number of threads.
//!
//! World frame: ground plane `z = 0`, `+z` up, `+y` north. The camera looks
//! at the world origin from distance `focal_length`, which makes one world
//! unit on the ground span one pixel at the image center.

use serde::{Deserialize, Serialize};

use crate::assets::{AssetStore, Category, Mesh};
use crate::math::{Mat3, Vec3};
use crate::primitives::Primitive;
use crate::rng::{Stream, Tag};

/// Closed interval, written `[lo, hi]` in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Interval<T: Copy> {
    pub lo: T,
    pub hi: T,
}

impl<T: Copy> Interval<T> {
    pub const fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }
}

impl<T: Copy + PartialOrd> Interval<T> {
    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }
}

impl<T: Copy> From<[T; 2]> for Interval<T> {
    fn from(a: [T; 2]) -> Self {
        Self { lo: a[0], hi: a[1] }
    }
}

impl<T: Copy> From<Interval<T>> for [T; 2] {
    fn from(i: Interval<T>) -> Self {
        [i.lo, i.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SunRanges {
    /// Degrees above the horizon.
    pub elevation: Interval<f64>,
    /// Degrees, counter-clockwise from `+x`.
    pub azimuth: Interval<f64>,
}

impl Default for SunRanges {
    fn default() -> Self {
        Self {
            elevation: Interval::new(30.0, 80.0),
            azimuth: Interval::new(0.0, 360.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlapPolicy {
    /// Largest allowed intersection area over the smaller footprint's area.
    pub max_overlap: f64,
    /// Placement attempts per instance before it is dropped.
    pub max_retries: u32,
}

impl Default for OverlapPolicy {
    fn default() -> Self {
        Self {
            max_overlap: 0.25,
            max_retries: 100,
        }
    }
}

/// Randomization ranges. Field names are the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationConfig {
    pub image_size: u32,
    pub instances_per_scene: Interval<u32>,
    /// Target instance size in pixels, measured as the mean of the projected
    /// footprint's width and height.
    pub instance_scale: Interval<f64>,
    /// Radians.
    pub instance_yaw: Interval<f64>,
    /// Degrees from nadir.
    pub camera_tilt: Interval<f64>,
    pub ambient_intensity: Interval<f64>,
    pub sun_intensity: Interval<f64>,
    pub sun_direction: SunRanges,
    /// Per unit of camera depth.
    pub fog_density: Interval<f64>,
    pub fog_color: [f64; 3],
    pub distractors_per_scene: Interval<u32>,
    /// Allowed background classes; empty allows every class.
    pub background_classes: Vec<String>,
    pub overlap_policy: OverlapPolicy,
    /// Pixels. Also the camera's distance to the ground target.
    pub focal_length: f64,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            image_size: 512,
            instances_per_scene: Interval::new(1, 6),
            instance_scale: Interval::new(20.0, 120.0),
            instance_yaw: Interval::new(0.0, std::f64::consts::TAU),
            camera_tilt: Interval::new(0.0, 10.0),
            ambient_intensity: Interval::new(0.3, 0.6),
            sun_intensity: Interval::new(0.3, 0.8),
            sun_direction: SunRanges::default(),
            fog_density: Interval::new(0.0, 3e-4),
            fog_color: [0.78, 0.80, 0.84],
            distractors_per_scene: Interval::new(0, 5),
            background_classes: Vec::new(),
            overlap_policy: OverlapPolicy::default(),
            focal_length: 2048.0,
        }
    }
}

/// One violated config invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(Violation {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn interval<T: Copy + PartialOrd>(&mut self, field: &str, i: Interval<T>) -> bool {
        if i.lo > i.hi {
            self.push(field, "low > high");
            false
        } else {
            true
        }
    }

    fn finite(&mut self, field: &str, i: Interval<f64>) -> bool {
        if !(i.lo.is_finite() && i.hi.is_finite()) {
            self.push(field, "non-finite bound");
            false
        } else {
            self.interval(field, i)
        }
    }

    fn unit(&mut self, field: &str, i: Interval<f64>) {
        if self.finite(field, i) && (i.lo < 0.0 || i.hi > 1.0) {
            self.push(field, "outside [0, 1]");
        }
    }
}

/// Returns every violated invariant; empty means the config is valid.
pub fn validate_config(c: &RandomizationConfig) -> Vec<Violation> {
    let mut ck = Checker(Vec::new());
    if c.image_size == 0 {
        ck.push("image_size", "must be > 0");
    }
    ck.interval("instances_per_scene", c.instances_per_scene);
    if ck.finite("instance_scale", c.instance_scale) && c.instance_scale.lo <= 0.0 {
        ck.push("instance_scale", "must be > 0");
    }
    ck.finite("instance_yaw", c.instance_yaw);
    if ck.finite("camera_tilt", c.camera_tilt) && (c.camera_tilt.lo < 0.0 || c.camera_tilt.hi > 80.0) {
        ck.push("camera_tilt", "outside [0, 80] degrees");
    }
    ck.unit("ambient_intensity", c.ambient_intensity);
    ck.unit("sun_intensity", c.sun_intensity);
    let el = c.sun_direction.elevation;
    if ck.finite("sun_direction.elevation", el) && (el.lo <= 0.0 || el.hi > 90.0) {
        ck.push("sun_direction.elevation", "outside (0, 90] degrees");
    }
    ck.finite("sun_direction.azimuth", c.sun_direction.azimuth);
    if ck.finite("fog_density", c.fog_density) && c.fog_density.lo < 0.0 {
        ck.push("fog_density", "negative density");
    }
    if c.fog_color.iter().any(|v| !(0.0..=1.0).contains(v)) {
        ck.push("fog_color", "outside [0, 1]");
    }
    ck.interval("distractors_per_scene", c.distractors_per_scene);
    if !(0.0..=1.0).contains(&c.overlap_policy.max_overlap) {
        ck.push("overlap_policy.max_overlap", "outside [0, 1]");
    }
    if c.overlap_policy.max_retries == 0 {
        ck.push("overlap_policy.max_retries", "must be >= 1");
    }
    if !(c.focal_length.is_finite() && c.focal_length > 0.0) {
        ck.push("focal_length", "must be > 0");
    }
    ck.0
}

/// Pinhole camera. `rotation` maps world to camera axes (x right, y down, z forward).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub rotation: Mat3,
    pub focal_length: f64,
    pub principal_point: [f64; 2],
    pub width: u32,
    pub height: u32,
    pub tilt_deg: f64,
    pub tilt_azimuth: f64,
}

/// A projected point: pixel coordinates and camera-space depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

impl Camera {
    /// Camera aimed at the world origin from `focal_length` units away,
    /// tilted `tilt_deg` from nadir towards azimuth `tilt_azimuth` (radians).
    pub fn aerial(size: u32, focal_length: f64, tilt_deg: f64, tilt_azimuth: f64) -> Self {
        let tilt = tilt_deg.to_radians();
        let forward = Vec3::new(
            tilt.sin() * tilt_azimuth.cos(),
            tilt.sin() * tilt_azimuth.sin(),
            -tilt.cos(),
        );
        let right = forward
            .cross(Vec3::new(0.0, 1.0, 0.0))
            .normalized()
            .unwrap_or(Vec3::new(1.0, 0.0, 0.0));
        let down = forward.cross(right);
        let half = size as f64 / 2.0;
        Self {
            position: forward * -focal_length,
            rotation: Mat3::from_rows(right, down, forward),
            focal_length,
            principal_point: [half, half],
            width: size,
            height: size,
            tilt_deg,
            tilt_azimuth,
        }
    }

    /// Straight-down camera at an explicit position.
    pub fn nadir_at(position: Vec3, size: u32, focal_length: f64) -> Self {
        let mut c = Self::aerial(size, focal_length, 0.0, 0.0);
        c.position = position;
        c
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p - self.position)
    }

    pub fn project(&self, p: Vec3) -> Projected {
        let c = self.to_camera(p);
        Projected {
            x: self.focal_length * c.x / c.z + self.principal_point[0],
            y: self.focal_length * c.y / c.z + self.principal_point[1],
            depth: c.z,
        }
    }

    /// Intersection of the pixel ray through `(x, y)` with the ground plane.
    pub fn unproject_to_ground(&self, x: f64, y: f64) -> Option<Vec3> {
        let dir_cam = Vec3::new(
            (x - self.principal_point[0]) / self.focal_length,
            (y - self.principal_point[1]) / self.focal_length,
            1.0,
        );
        let dir = self.rotation.transpose().mul_vec(dir_cam);
        if dir.z >= -1e-12 {
            return None;
        }
        let t = -self.position.z / dir.z;
        (t > 0.0).then(|| self.position + dir * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lights {
    pub ambient: f64,
    /// Unit vector along which sunlight travels (pointing down).
    pub sun_direction: Vec3,
    pub sun_intensity: f64,
    pub sun_elevation_deg: f64,
    pub sun_azimuth_deg: f64,
}

impl Lights {
    pub fn from_angles(ambient: f64, sun_intensity: f64, elevation_deg: f64, azimuth_deg: f64) -> Self {
        let (el, az) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
        let toward_sun = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
        Self {
            ambient,
            sun_direction: -toward_sun,
            sun_intensity,
            sun_elevation_deg: elevation_deg,
            sun_azimuth_deg: azimuth_deg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fog {
    pub density: f64,
    pub color: [f64; 3],
}

/// Rigid placement plus uniform scale. Rotation is a yaw about `+z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3,
    pub yaw: f64,
    pub scale: f64,
}

impl Pose {
    pub fn rotation(&self) -> Mat3 {
        Mat3::rot_z(self.yaw)
    }

    pub fn apply(&self, rot: &Mat3, v: Vec3) -> Vec3 {
        rot.mul_vec(v * self.scale) + self.translation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundRef {
    /// Index into the asset store's background set.
    pub entry: usize,
    pub class: String,
    pub crop_x: u32,
    pub crop_y: u32,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    /// Index into the asset store's models.
    pub model: usize,
    pub category: Category,
    pub pose: Pose,
    /// The sampled `instance_scale` value.
    pub target_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub kind: Primitive,
    pub pose: Pose,
    pub color: [f64; 3],
    pub target_size: f64,
}

/// A fully sampled scene; the only input the renderer needs besides assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub scene_id: u64,
    pub background: BackgroundRef,
    pub camera: Camera,
    pub lights: Lights,
    pub fog: Fog,
    pub instances: Vec<Instance>,
    pub distractors: Vec<Distractor>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("invalid config: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidConfig(Vec<Violation>),
    #[error("no background of an allowed class is at least {size}x{size} px")]
    NoBackground { size: u32 },
    #[error("asset store has no models")]
    NoModels,
    #[error("scene {index}: placement budget exhausted with zero instances placed")]
    PlacementExhausted { index: u64 },
}

/// Axis-aligned pixel rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Footprint {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Footprint {
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn mean_size(&self) -> f64 {
        ((self.x1 - self.x0) + (self.y1 - self.y0)) / 2.0
    }

    /// Intersection area over the smaller of the two areas.
    pub fn overlap_fraction(&self, o: &Footprint) -> f64 {
        let w = (self.x1.min(o.x1) - self.x0.max(o.x0)).max(0.0);
        let h = (self.y1.min(o.y1) - self.y0.max(o.y0)).max(0.0);
        let denom = self.area().min(o.area());
        if denom <= 0.0 {
            0.0
        } else {
            w * h / denom
        }
    }

    fn inside(&self, size: f64) -> bool {
        self.x0 >= 0.0 && self.y0 >= 0.0 && self.x1 <= size && self.y1 <= size
    }
}

/// Projected image-space bounds of `mesh` under `pose`.
pub fn project_footprint(camera: &Camera, mesh: &Mesh, pose: &Pose) -> Footprint {
    let rot = pose.rotation();
    let mut fp = Footprint {
        x0: f64::MAX,
        y0: f64::MAX,
        x1: f64::MIN,
        y1: f64::MIN,
    };
    for &v in &mesh.vertices {
        let p = camera.project(pose.apply(&rot, v));
        fp.x0 = fp.x0.min(p.x);
        fp.y0 = fp.y0.min(p.y);
        fp.x1 = fp.x1.max(p.x);
        fp.y1 = fp.y1.max(p.y);
    }
    fp
}

/// Poses `mesh` standing on the ground at `ground`, scaled so the projected
/// footprint's mean size equals `target`.
fn fit_pose(camera: &Camera, mesh: &Mesh, ground: Vec3, yaw: f64, target: f64) -> (Pose, Footprint) {
    let min_z = mesh.bounds().0.z;
    let pose_for = |scale: f64| Pose {
        translation: Vec3::new(ground.x, ground.y, -min_z * scale),
        yaw,
        scale,
    };
    let mut scale = 1.0;
    let mut pose = pose_for(scale);
    let mut fp = project_footprint(camera, mesh, &pose);
    for _ in 0..3 {
        let m = fp.mean_size();
        if !(m > 0.0) {
            break;
        }
        scale *= target / m;
        pose = pose_for(scale);
        fp = project_footprint(camera, mesh, &pose);
    }
    (pose, fp)
}

fn try_place(
    config: &RandomizationConfig,
    camera: &Camera,
    mesh: &Mesh,
    yaw: f64,
    target: f64,
    placed: &[Footprint],
    rng: &mut Stream,
) -> Option<(Pose, Footprint)> {
    let size = config.image_size as f64;
    let margin = (target / 2.0).min(size / 2.0);
    let cx = rng.uniform(margin, size - margin);
    let cy = rng.uniform(margin, size - margin);
    let ground = camera.unproject_to_ground(cx, cy)?;
    let (pose, fp) = fit_pose(camera, mesh, ground, yaw, target);
    let ok = fp.inside(size)
        && placed
            .iter()
            .all(|o| fp.overlap_fraction(o) <= config.overlap_policy.max_overlap);
    ok.then_some((pose, fp))
}

fn sample_u32(rng: &mut Stream, i: Interval<u32>) -> u32 {
    rng.int_inclusive(i.lo as u64, i.hi as u64) as u32
}

fn sample_f64(rng: &mut Stream, i: Interval<f64>) -> f64 {
    rng.uniform(i.lo, i.hi)
}

fn sample_background(
    config: &RandomizationConfig,
    assets: &AssetStore,
    seed: u64,
    index: u64,
) -> Result<BackgroundRef, SceneError> {
    let size = config.image_size;
    let set = &assets.backgrounds;
    let usable = |class: &str| -> Vec<usize> {
        set.indices_of_class(class)
            .iter()
            .copied()
            .filter(|&i| set.entries()[i].width >= size && set.entries()[i].height >= size)
            .collect()
    };
    let classes: Vec<(&str, Vec<usize>)> = set
        .classes()
        .filter(|c| config.background_classes.is_empty() || config.background_classes.iter().any(|a| a == c))
        .map(|c| (c, usable(c)))
        .filter(|(_, v)| !v.is_empty())
        .collect();
    if classes.is_empty() {
        return Err(SceneError::NoBackground { size });
    }
    let mut rng = Stream::new(seed, index, Tag::Background, 0);
    let (class, entries) = &classes[rng.below(classes.len() as u64) as usize];
    let entry = entries[rng.below(entries.len() as u64) as usize];
    let e = &set.entries()[entry];
    Ok(BackgroundRef {
        entry,
        class: class.to_string(),
        crop_x: rng.int_inclusive(0, (e.width - size) as u64) as u32,
        crop_y: rng.int_inclusive(0, (e.height - size) as u64) as u32,
        size,
    })
}

/// Samples scene `index` of the stream identified by `seed`.
pub fn sample_scene(
    config: &RandomizationConfig,
    assets: &AssetStore,
    seed: u64,
    index: u64,
) -> Result<SceneDescription, SceneError> {
    let violations = validate_config(config);
    if !violations.is_empty() {
        return Err(SceneError::InvalidConfig(violations));
    }
    if assets.models.is_empty() {
        return Err(SceneError::NoModels);
    }
    let background = sample_background(config, assets, seed, index)?;

    let mut rng = Stream::new(seed, index, Tag::Camera, 0);
    let tilt = sample_f64(&mut rng, config.camera_tilt);
    let tilt_azimuth = rng.uniform(0.0, std::f64::consts::TAU);
    let camera = Camera::aerial(config.image_size, config.focal_length, tilt, tilt_azimuth);

    let mut rng = Stream::new(seed, index, Tag::Lights, 0);
    let ambient = sample_f64(&mut rng, config.ambient_intensity);
    let sun = sample_f64(&mut rng, config.sun_intensity);
    let elevation = sample_f64(&mut rng, config.sun_direction.elevation);
    let azimuth = sample_f64(&mut rng, config.sun_direction.azimuth);
    let lights = Lights::from_angles(ambient, sun, elevation, azimuth);

    let mut rng = Stream::new(seed, index, Tag::Fog, 0);
    let fog = Fog {
        density: sample_f64(&mut rng, config.fog_density),
        color: config.fog_color,
    };

    let retries = config.overlap_policy.max_retries as u64;
    let mut footprints = Vec::new();

    let wanted = sample_u32(
        &mut Stream::new(seed, index, Tag::InstanceCount, 0),
        config.instances_per_scene,
    );
    let mut instances = Vec::new();
    for slot in 0..wanted as u64 {
        let mut rng = Stream::new(seed, index, Tag::Instance, slot);
        let model = rng.below(assets.models.len() as u64) as usize;
        let yaw = sample_f64(&mut rng, config.instance_yaw);
        let target = sample_f64(&mut rng, config.instance_scale);
        let mesh = &assets.models[model].mesh;
        let placed = (0..retries).find_map(|attempt| {
            let mut rng = Stream::new(seed, index, Tag::Placement, (slot << 32) | attempt);
            try_place(config, &camera, mesh, yaw, target, &footprints, &mut rng)
        });
        if let Some((pose, fp)) = placed {
            footprints.push(fp);
            instances.push(Instance {
                model,
                category: mesh.category,
                pose,
                target_size: target,
            });
        }
    }
    if wanted > 0 && instances.is_empty() {
        return Err(SceneError::PlacementExhausted { index });
    }

    let wanted = sample_u32(
        &mut Stream::new(seed, index, Tag::DistractorCount, 0),
        config.distractors_per_scene,
    );
    let mut distractors = Vec::new();
    for slot in 0..wanted as u64 {
        let mut rng = Stream::new(seed, index, Tag::Distractor, slot);
        let kind = Primitive::ALL[rng.below(3) as usize];
        let yaw = rng.uniform(0.0, std::f64::consts::TAU);
        let target = sample_f64(&mut rng, config.instance_scale);
        let color = [rng.next_f64(), rng.next_f64(), rng.next_f64()];
        let placed = (0..retries).find_map(|attempt| {
            let mut rng = Stream::new(seed, index, Tag::DistractorPlacement, (slot << 32) | attempt);
            try_place(config, &camera, kind.mesh(), yaw, target, &footprints, &mut rng)
        });
        if let Some((pose, fp)) = placed {
            footprints.push(fp);
            distractors.push(Distractor {
                kind,
                pose,
                color,
                target_size: target,
            });
        }
    }

    Ok(SceneDescription {
        scene_id: index,
        background,
        camera,
        lights,
        fog,
        instances,
        distractors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{BackgroundEntry, BackgroundSet, Model};
    use crate::primitives::box_mesh;
    use image::RgbImage;

    fn store() -> AssetStore {
        let mut plane = crate::assets::normalize_mesh(&box_mesh(0.2)).unwrap();
        plane.category = Category::Jet;
        let bgs = vec![
            BackgroundEntry::in_memory("w0", "water", RgbImage::new(600, 640)),
            BackgroundEntry::in_memory("t0", "trees", RgbImage::new(512, 512)),
            BackgroundEntry::in_memory("tiny", "sand", RgbImage::new(64, 64)),
        ];
        AssetStore::new(
            vec![Model {
                name: "plane".into(),
                mesh: plane,
            }],
            BackgroundSet::new(bgs).unwrap(),
        )
    }

    #[test]
    fn default_config_is_valid() {
        assert!(validate_config(&RandomizationConfig::default()).is_empty());
    }

    #[test]
    fn inverted_and_negative_ranges_are_reported() {
        let c = RandomizationConfig {
            instance_scale: Interval::new(50.0, 10.0),
            fog_density: Interval::new(-1.0, 0.0),
            ..Default::default()
        };
        let v = validate_config(&c);
        assert!(v.contains(&Violation {
            field: "instance_scale".into(),
            message: "low > high".into()
        }));
        assert!(v.contains(&Violation {
            field: "fog_density".into(),
            message: "negative density".into()
        }));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn every_field_is_checked() {
        let c = RandomizationConfig {
            image_size: 0,
            ambient_intensity: Interval::new(0.5, 1.5),
            sun_intensity: Interval::new(-0.1, 0.5),
            fog_color: [0.0, 2.0, 0.0],
            overlap_policy: OverlapPolicy {
                max_overlap: 1.5,
                max_retries: 0,
            },
            focal_length: 0.0,
            ..Default::default()
        };
        let fields: Vec<String> = validate_config(&c).into_iter().map(|v| v.field).collect();
        for f in [
            "image_size",
            "ambient_intensity",
            "sun_intensity",
            "fog_color",
            "overlap_policy.max_overlap",
            "overlap_policy.max_retries",
            "focal_length",
        ] {
            assert!(fields.iter().any(|x| x == f), "missing {f}: {fields:?}");
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = RandomizationConfig::default();
        let text = toml::to_string(&c).unwrap();
        assert!(text.contains("instance_scale = [20.0, 120.0]"), "{text}");
        let back: RandomizationConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        let partial: RandomizationConfig = toml::from_str("image_size = 256\n").unwrap();
        assert_eq!(partial.image_size, 256);
        assert!(toml::from_str::<RandomizationConfig>("bogus = 1\n").is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = store();
        let c = RandomizationConfig::default();
        let a = sample_scene(&c, &s, 42, 0).unwrap();
        let b = sample_scene(&c, &s, 42, 0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_scene(&c, &s, 42, 1).unwrap());
        assert_ne!(a, sample_scene(&c, &s, 43, 0).unwrap());
    }

    #[test]
    fn degenerate_instance_range_is_exact() {
        let s = store();
        let c = RandomizationConfig {
            instances_per_scene: Interval::new(3, 3),
            instance_scale: Interval::new(30.0, 40.0),
            ..Default::default()
        };
        for i in 0..20 {
            assert_eq!(sample_scene(&c, &s, 5, i).unwrap().instances.len(), 3);
        }
    }

    #[test]
    fn small_backgrounds_and_disallowed_classes_are_skipped() {
        let s = store();
        let c = RandomizationConfig {
            background_classes: vec!["trees".into(), "sand".into()],
            ..Default::default()
        };
        for i in 0..20 {
            let scene = sample_scene(&c, &s, 1, i).unwrap();
            assert_eq!(scene.background.class, "trees");
            assert_eq!((scene.background.crop_x, scene.background.crop_y), (0, 0));
        }
        let c = RandomizationConfig {
            background_classes: vec!["sand".into()],
            ..Default::default()
        };
        assert_eq!(
            sample_scene(&c, &s, 1, 0).unwrap_err(),
            SceneError::NoBackground { size: 512 }
        );
    }

    #[test]
    fn impossible_placement_is_an_error() {
        let s = store();
        let c = RandomizationConfig {
            instance_scale: Interval::new(900.0, 1000.0),
            overlap_policy: OverlapPolicy {
                max_overlap: 0.25,
                max_retries: 5,
            },
            ..Default::default()
        };
        assert_eq!(
            sample_scene(&c, &s, 1, 3).unwrap_err(),
            SceneError::PlacementExhausted { index: 3 }
        );
    }

    #[test]
    fn placements_respect_overlap_and_bounds() {
        let s = store();
        let c = RandomizationConfig {
            instances_per_scene: Interval::new(8, 8),
            distractors_per_scene: Interval::new(5, 5),
            instance_scale: Interval::new(60.0, 120.0),
            ..Default::default()
        };
        for i in 0..30 {
            let scene = sample_scene(&c, &s, 11, i).unwrap();
            let mut fps: Vec<Footprint> = scene
                .instances
                .iter()
                .map(|inst| project_footprint(&scene.camera, &s.models[inst.model].mesh, &inst.pose))
                .collect();
            fps.extend(
                scene
                    .distractors
                    .iter()
                    .map(|d| project_footprint(&scene.camera, d.kind.mesh(), &d.pose)),
            );
            for (a, fa) in fps.iter().enumerate() {
                assert!(fa.inside(512.0));
                for fb in &fps[a + 1..] {
                    assert!(fa.overlap_fraction(fb) <= 0.25 + 1e-12);
                }
            }
            for (inst, fp) in scene.instances.iter().zip(&fps) {
                assert!((fp.mean_size() - inst.target_size).abs() < 1e-6 * inst.target_size);
            }
        }
    }

    #[test]
    fn camera_projects_origin_to_center_and_round_trips() {
        let cam = Camera::aerial(512, 2048.0, 7.0, 1.1);
        let p = cam.project(Vec3::ZERO);
        assert!((p.x - 256.0).abs() < 1e-9 && (p.y - 256.0).abs() < 1e-9);
        assert!((p.depth - 2048.0).abs() < 1e-9);
        let g = cam.unproject_to_ground(100.0, 400.0).unwrap();
        assert!(g.z.abs() < 1e-9);
        let q = cam.project(g);
        assert!((q.x - 100.0).abs() < 1e-9 && (q.y - 400.0).abs() < 1e-9);
        // Nadir: north is up in the image.
        let nadir = Camera::aerial(512, 2048.0, 0.0, 0.0);
        let n = nadir.project(Vec3::new(0.0, 10.0, 0.0));
        assert!(n.y < 256.0 && (n.x - 256.0).abs() < 1e-9);
        let e = nadir.project(Vec3::new(10.0, 0.0, 0.0));
        assert!(e.x > 256.0);
    }
}
