//! Software renderer: z-buffered triangle rasterization over a background
//! crop, flat Lambert shading with one shadow-mapped directional light, and
//! exponential fog on geometry.

mod raster;
mod shadow;

use image::{ImageBuffer, Luma, Rgb, RgbImage};

use crate::assets::{AssetError, AssetStore, Mesh};
use crate::math::Vec3;
use crate::scene::{Fog, Pose, SceneDescription};

pub use raster::fill_triangle;
pub use shadow::{ShadowMap, SHADOW_BIAS_FRACTION, SHADOW_MAP_SIZE};

/// Geometry closer than this (camera units) is not drawn.
pub const NEAR_PLANE: f64 = 1e-3;

/// Directional light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sun {
    /// Unit direction in which the light travels.
    pub direction: Vec3,
    pub intensity: f64,
}

/// Lambert term: `diffuse * clamp(ambient + I * max(0, n . -d) * lit, 0, 1)`.
pub fn shade(diffuse: [f64; 3], normal: Vec3, ambient: f64, sun: Sun, lit: bool) -> [f64; 3] {
    let shadow_factor = if lit { 1.0 } else { 0.0 };
    let lambert = normal.dot(-sun.direction).max(0.0);
    let k = (ambient + sun.intensity * lambert * shadow_factor).clamp(0.0, 1.0);
    diffuse.map(|c| c * k)
}

/// Blends toward the fog color with transmittance `exp(-density * depth)`.
pub fn apply_fog(color: [f64; 3], depth: f64, fog: &Fog) -> [f64; 3] {
    let t = (-fog.density * depth).exp();
    [0, 1, 2].map(|i| t * color[i] + (1.0 - t) * fog.color[i])
}

/// `[0, 1]` to 8-bit, rounding half up.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error("scene references model {0}, asset store has {1}")]
    MissingModel(usize, usize),
    #[error("scene references background {0}, asset store has {1}")]
    MissingBackground(usize, usize),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("crop {x},{y} size {size} exceeds background {width}x{height}")]
    CropOutOfBounds {
        x: u32,
        y: u32,
        size: u32,
        width: u32,
        height: u32,
    },
    #[error("camera frustum has zero area")]
    ZeroFrustum,
}

/// Rendered image plus the per-pixel maps the annotator consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub rgb: RgbImage,
    /// Row-major. 0 = background, `k > 0` = instance `k` (1-based),
    /// `-j` = distractor `j` (1-based).
    pub instance_ids: Vec<i32>,
    /// Row-major camera-space depth; `+inf` where no geometry was drawn.
    pub depth: Vec<f64>,
    /// Per instance, the number of pixels it covers ignoring all other geometry.
    pub solo_pixel_counts: Vec<u32>,
}

impl RenderOutput {
    pub fn width(&self) -> u32 {
        self.rgb.width()
    }

    pub fn height(&self) -> u32 {
        self.rgb.height()
    }

    pub fn id_at(&self, x: u32, y: u32) -> i32 {
        self.instance_ids[(y * self.width() + x) as usize]
    }

    /// 16-bit id map: instance `k` stored as `k`, distractor `-j` as `65536 - j`.
    pub fn id_map_image(&self) -> ImageBuffer<Luma<u16>, Vec<u16>> {
        let data = self
            .instance_ids
            .iter()
            .map(|&id| if id >= 0 { id as u16 } else { (65536 + id) as u16 })
            .collect();
        ImageBuffer::from_raw(self.width(), self.height(), data).expect("id map matches image size")
    }

    /// Depth as row-major little-endian `f32`.
    pub fn depth_le_bytes(&self) -> Vec<u8> {
        self.depth.iter().flat_map(|&d| (d as f32).to_le_bytes()).collect()
    }
}

struct Object<'a> {
    id: i32,
    mesh: &'a Mesh,
    color: [f64; 3],
    world: Vec<Vec3>,
    normals: Vec<Vec3>,
}

impl<'a> Object<'a> {
    fn new(id: i32, mesh: &'a Mesh, pose: &Pose, color: [f64; 3]) -> Self {
        let rot = pose.rotation();
        Self {
            id,
            mesh,
            color,
            world: mesh.vertices.iter().map(|&v| pose.apply(&rot, v)).collect(),
            normals: mesh.face_normals.iter().map(|&n| rot.mul_vec(n)).collect(),
        }
    }

    fn triangle(&self, face: usize) -> [Vec3; 3] {
        self.mesh.faces[face].map(|i| self.world[i as usize])
    }
}

#[derive(Clone, Copy)]
struct Fragment {
    object: u32,
    face: u32,
    point: Vec3,
}

const NO_OBJECT: u32 = u32::MAX;

fn background_crop(scene: &SceneDescription, assets: &AssetStore) -> Result<RgbImage, RenderError> {
    let bg = &scene.background;
    let n = assets.backgrounds.len();
    let entry = assets
        .backgrounds
        .entries()
        .get(bg.entry)
        .ok_or(RenderError::MissingBackground(bg.entry, n))?;
    let pixels = entry.load_pixels()?;
    let (w, h) = pixels.dimensions();
    let fits = |off: u32, size: u32, total: u32| off.checked_add(size).is_some_and(|e| e <= total);
    if !fits(bg.crop_x, scene.camera.width, w) || !fits(bg.crop_y, scene.camera.height, h) {
        return Err(RenderError::CropOutOfBounds {
            x: bg.crop_x,
            y: bg.crop_y,
            size: bg.size,
            width: w,
            height: h,
        });
    }
    Ok(image::imageops::crop_imm(&*pixels, bg.crop_x, bg.crop_y, scene.camera.width, scene.camera.height).to_image())
}

/// Renders `scene`. Deterministic and single-threaded.
pub fn render(scene: &SceneDescription, assets: &AssetStore) -> Result<RenderOutput, RenderError> {
    let cam = &scene.camera;
    if cam.width == 0 || cam.height == 0 || !(cam.focal_length > 0.0) {
        return Err(RenderError::ZeroFrustum);
    }
    let (width, height) = (cam.width as usize, cam.height as usize);
    let mut rgb = background_crop(scene, assets)?;

    let mut objects = Vec::with_capacity(scene.instances.len() + scene.distractors.len());
    for (k, inst) in scene.instances.iter().enumerate() {
        let model = assets
            .models
            .get(inst.model)
            .ok_or(RenderError::MissingModel(inst.model, assets.models.len()))?;
        objects.push(Object::new(
            k as i32 + 1,
            &model.mesh,
            &inst.pose,
            model.mesh.diffuse_color,
        ));
    }
    for (j, d) in scene.distractors.iter().enumerate() {
        objects.push(Object::new(-(j as i32 + 1), d.kind.mesh(), &d.pose, d.color));
    }

    let mut instance_ids = vec![0i32; width * height];
    let mut depth = vec![f64::INFINITY; width * height];
    let mut fragments = vec![
        Fragment {
            object: NO_OBJECT,
            face: 0,
            point: Vec3::ZERO,
        };
        width * height
    ];
    let mut solo_pixel_counts = vec![0u32; scene.instances.len()];
    let mut stamp = vec![0u32; width * height];

    for (oi, obj) in objects.iter().enumerate() {
        let tag = oi as u32 + 1;
        let mut solo = 0u32;
        for face in 0..obj.mesh.faces.len() {
            let tri = obj.triangle(face);
            let proj = tri.map(|p| cam.project(p));
            if proj.iter().any(|p| !(p.depth > NEAR_PLANE)) {
                continue;
            }
            let screen = proj.map(|p| [p.x, p.y]);
            let inv_z = proj.map(|p| 1.0 / p.depth);
            fill_triangle(screen, width, height, |x, y, l| {
                let w = [l[0] * inv_z[0], l[1] * inv_z[1], l[2] * inv_z[2]];
                let inv = w[0] + w[1] + w[2];
                let z = 1.0 / inv;
                let idx = y * width + x;
                if stamp[idx] != tag {
                    stamp[idx] = tag;
                    solo += 1;
                }
                if z < depth[idx] {
                    depth[idx] = z;
                    instance_ids[idx] = obj.id;
                    fragments[idx] = Fragment {
                        object: oi as u32,
                        face: face as u32,
                        point: (tri[0] * w[0] + tri[1] * w[1] + tri[2] * w[2]) * z,
                    };
                }
            });
        }
        if obj.id > 0 {
            solo_pixel_counts[obj.id as usize - 1] = solo;
        }
    }

    let sun = Sun {
        direction: scene.lights.sun_direction,
        intensity: scene.lights.sun_intensity,
    };
    let shadow_map = if sun.intensity > 0.0 {
        let tris: Vec<[Vec3; 3]> = objects
            .iter()
            .flat_map(|o| (0..o.mesh.faces.len()).map(move |f| o.triangle(f)))
            .collect();
        ShadowMap::build(sun.direction, &tris)
    } else {
        None
    };

    for (idx, frag) in fragments.iter().enumerate() {
        if frag.object == NO_OBJECT {
            continue;
        }
        let obj = &objects[frag.object as usize];
        let mut n = obj.normals[frag.face as usize];
        if n.dot(cam.position - frag.point) < 0.0 {
            n = -n;
        }
        let lit = shadow_map.as_ref().is_none_or(|m| !m.occluded(frag.point));
        let color = shade(obj.color, n, scene.lights.ambient, sun, lit);
        let color = apply_fog(color, depth[idx], &scene.fog);
        let (x, y) = ((idx % width) as u32, (idx / width) as u32);
        rgb.put_pixel(x, y, Rgb(color.map(quantize)));
    }

    Ok(RenderOutput {
        rgb,
        instance_ids,
        depth,
        solo_pixel_counts,
    })
}
