//! Procedural stand-in assets: low-poly aircraft for each category and
//! textured aerial backgrounds (water, trees, buildings).

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::assets::{normalize_mesh, parse_obj, AssetStore, BackgroundEntry, BackgroundSet, Category, Model};
use crate::rng::hash_words;

struct Builder {
    v: Vec<[f64; 3]>,
    faces: Vec<Vec<usize>>,
}

impl Builder {
    fn new() -> Self {
        Self {
            v: Vec::new(),
            faces: Vec::new(),
        }
    }

    fn vertex(&mut self, p: [f64; 3]) -> usize {
        self.v.push(p);
        self.v.len() - 1
    }

    fn face(&mut self, idx: &[usize]) {
        self.faces.push(idx.to_vec());
    }

    /// Hexahedron: `c[0..4]` bottom, `c[4..8]` top, same order.
    fn hexa(&mut self, c: [[f64; 3]; 8]) {
        let i: Vec<usize> = c.iter().map(|&p| self.vertex(p)).collect();
        self.face(&[i[0], i[3], i[2], i[1]]);
        self.face(&[i[4], i[5], i[6], i[7]]);
        for k in 0..4 {
            let n = (k + 1) % 4;
            self.face(&[i[k], i[n], i[n + 4], i[k + 4]]);
        }
    }

    /// Horizontal trapezoid panel mirrored to both sides. Leading edges at
    /// `root_x` (y = 0) and `root_x - sweep` (y = span).
    #[allow(clippy::too_many_arguments)]
    fn wing(&mut self, root_x: f64, root_chord: f64, span: f64, sweep: f64, tip_chord: f64, z: f64, t: f64, y0: f64) {
        for side in [1.0, -1.0] {
            let (yr, yt) = (side * y0, side * (y0 + span));
            let tip_x = root_x - sweep;
            let outline = [
                [root_x, yr],
                [tip_x, yt],
                [tip_x - tip_chord, yt],
                [root_x - root_chord, yr],
            ];
            let mut c = [[0.0; 3]; 8];
            for (k, [x, y]) in outline.into_iter().enumerate() {
                c[k] = [x, y, z - t / 2.0];
                c[k + 4] = [x, y, z + t / 2.0];
            }
            self.hexa(c);
        }
    }

    /// Vertical fin at lateral offset `y`.
    #[allow(clippy::too_many_arguments)]
    fn fin(&mut self, root_x: f64, root_chord: f64, height: f64, sweep: f64, tip_chord: f64, z: f64, y: f64) {
        let t = 0.06;
        let tip_x = root_x - sweep;
        let outline = [
            [root_x, z],
            [tip_x, z + height],
            [tip_x - tip_chord, z + height],
            [root_x - root_chord, z],
        ];
        let mut c = [[0.0; 3]; 8];
        for (k, [x, zz]) in outline.into_iter().enumerate() {
            c[k] = [x, y - t, zz];
            c[k + 4] = [x, y + t, zz];
        }
        self.hexa(c);
    }

    /// Tube along x through `rings` of `(x, radius, z_offset)`, closed with
    /// fans at both ends.
    fn tube(&mut self, y: f64, z: f64, rings: &[(f64, f64, f64)], sides: usize) {
        let mut ring_idx = Vec::new();
        for &(x, r, dz) in rings {
            let ring: Vec<usize> = (0..sides)
                .map(|k| {
                    let a = std::f64::consts::TAU * (k as f64 + 0.5) / sides as f64;
                    self.vertex([x, y + r * a.cos(), z + dz + r * a.sin()])
                })
                .collect();
            ring_idx.push(ring);
        }
        for w in ring_idx.windows(2) {
            for k in 0..sides {
                let n = (k + 1) % sides;
                self.face(&[w[0][k], w[1][k], w[1][n], w[0][n]]);
            }
        }
        let (first, last) = (&rings[0], &rings[rings.len() - 1]);
        let nose = self.vertex([first.0 + first.1.max(0.05), y, z + first.2]);
        let tail = self.vertex([last.0 - last.1.max(0.05), y, z + last.2]);
        let (r0, r1) = (ring_idx[0].clone(), ring_idx[ring_idx.len() - 1].clone());
        for k in 0..sides {
            let n = (k + 1) % sides;
            self.face(&[nose, r0[n], r0[k]]);
            self.face(&[tail, r1[k], r1[n]]);
        }
    }

    fn fuselage(&mut self, length: f64, radius: f64) {
        let h = length / 2.0;
        self.tube(
            0.0,
            0.0,
            &[
                (h - 0.02 * length, 0.25 * radius, -0.1 * radius),
                (h - 0.12 * length, radius, 0.0),
                (-h + 0.25 * length, radius, 0.0),
                (-h + 0.03 * length, 0.3 * radius, 0.4 * radius),
            ],
            8,
        );
    }

    fn nacelle(&mut self, x: f64, y: f64, z: f64, length: f64, radius: f64) {
        for side in [1.0, -1.0] {
            self.tube(side * y, z, &[(x, radius, 0.0), (x - length, 0.8 * radius, 0.0)], 8);
        }
    }

    fn to_obj(&self, title: &str) -> String {
        let mut s = format!("# {title}\n");
        for p in &self.v {
            let _ = writeln!(s, "v {:.6} {:.6} {:.6}", p[0], p[1], p[2]);
        }
        for f in &self.faces {
            let idx: Vec<String> = f.iter().map(|i| (i + 1).to_string()).collect();
            let _ = writeln!(s, "f {}", idx.join(" "));
        }
        s
    }
}

/// Low-poly aircraft OBJ text. Nose toward +x, wings along y, z up.
pub fn aircraft_obj(category: Category) -> String {
    let mut b = Builder::new();
    match category {
        Category::Airliner => {
            b.fuselage(10.0, 0.6);
            b.wing(1.2, 2.4, 4.6, 1.8, 0.8, -0.2, 0.18, 0.4);
            b.wing(-3.6, 1.2, 1.7, 0.8, 0.5, 0.2, 0.08, 0.2);
            b.fin(-3.4, 1.5, 1.8, 1.0, 0.6, 0.4, 0.0);
            b.nacelle(1.4, 1.9, -0.55, 1.3, 0.3);
        }
        Category::SweptWing => {
            b.fuselage(11.0, 0.7);
            b.wing(1.6, 3.0, 5.2, 3.2, 0.9, -0.3, 0.2, 0.5);
            b.wing(-4.0, 1.4, 2.0, 1.2, 0.5, 0.2, 0.08, 0.2);
            b.fin(-3.8, 1.8, 2.1, 1.4, 0.6, 0.5, 0.0);
            b.nacelle(0.9, 1.7, -0.65, 1.1, 0.28);
            b.nacelle(-0.4, 3.3, -0.55, 1.0, 0.25);
        }
        Category::Jet => {
            b.fuselage(7.0, 0.45);
            b.wing(0.8, 3.8, 2.6, 2.9, 0.4, 0.0, 0.1, 0.3);
            b.wing(-2.6, 0.9, 1.0, 0.5, 0.4, 0.0, 0.06, 0.3);
            b.fin(-1.8, 1.2, 1.1, 0.8, 0.4, 0.3, 0.35);
            b.fin(-1.8, 1.2, 1.1, 0.8, 0.4, 0.3, -0.35);
        }
        Category::Fanjet => {
            b.fuselage(6.0, 0.4);
            b.wing(0.6, 1.4, 2.8, 0.9, 0.55, -0.2, 0.1, 0.3);
            b.fin(-1.8, 1.0, 1.2, 0.7, 0.6, 0.3, 0.0);
            b.wing(-2.5, 0.6, 1.1, 0.4, 0.35, 1.5, 0.06, 0.0);
            b.nacelle(-1.2, 0.75, 0.2, 1.0, 0.22);
        }
        Category::Propeller => {
            b.fuselage(6.0, 0.35);
            b.wing(1.0, 1.0, 4.2, 0.0, 0.8, 0.35, 0.1, 0.2);
            b.wing(-2.3, 0.6, 1.2, 0.1, 0.5, 0.1, 0.06, 0.1);
            b.fin(-2.1, 0.8, 1.0, 0.4, 0.5, 0.2, 0.0);
            b.nacelle(1.6, 1.4, 0.2, 1.4, 0.2);
            for side in [1.0, -1.0] {
                let (x, y, z) = (1.7, side * 1.4, 0.2);
                b.hexa([
                    [x, y - 0.7, z - 0.04],
                    [x + 0.05, y - 0.7, z - 0.04],
                    [x + 0.05, y + 0.7, z - 0.04],
                    [x, y + 0.7, z - 0.04],
                    [x, y - 0.7, z + 0.04],
                    [x + 0.05, y - 0.7, z + 0.04],
                    [x + 0.05, y + 0.7, z + 0.04],
                    [x, y + 0.7, z + 0.04],
                ]);
            }
        }
        Category::Distractor => {
            b.hexa([
                [-0.5, -0.5, -0.5],
                [0.5, -0.5, -0.5],
                [0.5, 0.5, -0.5],
                [-0.5, 0.5, -0.5],
                [-0.5, -0.5, 0.5],
                [0.5, -0.5, 0.5],
                [0.5, 0.5, 0.5],
                [-0.5, 0.5, 0.5],
            ]);
        }
    }
    b.to_obj(category.name())
}

/// Default diffuse color per demo model.
pub fn aircraft_color(category: Category) -> [f64; 3] {
    match category {
        Category::Airliner => [0.92, 0.92, 0.94],
        Category::SweptWing => [0.85, 0.86, 0.9],
        Category::Jet => [0.55, 0.58, 0.6],
        Category::Fanjet => [0.95, 0.95, 0.95],
        Category::Propeller => [0.8, 0.75, 0.55],
        Category::Distractor => [0.8, 0.8, 0.8],
    }
}

fn lattice(seed: u64, x: i64, y: i64) -> f64 {
    (hash_words(&[seed, x as u64, y as u64]) >> 11) as f64 / (1u64 << 53) as f64
}

/// Smoothly interpolated lattice noise in `[0, 1)`.
fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (s(fx), s(fy));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = lattice(seed, ix, iy);
    let b = lattice(seed, ix + 1, iy);
    let c = lattice(seed, ix, iy + 1);
    let d = lattice(seed, ix + 1, iy + 1);
    let top = a + (b - a) * sx;
    let bottom = c + (d - c) * sx;
    top + (bottom - top) * sy
}

fn fbm(seed: u64, x: f64, y: f64, octaves: u32) -> f64 {
    let (mut sum, mut amp, mut norm, mut freq) = (0.0, 1.0, 0.0, 1.0);
    for o in 0..octaves {
        sum += amp * value_noise(seed.wrapping_add(o as u64), x * freq, y * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> Rgb<u8> {
    let c = |i: usize| (a[i] + (b[i] - a[i]) * t.clamp(0.0, 1.0)).round().clamp(0.0, 255.0) as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Procedural aerial texture. Known classes: `water`, `trees`, `buildings`;
/// anything else yields bare ground.
pub fn background_image(class: &str, size: u32, seed: u64) -> RgbImage {
    RgbImage::from_fn(size, size, |x, y| {
        let (fx, fy) = (x as f64, y as f64);
        match class {
            "water" => {
                let n = fbm(seed, fx / 96.0, fy / 96.0, 4);
                let ripple = 0.5 + 0.5 * ((fx * 0.21 + fy * 0.07) + 6.0 * n).sin();
                mix([22.0, 58.0, 84.0], [46.0, 92.0, 112.0], 0.7 * n + 0.3 * ripple)
            }
            "trees" => {
                let canopy = fbm(seed, fx / 14.0, fy / 14.0, 3);
                let patch = fbm(seed ^ 0x55, fx / 120.0, fy / 120.0, 2);
                mix(
                    [20.0, 48.0, 22.0],
                    [84.0, 116.0, 52.0],
                    0.75 * canopy + 0.4 * patch - 0.15,
                )
            }
            "buildings" => {
                let block = 72u32;
                let street = 10u32;
                let (bx, by) = (x / block, y / block);
                let (lx, ly) = (x % block, y % block);
                if lx < street || ly < street {
                    mix(
                        [84.0, 84.0, 88.0],
                        [112.0, 112.0, 116.0],
                        value_noise(seed, fx / 6.0, fy / 6.0),
                    )
                } else {
                    let h = lattice(seed ^ 0xb10c, bx as i64, by as i64);
                    let roof = [
                        [150.0, 150.0, 150.0],
                        [120.0, 80.0, 64.0],
                        [180.0, 170.0, 150.0],
                        [96.0, 100.0, 110.0],
                    ][(h * 4.0) as usize];
                    let shade = roof.map(|c| c * 0.8);
                    // split each block into two roofs
                    let split = if h > 0.5 {
                        lx > block / 2 + street / 2
                    } else {
                        ly > block / 2 + street / 2
                    };
                    let t = 0.6 * value_noise(seed, fx / 3.0, fy / 3.0) + if split { 0.3 } else { 0.0 };
                    mix(shade, roof, t)
                }
            }
            _ => {
                let n = fbm(seed, fx / 40.0, fy / 40.0, 4);
                mix([110.0, 96.0, 72.0], [150.0, 136.0, 104.0], n)
            }
        }
    })
}

pub const DEMO_CLASSES: [&str; 3] = ["water", "trees", "buildings"];
pub const DEMO_BACKGROUND_SIZE: u32 = 640;

/// Writes models, backgrounds, both manifests and `generate.toml` into `dir`.
/// Returns the config path.
pub fn write_demo_assets(dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir.join("models"))?;
    fs::create_dir_all(dir.join("backgrounds"))?;

    let mut models = String::new();
    for cat in Category::AIRCRAFT {
        let rel = format!("models/{}.obj", cat.name());
        fs::write(dir.join(&rel), aircraft_obj(cat))?;
        let c = aircraft_color(cat);
        let _ = writeln!(
            models,
            "[[model]]\npath = \"{rel}\"\ncategory = \"{}\"\ndiffuse_color = [{}, {}, {}]\n",
            cat.name(),
            c[0],
            c[1],
            c[2]
        );
    }
    fs::write(dir.join("models.toml"), models)?;

    let mut backgrounds = String::new();
    for (k, class) in DEMO_CLASSES.iter().enumerate() {
        let rel = format!("backgrounds/{class}.png");
        background_image(class, DEMO_BACKGROUND_SIZE, 1 + k as u64)
            .save(dir.join(&rel))
            .map_err(io::Error::other)?;
        let _ = writeln!(backgrounds, "[[background]]\npath = \"{rel}\"\nclass = \"{class}\"\n");
    }
    fs::write(dir.join("backgrounds.toml"), backgrounds)?;

    let config = dir.join("generate.toml");
    fs::write(&config, DEMO_CONFIG)?;
    Ok(config)
}

/// The demo assets held in memory, without touching the filesystem.
pub fn demo_store() -> AssetStore {
    let models = Category::AIRCRAFT
        .iter()
        .map(|&cat| {
            let mesh = parse_obj(&aircraft_obj(cat)).expect("demo model parses");
            Model {
                name: cat.name().to_string(),
                mesh: normalize_mesh(&mesh)
                    .expect("demo model has extent")
                    .with_material(cat, aircraft_color(cat)),
            }
        })
        .collect();
    let entries = DEMO_CLASSES
        .iter()
        .enumerate()
        .map(|(k, class)| {
            let img = background_image(class, DEMO_BACKGROUND_SIZE, 1 + k as u64);
            BackgroundEntry::in_memory(format!("{class}.png"), *class, img)
        })
        .collect();
    AssetStore::new(models, BackgroundSet::new(entries).expect("nonempty"))
}

pub const DEMO_CONFIG: &str = r#"name = "synthforge-demo"

[assets]
models = "models.toml"
backgrounds = "backgrounds.toml"

[randomization]
image_size = 512
instances_per_scene = [1, 6]
instance_scale = [20.0, 120.0]
camera_tilt = [0.0, 10.0]
ambient_intensity = [0.3, 0.6]
sun_intensity = [0.3, 0.8]
fog_density = [0.0, 0.0003]
distractors_per_scene = [0, 5]

[annotation]
min_pixels = 16
min_visibility = 0.25
"#;
