//! Immutable asset repository: aircraft meshes and background photographs.

mod obj;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::math::Vec3;

pub use obj::{parse_obj, write_obj, ObjError};

/// Diffuse color used when a model manifest entry gives none.
pub const DEFAULT_DIFFUSE: [f64; 3] = [0.8, 0.8, 0.8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Airliner,
    SweptWing,
    Jet,
    Fanjet,
    Propeller,
    Distractor,
}

impl Category {
    /// The five annotated aircraft categories, in COCO id order (ids 1..=5).
    pub const AIRCRAFT: [Category; 5] = [
        Category::Airliner,
        Category::SweptWing,
        Category::Jet,
        Category::Fanjet,
        Category::Propeller,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Airliner => "airliner",
            Category::SweptWing => "swept-wing",
            Category::Jet => "jet",
            Category::Fanjet => "fanjet",
            Category::Propeller => "propeller",
            Category::Distractor => "distractor",
        }
    }

    /// COCO category id; `None` for distractors, which are never annotated.
    pub fn coco_id(self) -> Option<u64> {
        Self::AIRCRAFT.iter().position(|&c| c == self).map(|i| i as u64 + 1)
    }

    pub fn from_coco_id(id: u64) -> Option<Category> {
        id.checked_sub(1).and_then(|i| Self::AIRCRAFT.get(i as usize).copied())
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::AIRCRAFT
            .iter()
            .chain(std::iter::once(&Category::Distractor))
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// Triangle mesh of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    /// 0-based vertex indices.
    pub faces: Vec<[u32; 3]>,
    /// One unit normal per face.
    pub face_normals: Vec<Vec3>,
    pub diffuse_color: [f64; 3],
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("mesh has no faces")]
    NoFaces,
    #[error("face {face} references vertex {index}, mesh has {count}")]
    BadIndex { face: usize, index: u32, count: usize },
    #[error("face {0} normal is not unit length")]
    BadNormal(usize),
    #[error("normal count {normals} does not match face count {faces}")]
    NormalCount { normals: usize, faces: usize },
    #[error("degenerate mesh: zero extent")]
    Degenerate,
}

impl Mesh {
    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.faces.is_empty() {
            return Err(MeshError::NoFaces);
        }
        if self.face_normals.len() != self.faces.len() {
            return Err(MeshError::NormalCount {
                normals: self.face_normals.len(),
                faces: self.faces.len(),
            });
        }
        let count = self.vertices.len();
        for (face, f) in self.faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i as usize >= count) {
                return Err(MeshError::BadIndex { face, index, count });
            }
            if (self.face_normals[face].length() - 1.0).abs() > 1e-6 {
                return Err(MeshError::BadNormal(face));
            }
        }
        Ok(())
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.vertices.iter().fold(
            (
                Vec3::new(f64::MAX, f64::MAX, f64::MAX),
                Vec3::new(f64::MIN, f64::MIN, f64::MIN),
            ),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    pub fn with_material(mut self, category: Category, diffuse_color: [f64; 3]) -> Self {
        self.category = category;
        self.diffuse_color = diffuse_color;
        self
    }
}

/// Centers the mesh on the origin and scales its longest axis-aligned extent to 1.
pub fn normalize_mesh(mesh: &Mesh) -> Result<Mesh, MeshError> {
    if mesh.vertices.is_empty() {
        return Err(MeshError::Degenerate);
    }
    let (lo, hi) = mesh.bounds();
    let extent = hi - lo;
    let longest = extent.x.max(extent.y).max(extent.z);
    if !(longest > 1e-12) || !longest.is_finite() {
        return Err(MeshError::Degenerate);
    }
    let center = (lo + hi) * 0.5;
    let scale = 1.0 / longest;
    Ok(Mesh {
        vertices: mesh.vertices.iter().map(|&v| (v - center) * scale).collect(),
        ..mesh.clone()
    })
}

/// One background photograph.
#[derive(Debug, Clone)]
pub struct BackgroundEntry {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub class: String,
    /// Decoded pixels; decoded from `path` on demand when absent.
    pub pixels: Option<Arc<RgbImage>>,
}

impl BackgroundEntry {
    pub fn in_memory(name: impl Into<PathBuf>, class: impl Into<String>, image: RgbImage) -> Self {
        Self {
            path: name.into(),
            width: image.width(),
            height: image.height(),
            class: class.into(),
            pixels: Some(Arc::new(image)),
        }
    }

    pub fn load_pixels(&self) -> Result<Arc<RgbImage>, AssetError> {
        if let Some(p) = &self.pixels {
            return Ok(Arc::clone(p));
        }
        decode_rgb(&self.path).map(Arc::new)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BackgroundSet {
    entries: Vec<BackgroundEntry>,
    by_class: BTreeMap<String, Vec<usize>>,
}

impl BackgroundSet {
    pub fn new(entries: Vec<BackgroundEntry>) -> Result<Self, AssetError> {
        if entries.is_empty() {
            return Err(AssetError::EmptyManifest);
        }
        let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_class.entry(e.class.clone()).or_default().push(i);
        }
        Ok(Self { entries, by_class })
    }

    pub fn entries(&self) -> &[BackgroundEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Class labels in sorted order.
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.by_class.keys().map(String::as_str)
    }

    /// Indices of the entries carrying `class`.
    pub fn indices_of_class(&self, class: &str) -> &[usize] {
        self.by_class.get(class).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn entries_of_class<'a>(&'a self, class: &str) -> impl Iterator<Item = &'a BackgroundEntry> + 'a {
        self.indices_of_class(class).iter().map(|&i| &self.entries[i])
    }

    pub fn min_dimension(&self) -> u32 {
        self.entries.iter().map(|e| e.width.min(e.height)).min().unwrap_or(0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AssetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: cannot decode image: {source}")]
    Decode { path: PathBuf, source: image::ImageError },
    #[error("{path}: invalid manifest: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("manifest lists no entries")]
    EmptyManifest,
    #[error("{path}: {source}")]
    Obj { path: PathBuf, source: ObjError },
    #[error("{path}: {source}")]
    Mesh { path: PathBuf, source: MeshError },
    #[error("{path}: diffuse_color components must lie in [0, 1]")]
    Color { path: PathBuf },
}

fn decode_rgb(path: &Path) -> Result<RgbImage, AssetError> {
    if !path.exists() {
        return Err(AssetError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    image::open(path)
        .map(|img| img.to_rgb8())
        .map_err(|source| AssetError::Decode {
            path: path.to_path_buf(),
            source,
        })
}

fn read_text(path: &Path) -> Result<String, AssetError> {
    std::fs::read_to_string(path).map_err(|source| AssetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Resolves manifest-relative paths. `root` overrides the manifest directory.
fn resolve_path(manifest: &Path, root: Option<&Path>, entry: &Path) -> PathBuf {
    if entry.is_absolute() {
        return entry.to_path_buf();
    }
    match root {
        Some(r) => r.join(entry),
        None => manifest.parent().unwrap_or(Path::new(".")).join(entry),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackgroundManifestEntry {
    pub path: PathBuf,
    pub class: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BackgroundManifest {
    #[serde(default)]
    pub background: Vec<BackgroundManifestEntry>,
}

/// Loads and decodes every background listed in a TOML manifest; pixels stay
/// in memory.
pub fn load_background_library(manifest: &Path, root: Option<&Path>) -> Result<BackgroundSet, AssetError> {
    let text = read_text(manifest)?;
    let parsed: BackgroundManifest = toml::from_str(&text).map_err(|e| AssetError::Manifest {
        path: manifest.to_path_buf(),
        message: e.to_string(),
    })?;
    if parsed.background.is_empty() {
        return Err(AssetError::EmptyManifest);
    }
    let entries = parsed
        .background
        .into_iter()
        .map(|e| {
            let path = resolve_path(manifest, root, &e.path);
            let img = decode_rgb(&path)?;
            Ok(BackgroundEntry {
                path,
                width: img.width(),
                height: img.height(),
                class: e.class,
                pixels: Some(Arc::new(img)),
            })
        })
        .collect::<Result<Vec<_>, AssetError>>()?;
    BackgroundSet::new(entries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifestEntry {
    pub path: PathBuf,
    pub category: Category,
    #[serde(default = "default_diffuse")]
    pub diffuse_color: [f64; 3],
}

fn default_diffuse() -> [f64; 3] {
    DEFAULT_DIFFUSE
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelManifest {
    #[serde(default)]
    pub model: Vec<ModelManifestEntry>,
}

/// A loaded, normalized model.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub mesh: Mesh,
}

/// Parses and normalizes every model in a TOML manifest.
pub fn load_model_library(manifest: &Path, root: Option<&Path>) -> Result<Vec<Model>, AssetError> {
    let text = read_text(manifest)?;
    let parsed: ModelManifest = toml::from_str(&text).map_err(|e| AssetError::Manifest {
        path: manifest.to_path_buf(),
        message: e.to_string(),
    })?;
    if parsed.model.is_empty() {
        return Err(AssetError::EmptyManifest);
    }
    parsed
        .model
        .into_iter()
        .map(|e| {
            let path = resolve_path(manifest, root, &e.path);
            if e.category == Category::Distractor {
                return Err(AssetError::Manifest {
                    path: manifest.to_path_buf(),
                    message: format!("{}: models must use an aircraft category", e.path.display()),
                });
            }
            if e.diffuse_color.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(AssetError::Color { path });
            }
            let text = read_text(&path)?;
            let mesh = parse_obj(&text).map_err(|source| AssetError::Obj {
                path: path.clone(),
                source,
            })?;
            let mesh = normalize_mesh(&mesh)
                .map_err(|source| AssetError::Mesh {
                    path: path.clone(),
                    source,
                })?
                .with_material(e.category, e.diffuse_color);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(Model { name, mesh })
        })
        .collect()
}

/// Everything the pipeline reads. Immutable once built; share via `&` or `Arc`.
#[derive(Debug, Clone)]
pub struct AssetStore {
    pub models: Vec<Model>,
    pub backgrounds: BackgroundSet,
}

impl AssetStore {
    pub fn new(models: Vec<Model>, backgrounds: BackgroundSet) -> Self {
        Self { models, backgrounds }
    }

    pub fn load(models: &Path, backgrounds: &Path, root: Option<&Path>) -> Result<Self, AssetError> {
        Ok(Self::new(
            load_model_library(models, root)?,
            load_background_library(backgrounds, root)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(lo: f64, hi: f64) -> Mesh {
        let mut src = String::new();
        for &x in &[lo, hi] {
            for &y in &[lo, hi] {
                for &z in &[lo, hi] {
                    src.push_str(&format!("v {x} {y} {z}\n"));
                }
            }
        }
        src.push_str("f 1 2 4 3\nf 5 7 8 6\nf 1 5 6 2\nf 3 4 8 7\nf 1 3 7 5\nf 2 6 8 4\n");
        parse_obj(&src).unwrap()
    }

    #[test]
    fn cube_normalizes_to_unit_extent() {
        let m = normalize_mesh(&cube(0.0, 2.0)).unwrap();
        let (lo, hi) = m.bounds();
        assert_eq!(lo, Vec3::new(-0.5, -0.5, -0.5));
        assert_eq!(hi, Vec3::new(0.5, 0.5, 0.5));
        assert_eq!(m.faces.len(), 12);
    }

    #[test]
    fn normalize_is_idempotent() {
        let once = normalize_mesh(&cube(-3.0, 7.5)).unwrap();
        let twice = normalize_mesh(&once).unwrap();
        assert_eq!(once.faces, twice.faces);
        for (a, b) in once.vertices.iter().zip(&twice.vertices) {
            assert!((*a - *b).length() < 1e-9);
        }
    }

    #[test]
    fn coincident_vertices_are_degenerate() {
        let mut m = cube(0.0, 1.0);
        for v in &mut m.vertices {
            *v = Vec3::new(1.0, 1.0, 1.0);
        }
        assert_eq!(normalize_mesh(&m).unwrap_err(), MeshError::Degenerate);
    }

    #[test]
    fn category_ids_round_trip() {
        for (i, c) in Category::AIRCRAFT.iter().enumerate() {
            assert_eq!(c.coco_id(), Some(i as u64 + 1));
            assert_eq!(Category::from_coco_id(i as u64 + 1), Some(*c));
            assert_eq!(c.name().parse::<Category>().unwrap(), *c);
        }
        assert_eq!(Category::Distractor.coco_id(), None);
        assert_eq!(Category::from_coco_id(0), None);
    }

    fn write_png(dir: &Path, name: &str, w: u32, h: u32) {
        RgbImage::from_pixel(w, h, image::Rgb([10, 20, 30]))
            .save(dir.join(name))
            .unwrap();
    }

    #[test]
    fn background_manifest_loads_and_groups_by_class() {
        let dir = tempfile::tempdir().unwrap();
        write_png(dir.path(), "a.png", 40, 30);
        write_png(dir.path(), "b.png", 50, 50);
        write_png(dir.path(), "c.png", 60, 20);
        let manifest = dir.path().join("bg.toml");
        std::fs::write(
            &manifest,
            "[[background]]\npath = \"a.png\"\nclass = \"water\"\n\
             [[background]]\npath = \"b.png\"\nclass = \"trees\"\n\
             [[background]]\npath = \"c.png\"\nclass = \"water\"\n",
        )
        .unwrap();
        let set = load_background_library(&manifest, None).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.classes().collect::<Vec<_>>(), vec!["trees", "water"]);
        assert!(set.entries_of_class("water").all(|e| e.class == "water"));
        assert_eq!(set.entries_of_class("water").count(), 2);
        assert_eq!(set.entries_of_class("trees").count(), 1);
        assert_eq!(set.entries_of_class("sand").count(), 0);
        assert_eq!((set.entries()[0].width, set.entries()[0].height), (40, 30));
        assert_eq!(set.min_dimension(), 20);
    }

    #[test]
    fn missing_background_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_png(dir.path(), "a.png", 8, 8);
        let manifest = dir.path().join("bg.toml");
        std::fs::write(
            &manifest,
            "[[background]]\npath = \"a.png\"\nclass = \"water\"\n\
             [[background]]\npath = \"gone.png\"\nclass = \"water\"\n",
        )
        .unwrap();
        let err = load_background_library(&manifest, None).unwrap_err();
        assert!(err.to_string().contains("gone.png"), "{err}");
    }

    #[test]
    fn empty_and_undecodable_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("bg.toml");
        std::fs::write(&manifest, "").unwrap();
        assert!(matches!(
            load_background_library(&manifest, None),
            Err(AssetError::EmptyManifest)
        ));
        std::fs::write(dir.path().join("junk.png"), b"not a png").unwrap();
        std::fs::write(&manifest, "[[background]]\npath = \"junk.png\"\nclass = \"x\"\n").unwrap();
        assert!(matches!(
            load_background_library(&manifest, None),
            Err(AssetError::Decode { .. })
        ));
    }

    #[test]
    fn asset_root_overrides_manifest_dir() {
        let dir = tempfile::tempdir().unwrap();
        let root = tempfile::tempdir().unwrap();
        write_png(root.path(), "a.png", 8, 8);
        let manifest = dir.path().join("bg.toml");
        std::fs::write(&manifest, "[[background]]\npath = \"a.png\"\nclass = \"water\"\n").unwrap();
        assert!(load_background_library(&manifest, None).is_err());
        assert_eq!(load_background_library(&manifest, Some(root.path())).unwrap().len(), 1);
    }

    #[test]
    fn model_manifest_applies_material_and_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("box.obj"), write_obj(&cube(0.0, 4.0))).unwrap();
        let manifest = dir.path().join("models.toml");
        std::fs::write(
            &manifest,
            "[[model]]\npath = \"box.obj\"\ncategory = \"jet\"\ndiffuse_color = [0.1, 0.2, 0.3]\n\
             [[model]]\npath = \"box.obj\"\ncategory = \"propeller\"\n",
        )
        .unwrap();
        let models = load_model_library(&manifest, None).unwrap();
        assert_eq!(models.len(), 2);
        assert_eq!(models[0].mesh.category, Category::Jet);
        assert_eq!(models[0].mesh.diffuse_color, [0.1, 0.2, 0.3]);
        assert_eq!(models[1].mesh.diffuse_color, DEFAULT_DIFFUSE);
        assert_eq!(models[0].name, "box");
        let (lo, hi) = models[0].mesh.bounds();
        assert!((hi.x - lo.x - 1.0).abs() < 1e-12);
    }
}
