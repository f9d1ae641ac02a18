//! Sample, render, annotate and export scenes as a COCO dataset.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotate::{extract_boxes, AnnotateError, Annotation, AnnotatorParams};
use crate::assets::{AssetError, AssetStore, Category};
use crate::dataset::{CocoImage, DatasetError, DatasetManifest, DatasetWriter};
use crate::render::{render, RenderError, RenderOutput};
use crate::scene::{sample_scene, validate_config, RandomizationConfig, SceneDescription, SceneError, Violation};

/// Overrides the asset root named in a generator config.
pub const ASSET_DIR_ENV: &str = "SYNTHFORGE_ASSET_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetPaths {
    /// Directory the manifests are resolved against. Relative to the config
    /// file; defaults to the config file's directory.
    #[serde(default)]
    pub root: Option<PathBuf>,
    pub models: PathBuf,
    pub backgrounds: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub assets: AssetPaths,
    #[serde(default)]
    pub randomization: RandomizationConfig,
    #[serde(default)]
    pub annotation: AnnotatorParams,
}

fn default_name() -> String {
    "synthforge".to_string()
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error("scene {index}: {source}")]
    Scene {
        index: u64,
        #[source]
        source: SceneError,
    },
    #[error("scene {index}: {source}")]
    Render {
        index: u64,
        #[source]
        source: RenderError,
    },
    #[error("scene {index}: {source}")]
    Annotate {
        index: u64,
        #[source]
        source: AnnotateError,
    },
    #[error("scene {index}: {source}")]
    Write {
        index: u64,
        #[source]
        source: DatasetError,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl PipelineError {
    /// Scene index the error belongs to, if any.
    pub fn scene_index(&self) -> Option<u64> {
        match self {
            Self::Scene { index, .. }
            | Self::Render { index, .. }
            | Self::Annotate { index, .. }
            | Self::Write { index, .. } => Some(*index),
            _ => None,
        }
    }

    /// True for errors caused by the config itself rather than the run.
    pub fn is_validation(&self) -> bool {
        matches!(self, Self::Parse { .. } | Self::Invalid(_))
    }
}

impl GenerateConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let v = validate_config(&self.randomization);
        if !v.is_empty() {
            return Err(PipelineError::Invalid(v));
        }
        let a = &self.annotation;
        if a.min_pixels == 0 || !(a.min_visibility > 0.0 && a.min_visibility <= 1.0) {
            return Err(PipelineError::Invalid(vec![Violation {
                field: "annotation".into(),
                message: "min_pixels must be >= 1 and min_visibility in (0, 1]".into(),
            }]));
        }
        Ok(())
    }

    /// Asset root: `override_root` if given, else `assets.root` relative to
    /// `config_dir`, else `config_dir`.
    pub fn asset_root(&self, config_dir: &Path, override_root: Option<&Path>) -> PathBuf {
        match (override_root, &self.assets.root) {
            (Some(r), _) => r.to_path_buf(),
            (None, Some(r)) => config_dir.join(r),
            (None, None) => config_dir.to_path_buf(),
        }
    }

    pub fn load_assets(&self, root: &Path) -> Result<AssetStore, PipelineError> {
        Ok(AssetStore::load(
            &root.join(&self.assets.models),
            &root.join(&self.assets.backgrounds),
            None,
        )?)
    }

    /// SHA-256 over the canonical JSON form of the config, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Everything produced for one scene.
#[derive(Debug, Clone)]
pub struct SceneResult {
    pub scene: SceneDescription,
    pub output: RenderOutput,
    pub annotations: Vec<Annotation>,
}

/// Samples, renders and annotates scene `index`. Its image id is `index + 1`.
pub fn generate_scene(
    config: &RandomizationConfig,
    params: &AnnotatorParams,
    assets: &AssetStore,
    seed: u64,
    index: u64,
) -> Result<SceneResult, PipelineError> {
    let scene = sample_scene(config, assets, seed, index).map_err(|source| PipelineError::Scene { index, source })?;
    let output = render(&scene, assets).map_err(|source| PipelineError::Render { index, source })?;
    let categories: Vec<Category> = scene.instances.iter().map(|i| i.category).collect();
    let annotations = extract_boxes(&output, &output.solo_pixel_counts, &categories, index + 1, params)
        .map_err(|source| PipelineError::Annotate { index, source })?;
    Ok(SceneResult {
        scene,
        output,
        annotations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub seed: u64,
    pub count: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every logical CPU.
    pub workers: usize,
}

/// Generates scenes `0..count` into `out_dir`. Output bytes do not depend on
/// the worker count. On failure the lowest failing scene index is reported.
pub fn generate(
    config: &GenerateConfig,
    assets: &AssetStore,
    opts: &GenerateOptions,
    progress: &(dyn Fn(u64) + Sync),
) -> Result<DatasetManifest, PipelineError> {
    config.validate()?;
    let writer = DatasetWriter::create(&opts.out_dir, &config.name, opts.seed, &config.hash())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;

    let results: Vec<Result<(CocoImage, Vec<Annotation>), PipelineError>> = pool.install(|| {
        (0..opts.count)
            .into_par_iter()
            .map(|index| {
                let r = generate_scene(&config.randomization, &config.annotation, assets, opts.seed, index)?;
                let image = writer
                    .write_image(index, &r.output.rgb)
                    .map_err(|source| PipelineError::Write { index, source })?;
                progress(index);
                Ok((image, r.annotations))
            })
            .collect()
    });

    let mut images = Vec::with_capacity(results.len());
    let mut annotations = Vec::new();
    for r in results {
        let (image, anns) = r?;
        images.push(image);
        annotations.extend(anns);
    }
    Ok(writer.finish(images, &annotations)?)
}
