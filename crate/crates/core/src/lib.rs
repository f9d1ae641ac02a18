//! Synthetic aerial aircraft imagery: asset loading, domain-randomized scene
//! sampling, software rendering, box annotation, COCO export and evaluation,
//! and a desk-scale unpaired translation objective.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotate;
pub mod assets;
pub mod dataset;
pub mod demo;
pub mod math;
pub mod metrics;
pub mod objective;
pub mod pipeline;
pub mod primitives;
pub mod render;
pub mod rng;
pub mod scene;

pub use annotate::{extract_boxes, Annotation, AnnotatorParams, BoxXywh};
pub use assets::{AssetStore, BackgroundSet, Category, Mesh};
pub use dataset::{CocoDataset, Detection, SizeStats};
pub use metrics::{evaluate, CategoryMode, EvalReport};
pub use pipeline::{generate, generate_scene, GenerateConfig, GenerateOptions, PipelineError};
pub use render::{render, RenderOutput};
pub use scene::{sample_scene, validate_config, RandomizationConfig, SceneDescription};
