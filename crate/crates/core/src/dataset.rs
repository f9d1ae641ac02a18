//! COCO-format dataset export and ingestion, plus instance-size statistics.
//!
//! `area` in written annotations is the visible pixel count, not `w * h`;
//! `iscrowd` is always 0.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::annotate::{Annotation, BoxXywh};
use crate::assets::Category;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    pub area: f64,
    #[serde(default)]
    pub iscrowd: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

/// Generator metadata carried in the COCO `info` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub dataset_name: String,
    pub seed: u64,
    pub config_hash: String,
    pub annotation_count: usize,
    pub area_convention: String,
}

pub const AREA_CONVENTION: &str = "visible_pixel_count";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoDataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub info: Option<DatasetInfo>,
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    pub score: f64,
}

/// Summary of a written dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub categories: Vec<CocoCategory>,
    pub images: Vec<CocoImage>,
    pub annotation_count: usize,
    pub config_hash: String,
    pub seed: u64,
    pub annotation_path: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: schema violation at `{field}`: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("duplicate image id {0}")]
    DuplicateImage(u64),
    #[error("annotation {index} references missing image id {image_id}")]
    MissingImage { index: usize, image_id: u64 },
    #[error("annotation {index}: {message}")]
    BadAnnotation { index: usize, message: String },
    #[error("{path}: cannot encode image: {source}")]
    Encode { path: PathBuf, source: image::ImageError },
    #[error("no annotations")]
    Empty,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn image_file_name(index: u64) -> String {
    format!("img_{index:06}.png")
}

pub const ANNOTATION_FILE: &str = "annotations.json";

/// COCO category table for the five aircraft categories.
pub fn aircraft_categories() -> Vec<CocoCategory> {
    Category::AIRCRAFT
        .iter()
        .map(|c| CocoCategory {
            id: c.coco_id().expect("aircraft category"),
            name: c.name().to_string(),
        })
        .collect()
}

/// Writes images into a dataset directory, then assembles the annotation file.
/// `write_image` may be called concurrently.
pub struct DatasetWriter {
    out_dir: PathBuf,
    name: String,
    seed: u64,
    config_hash: String,
}

impl DatasetWriter {
    pub fn create(out_dir: &Path, name: &str, seed: u64, config_hash: &str) -> Result<Self, DatasetError> {
        fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            name: name.to_string(),
            seed,
            config_hash: config_hash.to_string(),
        })
    }

    /// Writes scene `index` as `img_{index:06}.png`; its image id is `index + 1`.
    pub fn write_image(&self, index: u64, rgb: &RgbImage) -> Result<CocoImage, DatasetError> {
        let file_name = image_file_name(index);
        let path = self.out_dir.join(&file_name);
        rgb.save_with_format(&path, image::ImageFormat::Png)
            .map_err(|source| match source {
                image::ImageError::IoError(e) => DatasetError::Io {
                    path: path.clone(),
                    source: e,
                },
                other => DatasetError::Encode {
                    path: path.clone(),
                    source: other,
                },
            })?;
        Ok(CocoImage {
            id: index + 1,
            file_name,
            width: rgb.width(),
            height: rgb.height(),
        })
    }

    /// Validates and writes the annotation file; annotation ids follow input order.
    pub fn finish(self, images: Vec<CocoImage>, annotations: &[Annotation]) -> Result<DatasetManifest, DatasetError> {
        let dataset = build_coco(&self.name, self.seed, &self.config_hash, images, annotations)?;
        let path = self.out_dir.join(ANNOTATION_FILE);
        let mut text = serde_json::to_string_pretty(&dataset).expect("dataset serializes");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        Ok(DatasetManifest {
            name: self.name,
            categories: dataset.categories,
            images: dataset.images,
            annotation_count: dataset.annotations.len(),
            config_hash: self.config_hash,
            seed: self.seed,
            annotation_path: path,
        })
    }
}

/// Builds the COCO structure after checking ids and annotation invariants.
pub fn build_coco(
    name: &str,
    seed: u64,
    config_hash: &str,
    mut images: Vec<CocoImage>,
    annotations: &[Annotation],
) -> Result<CocoDataset, DatasetError> {
    images.sort_by_key(|i| i.id);
    let mut ids = HashSet::new();
    for img in &images {
        if !ids.insert(img.id) {
            return Err(DatasetError::DuplicateImage(img.id));
        }
    }
    let coco_annotations = annotations
        .iter()
        .enumerate()
        .map(|(index, a)| {
            let img = images
                .binary_search_by_key(&a.image_id, |i| i.id)
                .map(|i| &images[i])
                .map_err(|_| DatasetError::MissingImage {
                    index,
                    image_id: a.image_id,
                })?;
            let b = a.bbox;
            let inside = b.x >= 0.0
                && b.y >= 0.0
                && b.w >= 1.0
                && b.h >= 1.0
                && b.x + b.w <= img.width as f64
                && b.y + b.h <= img.height as f64;
            if !inside || a.area == 0 {
                return Err(DatasetError::BadAnnotation {
                    index,
                    message: format!("bbox {:?} / area {} violates image bounds", b.to_array(), a.area),
                });
            }
            let category_id = a.category.coco_id().ok_or_else(|| DatasetError::BadAnnotation {
                index,
                message: "distractors cannot be annotated".into(),
            })?;
            Ok(CocoAnnotation {
                id: index as u64 + 1,
                image_id: a.image_id,
                category_id,
                bbox: b.to_array(),
                area: a.area as f64,
                iscrowd: 0,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CocoDataset {
        info: Some(DatasetInfo {
            dataset_name: name.to_string(),
            seed,
            config_hash: config_hash.to_string(),
            annotation_count: coco_annotations.len(),
            area_convention: AREA_CONVENTION.to_string(),
        }),
        images,
        annotations: coco_annotations,
        categories: aircraft_categories(),
    })
}

/// Writes in-memory images and annotations as a dataset. Everything is
/// validated before the first file is written.
pub fn write_dataset(
    images: &[(u64, RgbImage)],
    annotations: &[Annotation],
    out_dir: &Path,
    name: &str,
    seed: u64,
    config_hash: &str,
) -> Result<DatasetManifest, DatasetError> {
    let infos: Vec<CocoImage> = images
        .iter()
        .map(|(index, rgb)| CocoImage {
            id: index + 1,
            file_name: image_file_name(*index),
            width: rgb.width(),
            height: rgb.height(),
        })
        .collect();
    build_coco(name, seed, config_hash, infos, annotations)?;
    let writer = DatasetWriter::create(out_dir, name, seed, config_hash)?;
    let written = images
        .iter()
        .map(|(index, rgb)| writer.write_image(*index, rgb))
        .collect::<Result<Vec<_>, _>>()?;
    writer.finish(written, annotations)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| DatasetError::Schema {
        path: path.to_path_buf(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn check_box(path: &Path, field: String, b: &[f64; 4]) -> Result<(), DatasetError> {
    if b.iter().any(|v| !v.is_finite()) || b[2] <= 0.0 || b[3] <= 0.0 {
        return Err(DatasetError::Schema {
            path: path.to_path_buf(),
            field,
            message: format!("bbox {b:?} needs finite values and w, h > 0"),
        });
    }
    Ok(())
}

/// Reads and validates a COCO ground-truth file.
pub fn read_ground_truth(path: &Path) -> Result<CocoDataset, DatasetError> {
    let gt: CocoDataset = read_json(path)?;
    let mut image_ids = HashSet::new();
    for (i, img) in gt.images.iter().enumerate() {
        if !image_ids.insert(img.id) {
            return Err(DatasetError::Schema {
                path: path.to_path_buf(),
                field: format!("images[{i}].id"),
                message: format!("duplicate image id {}", img.id),
            });
        }
    }
    let cat_ids: HashSet<u64> = gt.categories.iter().map(|c| c.id).collect();
    for (i, a) in gt.annotations.iter().enumerate() {
        if !image_ids.contains(&a.image_id) {
            return Err(DatasetError::Schema {
                path: path.to_path_buf(),
                field: format!("annotations[{i}].image_id"),
                message: format!("unknown image id {}", a.image_id),
            });
        }
        if !cat_ids.contains(&a.category_id) {
            return Err(DatasetError::Schema {
                path: path.to_path_buf(),
                field: format!("annotations[{i}].category_id"),
                message: format!("unknown category id {}", a.category_id),
            });
        }
        check_box(path, format!("annotations[{i}].bbox"), &a.bbox)?;
    }
    Ok(gt)
}

/// Reads and validates a detection file (JSON array).
pub fn read_detections(path: &Path) -> Result<Vec<Detection>, DatasetError> {
    let dets: Vec<Detection> = read_json(path)?;
    for (i, d) in dets.iter().enumerate() {
        if !(0.0..=1.0).contains(&d.score) {
            return Err(DatasetError::Schema {
                path: path.to_path_buf(),
                field: format!("[{i}].score"),
                message: format!("score {} outside [0, 1]", d.score),
            });
        }
        check_box(path, format!("[{i}].bbox"), &d.bbox)?;
    }
    Ok(dets)
}

/// Instance-size histogram. Size is the mean of box width and height.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizeStats {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Sizes below the first edge / above the last edge.
    pub underflow: usize,
    pub overflow: usize,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

pub const DEFAULT_SIZE_BINS: usize = 20;

pub fn instance_size(b: &BoxXywh) -> f64 {
    (b.h + b.w) / 2.0
}

/// Size statistics with 20 equal-width bins spanning `[min, max]`.
pub fn compute_instance_size_stats(boxes: &[BoxXywh]) -> Result<SizeStats, DatasetError> {
    let sizes: Vec<f64> = boxes.iter().map(instance_size).collect();
    let (lo, hi) = min_max(&sizes).ok_or(DatasetError::Empty)?;
    Ok(size_stats_in_range(&sizes, DEFAULT_SIZE_BINS, lo, hi))
}

/// Size statistics with `bins` equal-width bins over a fixed `[lo, hi]`.
pub fn compute_instance_size_stats_in_range(
    boxes: &[BoxXywh],
    bins: usize,
    lo: f64,
    hi: f64,
) -> Result<SizeStats, DatasetError> {
    let sizes: Vec<f64> = boxes.iter().map(instance_size).collect();
    if sizes.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(size_stats_in_range(&sizes, bins.max(1), lo, hi))
}

fn min_max(v: &[f64]) -> Option<(f64, f64)> {
    let first = *v.first()?;
    Some(v.iter().fold((first, first), |(a, b), &x| (a.min(x), b.max(x))))
}

fn size_stats_in_range(sizes: &[f64], bins: usize, lo: f64, hi: f64) -> SizeStats {
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    let mut counts = vec![0usize; bins];
    let (mut underflow, mut overflow) = (0, 0);
    for &s in sizes {
        if s < lo {
            underflow += 1;
        } else if s > hi {
            overflow += 1;
        } else {
            // Bins are [e_i, e_{i+1}); the last bin also holds `hi`.
            let i = edges[..bins].partition_point(|&e| e <= s).saturating_sub(1);
            counts[i] += 1;
        }
    }
    let (min, max) = min_max(sizes).expect("nonempty");
    SizeStats {
        edges,
        counts,
        underflow,
        overflow,
        count: sizes.len(),
        min,
        max,
        mean: sizes.iter().sum::<f64>() / sizes.len() as f64,
    }
}

impl SizeStats {
    pub fn nonzero_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// `bin_low,bin_high,count` rows, then a summary row `min,max,count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_low,bin_high,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", self.edges[i], self.edges[i + 1], c);
        }
        let _ = writeln!(s, "{},{},{}", self.min, self.max, self.count);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(image_id: u64, bbox: BoxXywh) -> Annotation {
        Annotation {
            image_id,
            instance_id: 1,
            category: Category::Airliner,
            bbox,
            area: (bbox.w * bbox.h) as u32,
            visibility: 1.0,
        }
    }

    #[test]
    fn single_box_stats() {
        let s = compute_instance_size_stats(&[BoxXywh::new(0.0, 0.0, 10.0, 20.0)]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.count), (15.0, 15.0, 15.0, 1));
        assert_eq!(s.counts.iter().sum::<usize>(), 1);
    }

    #[test]
    fn mean_of_three_sizes() {
        let boxes = [10.0, 20.0, 30.0].map(|v| BoxXywh::new(0.0, 0.0, v, v));
        let s = compute_instance_size_stats(&boxes).unwrap();
        assert_eq!(s.mean, 20.0);
        assert_eq!(s.counts[0], 1);
        assert_eq!(s.counts[10], 1);
        assert_eq!(s.counts[19], 1);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(compute_instance_size_stats(&[]), Err(DatasetError::Empty)));
    }

    #[test]
    fn fixed_range_tracks_outliers() {
        let boxes = [5.0, 50.0, 500.0].map(|v| BoxXywh::new(0.0, 0.0, v, v));
        let s = compute_instance_size_stats_in_range(&boxes, 10, 20.0, 200.0).unwrap();
        assert_eq!((s.underflow, s.overflow), (1, 1));
        assert_eq!(s.counts.iter().sum::<usize>() + s.underflow + s.overflow, 3);
    }

    #[test]
    fn csv_layout() {
        let s = compute_instance_size_stats(&[BoxXywh::new(0.0, 0.0, 10.0, 20.0), BoxXywh::new(0.0, 0.0, 30.0, 30.0)])
            .unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bin_low,bin_high,count");
        assert_eq!(lines.len(), 22);
        assert_eq!(lines[1], "15,15.75,1");
        assert_eq!(lines[21], "15,30,2");
    }

    #[test]
    fn write_and_reread() {
        let dir = tempfile::tempdir().unwrap();
        let images = vec![(0, RgbImage::new(64, 64)), (1, RgbImage::new(64, 64))];
        let anns = vec![
            ann(1, BoxXywh::new(1.0, 2.0, 10.0, 10.0)),
            ann(2, BoxXywh::new(0.0, 0.0, 64.0, 64.0)),
            ann(2, BoxXywh::new(5.0, 5.0, 3.0, 4.0)),
        ];
        let m = write_dataset(&images, &anns, dir.path(), "t", 3, "abc").unwrap();
        assert_eq!(m.images.len(), 2);
        assert_eq!(m.annotation_count, 3);
        assert!(dir.path().join("img_000001.png").exists());
        let gt = read_ground_truth(&dir.path().join(ANNOTATION_FILE)).unwrap();
        assert_eq!(gt.annotations.len(), 3);
        assert_eq!(gt.annotations[2].bbox, [5.0, 5.0, 3.0, 4.0]);
        assert_eq!(gt.annotations[2].area, 12.0);
        assert_eq!(gt.categories.len(), 5);
        assert_eq!(gt.info.unwrap().area_convention, AREA_CONVENTION);
    }

    #[test]
    fn missing_image_fails_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("ds");
        let images = vec![(0, RgbImage::new(8, 8))];
        let err = write_dataset(&images, &[ann(9, BoxXywh::new(0.0, 0.0, 2.0, 2.0))], &out, "t", 0, "").unwrap_err();
        assert!(matches!(err, DatasetError::MissingImage { index: 0, image_id: 9 }));
        assert!(!out.exists());
    }

    #[test]
    fn duplicate_image_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let images = vec![(0, RgbImage::new(8, 8)), (0, RgbImage::new(8, 8))];
        assert!(matches!(
            write_dataset(&images, &[], dir.path(), "t", 0, ""),
            Err(DatasetError::DuplicateImage(1))
        ));
    }

    #[test]
    fn out_of_bounds_box_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let images = vec![(0, RgbImage::new(8, 8))];
        let err = write_dataset(
            &images,
            &[ann(1, BoxXywh::new(4.0, 4.0, 5.0, 2.0))],
            dir.path(),
            "t",
            0,
            "",
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::BadAnnotation { index: 0, .. }));
    }

    #[test]
    fn minimal_ground_truth_parses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.json");
        fs::write(
            &p,
            r#"{"images":[{"id":1,"file_name":"a.png","width":10,"height":10}],
                "annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[1,1,2,2],"area":4,"iscrowd":0}],
                "categories":[{"id":1,"name":"airplane"}]}"#,
        )
        .unwrap();
        assert_eq!(read_ground_truth(&p).unwrap().annotations.len(), 1);
    }

    #[test]
    fn schema_errors_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gt.json");
        fs::write(
            &p,
            r#"{"images":[{"id":1,"file_name":"a.png","width":10,"height":10}],
                "annotations":[{"id":1,"image_id":1,"category_id":1,"bbox":[1,1,2],"area":4}],
                "categories":[]}"#,
        )
        .unwrap();
        let err = read_ground_truth(&p).unwrap_err().to_string();
        assert!(err.contains("annotations[0].bbox"), "{err}");
    }

    #[test]
    fn bad_scores_are_rejected_with_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("dets.json");
        fs::write(
            &p,
            r#"[{"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":0.5},
                {"image_id":1,"category_id":1,"bbox":[0,0,1,1],"score":1.5}]"#,
        )
        .unwrap();
        let err = read_detections(&p).unwrap_err().to_string();
        assert!(err.contains("[1].score") && err.contains("1.5"), "{err}");
    }
}
