//! COCO-style box evaluation: IoU, one-to-one greedy matching, 101-point
//! interpolated AP, AP@0.75 and mAP over IoU thresholds 0.50:0.05:0.95.
//!
//! No area ranges and no max-detections cap. Ties: equal scores keep input
//! order; equal IoUs match the lowest-index ground truth.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::annotate::BoxXywh;
use crate::dataset::{CocoDataset, Detection};

pub const NUM_THRESHOLDS: usize = 10;

/// IoU thresholds `0.50, 0.55, ..., 0.95`, each computed as `k / 20`.
pub fn iou_thresholds() -> [f64; NUM_THRESHOLDS] {
    std::array::from_fn(|i| (10 + i) as f64 / 20.0)
}

/// Recall sample points `0.00, 0.01, ..., 1.00`, each computed as `j / 100`.
pub fn recall_points() -> [f64; 101] {
    std::array::from_fn(|j| j as f64 / 100.0)
}

/// Intersection over union; 0 for disjoint or empty boxes.
pub fn iou(a: &BoxXywh, b: &BoxXywh) -> f64 {
    let iw = ((a.x + a.w).min(b.x + b.w) - a.x.max(b.x)).max(0.0);
    let ih = ((a.y + a.h).min(b.y + b.h) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.w * a.h + b.w * b.h - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Matches detections (already in descending score order) to ground truths.
/// Returns, per detection, the index of the matched ground truth (`None` = FP).
pub fn match_greedy(detections: &[BoxXywh], ground_truths: &[BoxXywh], threshold: f64) -> Vec<Option<usize>> {
    let mut taken = vec![false; ground_truths.len()];
    detections
        .iter()
        .map(|d| {
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in ground_truths.iter().enumerate() {
                if taken[g] {
                    continue;
                }
                let v = iou(d, gt);
                if v >= threshold && best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            best.map(|(g, _)| {
                taken[g] = true;
                g
            })
        })
        .collect()
}

/// 101-point interpolated AP of TP/FP labels given in score order.
/// Zero when there are no ground truths.
pub fn average_precision(labels: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 || labels.is_empty() {
        return 0.0;
    }
    let mut recall = Vec::with_capacity(labels.len());
    let mut precision = Vec::with_capacity(labels.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &is_tp in labels {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let total: f64 = recall_points()
        .iter()
        .map(|&r| {
            let idx = recall.partition_point(|&v| v < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    total / 101.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CategoryMode {
    /// AP per category, macro-averaged over categories that have ground
    /// truths or detections.
    #[default]
    PerCategory,
    /// All categories pooled into one.
    Agnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub thresholds: [f64; NUM_THRESHOLDS],
    pub ap: [f64; NUM_THRESHOLDS],
    pub map: f64,
    pub ap75: f64,
    pub num_ground_truths: usize,
    pub num_detections: usize,
    pub true_positives: [usize; NUM_THRESHOLDS],
    pub false_positives: [usize; NUM_THRESHOLDS],
    pub categories: Vec<u64>,
}

impl EvalReport {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mAP@[0.50:0.95]: {:.6}", self.map);
        let _ = writeln!(s, "AP@0.50: {:.6}", self.ap[0]);
        let _ = writeln!(s, "AP@0.75: {:.6}", self.ap75);
        let _ = writeln!(s, "ground_truths: {}", self.num_ground_truths);
        let _ = writeln!(s, "detections: {}", self.num_detections);
        let cats: Vec<String> = self.categories.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "categories: {}", cats.join(","));
        for i in 0..NUM_THRESHOLDS {
            let _ = writeln!(
                s,
                "AP@{:.2}: {:.6} (tp {}, fp {})",
                self.thresholds[i], self.ap[i], self.true_positives[i], self.false_positives[i]
            );
        }
        s
    }

    /// CSV: `iou_threshold,ap,tp,fp`, one row per threshold, then a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iou_threshold,ap,tp,fp\n");
        for i in 0..NUM_THRESHOLDS {
            let _ = writeln!(
                s,
                "{:.2},{},{},{}",
                self.thresholds[i], self.ap[i], self.true_positives[i], self.false_positives[i]
            );
        }
        let _ = writeln!(s, "mean,{},,", self.map);
        s
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("detection {index} references unknown image id {image_id}")]
    UnknownImage { index: usize, image_id: u64 },
}

/// Evaluates detections against ground truth over all images.
pub fn evaluate(gt: &CocoDataset, detections: &[Detection], mode: CategoryMode) -> Result<EvalReport, EvalError> {
    let image_ids: HashSet<u64> = gt.images.iter().map(|i| i.id).collect();
    if let Some((index, d)) = detections
        .iter()
        .enumerate()
        .find(|(_, d)| !image_ids.contains(&d.image_id))
    {
        return Err(EvalError::UnknownImage {
            index,
            image_id: d.image_id,
        });
    }
    let cat_of = |c: u64| match mode {
        CategoryMode::PerCategory => c,
        CategoryMode::Agnostic => 0,
    };
    let categories: Vec<u64> = gt
        .annotations
        .iter()
        .map(|a| cat_of(a.category_id))
        .chain(detections.iter().map(|d| cat_of(d.category_id)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    // Ground truths grouped by (category, image), in file order.
    let mut gts: HashMap<(u64, u64), Vec<BoxXywh>> = HashMap::new();
    for a in &gt.annotations {
        gts.entry((cat_of(a.category_id), a.image_id))
            .or_default()
            .push(BoxXywh::from_array(a.bbox));
    }

    let thresholds = iou_thresholds();
    let mut ap = [0.0; NUM_THRESHOLDS];
    let mut tps = [0usize; NUM_THRESHOLDS];
    let mut fps = [0usize; NUM_THRESHOLDS];

    for &cat in &categories {
        let n_gt: usize = gts.iter().filter(|((c, _), _)| *c == cat).map(|(_, v)| v.len()).sum();
        let mut order: Vec<usize> = (0..detections.len())
            .filter(|&i| cat_of(detections[i].category_id) == cat)
            .collect();
        // Stable: equal scores keep input order.
        order.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score));

        // Per image, the category's detections in global score order.
        let mut per_image: HashMap<u64, Vec<usize>> = HashMap::new();
        for (rank, &i) in order.iter().enumerate() {
            per_image.entry(detections[i].image_id).or_default().push(rank);
        }

        for (t, &thr) in thresholds.iter().enumerate() {
            let mut labels = vec![false; order.len()];
            for (image, ranks) in &per_image {
                let boxes: Vec<BoxXywh> = ranks
                    .iter()
                    .map(|&r| BoxXywh::from_array(detections[order[r]].bbox))
                    .collect();
                let empty = Vec::new();
                let gt_boxes = gts.get(&(cat, *image)).unwrap_or(&empty);
                for (&r, m) in ranks.iter().zip(match_greedy(&boxes, gt_boxes, thr)) {
                    labels[r] = m.is_some();
                }
            }
            let tp = labels.iter().filter(|&&l| l).count();
            tps[t] += tp;
            fps[t] += labels.len() - tp;
            ap[t] += average_precision(&labels, n_gt);
        }
    }
    if !categories.is_empty() {
        for v in &mut ap {
            *v /= categories.len() as f64;
        }
    }
    let map = ap.iter().sum::<f64>() / NUM_THRESHOLDS as f64;
    Ok(EvalReport {
        thresholds,
        ap,
        map,
        ap75: ap[5],
        num_ground_truths: gt.annotations.len(),
        num_detections: detections.len(),
        true_positives: tps,
        false_positives: fps,
        categories,
    })
}
