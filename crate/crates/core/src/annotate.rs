//! Ground-truth boxes from the rendered instance-id map.

use serde::{Deserialize, Serialize};

use crate::assets::Category;
use crate::render::RenderOutput;

/// Axis-aligned box in pixels: top-left origin, `(x, y, w, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxXywh {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxXywh {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub image_id: u64,
    /// 1-based instance index within its scene.
    pub instance_id: u32,
    pub category: Category,
    pub bbox: BoxXywh,
    /// Visible pixel count.
    pub area: u32,
    /// Visible over unoccluded pixel count, in `(0, 1]`.
    pub visibility: f64,
}

/// Keep/drop thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnotatorParams {
    pub min_pixels: u32,
    pub min_visibility: f64,
}

impl Default for AnnotatorParams {
    fn default() -> Self {
        Self {
            min_pixels: 16,
            min_visibility: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnotateError {
    #[error("id map has {ids} pixels, image has {pixels}")]
    DimensionMismatch { ids: usize, pixels: usize },
    #[error("{solo} unoccluded counts for {categories} instances")]
    InstanceCountMismatch { solo: usize, categories: usize },
    #[error("id map references instance {0}, scene has {1}")]
    UnknownInstance(i32, usize),
    #[error("min_pixels must be >= 1 and min_visibility in (0, 1]")]
    BadParams,
}

#[derive(Clone, Copy)]
struct Hull {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
    count: u32,
}

/// One annotation per aircraft instance that passes both thresholds. Boxes
/// are the tight hull of visible pixels; distractor ids are ignored.
///
/// `solo` holds each instance's unoccluded pixel count and `categories` its
/// category, both indexed by `instance id - 1`.
pub fn extract_boxes(
    out: &RenderOutput,
    solo: &[u32],
    categories: &[Category],
    image_id: u64,
    params: &AnnotatorParams,
) -> Result<Vec<Annotation>, AnnotateError> {
    let (w, h) = (out.width(), out.height());
    let pixels = (w * h) as usize;
    if out.instance_ids.len() != pixels || out.depth.len() != pixels {
        return Err(AnnotateError::DimensionMismatch {
            ids: out.instance_ids.len(),
            pixels,
        });
    }
    if solo.len() != categories.len() {
        return Err(AnnotateError::InstanceCountMismatch {
            solo: solo.len(),
            categories: categories.len(),
        });
    }
    if params.min_pixels == 0 || !(params.min_visibility > 0.0 && params.min_visibility <= 1.0) {
        return Err(AnnotateError::BadParams);
    }

    let mut hulls: Vec<Option<Hull>> = vec![None; categories.len()];
    for (i, &id) in out.instance_ids.iter().enumerate() {
        if id <= 0 {
            continue;
        }
        let slot = hulls
            .get_mut(id as usize - 1)
            .ok_or(AnnotateError::UnknownInstance(id, categories.len()))?;
        let (x, y) = (i as u32 % w, i as u32 / w);
        match slot {
            None => {
                *slot = Some(Hull {
                    x0: x,
                    y0: y,
                    x1: x,
                    y1: y,
                    count: 1,
                })
            }
            Some(hl) => {
                hl.x0 = hl.x0.min(x);
                hl.x1 = hl.x1.max(x);
                hl.y0 = hl.y0.min(y);
                hl.y1 = hl.y1.max(y);
                hl.count += 1;
            }
        }
    }

    Ok(hulls
        .iter()
        .enumerate()
        .filter_map(|(k, hull)| {
            let hl = (*hull)?;
            let category = categories[k];
            if category == Category::Distractor {
                return None;
            }
            let visibility = (hl.count as f64 / solo[k].max(hl.count) as f64).min(1.0);
            (hl.count >= params.min_pixels && visibility >= params.min_visibility).then(|| Annotation {
                image_id,
                instance_id: k as u32 + 1,
                category,
                bbox: BoxXywh::new(
                    hl.x0 as f64,
                    hl.y0 as f64,
                    (hl.x1 - hl.x0 + 1) as f64,
                    (hl.y1 - hl.y0 + 1) as f64,
                ),
                area: hl.count,
                visibility,
            })
        })
        .collect())
}
