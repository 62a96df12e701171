//! Automatic mask generation: prompt a segmenter with point grids over the
//! crop schedule, filter, deduplicate within and across crops, and clean up.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crops::{
    build_crop_schedule_with, make_point_grid, remap_mask_to_full, remap_point_to_full,
    touches_crop_boundary, CropError, CropSpec, DEFAULT_OVERLAP_RATIO,
};
use crate::mask::{
    fill_small_holes, remove_small_components, stability_score, BBox, BinaryMask, Connectivity,
    MaskError, SoftMask,
};
use crate::nms::{greedy_nms, NmsKey};
use crate::segmenter::{Prompt, PromptPoint, SegmentError, Segmenter};

#[derive(Debug, Clone)]
pub struct MaskRecord {
    /// Full-image frame.
    pub mask: BinaryMask,
    /// Crop-local logits, dropped once filtering is done.
    pub soft: Option<SoftMask>,
    pub predicted_iou: f64,
    pub stability: f64,
    pub crop: CropSpec,
    /// Full-image coordinates of the prompt point.
    pub source_point: (f64, f64),
    pub rank_key: f64,
    pub area: usize,
    pub bbox: BBox,
}

impl MaskRecord {
    fn nms_key(&self) -> NmsKey {
        NmsKey {
            rank: self.rank_key,
            area: self.area as u64,
            point: self.source_point,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmgConfig {
    pub pred_iou_thresh: f64,
    pub stability_thresh: f64,
    /// Offset in logits for the two binarizations compared by the stability score.
    pub stability_delta: f32,
    /// Masks covering at least this fraction of the image are dropped.
    pub coverage_max: f64,
    pub nms_thresh: f64,
    pub min_component_area: usize,
    pub max_hole_area: usize,
    pub crop_schedule_on: bool,
    pub crop_overlap_ratio: f64,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            pred_iou_thresh: 0.88,
            stability_thresh: 0.95,
            stability_delta: 1.0,
            coverage_max: 0.95,
            nms_thresh: 0.7,
            min_component_area: 100,
            max_hole_area: 100,
            crop_schedule_on: true,
            crop_overlap_ratio: DEFAULT_OVERLAP_RATIO,
        }
    }
}

impl AmgConfig {
    pub fn validate(&self) -> Result<(), AmgError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let problem = if !unit(self.pred_iou_thresh) {
            Some("pred_iou_thresh must be in [0, 1]")
        } else if !unit(self.stability_thresh) {
            Some("stability_thresh must be in [0, 1]")
        } else if !(self.stability_delta.is_finite() && self.stability_delta >= 0.0) {
            Some("stability_delta must be a non-negative number")
        } else if !(self.coverage_max > 0.0 && self.coverage_max <= 1.0) {
            Some("coverage_max must be in (0, 1]")
        } else if !unit(self.nms_thresh) {
            Some("nms_thresh must be in [0, 1]")
        } else if !(0.0..1.0).contains(&self.crop_overlap_ratio) {
            Some("crop_overlap_ratio must be in [0, 1)")
        } else {
            None
        };
        match problem {
            Some(p) => Err(AmgError::Config(p.into())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Schedule,
    Candidates,
    Postprocess,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Schedule => "crop schedule",
            Stage::Candidates => "candidate generation",
            Stage::Postprocess => "postprocess",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AmgError {
    #[error("invalid AMG config: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Crop { stage: Stage, source: CropError },
    #[error("{stage} on crop {crop:?}, point ({x:.2}, {y:.2}): {source}", x = point.0, y = point.1)]
    Segment {
        stage: Stage,
        crop: BBox,
        point: (f64, f64),
        source: SegmentError,
    },
    #[error("{stage} on crop {crop:?}: {source}")]
    Mask {
        stage: Stage,
        crop: BBox,
        source: MaskError,
    },
}

/// Progress events, delivered on the calling thread in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub enum AmgEvent {
    CropDone {
        index: usize,
        crop: CropSpec,
        candidates: usize,
        filtered: usize,
        kept: usize,
    },
    CrossCropNms {
        before: usize,
        after: usize,
    },
    Postprocessed {
        before: usize,
        after: usize,
    },
}

pub trait AmgObserver {
    fn on_event(&mut self, event: &AmgEvent);
}

impl<F: FnMut(&AmgEvent)> AmgObserver for F {
    fn on_event(&mut self, event: &AmgEvent) {
        self(event)
    }
}

struct Derived {
    mask: BinaryMask,
    area: usize,
    bbox: BBox,
    stability: f64,
}

/// Queries the segmenter once per grid point (multimask) and returns the
/// masks that stay clear of the crop's inner edges, in the full-image frame.
///
/// Segmenters that hand back the same logit buffer for repeated answers
/// (the oracle does) have the per-mask work done once.
pub fn generate_candidates<S: Segmenter + ?Sized>(
    segmenter: &S,
    crop: &CropSpec,
    config: &AmgConfig,
) -> Result<Vec<MaskRecord>, AmgError> {
    let full = segmenter.image_size();
    let mask_err = |source| AmgError::Mask {
        stage: Stage::Candidates,
        crop: crop.rect,
        source,
    };
    let mut memo: HashMap<usize, (SoftMask, Option<Derived>)> = HashMap::new();
    let mut records = Vec::new();
    for (x, y) in make_point_grid(crop).points {
        let point = remap_point_to_full((x, y), crop).map_err(|source| AmgError::Crop {
            stage: Stage::Candidates,
            source,
        })?;
        let seg_err = |source| AmgError::Segment {
            stage: Stage::Candidates,
            crop: crop.rect,
            point,
            source,
        };
        let out = segmenter
            .segment(
                crop.rect,
                &Prompt::point(PromptPoint::foreground(x, y)),
                true,
            )
            .map_err(seg_err)?;
        out.validate(crop.rect.w, crop.rect.h).map_err(seg_err)?;
        for (soft, &predicted_iou) in out.masks.iter().zip(&out.predicted_ious) {
            let key = soft.storage_id();
            if !memo.contains_key(&key) {
                let local = soft.binarize();
                let derived = if touches_crop_boundary(&local, crop, full) {
                    None
                } else {
                    let mask = remap_mask_to_full(&local, crop, full).map_err(|e| match e {
                        CropError::Mask(m) => mask_err(m),
                        other => AmgError::Crop {
                            stage: Stage::Candidates,
                            source: other,
                        },
                    })?;
                    Some(Derived {
                        area: mask.area(),
                        bbox: mask.bbox_or_empty(),
                        stability: stability_score(soft, config.stability_delta),
                        mask,
                    })
                };
                memo.insert(key, (soft.clone(), derived));
            }
            if let Some(d) = &memo[&key].1 {
                records.push(MaskRecord {
                    mask: d.mask.clone(),
                    soft: Some(soft.clone()),
                    predicted_iou,
                    stability: d.stability,
                    crop: *crop,
                    source_point: point,
                    rank_key: predicted_iou,
                    area: d.area,
                    bbox: d.bbox,
                });
            }
        }
    }
    Ok(records)
}

/// Keeps records passing all three predicates; order is preserved.
pub fn filter_candidates(
    records: Vec<MaskRecord>,
    config: &AmgConfig,
    image_area: u64,
) -> Vec<MaskRecord> {
    records
        .into_iter()
        .filter(|r| {
            r.predicted_iou >= config.pred_iou_thresh
                && r.stability >= config.stability_thresh
                && (r.area as f64) < config.coverage_max * image_area as f64
        })
        .collect()
}

/// Greedy box NMS ranked by each record's `rank_key`.
pub fn nms(records: Vec<MaskRecord>, thresh: f64) -> Vec<MaskRecord> {
    let boxes: Vec<BBox> = records.iter().map(|r| r.bbox).collect();
    let keys: Vec<NmsKey> = records.iter().map(MaskRecord::nms_key).collect();
    let kept = greedy_nms(&boxes, &keys, thresh);
    let mut slots: Vec<Option<MaskRecord>> = records.into_iter().map(Some).collect();
    kept.into_iter()
        .map(|i| slots[i].take().expect("indices are unique"))
        .collect()
}

/// Removes small components, then fills small holes. `None` when nothing is left.
pub fn postprocess(mut record: MaskRecord, config: &AmgConfig) -> Option<MaskRecord> {
    let cleaned =
        remove_small_components(&record.mask, config.min_component_area, Connectivity::Eight);
    let cleaned = fill_small_holes(&cleaned, config.max_hole_area, Connectivity::Eight);
    if cleaned.is_empty() {
        return None;
    }
    if cleaned != record.mask {
        record.area = cleaned.area();
        record.bbox = cleaned.bbox_or_empty();
        record.mask = cleaned;
    }
    Some(record)
}

fn cross_crop_rank(record: &MaskRecord) -> f64 {
    // zoom level dominates because predicted IoU lies in [0, 1]
    2.0 * record.crop.zoom_level as f64 + record.predicted_iou
}

/// Final output order: predicted IoU desc, area desc, source point row-major.
pub fn canonical_sort(records: &mut [MaskRecord]) {
    records.sort_by(|a, b| {
        NmsKey {
            rank: a.predicted_iou,
            area: a.area as u64,
            point: a.source_point,
        }
        .cmp_priority(&NmsKey {
            rank: b.predicted_iou,
            area: b.area as u64,
            point: b.source_point,
        })
    });
}

pub fn run_amg<S: Segmenter + ?Sized>(
    segmenter: &S,
    config: &AmgConfig,
) -> Result<Vec<MaskRecord>, AmgError> {
    run_amg_observed(segmenter, config, &mut |_: &AmgEvent| {})
}

pub fn run_amg_observed<S: Segmenter + ?Sized>(
    segmenter: &S,
    config: &AmgConfig,
    observer: &mut dyn AmgObserver,
) -> Result<Vec<MaskRecord>, AmgError> {
    config.validate()?;
    let (w, h) = segmenter.image_size();
    let crops = if config.crop_schedule_on {
        build_crop_schedule_with(w, h, config.crop_overlap_ratio).map_err(|source| {
            AmgError::Crop {
                stage: Stage::Schedule,
                source,
            }
        })?
    } else {
        vec![CropSpec::full_image(w, h)]
    };
    let image_area = w as u64 * h as u64;
    let per_crop: Vec<Result<(Vec<MaskRecord>, usize, usize), AmgError>> = crops
        .par_iter()
        .map(|crop| {
            let candidates = generate_candidates(segmenter, crop, config)?;
            let n_candidates = candidates.len();
            let mut filtered = filter_candidates(candidates, config, image_area);
            let n_filtered = filtered.len();
            for r in &mut filtered {
                r.soft = None;
            }
            Ok((nms(filtered, config.nms_thresh), n_candidates, n_filtered))
        })
        .collect();
    let mut merged = Vec::new();
    for (index, (result, crop)) in per_crop.into_iter().zip(&crops).enumerate() {
        let (kept, candidates, filtered) = result?;
        observer.on_event(&AmgEvent::CropDone {
            index,
            crop: *crop,
            candidates,
            filtered,
            kept: kept.len(),
        });
        merged.extend(kept);
    }
    let before = merged.len();
    for r in &mut merged {
        r.rank_key = cross_crop_rank(r);
    }
    let merged = if crops.len() > 1 {
        nms(merged, config.nms_thresh)
    } else {
        merged
    };
    observer.on_event(&AmgEvent::CrossCropNms {
        before,
        after: merged.len(),
    });
    let before = merged.len();
    let mut out: Vec<MaskRecord> = merged
        .into_par_iter()
        .filter_map(|r| postprocess(r, config))
        .collect();
    observer.on_event(&AmgEvent::Postprocessed {
        before,
        after: out.len(),
    });
    canonical_sort(&mut out);
    Ok(out)
}
