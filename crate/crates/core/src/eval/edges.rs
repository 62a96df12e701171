//! Edge maps from segmenter output and boundary precision/recall metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::matching::{matched_count, priority_matching};
use super::EvalError;
use crate::amg::{generate_candidates, nms, AmgConfig};
use crate::crops::CropSpec;
use crate::mask::{fill_small_holes, sigmoid, BinaryMask, Connectivity};
use crate::scene::SceneSpec;
use crate::segmenter::Segmenter;

/// Points per side of the prompt grid.
pub const EDGE_GRID_SIDE: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMap {
    pub width: u32,
    pub height: u32,
    /// Row-major, in [0, 1].
    pub strength: Vec<f64>,
}

impl EdgeMap {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            strength: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self {
            width: mask.width(),
            height: mask.height(),
            strength: mask.bits().iter().map(|&b| b as u8 as f64).collect(),
        }
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.strength[(y * self.width + x) as usize]
    }

    pub fn max(&self) -> f64 {
        self.strength.iter().copied().fold(0.0, f64::max)
    }

    /// Pixels with strength at least `t`.
    pub fn binarize(&self, t: f64) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.get(x, y) >= t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeOutput {
    pub map: EdgeMap,
    pub prompts: usize,
    pub candidates: usize,
    /// Masks left after box NMS.
    pub kept: usize,
}

/// Mask pixels with a 4-neighbour inside the image that is not in the mask.
pub fn boundary_pixels(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        mask.get(x, y)
            && ((x > 0 && !mask.get(x - 1, y))
                || (x + 1 < w && !mask.get(x + 1, y))
                || (y > 0 && !mask.get(x, y - 1))
                || (y + 1 < h && !mask.get(x, y + 1)))
    })
}

/// Union of region outlines, the reference edges for a synthetic scene.
pub fn gt_edge_map(scene: &SceneSpec) -> BinaryMask {
    let mut bits = vec![false; scene.width as usize * scene.height as usize];
    for m in scene.region_masks() {
        for (x, y) in boundary_pixels(&m).pixels() {
            bits[(y * scene.width + x) as usize] = true;
        }
    }
    BinaryMask::from_bits(scene.width, scene.height, bits).expect("sized to the scene")
}

fn sobel(prob: &[f64], w: u32, h: u32, x: u32, y: u32) -> (f64, f64) {
    let at = |dx: i64, dy: i64| {
        let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as u32;
        let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as u32;
        prob[(yy * w + xx) as usize]
    };
    let gx = (at(1, -1) + 2.0 * at(1, 0) + at(1, 1)) - (at(-1, -1) + 2.0 * at(-1, 0) + at(-1, 1));
    let gy = (at(-1, 1) + 2.0 * at(0, 1) + at(1, 1)) - (at(-1, -1) + 2.0 * at(0, -1) + at(1, -1));
    (gx, gy)
}

/// Step towards the neighbour along the gradient, quantized to 45 degrees.
fn gradient_step(gx: f64, gy: f64) -> (i64, i64) {
    let angle = gy.atan2(gx).to_degrees().rem_euclid(180.0);
    if !(22.5..157.5).contains(&angle) {
        (1, 0)
    } else if angle < 67.5 {
        (1, 1)
    } else if angle < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

/// Edge detection by prompting: a 16×16 point grid, three masks per point,
/// box NMS without quality filters, Sobel magnitude of each kept mask's
/// probability map on its outer boundary, pixel-wise max, normalization to
/// [0, 1] and thinning across the gradient.
pub fn edge_pipeline<S: Segmenter + ?Sized>(
    segmenter: &S,
    nms_thresh: f64,
) -> Result<EdgeOutput, EvalError> {
    let (w, h) = segmenter.image_size();
    let crop = CropSpec {
        grid_side: EDGE_GRID_SIDE,
        ..CropSpec::full_image(w, h)
    };
    let records = generate_candidates(segmenter, &crop, &AmgConfig::default())
        .map_err(|e| EvalError::Invalid(e.to_string()))?;
    let candidates = records.len();
    let kept = nms(
        records.into_iter().filter(|r| r.area > 0).collect(),
        nms_thresh,
    );
    let n = w as usize * h as usize;
    let mut best = vec![0.0f64; n];
    let mut grad = vec![(0.0f64, 0.0f64); n];
    for r in &kept {
        let soft = r.soft.as_ref().expect("candidates keep their logits");
        let prob: Vec<f64> = soft.logits().iter().map(|&l| sigmoid(l as f64)).collect();
        let outline = boundary_pixels(&fill_small_holes(&r.mask, usize::MAX, Connectivity::Four));
        for (x, y) in outline.pixels() {
            let (gx, gy) = sobel(&prob, w, h, x, y);
            let mag = gx.hypot(gy);
            let i = (y * w + x) as usize;
            if mag > best[i] {
                best[i] = mag;
                grad[i] = (gx, gy);
            }
        }
    }
    let peak = best.iter().copied().fold(0.0, f64::max);
    let mut strength = vec![0.0; n];
    if peak > 0.0 {
        let norm: Vec<f64> = best.iter().map(|v| v / peak).collect();
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                if norm[i] == 0.0 {
                    continue;
                }
                let (sx, sy) = gradient_step(grad[i].0, grad[i].1);
                let neighbour = |s: i64| {
                    let (xx, yy) = (x as i64 + s * sx, y as i64 + s * sy);
                    if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                        0.0
                    } else {
                        norm[(yy as u32 * w + xx as u32) as usize]
                    }
                };
                if norm[i] >= neighbour(1) && norm[i] >= neighbour(-1) {
                    strength[i] = norm[i];
                }
            }
        }
    }
    Ok(EdgeOutput {
        map: EdgeMap {
            width: w,
            height: h,
            strength,
        },
        prompts: (EDGE_GRID_SIDE * EDGE_GRID_SIDE) as usize,
        candidates,
        kept: kept.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EdgeEvalConfig {
    /// Match radius as a fraction of the image diagonal.
    pub tolerance: f64,
    /// Number of evenly spaced thresholds in (0, 1).
    pub thresholds: usize,
}

impl Default for EdgeEvalConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.0075,
            thresholds: 99,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub ods: f64,
    pub ods_threshold: f64,
    pub ois: f64,
    pub ap: f64,
    pub r50: f64,
    pub curve: Vec<PrPoint>,
}

impl EdgeMetrics {
    pub fn table(&self) -> super::MetricTable {
        [
            ("edge_ods", self.ods),
            ("edge_ois", self.ois),
            ("edge_ap", self.ap),
            ("edge_r50", self.r50),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for p in &self.curve {
            let _ = writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    matched_pred: usize,
    pred: usize,
    matched_gt: usize,
    gt: usize,
}

impl Counts {
    fn add(&mut self, o: Counts) {
        self.matched_pred += o.matched_pred;
        self.pred += o.pred;
        self.matched_gt += o.matched_gt;
        self.gt += o.gt;
    }

    /// With nothing predicted, precision is 1 only if there was nothing to find.
    fn pr(&self) -> (f64, f64) {
        let r = if self.gt == 0 {
            1.0
        } else {
            self.matched_gt as f64 / self.gt as f64
        };
        let p = match (self.pred, self.gt) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            _ => self.matched_pred as f64 / self.pred as f64,
        };
        (p, r)
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Candidate pairs (pred index, gt index) within `radius`, nearest first,
/// then row-major on both sides.
fn candidate_pairs(pred: &[(u32, u32)], gt: &BinaryMask, radius: f64) -> Vec<(u64, usize, usize)> {
    let (w, h) = gt.dims();
    let mut gt_index = vec![usize::MAX; w as usize * h as usize];
    for (k, (x, y)) in gt.pixels().enumerate() {
        gt_index[(y * w + x) as usize] = k;
    }
    let reach = radius.floor() as i64;
    let r2 = radius * radius;
    let mut pairs = Vec::new();
    for (pi, &(px, py)) in pred.iter().enumerate() {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let d2 = (dx * dx + dy * dy) as u64;
                if d2 as f64 > r2 {
                    continue;
                }
                let (x, y) = (px as i64 + dx, py as i64 + dy);
                if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                    continue;
                }
                let gi = gt_index[(y as u32 * w + x as u32) as usize];
                if gi != usize::MAX {
                    pairs.push((d2, pi, gi));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// One-to-one correspondence between predicted and reference edge pixels
/// within `radius`; returns the number of matched pairs.
pub fn match_edge_pixels(pred: &BinaryMask, gt: &BinaryMask, radius: f64) -> usize {
    let pred_px: Vec<(u32, u32)> = pred.pixels().collect();
    let pairs: Vec<(usize, usize)> = candidate_pairs(&pred_px, gt, radius)
        .into_iter()
        .map(|(_, p, g)| (p, g))
        .collect();
    matched_count(&priority_matching(pred_px.len(), gt.area(), &pairs))
}

/// Per-threshold counts for one image against all of its annotations.
fn image_counts(
    pred: &EdgeMap,
    gts: &[BinaryMask],
    thresholds: &[f64],
    radius: f64,
) -> Vec<Counts> {
    let mut pred_px: Vec<(u32, u32)> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for y in 0..pred.height {
        for x in 0..pred.width {
            let v = pred.get(x, y);
            if v > 0.0 {
                pred_px.push((x, y));
                values.push(v);
            }
        }
    }
    let all_pairs: Vec<Vec<(u64, usize, usize)>> = gts
        .iter()
        .map(|g| candidate_pairs(&pred_px, g, radius))
        .collect();
    thresholds
        .iter()
        .map(|&t| {
            let active = values.iter().filter(|&&v| v >= t).count();
            let mut matched_any = vec![false; pred_px.len()];
            let mut c = Counts {
                pred: active,
                ..Default::default()
            };
            for (g, pairs) in gts.iter().zip(&all_pairs) {
                let pairs: Vec<(usize, usize)> = pairs
                    .iter()
                    .filter(|&&(_, p, _)| values[p] >= t)
                    .map(|&(_, p, g)| (p, g))
                    .collect();
                let m = priority_matching(pred_px.len(), g.area(), &pairs);
                for (p, partner) in m.iter().enumerate() {
                    if partner.is_some() {
                        matched_any[p] = true;
                    }
                }
                c.matched_gt += matched_count(&m);
                c.gt += g.area();
            }
            c.matched_pred = matched_any.iter().filter(|&&b| b).count();
            c
        })
        .collect()
}

/// ODS, OIS, AP and R50 of `preds` against one or more reference edge maps per image.
pub fn edge_metrics(
    preds: &[EdgeMap],
    gts: &[Vec<BinaryMask>],
    config: &EdgeEvalConfig,
) -> Result<EdgeMetrics, EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::Invalid(format!(
            "{} predictions for {} images",
            preds.len(),
            gts.len()
        )));
    }
    if !(config.tolerance > 0.0) || config.thresholds == 0 {
        return Err(EvalError::Invalid(
            "tolerance and threshold count must be positive".into(),
        ));
    }
    let thresholds: Vec<f64> = (1..=config.thresholds)
        .map(|i| i as f64 / (config.thresholds + 1) as f64)
        .collect();
    let mut dataset = vec![Counts::default(); thresholds.len()];
    let mut best_per_image = Vec::with_capacity(preds.len());
    for (i, (pred, annotations)) in preds.iter().zip(gts).enumerate() {
        if annotations
            .iter()
            .any(|g| g.dims() != (pred.width, pred.height))
        {
            return Err(EvalError::Item {
                dataset: "edges".into(),
                item: i,
                message: "annotation size mismatch".into(),
            });
        }
        let radius =
            config.tolerance * ((pred.width as f64).powi(2) + (pred.height as f64).powi(2)).sqrt();
        let counts = image_counts(pred, annotations, &thresholds, radius);
        let mut best = 0.0f64;
        for (acc, c) in dataset.iter_mut().zip(&counts) {
            acc.add(*c);
            let (p, r) = c.pr();
            best = best.max(f1(p, r));
        }
        best_per_image.push(best);
    }
    let curve: Vec<PrPoint> = thresholds
        .iter()
        .zip(&dataset)
        .map(|(&threshold, c)| {
            let (precision, recall) = c.pr();
            PrPoint {
                threshold,
                precision,
                recall,
                f1: f1(precision, recall),
            }
        })
        .collect();
    let (ods, ods_threshold) = curve.iter().fold((0.0, thresholds[0]), |acc, p| {
        if p.f1 > acc.0 {
            (p.f1, p.threshold)
        } else {
            acc
        }
    });
    let ois = super::mean(&best_per_image);
    // 101-point interpolated precision
    let ap = (0..=100)
        .map(|i| {
            let r = i as f64 / 100.0;
            curve
                .iter()
                .filter(|p| p.recall >= r)
                .map(|p| p.precision)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 101.0;
    let r50 = curve
        .iter()
        .filter(|p| p.precision >= 0.5)
        .map(|p| p.recall)
        .fold(0.0, f64::max);
    Ok(EdgeMetrics {
        ods,
        ods_threshold,
        ois,
        ap,
        r50,
        curve,
    })
}
