use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{OracleSegmenter, PointLabel, Prompt, SegmentError, Segmenter, SegmenterOutput};
use crate::mask::{iou, BBox, SoftMask};
use crate::rng::{rng_from, SeedHasher};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Standard deviation of the boundary displacement, in pixels, for a
    /// single-element prompt.
    pub boundary_std: f64,
    /// Standard deviation of the Gaussian added to the true IoU.
    pub iou_std: f64,
    /// Spacing of the random lattice the displacement field is interpolated from.
    pub cell: u32,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            boundary_std: 2.0,
            iou_std: 0.05,
            cell: 8,
            seed: 0,
        }
    }
}

/// Oracle with a perturbed boundary and an imperfect confidence estimate.
///
/// Each returned mask's signed distance is displaced by a smooth random
/// field. The displacement shrinks as `1/sqrt(k)` for a prompt with `k`
/// elements, so extra points, a box, or a prior mask all help.
/// `predicted_iou` is the true IoU against the clean mask plus Gaussian
/// noise, clamped to [0, 1].
pub struct NoisySegmenter {
    oracle: OracleSegmenter,
    noise: NoiseConfig,
}

impl NoisySegmenter {
    pub fn new(oracle: OracleSegmenter, noise: NoiseConfig) -> Self {
        Self { oracle, noise }
    }

    pub fn oracle(&self) -> &OracleSegmenter {
        &self.oracle
    }

    fn prompt_seed(&self, view: BBox, prompt: &Prompt, multimask: bool) -> u64 {
        let mut h = SeedHasher::new(self.noise.seed);
        h.write_u64(view.x as u64)
            .write_u64(view.y as u64)
            .write_u64(view.w as u64)
            .write_u64(view.h as u64);
        h.write_u64(multimask as u64);
        for p in &prompt.points {
            h.write_f64(p.x)
                .write_f64(p.y)
                .write_u64((p.label == PointLabel::Foreground) as u64);
        }
        if let Some(b) = &prompt.bbox {
            h.write_f64(b.x0)
                .write_f64(b.y0)
                .write_f64(b.x1)
                .write_f64(b.y1);
        }
        if let Some(m) = &prompt.prior_mask {
            h.write_u64(m.binarize().area() as u64);
            for l in m.logits().iter().step_by(61) {
                h.write_u64(l.to_bits() as u64);
            }
        }
        h.finish()
    }
}

/// Zero-mean, unit-variance field from bilinear interpolation of an iid
/// Gaussian lattice, renormalized per pixel.
fn smooth_field(width: u32, height: u32, cell: u32, rng: &mut impl Rng) -> Vec<f32> {
    let cell = cell.max(1) as f64;
    let gx = (width as f64 / cell).ceil() as usize + 2;
    let gy = (height as f64 / cell).ceil() as usize + 2;
    let nodes: Vec<f64> = (0..gx * gy).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        let v = (y as f64 + 0.5) / cell;
        let (j, ty) = (v.floor() as usize, v.fract());
        for x in 0..width {
            let u = (x as f64 + 0.5) / cell;
            let (i, tx) = (u.floor() as usize, u.fract());
            let w = [
                (1.0 - tx) * (1.0 - ty),
                tx * (1.0 - ty),
                (1.0 - tx) * ty,
                tx * ty,
            ];
            let n = [
                nodes[j * gx + i],
                nodes[j * gx + i + 1],
                nodes[(j + 1) * gx + i],
                nodes[(j + 1) * gx + i + 1],
            ];
            let val: f64 = w.iter().zip(n).map(|(a, b)| a * b).sum();
            let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
            out.push((val / norm) as f32);
        }
    }
    out
}

impl Segmenter for NoisySegmenter {
    fn image_size(&self) -> (u32, u32) {
        self.oracle.image_size()
    }

    fn segment(
        &self,
        view: BBox,
        prompt: &Prompt,
        multimask: bool,
    ) -> Result<SegmenterOutput, SegmentError> {
        let clean = self.oracle.segment(view, prompt, multimask)?;
        if self.noise.boundary_std == 0.0 && self.noise.iou_std == 0.0 {
            return Ok(clean);
        }
        let mut rng = rng_from(self.prompt_seed(view, prompt, multimask));
        let k = prompt.element_count().max(1) as f64;
        let shift = self.oracle.alpha() * (self.noise.boundary_std / k.sqrt()) as f32;
        let iou_noise = Normal::new(0.0, self.noise.iou_std.max(0.0)).expect("finite std");
        let mut masks = Vec::with_capacity(clean.masks.len());
        let mut predicted_ious = Vec::with_capacity(clean.masks.len());
        for (soft, &score) in clean.masks.iter().zip(&clean.predicted_ious) {
            if score == 0.0 {
                masks.push(soft.clone());
                predicted_ious.push(score);
                continue;
            }
            let noisy = if shift > 0.0 {
                let field = smooth_field(view.w, view.h, self.noise.cell, &mut rng);
                let logits = soft
                    .logits()
                    .iter()
                    .zip(field)
                    .map(|(l, n)| l + shift * n)
                    .collect();
                SoftMask::from_logits(view.w, view.h, logits)?
            } else {
                soft.clone()
            };
            let true_iou = iou(&noisy.binarize(), &soft.binarize())?;
            predicted_ious.push((true_iou + iou_noise.sample(&mut rng)).clamp(0.0, 1.0));
            masks.push(noisy);
        }
        Ok(SegmenterOutput {
            masks,
            predicted_ious,
        })
    }
}
