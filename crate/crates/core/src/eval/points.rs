use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{center_point, mean, EvalDataset, EvalError, MetricTable};
use crate::mask::{iou, BinaryMask};
use crate::rng::{derive_seed, rng_from};
use crate::scene::SceneSpec;
use crate::segmenter::{PointLabel, Prompt, PromptPoint, Segmenter};
use crate::sim::{run_rounds, CorrectionMode, RoundKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointSampler {
    #[default]
    Center,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PointEvalConfig {
    pub report_at: Vec<usize>,
    pub sampler: PointSampler,
    pub seed: u64,
}

impl Default for PointEvalConfig {
    fn default() -> Self {
        Self {
            report_at: vec![1, 2, 3, 5, 9],
            sampler: PointSampler::Center,
            seed: 0,
        }
    }
}

/// Per-object IoU after each point, plus the best-of-outputs IoU for the
/// first point.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointEvalResult {
    pub ious: Vec<Vec<f64>>,
    pub oracle_first: Vec<f64>,
}

impl PointEvalResult {
    pub fn miou_at(&self, n: usize) -> f64 {
        let vals: Vec<f64> = self.ious.iter().map(|v| v[n - 1]).collect();
        mean(&vals)
    }

    pub fn oracle_miou_at1(&self) -> f64 {
        mean(&self.oracle_first)
    }

    pub fn table(&self, report_at: &[usize]) -> MetricTable {
        let mut t: MetricTable = report_at
            .iter()
            .map(|&n| (format!("miou@{n}"), self.miou_at(n)))
            .collect();
        t.insert("oracle_miou@1".into(), self.oracle_miou_at1());
        t
    }
}

fn first_point(
    gt: &BinaryMask,
    sampler: PointSampler,
    seed: u64,
) -> Result<PromptPoint, EvalError> {
    let (x, y) = match sampler {
        PointSampler::Center => center_point(gt)?,
        PointSampler::Random => {
            use rand::seq::IteratorRandom;
            let mut rng = rng_from(seed);
            gt.pixels().choose(&mut rng).expect("validated nonempty")
        }
    };
    Ok(PromptPoint::at_pixel(x, y, PointLabel::Foreground))
}

/// Single-point-to-mask protocol: a first point from `sampler`, then each
/// further point placed farthest inside the current error region.
pub fn eval_point_to_mask<S, F>(
    factory: F,
    dataset: &EvalDataset,
    config: &PointEvalConfig,
) -> Result<PointEvalResult, EvalError>
where
    S: Segmenter,
    F: Fn(&SceneSpec) -> S + Sync,
{
    dataset.validate()?;
    let max_points = config.report_at.iter().copied().max().unwrap_or(1);
    if config.report_at.contains(&0) {
        return Err(EvalError::Invalid("point counts start at 1".into()));
    }
    let mut kinds = vec![RoundKind::Initial];
    kinds.resize(max_points, RoundKind::Correction);
    let per_item: Vec<Result<Vec<(Vec<f64>, f64)>, EvalError>> = dataset
        .items
        .par_iter()
        .enumerate()
        .map(|(item_idx, item)| {
            let segmenter = factory(&item.scene);
            let view = segmenter.full_view();
            let item_err = |message: String| EvalError::Item {
                dataset: dataset.name.clone(),
                item: item_idx,
                message,
            };
            item.gt_masks
                .iter()
                .enumerate()
                .map(|(gt_idx, gt)| {
                    let seed = derive_seed(config.seed, &[item_idx as u64, gt_idx as u64]);
                    let p = first_point(gt, config.sampler, seed)?;
                    let trace = run_rounds(
                        &segmenter,
                        gt,
                        Prompt::point(p),
                        &kinds,
                        CorrectionMode::Farthest,
                        &mut rng_from(seed),
                    )
                    .map_err(|e| item_err(e.to_string()))?;
                    let out = segmenter
                        .segment(view, &Prompt::point(p), segmenter.supports_multimask())
                        .map_err(|e| item_err(e.to_string()))?;
                    let mut best = 0.0f64;
                    for m in &out.masks {
                        best = best.max(iou(&m.binarize(), gt)?);
                    }
                    Ok((trace.rounds.iter().map(|r| r.iou_after).collect(), best))
                })
                .collect()
        })
        .collect();
    let mut result = PointEvalResult::default();
    for item in per_item {
        for (ious, best) in item? {
            result.ious.push(ious);
            result.oracle_first.push(best);
        }
    }
    Ok(result)
}
