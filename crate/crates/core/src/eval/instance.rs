use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean, EvalDataset, EvalError, MetricTable};
use crate::mask::{iou, BBox};
use crate::scene::SceneSpec;
use crate::segmenter::{BoxPrompt, Prompt, Segmenter};

/// Per-object IoU of the box-prompted mask before and after one refinement round.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceSegResult {
    pub unrefined: Vec<f64>,
    pub refined: Vec<f64>,
}

impl InstanceSegResult {
    pub fn table(&self) -> MetricTable {
        [
            ("miou_box".to_string(), mean(&self.unrefined)),
            ("miou_box_refined".to_string(), mean(&self.refined)),
        ]
        .into_iter()
        .collect()
    }
}

/// Box-prompted masks: the most confident multimask output, then one more
/// single-mask query with the same box and that mask's logits.
///
/// `boxes[i][j]` prompts object `j` of item `i`; `None` uses the ground-truth
/// bounding boxes.
pub fn eval_instance_seg<S, F>(
    factory: F,
    dataset: &EvalDataset,
    boxes: Option<&[Vec<BBox>]>,
) -> Result<InstanceSegResult, EvalError>
where
    S: Segmenter,
    F: Fn(&SceneSpec) -> S + Sync,
{
    dataset.validate()?;
    if let Some(b) = boxes {
        let shape_ok = b.len() == dataset.items.len()
            && b.iter()
                .zip(&dataset.items)
                .all(|(b, i)| b.len() == i.gt_masks.len());
        if !shape_ok {
            return Err(EvalError::Invalid(
                "need exactly one box per ground-truth instance".into(),
            ));
        }
    }
    let per_item: Vec<Result<Vec<(f64, f64)>, EvalError>> = dataset
        .items
        .par_iter()
        .enumerate()
        .map(|(item_idx, item)| {
            let segmenter = factory(&item.scene);
            let view = segmenter.full_view();
            let item_err = |e: &dyn std::fmt::Display| EvalError::Item {
                dataset: dataset.name.clone(),
                item: item_idx,
                message: e.to_string(),
            };
            item.gt_masks
                .iter()
                .enumerate()
                .map(|(j, gt)| {
                    let bbox = match boxes {
                        Some(b) => b[item_idx][j],
                        None => gt.bbox().expect("validated nonempty"),
                    };
                    let mut prompt = Prompt::boxed(BoxPrompt::from_bbox(bbox));
                    let first = segmenter
                        .segment(view, &prompt, segmenter.supports_multimask())
                        .map_err(|e| item_err(&e))?;
                    first.validate(view.w, view.h).map_err(|e| item_err(&e))?;
                    let chosen = first.masks[first.most_confident()].clone();
                    let unrefined = iou(&chosen.binarize(), gt)?;
                    prompt.prior_mask = Some(chosen);
                    let second = segmenter
                        .segment(view, &prompt, false)
                        .map_err(|e| item_err(&e))?;
                    second.validate(view.w, view.h).map_err(|e| item_err(&e))?;
                    let refined = iou(&second.masks[second.most_confident()].binarize(), gt)?;
                    Ok((unrefined, refined))
                })
                .collect()
        })
        .collect();
    let mut result = InstanceSegResult::default();
    for item in per_item {
        for (u, r) in item? {
            result.unrefined.push(u);
            result.refined.push(r);
        }
    }
    Ok(result)
}
