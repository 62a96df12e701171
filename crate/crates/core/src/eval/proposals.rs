use serde::{Deserialize, Serialize};

use super::matching::priority_matching;
use super::{EvalDataset, EvalError, MetricTable};
use crate::amg::MaskRecord;
use crate::mask::{iou, BinaryMask};

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub mask: BinaryMask,
    pub predicted_iou: f64,
    pub stability: f64,
}

impl Proposal {
    pub fn score(&self) -> f64 {
        (self.predicted_iou + self.stability) / 2.0
    }
}

impl From<&MaskRecord> for Proposal {
    fn from(r: &MaskRecord) -> Self {
        Self {
            mask: r.mask.clone(),
            predicted_iou: r.predicted_iou,
            stability: r.stability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalEvalConfig {
    pub k: usize,
    /// Upper area bounds (exclusive) of the small and medium strata.
    pub small_max_area: u64,
    pub medium_max_area: u64,
}

impl Default for ProposalEvalConfig {
    fn default() -> Self {
        Self {
            k: 1000,
            small_max_area: 32 * 32,
            medium_max_area: 96 * 96,
        }
    }
}

pub const IOU_THRESHOLDS: [f64; 10] = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95];

/// Matches per IoU threshold for one image: `matched[t][g]` is whether gt `g`
/// found a partner at threshold `IOU_THRESHOLDS[t]`.
fn match_image(proposals: &[&Proposal], gts: &[BinaryMask]) -> Result<Vec<Vec<bool>>, EvalError> {
    let mut ious = Vec::with_capacity(proposals.len() * gts.len());
    for (p_idx, p) in proposals.iter().enumerate() {
        for (g_idx, g) in gts.iter().enumerate() {
            let v = iou(&p.mask, g)?;
            if v >= IOU_THRESHOLDS[0] {
                ious.push((v, p_idx, g_idx));
            }
        }
    }
    // descending IoU, then proposal rank, then gt index
    ious.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    Ok(IOU_THRESHOLDS
        .iter()
        .map(|&t| {
            let pairs: Vec<(usize, usize)> = ious
                .iter()
                .filter(|e| e.0 >= t)
                .map(|e| (e.2, e.1))
                .collect();
            let m = priority_matching(gts.len(), proposals.len(), &pairs);
            m.iter().map(Option::is_some).collect()
        })
        .collect())
}

/// Average recall over IoU thresholds 0.5:0.05:0.95 using the top `k`
/// proposals per image ranked by the mean of predicted IoU and stability.
/// Recall pools matched ground truths over the whole dataset; strata are
/// reported only when they hold at least one ground-truth mask.
pub fn eval_proposals(
    proposals: &[Vec<Proposal>],
    dataset: &EvalDataset,
    config: &ProposalEvalConfig,
) -> Result<MetricTable, EvalError> {
    if proposals.len() != dataset.items.len() {
        return Err(EvalError::Invalid(format!(
            "{} proposal lists for {} images",
            proposals.len(),
            dataset.items.len()
        )));
    }
    dataset.validate()?;
    // [overall, small, medium, large] × threshold
    let mut hits = [[0usize; 10]; 4];
    let mut totals = [0usize; 4];
    for (item_idx, (props, item)) in proposals.iter().zip(&dataset.items).enumerate() {
        if let Some(p) = props
            .iter()
            .find(|p| p.mask.dims() != (item.scene.width, item.scene.height))
        {
            return Err(EvalError::Item {
                dataset: dataset.name.clone(),
                item: item_idx,
                message: format!(
                    "proposal of size {:?} in a {}x{} image",
                    p.mask.dims(),
                    item.scene.width,
                    item.scene.height
                ),
            });
        }
        let mut ranked: Vec<&Proposal> = props.iter().collect();
        ranked.sort_by(|a, b| b.score().total_cmp(&a.score()));
        ranked.truncate(config.k);
        let matched = match_image(&ranked, &item.gt_masks)?;
        for (g_idx, g) in item.gt_masks.iter().enumerate() {
            let area = g.area() as u64;
            let stratum = if area < config.small_max_area {
                1
            } else if area < config.medium_max_area {
                2
            } else {
                3
            };
            for s in [0, stratum] {
                totals[s] += 1;
                for (t, row) in matched.iter().enumerate() {
                    hits[s][t] += row[g_idx] as usize;
                }
            }
        }
    }
    let mut table = MetricTable::new();
    let names = ["", "_small", "_medium", "_large"];
    for s in 0..4 {
        if totals[s] == 0 && s > 0 {
            continue;
        }
        let ar = if totals[s] == 0 {
            0.0
        } else {
            hits[s]
                .iter()
                .map(|&h| h as f64 / totals[s] as f64)
                .sum::<f64>()
                / IOU_THRESHOLDS.len() as f64
        };
        table.insert(format!("ar@{}{}", config.k, names[s]), ar);
    }
    Ok(table)
}
