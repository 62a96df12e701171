//! Evaluation protocols over synthetic datasets: point-to-mask mIoU,
//! proposal recall, box-prompted instance masks and edge detection.

pub mod edges;
pub mod instance;
pub mod matching;
pub mod points;
pub mod proposals;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::mask::{distance_transform, BinaryMask, MaskError};
use crate::scene::SceneSpec;

pub use edges::{
    boundary_pixels, edge_metrics, edge_pipeline, gt_edge_map, match_edge_pixels, EdgeEvalConfig,
    EdgeMap, EdgeMetrics, EdgeOutput, PrPoint,
};
pub use instance::{eval_instance_seg, InstanceSegResult};
pub use matching::{greedy_matching, matched_count, priority_matching};
pub use points::{eval_point_to_mask, PointEvalConfig, PointEvalResult, PointSampler};
pub use proposals::{eval_proposals, Proposal, ProposalEvalConfig};

/// Metric name → value, ordered by name.
pub type MetricTable = BTreeMap<String, f64>;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dataset {dataset}, item {item}: {message}")]
    Item {
        dataset: String,
        item: usize,
        message: String,
    },
    #[error("invalid evaluation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalItem {
    pub scene: SceneSpec,
    pub gt_masks: Vec<BinaryMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalDataset {
    pub name: String,
    pub items: Vec<EvalItem>,
}

impl EvalDataset {
    /// One item per scene with every region as a ground-truth mask.
    pub fn from_scenes(name: impl Into<String>, scenes: Vec<SceneSpec>) -> Self {
        let items = scenes
            .into_iter()
            .map(|scene| EvalItem {
                gt_masks: scene.region_masks(),
                scene,
            })
            .collect();
        Self {
            name: name.into(),
            items,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        for (i, item) in self.items.iter().enumerate() {
            for m in &item.gt_masks {
                let bad = if m.dims() != (item.scene.width, item.scene.height) {
                    Some("ground-truth mask does not match the image size")
                } else if m.is_empty() {
                    Some("empty ground-truth mask")
                } else {
                    None
                };
                if let Some(message) = bad {
                    return Err(EvalError::Item {
                        dataset: self.name.clone(),
                        item: i,
                        message: message.into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn gt_count(&self) -> usize {
        self.items.iter().map(|i| i.gt_masks.len()).sum()
    }
}

/// Pixel with the largest distance to the background (image border counts
/// as background); the first in row-major order wins ties.
pub fn center_point(gt: &BinaryMask) -> Result<(u32, u32), MaskError> {
    if gt.is_empty() {
        return Err(MaskError::EmptyMask("center point of an empty mask"));
    }
    Ok(distance_transform(gt).argmax().expect("nonempty mask"))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_dataset: BTreeMap<String, MetricTable>,
    #[serde(rename = "macro")]
    pub macro_avg: MetricTable,
}

impl EvalReport {
    /// Builds the report; each macro entry is the plain mean over the
    /// datasets that report that metric.
    pub fn new(per_dataset: BTreeMap<String, MetricTable>) -> Self {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for table in per_dataset.values() {
            for (k, v) in table {
                let e = sums.entry(k.clone()).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        let macro_avg = sums
            .into_iter()
            .map(|(k, (s, n))| (k, s / n as f64))
            .collect();
        Self {
            per_dataset,
            macro_avg,
        }
    }

    pub fn to_text_table(&self) -> String {
        let metrics: Vec<&String> = self.macro_avg.keys().collect();
        let name_w = self
            .per_dataset
            .keys()
            .map(|k| k.len())
            .chain([7])
            .max()
            .unwrap_or(7);
        let col_w = metrics
            .iter()
            .map(|m| m.len())
            .chain([8])
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        let _ = write!(out, "{:<name_w$}", "dataset");
        for m in &metrics {
            let _ = write!(out, "  {m:>col_w$}");
        }
        out.push('\n');
        let rows = self
            .per_dataset
            .iter()
            .map(|(k, v)| (k.as_str(), v))
            .chain([("macro", &self.macro_avg)]);
        for (name, table) in rows {
            let _ = write!(out, "{name:<name_w$}");
            for m in &metrics {
                match table.get(*m) {
                    Some(v) => {
                        let _ = write!(out, "  {v:>col_w$.4}");
                    }
                    None => {
                        let _ = write!(out, "  {:>col_w$}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}
