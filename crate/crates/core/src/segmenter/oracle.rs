use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::{check_view, PointLabel, Prompt, SegmentError, Segmenter, SegmenterOutput};
use crate::mask::{distance_transform_unbounded, iou, BBox, BinaryMask, SoftMask};
use crate::scene::SceneSpec;

/// Order of the three masks returned for an ambiguous point. All oracle
/// masks carry the same confidence, so the first one is "most confident".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainOrder {
    #[default]
    DeepestFirst,
    WholeFirst,
}

const EMPTY_REGION: usize = usize::MAX;

#[derive(Clone)]
struct RegionView {
    soft: SoftMask,
    mask: BinaryMask,
}

/// Exact segmenter over a synthetic scene.
///
/// Logits are `alpha` times the signed Euclidean distance (in pixels) from
/// each pixel center to the region outline, positive inside. The outline sits
/// half a pixel outside the outermost region pixels, so every region pixel has
/// a logit of at least `alpha / 2`.
pub struct OracleSegmenter {
    scene: SceneSpec,
    alpha: f32,
    order: ChainOrder,
    masks: Vec<BinaryMask>,
    fields: Vec<OnceLock<SoftMask>>,
    views: Mutex<HashMap<(usize, BBox), RegionView>>,
}

impl OracleSegmenter {
    pub const DEFAULT_ALPHA: f32 = 4.0;

    pub fn new(scene: SceneSpec) -> Self {
        let masks = scene.region_masks();
        let fields = (0..masks.len()).map(|_| OnceLock::new()).collect();
        Self {
            scene,
            alpha: Self::DEFAULT_ALPHA,
            order: ChainOrder::default(),
            masks,
            fields,
            views: Mutex::default(),
        }
    }

    pub fn with_alpha(mut self, alpha: f32) -> Self {
        self.alpha = alpha;
        self.views = Mutex::default();
        self.fields = (0..self.masks.len()).map(|_| OnceLock::new()).collect();
        self
    }

    pub fn with_order(mut self, order: ChainOrder) -> Self {
        self.order = order;
        self
    }

    pub fn scene(&self) -> &SceneSpec {
        &self.scene
    }

    pub fn alpha(&self) -> f32 {
        self.alpha
    }

    pub fn region_masks(&self) -> &[BinaryMask] {
        &self.masks
    }

    fn field(&self, region: usize) -> &SoftMask {
        self.fields[region].get_or_init(|| {
            let mask = &self.masks[region];
            let cap = (self.scene.width + self.scene.height) as f64;
            let inside = distance_transform_unbounded(mask);
            let outside = distance_transform_unbounded(&mask.invert());
            let logits = mask
                .bits()
                .iter()
                .enumerate()
                .map(|(i, &b)| {
                    let sd = if b {
                        inside.values[i].min(cap) - 0.5
                    } else {
                        -(outside.values[i].min(cap) - 0.5)
                    };
                    self.alpha * sd as f32
                })
                .collect();
            SoftMask::from_logits(self.scene.width, self.scene.height, logits)
                .expect("field matches scene size")
        })
    }

    fn region_view(&self, region: usize, view: BBox) -> RegionView {
        if let Some(v) = self.views.lock().unwrap().get(&(region, view)) {
            return v.clone();
        }
        let v = if region == EMPTY_REGION {
            let floor = -self.alpha * (self.scene.width + self.scene.height) as f32;
            RegionView {
                soft: SoftMask::constant(view.w, view.h, floor),
                mask: BinaryMask::empty(view.w, view.h),
            }
        } else {
            let soft = self
                .field(region)
                .crop(view)
                .expect("view checked against image");
            let mask = self.masks[region]
                .crop(view)
                .expect("view checked against image");
            RegionView { soft, mask }
        };
        self.views
            .lock()
            .unwrap()
            .entry((region, view))
            .or_insert(v)
            .clone()
    }

    /// Regions containing the pixel, deepest first.
    fn chain_at(&self, x: u32, y: u32) -> Vec<usize> {
        let mut chain: Vec<usize> = (0..self.masks.len())
            .filter(|&i| self.masks[i].get(x, y))
            .collect();
        chain.sort_by_key(|&i| std::cmp::Reverse(self.scene.regions[i].depth));
        chain
    }

    fn depth_preference(&self, region: usize) -> i32 {
        let d = self.scene.regions[region].depth as i32;
        match self.order {
            ChainOrder::DeepestFirst => d,
            ChainOrder::WholeFirst => -d,
        }
    }

    /// Region most consistent with a general prompt: maximize the number of
    /// correctly placed points, then box IoU, then prior-mask IoU.
    fn best_region(&self, view: BBox, prompt: &Prompt) -> Option<usize> {
        let prior = prompt.prior_mask.as_ref().map(|m| m.binarize());
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for region in 0..self.masks.len() {
            let rb = self.masks[region].bbox_or_empty();
            if rb.intersection(&view) == 0 {
                continue;
            }
            let rv = self.region_view(region, view);
            let Some(clipped_box) = rv.mask.bbox() else {
                continue;
            };
            let mut fg_hits = 0;
            let mut consistent = 0;
            for p in &prompt.points {
                let (px, py) = p.pixel();
                let inside = rv.mask.get(px, py);
                match p.label {
                    PointLabel::Foreground if inside => {
                        fg_hits += 1;
                        consistent += 1;
                    }
                    PointLabel::Background if !inside => consistent += 1,
                    _ => {}
                }
            }
            let box_iou = prompt.bbox.map_or(0.0, |b| b.iou_with_bbox(clipped_box));
            let prior_iou = prior
                .as_ref()
                .map_or(0.0, |m| iou(m, &rv.mask).unwrap_or(0.0));
            if fg_hits == 0 && box_iou == 0.0 && prior_iou == 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bc, bbox_iou, bprior)) => consistent
                    .cmp(&bc)
                    .then(box_iou.total_cmp(&bbox_iou))
                    .then(prior_iou.total_cmp(&bprior))
                    .then(self.depth_preference(region).cmp(&self.depth_preference(b)))
                    .is_gt(),
            };
            if better {
                best = Some((region, consistent, box_iou, prior_iou));
            }
        }
        best.map(|b| b.0)
    }

    fn output(&self, view: BBox, regions: &[usize]) -> SegmenterOutput {
        let masks = regions
            .iter()
            .map(|&r| self.region_view(r, view).soft)
            .collect();
        let score = if regions.first() == Some(&EMPTY_REGION) {
            0.0
        } else {
            1.0
        };
        SegmenterOutput {
            masks,
            predicted_ious: vec![score; regions.len()],
        }
    }
}

impl Segmenter for OracleSegmenter {
    fn image_size(&self) -> (u32, u32) {
        (self.scene.width, self.scene.height)
    }

    fn segment(
        &self,
        view: BBox,
        prompt: &Prompt,
        multimask: bool,
    ) -> Result<SegmenterOutput, SegmentError> {
        check_view(view, self.scene.width, self.scene.height)?;
        prompt.validate(view.w, view.h)?;
        let n_out = if multimask { 3 } else { 1 };
        let selected: Vec<usize> = if prompt.is_single_foreground_point() {
            let (px, py) = prompt.points[0].pixel();
            let chain = self.chain_at(view.x + px, view.y + py);
            if chain.is_empty() {
                vec![EMPTY_REGION; n_out]
            } else {
                let mut padded = chain.clone();
                while padded.len() < 3 {
                    padded.insert(0, chain[0]);
                }
                if self.order == ChainOrder::WholeFirst {
                    padded.reverse();
                }
                padded.truncate(n_out);
                padded
            }
        } else {
            vec![self.best_region(view, prompt).unwrap_or(EMPTY_REGION); n_out]
        };
        Ok(self.output(view, &selected))
    }
}
