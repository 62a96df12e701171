//! Greedy box non-maximum suppression with a total, deterministic ranking.

use std::cmp::Ordering;

use crate::mask::BBox;

/// Ranking key: higher `rank` first, then larger `area`, then the source
/// point in row-major order (`y`, then `x`), then input position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsKey {
    pub rank: f64,
    pub area: u64,
    pub point: (f64, f64),
}

impl NmsKey {
    pub fn cmp_priority(&self, other: &NmsKey) -> Ordering {
        other
            .rank
            .total_cmp(&self.rank)
            .then(other.area.cmp(&self.area))
            .then(self.point.1.total_cmp(&other.point.1))
            .then(self.point.0.total_cmp(&other.point.0))
    }
}

/// Indices of `keys` from highest to lowest priority; equal keys keep input order.
pub fn priority_order(keys: &[NmsKey]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp_priority(&keys[b]));
    order
}

/// Keeps the best remaining box and discards every box whose IoU with it
/// exceeds `thresh`, until none remain. Returns kept indices in priority order.
pub fn greedy_nms(boxes: &[BBox], keys: &[NmsKey], thresh: f64) -> Vec<usize> {
    assert_eq!(boxes.len(), keys.len(), "one key per box");
    let mut kept: Vec<usize> = Vec::new();
    for i in priority_order(keys) {
        if kept.iter().all(|&k| boxes[k].iou(&boxes[i]) <= thresh) {
            kept.push(i);
        }
    }
    kept
}
