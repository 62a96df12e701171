//! The promptable-segmenter contract and the analytic stand-ins used to
//! drive the pipeline without a learned model.

mod noisy;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::mask::{BBox, MaskError, SoftMask};

pub use noisy::{NoiseConfig, NoisySegmenter};
pub use oracle::{ChainOrder, OracleSegmenter};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SegmentError {
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
    #[error("view {view:?} outside {width}x{height} image")]
    InvalidView { view: BBox, width: u32, height: u32 },
    #[error("segmenter does not support multimask output")]
    MultimaskUnsupported,
    #[error(transparent)]
    Mask(#[from] MaskError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointLabel {
    Foreground,
    Background,
}

/// Point prompt in continuous pixel coordinates: pixel `(i, j)` covers
/// `[i, i+1) × [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromptPoint {
    pub x: f64,
    pub y: f64,
    pub label: PointLabel,
}

impl PromptPoint {
    pub fn foreground(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            label: PointLabel::Foreground,
        }
    }

    pub fn background(x: f64, y: f64) -> Self {
        Self {
            x,
            y,
            label: PointLabel::Background,
        }
    }

    /// Point at the center of pixel `(px, py)`.
    pub fn at_pixel(px: u32, py: u32, label: PointLabel) -> Self {
        Self {
            x: px as f64 + 0.5,
            y: py as f64 + 0.5,
            label,
        }
    }

    pub fn pixel(&self) -> (u32, u32) {
        (
            self.x.floor().max(0.0) as u32,
            self.y.floor().max(0.0) as u32,
        )
    }
}

/// Box prompt with continuous corners, `x0 <= x1`, `y0 <= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxPrompt {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoxPrompt {
    pub fn from_bbox(b: BBox) -> Self {
        Self {
            x0: b.x as f64,
            y0: b.y as f64,
            x1: b.x1() as f64,
            y1: b.y1() as f64,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn iou_with_bbox(&self, b: BBox) -> f64 {
        let other = BoxPrompt::from_bbox(b);
        let iw = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let ih = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptKind {
    PointSet,
    Box,
    Mask,
    Combined,
}

/// Any combination of points, one box and a prior mask (the logits of a
/// previous prediction). Coordinates are relative to the queried view.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prompt {
    pub points: Vec<PromptPoint>,
    pub bbox: Option<BoxPrompt>,
    pub prior_mask: Option<SoftMask>,
}

impl Prompt {
    pub fn point(p: PromptPoint) -> Self {
        Self {
            points: vec![p],
            ..Default::default()
        }
    }

    pub fn boxed(b: BoxPrompt) -> Self {
        Self {
            bbox: Some(b),
            ..Default::default()
        }
    }

    pub fn kind(&self) -> Option<PromptKind> {
        match (
            !self.points.is_empty(),
            self.bbox.is_some(),
            self.prior_mask.is_some(),
        ) {
            (false, false, false) => None,
            (true, false, false) => Some(PromptKind::PointSet),
            (false, true, false) => Some(PromptKind::Box),
            (false, false, true) => Some(PromptKind::Mask),
            _ => Some(PromptKind::Combined),
        }
    }

    /// Number of prompt elements: each point, the box and the prior mask count once.
    pub fn element_count(&self) -> usize {
        self.points.len() + self.bbox.is_some() as usize + self.prior_mask.is_some() as usize
    }

    pub fn is_single_foreground_point(&self) -> bool {
        self.bbox.is_none()
            && self.prior_mask.is_none()
            && self.points.len() == 1
            && self.points[0].label == PointLabel::Foreground
    }

    pub fn validate(&self, width: u32, height: u32) -> Result<(), SegmentError> {
        if self.kind().is_none() {
            return Err(SegmentError::InvalidPrompt("empty prompt".into()));
        }
        for p in &self.points {
            if !(p.x >= 0.0 && p.y >= 0.0 && p.x < width as f64 && p.y < height as f64) {
                return Err(SegmentError::InvalidPrompt(format!(
                    "point ({}, {}) outside {width}x{height}",
                    p.x, p.y
                )));
            }
        }
        if let Some(b) = &self.bbox {
            if !(b.x0 <= b.x1 && b.y0 <= b.y1)
                || [b.x0, b.y0, b.x1, b.y1].iter().any(|v| !v.is_finite())
            {
                return Err(SegmentError::InvalidPrompt(format!("malformed box {b:?}")));
            }
        }
        if let Some(m) = &self.prior_mask {
            if m.dims() != (width, height) {
                return Err(SegmentError::InvalidPrompt(format!(
                    "prior mask is {:?}, view is {width}x{height}",
                    m.dims()
                )));
            }
        }
        Ok(())
    }
}

/// One or three soft masks with a confidence (estimated IoU) for each.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterOutput {
    pub masks: Vec<SoftMask>,
    pub predicted_ious: Vec<f64>,
}

impl SegmenterOutput {
    pub fn validate(&self, width: u32, height: u32) -> Result<(), SegmentError> {
        let n = self.masks.len();
        if n != self.predicted_ious.len() || !(n == 1 || n == 3) {
            return Err(SegmentError::InvalidPrompt(format!(
                "output has {n} masks and {} scores",
                self.predicted_ious.len()
            )));
        }
        if let Some(m) = self.masks.iter().find(|m| m.dims() != (width, height)) {
            return Err(MaskError::DimensionMismatch {
                left: m.dims(),
                right: (width, height),
            }
            .into());
        }
        Ok(())
    }

    /// Index of the highest predicted IoU; the lowest index wins ties.
    pub fn most_confident(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.predicted_ious.iter().enumerate() {
            if s > self.predicted_ious[best] {
                best = i;
            }
        }
        best
    }
}

/// A promptable segmenter bound to one image.
///
/// `view` selects the sub-image the model sees (a crop, or the full image);
/// prompt coordinates and returned masks are relative to it. Implementations
/// must be deterministic functions of their construction parameters and the
/// call arguments, and callable from several threads at once.
pub trait Segmenter: Send + Sync {
    fn image_size(&self) -> (u32, u32);

    fn supports_multimask(&self) -> bool {
        true
    }

    fn segment(
        &self,
        view: BBox,
        prompt: &Prompt,
        multimask: bool,
    ) -> Result<SegmenterOutput, SegmentError>;

    fn full_view(&self) -> BBox {
        let (w, h) = self.image_size();
        BBox::new(0, 0, w, h)
    }
}

pub(crate) fn check_view(view: BBox, width: u32, height: u32) -> Result<(), SegmentError> {
    if view.w == 0 || view.h == 0 || view.x1() > width || view.y1() > height {
        return Err(SegmentError::InvalidView {
            view,
            width,
            height,
        });
    }
    Ok(())
}
