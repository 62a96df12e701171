//! Binary and soft mask representations plus the pixel algebra the rest of
//! the pipeline is built on.
//!
//! Masks are immutable values. Pixel storage sits behind an `Arc` so that
//! cloning a mask (which happens a lot when records are copied between
//! pipeline stages) is cheap.

mod components;
mod distance;
mod hull;
mod rle;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use components::{
    connected_components, fill_small_holes, remove_small_components, Connectivity,
};
pub use distance::{distance_transform, distance_transform_unbounded, DistanceMap};
pub use hull::{concavity, convex_hull_area};
pub use rle::{rle_decode, rle_encode, RleMask};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },
    #[error("expected {expected} pixels, got {got}")]
    PixelCount { expected: usize, got: usize },
    #[error("malformed RLE: {0}")]
    MalformedRle(String),
    #[error("{0} requires a nonempty mask")]
    EmptyMask(&'static str),
    #[error("geometry out of bounds: {0}")]
    OutOfBounds(String),
}

/// Axis-aligned pixel box. `(x, y)` is the top-left pixel; `w`/`h` count pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn x1(&self) -> u32 {
        self.x + self.w
    }

    pub fn y1(&self) -> u32 {
        self.y + self.h
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.x1() && y >= self.y && y < self.y1()
    }

    pub fn intersection(&self, other: &BBox) -> u64 {
        let iw = self
            .x1()
            .min(other.x1())
            .saturating_sub(self.x.max(other.x));
        let ih = self
            .y1()
            .min(other.y1())
            .saturating_sub(self.y.max(other.y));
        iw as u64 * ih as u64
    }

    /// Box IoU; zero when either box has no area.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn to_array(&self) -> [u32; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// Dense binary mask with cached area and tight bounding box.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Arc<[bool]>,
    area: usize,
    bbox: Option<BBox>,
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("area", &self.area)
            .field("bbox", &self.bbox)
            .finish()
    }
}

impl BinaryMask {
    /// Builds a mask from row-major bits.
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, MaskError> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(MaskError::PixelCount {
                expected,
                got: bits.len(),
            });
        }
        Ok(Self::from_vec_unchecked(width, height, bits))
    }

    fn from_vec_unchecked(width: u32, height: u32, bits: Vec<bool>) -> Self {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        let mut area = 0usize;
        let w = width as usize;
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            let x = (i % w) as u32;
            let y = (i / w) as u32;
            area += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let bbox = (area > 0).then(|| BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1));
        Self {
            width,
            height,
            bits: bits.into(),
            area,
            bbox,
        }
    }

    pub fn empty(width: u32, height: u32) -> Self {
        Self::from_vec_unchecked(width, height, vec![false; width as usize * height as usize])
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self::from_vec_unchecked(width, height, vec![true; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::from_vec_unchecked(width, height, bits)
    }

    pub fn from_pixels(
        width: u32,
        height: u32,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self, MaskError> {
        let mut bits = vec![false; width as usize * height as usize];
        for (x, y) in pixels {
            if x >= width || y >= height {
                return Err(MaskError::OutOfBounds(format!(
                    "pixel ({x}, {y}) in {width}x{height}"
                )));
            }
            bits[y as usize * width as usize + x as usize] = true;
        }
        Ok(Self::from_vec_unchecked(width, height, bits))
    }

    /// Parses a picture made of `#` (set) and `.` (unset) rows.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.len()) as u32;
        let bits = rows
            .iter()
            .flat_map(|r| {
                assert_eq!(r.len() as u32, width, "ragged ascii mask");
                r.chars().map(|c| c == '#')
            })
            .collect();
        Self::from_vec_unchecked(width, height, bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn area(&self) -> usize {
        self.area
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.bbox
    }

    /// Tight box, or a zero-sized box at the origin for empty masks.
    pub fn bbox_or_empty(&self) -> BBox {
        self.bbox.unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.area == 0
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        x < self.width
            && y < self.height
            && self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.dims() != other.dims() {
            return Err(MaskError::DimensionMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    fn zip_with(
        &self,
        other: &BinaryMask,
        f: impl Fn(bool, bool) -> bool,
    ) -> Result<BinaryMask, MaskError> {
        self.check_dims(other)?;
        let bits = self
            .bits
            .iter()
            .zip(other.bits.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_vec_unchecked(self.width, self.height, bits))
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn xor(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.zip_with(other, |a, b| a != b)
    }

    pub fn and_not(&self, other: &BinaryMask) -> Result<BinaryMask, MaskError> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn invert(&self) -> BinaryMask {
        let bits = self.bits.iter().map(|b| !b).collect();
        Self::from_vec_unchecked(self.width, self.height, bits)
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<usize, MaskError> {
        self.check_dims(other)?;
        Ok(self
            .bits
            .iter()
            .zip(other.bits.iter())
            .filter(|(a, b)| **a && **b)
            .count())
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> Result<bool, MaskError> {
        Ok(self.intersection_area(other)? == self.area)
    }

    /// Copies the `rect` window out of this mask.
    pub fn crop(&self, rect: BBox) -> Result<BinaryMask, MaskError> {
        if rect.x1() > self.width || rect.y1() > self.height {
            return Err(MaskError::OutOfBounds(format!(
                "{rect:?} in {}x{}",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(rect.w, rect.h, |x, y| {
            self.get(rect.x + x, rect.y + y)
        }))
    }

    /// Pastes this mask at `(ox, oy)` into an empty canvas of the given size.
    pub fn paste_into(
        &self,
        ox: u32,
        oy: u32,
        width: u32,
        height: u32,
    ) -> Result<BinaryMask, MaskError> {
        if ox + self.width > width || oy + self.height > height {
            return Err(MaskError::OutOfBounds(format!(
                "{}x{} mask at ({ox}, {oy}) in {width}x{height}",
                self.width, self.height
            )));
        }
        if (ox, oy, self.width, self.height) == (0, 0, width, height) {
            return Ok(self.clone());
        }
        let mut bits = vec![false; width as usize * height as usize];
        for (x, y) in self.pixels() {
            bits[(oy + y) as usize * width as usize + (ox + x) as usize] = true;
        }
        Ok(Self::from_vec_unchecked(width, height, bits))
    }
}

/// Intersection over union. Two empty masks count as identical (1.0).
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, MaskError> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Per-pixel logits. Binarizing at 0 gives the hard prediction.
#[derive(Clone, PartialEq)]
pub struct SoftMask {
    width: u32,
    height: u32,
    logits: Arc<[f32]>,
}

impl fmt::Debug for SoftMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SoftMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl SoftMask {
    pub fn from_logits(width: u32, height: u32, logits: Vec<f32>) -> Result<Self, MaskError> {
        let expected = width as usize * height as usize;
        if logits.len() != expected {
            return Err(MaskError::PixelCount {
                expected,
                got: logits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            logits: logits.into(),
        })
    }

    pub fn constant(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            logits: vec![value; width as usize * height as usize].into(),
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f32) -> Self {
        let mut logits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                logits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            logits: logits.into(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn logits(&self) -> &[f32] {
        &self.logits
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.logits[y as usize * self.width as usize + x as usize]
    }

    /// Address of the shared logit buffer. Two soft masks with the same
    /// storage id hold identical logits.
    pub fn storage_id(&self) -> usize {
        Arc::as_ptr(&self.logits) as *const f32 as usize
    }

    /// Pixels whose logit is strictly greater than `t`.
    pub fn threshold(&self, t: f32) -> BinaryMask {
        BinaryMask::from_vec_unchecked(
            self.width,
            self.height,
            self.logits.iter().map(|&l| l > t).collect(),
        )
    }

    pub fn binarize(&self) -> BinaryMask {
        self.threshold(0.0)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| sigmoid(l as f64)).collect()
    }

    pub fn crop(&self, rect: BBox) -> Result<SoftMask, MaskError> {
        if rect.x1() > self.width || rect.y1() > self.height {
            return Err(MaskError::OutOfBounds(format!(
                "{rect:?} in {}x{}",
                self.width, self.height
            )));
        }
        if rect == BBox::new(0, 0, self.width, self.height) {
            return Ok(self.clone());
        }
        Ok(Self::from_fn(rect.w, rect.h, |x, y| {
            self.get(rect.x + x, rect.y + y)
        }))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// IoU between the masks obtained by thresholding at `-delta` and `+delta`.
///
/// The high-threshold mask is always contained in the low-threshold mask, so
/// the IoU reduces to a ratio of counts.
pub fn stability_score(soft: &SoftMask, delta_logit: f32) -> f64 {
    let (mut high, mut low) = (0usize, 0usize);
    for &l in soft.logits() {
        high += (l > delta_logit) as usize;
        low += (l > -delta_logit) as usize;
    }
    if low == 0 {
        1.0
    } else {
        high as f64 / low as f64
    }
}
