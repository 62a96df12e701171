//! Point grids, the multi-level crop schedule, and coordinate mapping between
//! crops and the full image.

use serde::{Deserialize, Serialize};

use crate::mask::{BBox, BinaryMask, MaskError};

/// Default overlap between neighbouring windows, as a fraction of the short
/// image side scaled by the window count.
pub const DEFAULT_OVERLAP_RATIO: f64 = 512.0 / 1500.0;

/// Points per side at zoom levels 0, 1 and 2.
pub const GRID_SIDES: [u32; 3] = [32, 16, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropSpec {
    pub rect: BBox,
    /// 0 is the full image, level `k` splits each side into `2^k` windows.
    pub zoom_level: u8,
    pub grid_side: u32,
}

impl CropSpec {
    pub fn full_image(width: u32, height: u32) -> Self {
        Self {
            rect: BBox::new(0, 0, width, height),
            zoom_level: 0,
            grid_side: GRID_SIDES[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointGrid {
    /// Crop-local `(x, y)`, row-major.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum CropError {
    #[error("image {0}x{1} too small for the crop schedule")]
    Degenerate(u32, u32),
    #[error("overlap ratio {0} must be in [0, 1)")]
    BadOverlap(f64),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// The full image plus 2×2 and 4×4 overlapping windows: 21 crops.
pub fn build_crop_schedule(width: u32, height: u32) -> Result<Vec<CropSpec>, CropError> {
    build_crop_schedule_with(width, height, DEFAULT_OVERLAP_RATIO)
}

pub fn build_crop_schedule_with(
    width: u32,
    height: u32,
    overlap_ratio: f64,
) -> Result<Vec<CropSpec>, CropError> {
    if width < 4 || height < 4 {
        return Err(CropError::Degenerate(width, height));
    }
    if !(0.0..1.0).contains(&overlap_ratio) {
        return Err(CropError::BadOverlap(overlap_ratio));
    }
    let mut crops = vec![CropSpec::full_image(width, height)];
    let short_side = width.min(height) as f64;
    for level in 1..=2u8 {
        let per_side = 1u32 << level;
        let overlap = (overlap_ratio * short_side * 2.0 / per_side as f64) as u32;
        let crop_w = (overlap * (per_side - 1) + width).div_ceil(per_side);
        let crop_h = (overlap * (per_side - 1) + height).div_ceil(per_side);
        for j in 0..per_side {
            for i in 0..per_side {
                let x0 = (crop_w - overlap) * i;
                let y0 = (crop_h - overlap) * j;
                let rect = BBox::new(
                    x0,
                    y0,
                    (x0 + crop_w).min(width) - x0,
                    (y0 + crop_h).min(height) - y0,
                );
                crops.push(CropSpec {
                    rect,
                    zoom_level: level,
                    grid_side: GRID_SIDES[level as usize],
                });
            }
        }
    }
    Ok(crops)
}

/// Cell-centred lattice: point `(i, j)` sits at `((i + 0.5)/n · w, (j + 0.5)/n · h)`.
pub fn make_point_grid(crop: &CropSpec) -> PointGrid {
    let n = crop.grid_side;
    let (w, h) = (crop.rect.w as f64, crop.rect.h as f64);
    let points = (0..n)
        .flat_map(|j| {
            (0..n).map(move |i| {
                (
                    (i as f64 + 0.5) / n as f64 * w,
                    (j as f64 + 0.5) / n as f64 * h,
                )
            })
        })
        .collect();
    PointGrid { points }
}

pub fn remap_point_to_full(point: (f64, f64), crop: &CropSpec) -> Result<(f64, f64), CropError> {
    let (x, y) = point;
    if !(x >= 0.0 && y >= 0.0 && x <= crop.rect.w as f64 && y <= crop.rect.h as f64) {
        return Err(MaskError::OutOfBounds(format!(
            "point ({x}, {y}) outside crop {:?}",
            crop.rect
        ))
        .into());
    }
    Ok((x + crop.rect.x as f64, y + crop.rect.y as f64))
}

pub fn remap_point_to_crop(point: (f64, f64), crop: &CropSpec) -> Result<(f64, f64), CropError> {
    let local = (point.0 - crop.rect.x as f64, point.1 - crop.rect.y as f64);
    remap_point_to_full(local, crop)?;
    Ok(local)
}

/// Pastes a crop-local mask into a full-image canvas.
pub fn remap_mask_to_full(
    mask: &BinaryMask,
    crop: &CropSpec,
    full: (u32, u32),
) -> Result<BinaryMask, CropError> {
    if mask.dims() != (crop.rect.w, crop.rect.h) {
        return Err(MaskError::DimensionMismatch {
            left: mask.dims(),
            right: (crop.rect.w, crop.rect.h),
        }
        .into());
    }
    Ok(mask.paste_into(crop.rect.x, crop.rect.y, full.0, full.1)?)
}

pub fn remap_mask_to_crop(mask: &BinaryMask, crop: &CropSpec) -> Result<BinaryMask, CropError> {
    Ok(mask.crop(crop.rect)?)
}

/// Whether a crop-local mask reaches a crop edge that is not also an image edge.
pub fn touches_crop_boundary(mask: &BinaryMask, crop: &CropSpec, full: (u32, u32)) -> bool {
    let Some(b) = mask.bbox() else { return false };
    let r = crop.rect;
    (r.x > 0 && b.x == 0)
        || (r.y > 0 && b.y == 0)
        || (r.x1() < full.0 && b.x1() == r.w)
        || (r.y1() < full.1 && b.y1() == r.h)
}
