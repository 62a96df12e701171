//! Synthetic scenes: forests of nested rectangles and ellipses with exact
//! ground-truth masks. Depth 0 regions are wholes, depth 1 parts and depth 2
//! subparts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mask::{BBox, BinaryMask};
use crate::rng::rng_from;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("could not place {what} after {attempts} attempts")]
    Infeasible { what: String, attempts: u32 },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

/// Region outline. Both variants are described by their integer bounding
/// box; an ellipse is the one inscribed in that box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Rect { x: u32, y: u32, w: u32, h: u32 },
    Ellipse { x: u32, y: u32, w: u32, h: u32 },
}

impl Shape {
    pub fn bounds(&self) -> BBox {
        match *self {
            Shape::Rect { x, y, w, h } | Shape::Ellipse { x, y, w, h } => BBox::new(x, y, w, h),
        }
    }

    /// Membership of the pixel whose center is `(px + 0.5, py + 0.5)`.
    pub fn contains(&self, px: u32, py: u32) -> bool {
        match *self {
            Shape::Rect { x, y, w, h } => px >= x && px < x + w && py >= y && py < y + h,
            Shape::Ellipse { x, y, w, h } => {
                let (rx, ry) = (w as f64 / 2.0, h as f64 / 2.0);
                let dx = (px as f64 + 0.5 - (x as f64 + rx)) / rx;
                let dy = (py as f64 + 0.5 - (y as f64 + ry)) / ry;
                dx * dx + dy * dy <= 1.0
            }
        }
    }

    /// Largest box whose pixels are all inside the shape.
    fn inner_box(&self) -> BBox {
        match *self {
            Shape::Rect { x, y, w, h } => BBox::new(x, y, w, h),
            Shape::Ellipse { x, y, w, h } => {
                let iw = ((w as f64) / std::f64::consts::SQRT_2).floor() as u32;
                let ih = ((h as f64) / std::f64::consts::SQRT_2).floor() as u32;
                BBox::new(
                    x + (w - iw).div_ceil(2),
                    y + (h - ih).div_ceil(2),
                    iw.saturating_sub(1),
                    ih.saturating_sub(1),
                )
            }
        }
    }

    pub fn rasterize(&self, width: u32, height: u32) -> BinaryMask {
        let b = self.bounds();
        let pixels = (b.y..b.y1().min(height))
            .flat_map(|y| (b.x..b.x1().min(width)).map(move |x| (x, y)))
            .filter(|&(x, y)| self.contains(x, y));
        BinaryMask::from_pixels(width, height, pixels).expect("pixels clipped to image")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub id: u32,
    pub parent: Option<u32>,
    pub depth: u8,
    pub shape: Shape,
}

/// Ground-truth scene. Regions are stored parents-first; `id` equals the
/// index in `regions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub regions: Vec<Region>,
}

impl SceneSpec {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            regions: Vec::new(),
        }
    }

    pub fn region_mask(&self, id: usize) -> BinaryMask {
        self.regions[id].shape.rasterize(self.width, self.height)
    }

    pub fn region_masks(&self) -> Vec<BinaryMask> {
        (0..self.regions.len())
            .map(|i| self.region_mask(i))
            .collect()
    }

    pub fn children(&self, id: u32) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(move |r| r.parent == Some(id))
    }

    pub fn roots(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.parent.is_none())
    }

    /// Checks ids, nesting depth, strict containment and sibling disjointness.
    pub fn validate(&self) -> Result<(), SceneError> {
        let masks = self.region_masks();
        for (i, r) in self.regions.iter().enumerate() {
            if r.id as usize != i {
                return Err(SceneError::InvalidScene(format!(
                    "region {i} has id {}",
                    r.id
                )));
            }
            if masks[i].is_empty() {
                return Err(SceneError::InvalidScene(format!("region {i} is empty")));
            }
            if r.depth > 2 {
                return Err(SceneError::InvalidScene(format!(
                    "region {i} nested deeper than 3 levels"
                )));
            }
            if let Some(p) = r.parent {
                let p = p as usize;
                if p >= i || self.regions[p].depth + 1 != r.depth {
                    return Err(SceneError::InvalidScene(format!(
                        "region {i} has bad parent {p}"
                    )));
                }
                let inside = masks[i].is_subset_of(&masks[p]).unwrap_or(false);
                if !inside || masks[i].area() >= masks[p].area() {
                    return Err(SceneError::InvalidScene(format!(
                        "region {i} not strictly inside {p}"
                    )));
                }
            } else if r.depth != 0 {
                return Err(SceneError::InvalidScene(format!(
                    "root {i} has depth {}",
                    r.depth
                )));
            }
            for j in 0..i {
                if self.regions[j].parent == r.parent
                    && masks[i].intersection_area(&masks[j]).unwrap_or(1) > 0
                {
                    return Err(SceneError::InvalidScene(format!(
                        "siblings {j} and {i} overlap"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub width: u32,
    pub height: u32,
    /// Inclusive range of top-level object counts.
    pub objects: (u32, u32),
    /// Inclusive range of top-level side lengths in pixels.
    pub root_size: (u32, u32),
    /// 1 = flat scenes, 3 = whole/part/subpart.
    pub max_depth: u8,
    /// Inclusive range of children per region when depth allows. The lower
    /// bound is mandatory; children beyond it are dropped when they do not fit.
    pub children: (u32, u32),
    /// Child side length as a fraction of the parent's inner extent.
    pub child_scale: (f64, f64),
    pub ellipse_prob: f64,
    /// Minimum spacing between siblings and between a child and its parent's outline.
    pub min_gap: u32,
    pub max_attempts: u32,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            objects: (3, 8),
            root_size: (24, 72),
            max_depth: 3,
            children: (0, 2),
            child_scale: (0.3, 0.6),
            ellipse_prob: 0.3,
            min_gap: 3,
            max_attempts: 500,
        }
    }
}

impl SceneConfig {
    fn check(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidConfig(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be positive");
        }
        if self.objects.0 > self.objects.1
            || self.root_size.0 > self.root_size.1
            || self.children.0 > self.children.1
        {
            return bad("empty range");
        }
        if self.root_size.0 == 0 || self.root_size.1 > self.width.min(self.height) {
            return bad("root size outside image bounds");
        }
        if !(1..=3).contains(&self.max_depth) {
            return bad("max_depth must be 1..=3");
        }
        let (lo, hi) = self.child_scale;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad("child_scale must satisfy 0 < lo <= hi <= 1");
        }
        if !(0.0..=1.0).contains(&self.ellipse_prob) {
            return bad("ellipse_prob must be a probability");
        }
        Ok(())
    }
}

fn expand(b: BBox, gap: u32) -> (i64, i64, i64, i64) {
    let g = gap as i64;
    (
        b.x as i64 - g,
        b.y as i64 - g,
        b.x1() as i64 + g,
        b.y1() as i64 + g,
    )
}

fn overlaps_with_gap(a: BBox, b: BBox, gap: u32) -> bool {
    let (ax0, ay0, ax1, ay1) = expand(a, gap);
    ax0 < b.x1() as i64 && (b.x as i64) < ax1 && ay0 < b.y1() as i64 && (b.y as i64) < ay1
}

/// Generates a random valid scene. Equal seeds and configs give identical scenes.
pub fn generate_scene(seed: u64, config: &SceneConfig) -> Result<SceneSpec, SceneError> {
    config.check()?;
    let mut rng = rng_from(seed);
    let mut regions: Vec<Region> = Vec::new();
    let n_roots = rng.random_range(config.objects.0..=config.objects.1);
    let mut root_boxes: Vec<BBox> = Vec::new();
    for k in 0..n_roots {
        let mut placed = None;
        for _ in 0..config.max_attempts {
            let w = rng.random_range(config.root_size.0..=config.root_size.1);
            let h = rng.random_range(config.root_size.0..=config.root_size.1);
            let x = rng.random_range(0..=config.width - w);
            let y = rng.random_range(0..=config.height - h);
            let b = BBox::new(x, y, w, h);
            if root_boxes
                .iter()
                .all(|o| !overlaps_with_gap(*o, b, config.min_gap))
            {
                placed = Some(b);
                break;
            }
        }
        let b = placed.ok_or_else(|| SceneError::Infeasible {
            what: format!("root object {k}"),
            attempts: config.max_attempts,
        })?;
        root_boxes.push(b);
        let shape = pick_shape(&mut rng, b, config.ellipse_prob);
        regions.push(Region {
            id: regions.len() as u32,
            parent: None,
            depth: 0,
            shape,
        });
    }
    // breadth-first so that parents precede children
    let mut next = 0;
    while next < regions.len() {
        let parent = regions[next].clone();
        next += 1;
        if parent.depth + 1 >= config.max_depth {
            continue;
        }
        let n_children = rng.random_range(config.children.0..=config.children.1);
        let parent_mask = parent.shape.rasterize(config.width, config.height);
        let inner = parent.shape.inner_box();
        let gap = config.min_gap;
        let mut sibling_boxes: Vec<BBox> = Vec::new();
        for k in 0..n_children {
            let mut placed = None;
            for _ in 0..config.max_attempts {
                if inner.w <= 2 * gap || inner.h <= 2 * gap {
                    break;
                }
                let (avail_w, avail_h) = (inner.w - 2 * gap, inner.h - 2 * gap);
                let s = rng.random_range(config.child_scale.0..=config.child_scale.1);
                let w = ((inner.w as f64 * s).round() as u32).clamp(1, avail_w);
                let h = ((inner.h as f64
                    * rng.random_range(config.child_scale.0..=config.child_scale.1))
                .round() as u32)
                    .clamp(1, avail_h);
                let x = inner.x + gap + rng.random_range(0..=avail_w - w);
                let y = inner.y + gap + rng.random_range(0..=avail_h - h);
                let b = BBox::new(x, y, w, h);
                if sibling_boxes.iter().any(|o| overlaps_with_gap(*o, b, gap)) {
                    continue;
                }
                let shape = pick_shape(&mut rng, b, config.ellipse_prob);
                let m = shape.rasterize(config.width, config.height);
                if !m.is_empty()
                    && m.is_subset_of(&parent_mask).unwrap_or(false)
                    && m.area() < parent_mask.area()
                {
                    placed = Some((b, shape));
                    break;
                }
            }
            let Some((b, shape)) = placed else {
                if k < config.children.0 {
                    return Err(SceneError::Infeasible {
                        what: format!("child {k} of region {}", parent.id),
                        attempts: config.max_attempts,
                    });
                }
                break;
            };
            sibling_boxes.push(b);
            regions.push(Region {
                id: regions.len() as u32,
                parent: Some(parent.id),
                depth: parent.depth + 1,
                shape,
            });
        }
    }
    let scene = SceneSpec {
        width: config.width,
        height: config.height,
        regions,
    };
    scene.validate()?;
    Ok(scene)
}

fn pick_shape(rng: &mut impl Rng, b: BBox, ellipse_prob: f64) -> Shape {
    if rng.random_bool(ellipse_prob) {
        Shape::Ellipse {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    } else {
        Shape::Rect {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::iou;

    #[test]
    fn deterministic_for_equal_seeds() {
        let cfg = SceneConfig::default();
        let a = generate_scene(11, &cfg).unwrap();
        let b = generate_scene(11, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_ne!(a, generate_scene(12, &cfg).unwrap());
    }

    #[test]
    fn depth_one_has_no_children() {
        let cfg = SceneConfig {
            max_depth: 1,
            children: (1, 3),
            ..Default::default()
        };
        for seed in 0..10 {
            let s = generate_scene(seed, &cfg).unwrap();
            assert!(s.regions.iter().all(|r| r.parent.is_none() && r.depth == 0));
        }
    }

    #[test]
    fn exact_root_count_and_disjoint_roots() {
        let cfg = SceneConfig {
            objects: (5, 5),
            ..Default::default()
        };
        let s = generate_scene(3, &cfg).unwrap();
        let roots: Vec<usize> = s.roots().map(|r| r.id as usize).collect();
        assert_eq!(roots.len(), 5);
        for (i, &a) in roots.iter().enumerate() {
            for &b in &roots[i + 1..] {
                assert_eq!(iou(&s.region_mask(a), &s.region_mask(b)).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn nested_scenes_are_valid() {
        let cfg = SceneConfig {
            objects: (2, 3),
            children: (1, 2),
            root_size: (60, 100),
            ..Default::default()
        };
        for seed in 0..20 {
            let s = generate_scene(seed, &cfg).unwrap();
            s.validate().unwrap();
            assert!(s.regions.iter().any(|r| r.depth == 2));
        }
    }

    #[test]
    fn infeasible_configs_fail() {
        let crowded = SceneConfig {
            width: 40,
            height: 40,
            objects: (10, 10),
            root_size: (20, 20),
            max_attempts: 50,
            ..Default::default()
        };
        assert!(matches!(
            generate_scene(1, &crowded),
            Err(SceneError::Infeasible { .. })
        ));
        let tiny_parent = SceneConfig {
            root_size: (4, 4),
            children: (1, 1),
            max_depth: 2,
            ..Default::default()
        };
        assert!(matches!(
            generate_scene(1, &tiny_parent),
            Err(SceneError::Infeasible { .. })
        ));
        let bad = SceneConfig {
            root_size: (10, 300),
            ..Default::default()
        };
        assert!(matches!(
            generate_scene(1, &bad),
            Err(SceneError::InvalidConfig(_))
        ));
    }

    #[test]
    fn ellipse_rasterization() {
        let e = Shape::Ellipse {
            x: 0,
            y: 0,
            w: 5,
            h: 5,
        };
        let m = e.rasterize(5, 5);
        assert!(m.get(2, 2) && m.get(0, 2) && m.get(2, 0));
        assert!(!m.get(0, 0) && !m.get(4, 4));
        let inner = e.inner_box();
        for y in inner.y..inner.y1() {
            for x in inner.x..inner.x1() {
                assert!(m.get(x, y));
            }
        }
    }

    #[test]
    fn validate_rejects_overlapping_siblings() {
        let s = SceneSpec {
            width: 20,
            height: 20,
            regions: vec![
                Region {
                    id: 0,
                    parent: None,
                    depth: 0,
                    shape: Shape::Rect {
                        x: 0,
                        y: 0,
                        w: 10,
                        h: 10,
                    },
                },
                Region {
                    id: 1,
                    parent: None,
                    depth: 0,
                    shape: Shape::Rect {
                        x: 5,
                        y: 5,
                        w: 10,
                        h: 10,
                    },
                },
            ],
        };
        assert!(s.validate().is_err());
    }
}
