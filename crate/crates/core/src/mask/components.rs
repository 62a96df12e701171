use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i32, i32)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

struct Labels {
    /// 0 = not in any component, otherwise component index + 1.
    labels: Vec<u32>,
    sizes: Vec<usize>,
    touches_border: Vec<bool>,
}

/// Labels the `value`-valued pixels of `bits`. Components are numbered in
/// row-major order of their first pixel.
fn label(bits: &[bool], width: u32, height: u32, value: bool, conn: Connectivity) -> Labels {
    let (w, h) = (width as i32, height as i32);
    let mut labels = vec![0u32; bits.len()];
    let mut sizes = Vec::new();
    let mut touches_border = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..bits.len() {
        if bits[start] != value || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0usize;
        let mut border = false;
        labels[start] = id;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i as i32) % w, (i as i32) / w);
            border |= x == 0 || y == 0 || x == w - 1 || y == h - 1;
            for &(dx, dy) in conn.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if bits[j] == value && labels[j] == 0 {
                    labels[j] = id;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
        touches_border.push(border);
    }
    Labels {
        labels,
        sizes,
        touches_border,
    }
}

/// Maximal connected components of the set pixels, ordered by their first
/// pixel in row-major order.
pub fn connected_components(mask: &BinaryMask, conn: Connectivity) -> Vec<BinaryMask> {
    if mask.is_empty() {
        return Vec::new();
    }
    let l = label(mask.bits(), mask.width(), mask.height(), true, conn);
    (1..=l.sizes.len() as u32)
        .map(|id| {
            let bits = l.labels.iter().map(|&v| v == id).collect();
            BinaryMask::from_vec_unchecked(mask.width(), mask.height(), bits)
        })
        .collect()
}

/// Drops every component with fewer than `min_area` pixels. May return an
/// empty mask.
pub fn remove_small_components(
    mask: &BinaryMask,
    min_area: usize,
    conn: Connectivity,
) -> BinaryMask {
    if mask.is_empty() {
        return mask.clone();
    }
    let l = label(mask.bits(), mask.width(), mask.height(), true, conn);
    if l.sizes.iter().all(|&s| s >= min_area) {
        return mask.clone();
    }
    let bits = l
        .labels
        .iter()
        .map(|&v| v != 0 && l.sizes[v as usize - 1] >= min_area)
        .collect();
    BinaryMask::from_vec_unchecked(mask.width(), mask.height(), bits)
}

/// Fills background components that do not touch the image border and have
/// strictly fewer than `max_hole_area` pixels. `conn` is the connectivity
/// used for the background.
pub fn fill_small_holes(mask: &BinaryMask, max_hole_area: usize, conn: Connectivity) -> BinaryMask {
    let l = label(mask.bits(), mask.width(), mask.height(), false, conn);
    let is_hole = |v: u32| {
        v != 0 && !l.touches_border[v as usize - 1] && l.sizes[v as usize - 1] < max_hole_area
    };
    if !(1..=l.sizes.len() as u32).any(is_hole) {
        return mask.clone();
    }
    let bits = mask
        .bits()
        .iter()
        .zip(&l.labels)
        .map(|(&b, &v)| b || is_hole(v))
        .collect();
    BinaryMask::from_vec_unchecked(mask.width(), mask.height(), bits)
}
