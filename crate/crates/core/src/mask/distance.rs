use super::BinaryMask;

/// Per-pixel real values on a mask-sized grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

impl DistanceMap {
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Position of the maximum; ties resolve to the first pixel in row-major order.
    pub fn argmax(&self) -> Option<(u32, u32)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        let w = self.width as usize;
        best.map(|(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact 1D squared distance transform (lower envelope of parabolas).
/// `None` entries carry no site.
fn squared_1d(f: &[Option<f64>], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for (q, fq) in f.iter().enumerate() {
        let Some(fq) = *fq else { continue };
        let qf = q as f64;
        loop {
            let Some(&p) = v.last() else {
                v.push(q);
                z.push(f64::NEG_INFINITY);
                break;
            };
            let pf = p as f64;
            let fp = f[p].unwrap();
            let s = ((fq + qf * qf) - (fp + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= *z.last().unwrap() {
                v.pop();
                z.pop();
                continue;
            }
            v.push(q);
            z.push(s);
            break;
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while k + 1 < v.len() && z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *o = (qf - p) * (qf - p) + f[v[k]].unwrap();
    }
}

/// Euclidean distance from every pixel to the nearest pixel where `site` is
/// true, on a `w`×`h` grid. Infinity when there are no sites.
fn euclidean(w: usize, h: usize, site: impl Fn(usize, usize) -> bool) -> Vec<f64> {
    let mut grid = vec![0.0f64; w * h];
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut col_in = vec![None; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col_in[y] = site(x, y).then_some(0.0);
        }
        squared_1d(&col_in, &mut col_out, &mut v, &mut z);
        for y in 0..h {
            grid[y * w + x] = col_out[y];
        }
    }
    let mut row_in = vec![None; w];
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        for x in 0..w {
            let g = grid[y * w + x];
            row_in[x] = g.is_finite().then_some(g);
        }
        squared_1d(&row_in, &mut row_out, &mut v, &mut z);
        for x in 0..w {
            grid[y * w + x] = row_out[x].sqrt();
        }
    }
    grid
}

/// Distance from each set pixel to the nearest unset pixel, where everything
/// outside the image also counts as unset. Zero outside the mask.
pub fn distance_transform(mask: &BinaryMask) -> DistanceMap {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let padded = euclidean(w + 2, h + 2, |x, y| {
        x == 0 || y == 0 || x == w + 1 || y == h + 1 || !mask.get(x as u32 - 1, y as u32 - 1)
    });
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        values.extend_from_slice(&padded[(y + 1) * (w + 2) + 1..(y + 1) * (w + 2) + 1 + w]);
    }
    DistanceMap {
        width: mask.width(),
        height: mask.height(),
        values,
    }
}

/// Distance from each set pixel to the nearest unset pixel inside the image.
/// Infinity for set pixels when the mask covers the whole image.
pub fn distance_transform_unbounded(mask: &BinaryMask) -> DistanceMap {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let values = euclidean(w, h, |x, y| !mask.get(x as u32, y as u32));
    DistanceMap {
        width: mask.width(),
        height: mask.height(),
        values,
    }
}
