use super::{BinaryMask, MaskError};

type Pt = (i64, i64);

fn cross(o: Pt, a: Pt, b: Pt) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain hull of pixel coordinates, counter-clockwise, no
/// collinear vertices. Degenerates to one or two points.
fn hull_vertices(mask: &BinaryMask) -> Vec<Pt> {
    // Only the leftmost and rightmost pixel of each row can be hull vertices.
    let mut pts: Vec<Pt> = Vec::new();
    let Some(bb) = mask.bbox() else { return pts };
    for y in bb.y..bb.y1() {
        let row = (bb.x..bb.x1()).filter(|&x| mask.get(x, y));
        let mut ends = row.clone();
        if let Some(first) = ends.next() {
            pts.push((first as i64, y as i64));
            if let Some(last) = row.last().filter(|&l| l != first) {
                pts.push((last as i64, y as i64));
            }
        }
    }
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Pt> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Pt> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Rasterized convex hull area: the number of grid pixels whose centers lie
/// inside or on the hull of the set-pixel centers.
pub fn convex_hull_area(mask: &BinaryMask) -> Result<f64, MaskError> {
    let bb = mask.bbox().ok_or(MaskError::EmptyMask("convex hull"))?;
    let hull = hull_vertices(mask);
    let n = hull.len();
    let mut count = 0u64;
    for y in bb.y as i64..bb.y1() as i64 {
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        for i in 0..n {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            if a.1 == b.1 {
                if a.1 == y {
                    lo = lo.min(a.0.min(b.0));
                    hi = hi.max(a.0.max(b.0));
                }
                continue;
            }
            if y < a.1.min(b.1) || y > a.1.max(b.1) {
                continue;
            }
            // x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y), kept rational
            let (mut num, mut den) = (a.0 * (b.1 - a.1) + (y - a.1) * (b.0 - a.0), b.1 - a.1);
            if den < 0 {
                num = -num;
                den = -den;
            }
            lo = lo.min(-((-num).div_euclid(den)));
            hi = hi.max(num.div_euclid(den));
        }
        if hi >= lo {
            count += (hi - lo + 1) as u64;
        }
    }
    Ok(count as f64)
}

/// One minus mask area over rasterized hull area, clamped to [0, 1].
pub fn concavity(mask: &BinaryMask) -> Result<f64, MaskError> {
    let hull = convex_hull_area(mask)?;
    Ok((1.0 - mask.area() as f64 / hull).clamp(0.0, 1.0))
}
