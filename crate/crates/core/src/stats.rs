//! Statistics over mask collections: center distribution, masks per image,
//! relative size and size-controlled concavity.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mask::{concavity, BinaryMask, MaskError};
use crate::rng::rng_from;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMasks {
    pub width: u32,
    pub height: u32,
    pub masks: Vec<BinaryMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    pub heatmap_bins: usize,
    pub size_bins: usize,
    pub concavity_bins: usize,
    /// Lower edges of the masks-per-image bins; the last bin is open-ended.
    pub masks_per_image_edges: Vec<f64>,
    pub size_strata: usize,
    /// Draws per size stratum; 0 means the collection size divided by the
    /// number of nonempty strata, rounded up.
    pub samples_per_stratum: usize,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            heatmap_bins: 11,
            size_bins: 20,
            concavity_bins: 20,
            masks_per_image_edges: vec![0.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
            size_strata: 10,
            samples_per_stratum: 0,
            seed: 0,
        }
    }
}

/// Bin masses summing to 1, or all zero for an empty input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Lower bin edges.
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl Histogram {
    /// `bins` equal-width bins over [0, 1]; 1.0 falls in the last bin.
    fn unit(values: &[f64], bins: usize) -> Self {
        let edges = (0..bins).map(|i| i as f64 / bins as f64).collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
        }
        Self {
            edges,
            mass: normalize(&counts),
        }
    }

    fn with_edges(values: &[f64], edges: &[f64]) -> Self {
        let mut counts = vec![0usize; edges.len()];
        for &v in values {
            if let Some(i) = edges.iter().rposition(|&e| v >= e) {
                counts[i] += 1;
            }
        }
        Self {
            edges: edges.to_vec(),
            mass: normalize(&counts),
        }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

fn normalize(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .map(|&c| {
            if total == 0 {
                0.0
            } else {
                c as f64 / total as f64
            }
        })
        .collect()
}

/// Square 2D histogram over normalized image coordinates, row-major (y, x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub bins: usize,
    pub mass: Vec<f64>,
}

impl Heatmap {
    pub fn get(&self, bx: usize, by: usize) -> f64 {
        self.mass[by * self.bins + bx]
    }

    /// Plain-text graymap, `scale` pixels per bin, brightest bin at 255.
    pub fn to_pgm(&self, scale: usize) -> String {
        let side = self.bins * scale;
        let peak = self.mass.iter().copied().fold(0.0, f64::max);
        let mut out = format!("P2\n{side} {side}\n255\n");
        for y in 0..side {
            let row: Vec<String> = (0..side)
                .map(|x| {
                    let v = self.get(x / scale, y / scale);
                    let g = if peak > 0.0 {
                        (v / peak * 255.0).round() as u8
                    } else {
                        0
                    };
                    g.to_string()
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub images: usize,
    pub masks: usize,
    pub center_heatmap: Heatmap,
    pub masks_per_image: Histogram,
    pub relative_size: Histogram,
    pub concavity: Histogram,
    /// Draws taken from each nonempty size stratum for the concavity histogram.
    pub concavity_samples_per_stratum: usize,
}

struct MaskFeatures {
    center: (f64, f64),
    relative_size: f64,
    concavity: f64,
}

fn features(mask: &BinaryMask) -> Result<MaskFeatures, MaskError> {
    let (w, h) = mask.dims();
    let (mut sx, mut sy, mut n) = (0.0f64, 0.0f64, 0usize);
    for (x, y) in mask.pixels() {
        sx += x as f64 + 0.5;
        sy += y as f64 + 0.5;
        n += 1;
    }
    if n == 0 {
        return Err(MaskError::EmptyMask("statistics of an empty mask"));
    }
    Ok(MaskFeatures {
        center: (sx / n as f64 / w as f64, sy / n as f64 / h as f64),
        relative_size: (n as f64 / (w as f64 * h as f64)).sqrt(),
        concavity: concavity(mask)?,
    })
}

/// Strata by rank of relative size: stratum `k` holds ranks
/// `[k n / s, (k + 1) n / s)`.
fn size_strata(sizes: &[f64], strata: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[a].total_cmp(&sizes[b]).then(a.cmp(&b)));
    let mut out = vec![Vec::new(); strata];
    let n = sizes.len();
    for (rank, &i) in order.iter().enumerate() {
        out[rank * strata / n.max(1)].push(i);
    }
    out
}

pub fn compute_stats(
    collection: &[ImageMasks],
    config: &StatsConfig,
) -> Result<StatsReport, MaskError> {
    if config.heatmap_bins == 0
        || config.size_bins == 0
        || config.concavity_bins == 0
        || config.size_strata == 0
    {
        return Err(MaskError::OutOfBounds(
            "histogram bin counts must be positive".into(),
        ));
    }
    let per_image: Vec<Result<Vec<MaskFeatures>, MaskError>> = collection
        .par_iter()
        .map(|img| {
            img.masks
                .iter()
                .map(|m| {
                    if m.dims() != (img.width, img.height) {
                        return Err(MaskError::DimensionMismatch {
                            left: m.dims(),
                            right: (img.width, img.height),
                        });
                    }
                    features(m)
                })
                .collect()
        })
        .collect();
    let mut feats = Vec::new();
    for f in per_image {
        feats.extend(f?);
    }

    let bins = config.heatmap_bins;
    let mut heat = vec![0usize; bins * bins];
    for f in &feats {
        let bx = ((f.center.0 * bins as f64) as usize).min(bins - 1);
        let by = ((f.center.1 * bins as f64) as usize).min(bins - 1);
        heat[by * bins + bx] += 1;
    }

    let sizes: Vec<f64> = feats.iter().map(|f| f.relative_size).collect();
    let strata = size_strata(&sizes, config.size_strata);
    let nonempty: Vec<&Vec<usize>> = strata.iter().filter(|s| !s.is_empty()).collect();
    let per_stratum = match (config.samples_per_stratum, nonempty.len()) {
        (_, 0) => 0,
        (0, k) => feats.len().div_ceil(k),
        (m, _) => m,
    };
    let mut rng = rng_from(config.seed);
    let mut sampled = Vec::with_capacity(per_stratum * nonempty.len());
    for stratum in &nonempty {
        for _ in 0..per_stratum {
            sampled.push(feats[stratum[rng.random_range(0..stratum.len())]].concavity);
        }
    }

    let counts: Vec<f64> = collection.iter().map(|i| i.masks.len() as f64).collect();
    Ok(StatsReport {
        images: collection.len(),
        masks: feats.len(),
        center_heatmap: Heatmap {
            bins,
            mass: normalize(&heat),
        },
        masks_per_image: Histogram::with_edges(&counts, &config.masks_per_image_edges),
        relative_size: Histogram::unit(&sizes, config.size_bins),
        concavity: Histogram::unit(&sampled, config.concavity_bins),
        concavity_samples_per_stratum: per_stratum,
    })
}
