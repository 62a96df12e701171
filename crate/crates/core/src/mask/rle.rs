use serde::{Deserialize, Serialize};

use super::{BinaryMask, MaskError};

/// Uncompressed run-length encoding in column-major order.
///
/// Runs alternate between unset and set pixels and always start with an
/// unset run, which may have length zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl RleMask {
    /// Checks the run-sum and alternation invariants.
    pub fn validate(&self) -> Result<(), MaskError> {
        let total: u64 = self.counts.iter().map(|&c| c as u64).sum();
        let expected = self.width as u64 * self.height as u64;
        if total != expected {
            return Err(MaskError::MalformedRle(format!(
                "runs sum to {total}, expected {expected}"
            )));
        }
        if self.counts.is_empty() && expected > 0 {
            return Err(MaskError::MalformedRle("no runs".into()));
        }
        if let Some(i) = self.counts.iter().skip(1).position(|&c| c == 0) {
            return Err(MaskError::MalformedRle(format!(
                "zero-length run at index {}",
                i + 1
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> u64 {
        self.counts
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&c| c as u64)
            .sum()
    }
}

pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let bits = mask.bits();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for x in 0..w {
        for y in 0..h {
            let v = bits[y * w + x];
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleMask {
        width: mask.width(),
        height: mask.height(),
        counts,
    }
}

pub fn rle_decode(rle: &RleMask) -> Result<BinaryMask, MaskError> {
    rle.validate()?;
    let (w, h) = (rle.width as usize, rle.height as usize);
    let mut bits = vec![false; w * h];
    let mut pos = 0usize;
    for (i, &run) in rle.counts.iter().enumerate() {
        if i % 2 == 1 {
            for p in pos..pos + run as usize {
                let (x, y) = (p / h, p % h);
                bits[y * w + x] = true;
            }
        }
        pos += run as usize;
    }
    BinaryMask::from_bits(rle.width, rle.height, bits)
}
