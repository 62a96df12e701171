//! Interactive prompting simulation: an initial point or box, then
//! corrective clicks on the error region, each round feeding the previous
//! logits back as a mask prompt.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::mask::{distance_transform, iou, BinaryMask, MaskError, SoftMask};
use crate::segmenter::{BoxPrompt, PointLabel, Prompt, PromptPoint, SegmentError, Segmenter};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("ground-truth mask is empty")]
    EmptyGroundTruth,
    #[error("round {round}: {source}")]
    Segment { round: usize, source: SegmentError },
    #[error(transparent)]
    Mask(#[from] MaskError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionMode {
    #[default]
    Uniform,
    Farthest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub total_rounds: usize,
    pub sampled_rounds: usize,
    /// Box corner noise std as a fraction of the box side.
    pub box_noise_std_frac: f64,
    /// Hard clamp on the box corner noise, in pixels.
    pub box_noise_max: f64,
    /// Probability that the initial prompt is a point rather than a box.
    pub point_prob: f64,
    pub correction: CorrectionMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            total_rounds: 11,
            sampled_rounds: 8,
            box_noise_std_frac: 0.1,
            box_noise_max: 20.0,
            point_prob: 0.5,
            correction: CorrectionMode::Uniform,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.total_rounds != self.sampled_rounds + 3 {
            return Err(SimError::Config(
                "total_rounds must equal sampled_rounds + 3".into(),
            ));
        }
        if self.sampled_rounds == 0 {
            return Err(SimError::Config("sampled_rounds must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.point_prob) {
            return Err(SimError::Config("point_prob must be a probability".into()));
        }
        if !(self.box_noise_std_frac >= 0.0 && self.box_noise_max >= 0.0) {
            return Err(SimError::Config(
                "box noise parameters must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundKind {
    Initial,
    Correction,
    /// Only the previous logits are fed back, no new point.
    Refine,
}

/// Serializable view of a prompt; the prior mask is reduced to a flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSummary {
    pub points: Vec<PromptPoint>,
    pub bbox: Option<BoxPrompt>,
    pub has_prior_mask: bool,
}

impl From<&Prompt> for PromptSummary {
    fn from(p: &Prompt) -> Self {
        Self {
            points: p.points.clone(),
            bbox: p.bbox,
            has_prior_mask: p.prior_mask.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRound {
    pub kind: RoundKind,
    pub prompt: PromptSummary,
    pub multimask: bool,
    pub chosen_mask_index: usize,
    pub predicted_iou: f64,
    pub iou_after: f64,
    /// The error region was empty, so the previous prediction was repeated.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub rounds: Vec<SimRound>,
}

impl SimTrace {
    pub fn final_iou(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.iou_after)
    }
}

/// A foreground point uniform over the mask, or its bounding box with
/// clamped Gaussian corner noise, clipped to the image.
pub fn sample_initial_prompt(
    gt: &BinaryMask,
    config: &SimConfig,
    rng: &mut impl Rng,
) -> Result<Prompt, SimError> {
    let bbox = gt.bbox().ok_or(SimError::EmptyGroundTruth)?;
    if rng.random_bool(config.point_prob) {
        return Ok(Prompt::point(uniform_pixel(
            gt,
            rng,
            PointLabel::Foreground,
        )?));
    }
    let b = BoxPrompt::from_bbox(bbox);
    let mut jitter = |side: u32| -> f64 {
        let std = config.box_noise_std_frac * side as f64;
        if std == 0.0 {
            return 0.0;
        }
        let n: f64 = Normal::new(0.0, std).expect("finite std").sample(rng);
        n.clamp(-config.box_noise_max, config.box_noise_max)
    };
    let (w, h) = (gt.width() as f64, gt.height() as f64);
    let x0 = (b.x0 + jitter(bbox.w)).clamp(0.0, w);
    let x1 = (b.x1 + jitter(bbox.w)).clamp(0.0, w);
    let y0 = (b.y0 + jitter(bbox.h)).clamp(0.0, h);
    let y1 = (b.y1 + jitter(bbox.h)).clamp(0.0, h);
    Ok(Prompt::boxed(BoxPrompt {
        x0: x0.min(x1),
        y0: y0.min(y1),
        x1: x0.max(x1),
        y1: y0.max(y1),
    }))
}

fn uniform_pixel(
    mask: &BinaryMask,
    rng: &mut impl Rng,
    label: PointLabel,
) -> Result<PromptPoint, MaskError> {
    let pixels: Vec<(u32, u32)> = mask.pixels().collect();
    let &(x, y) = pixels
        .choose(rng)
        .ok_or(MaskError::EmptyMask("no pixels to sample"))?;
    Ok(PromptPoint::at_pixel(x, y, label))
}

/// A click on `pred XOR gt`, labelled foreground for a missed pixel and
/// background for a spurious one. `None` when the prediction is exact.
pub fn sample_correction_point(
    pred: &BinaryMask,
    gt: &BinaryMask,
    mode: CorrectionMode,
    rng: &mut impl Rng,
) -> Result<Option<PromptPoint>, MaskError> {
    let error = pred.xor(gt)?;
    if error.is_empty() {
        return Ok(None);
    }
    let (x, y) = match mode {
        CorrectionMode::Uniform => uniform_pixel(&error, rng, PointLabel::Foreground)?.pixel(),
        CorrectionMode::Farthest => distance_transform(&error)
            .argmax()
            .expect("error region is nonempty"),
    };
    let label = if gt.get(x, y) {
        PointLabel::Foreground
    } else {
        PointLabel::Background
    };
    Ok(Some(PromptPoint::at_pixel(x, y, label)))
}

/// Round structure for a simulation: the initial round, the sampled
/// correction rounds with one refine round after correction `slot + 1`,
/// and a final refine round.
pub fn round_schedule(config: &SimConfig, slot: usize) -> Vec<RoundKind> {
    let mut kinds = vec![RoundKind::Initial];
    for i in 0..config.sampled_rounds {
        kinds.push(RoundKind::Correction);
        if i == slot {
            kinds.push(RoundKind::Refine);
        }
    }
    kinds.push(RoundKind::Refine);
    kinds
}

/// Runs `kinds` starting from `initial`. Round 1 asks for multiple masks and
/// keeps the most confident; later rounds ask for one, passing the previous
/// logits as a mask prompt.
pub fn run_rounds<S: Segmenter + ?Sized>(
    segmenter: &S,
    gt: &BinaryMask,
    initial: Prompt,
    kinds: &[RoundKind],
    mode: CorrectionMode,
    rng: &mut impl Rng,
) -> Result<SimTrace, SimError> {
    if gt.is_empty() {
        return Err(SimError::EmptyGroundTruth);
    }
    let view = segmenter.full_view();
    let mut rounds: Vec<SimRound> = Vec::with_capacity(kinds.len());
    let mut prompt = initial;
    let mut logits: Option<SoftMask> = None;
    for (round, &kind) in kinds.iter().enumerate() {
        let seg_err = |source| SimError::Segment {
            round: round + 1,
            source,
        };
        if round == 0 {
            let multimask = segmenter.supports_multimask();
            let out = segmenter
                .segment(view, &prompt, multimask)
                .map_err(seg_err)?;
            out.validate(view.w, view.h).map_err(seg_err)?;
            let chosen = out.most_confident();
            let soft = out.masks[chosen].clone();
            rounds.push(SimRound {
                kind,
                prompt: (&prompt).into(),
                multimask,
                chosen_mask_index: chosen,
                predicted_iou: out.predicted_ious[chosen],
                iou_after: iou(&soft.binarize(), gt)?,
                converged: false,
            });
            logits = Some(soft);
            continue;
        }
        let prev = logits.clone().expect("set by the first round");
        if kind == RoundKind::Correction {
            match sample_correction_point(&prev.binarize(), gt, mode, rng)? {
                Some(p) => prompt.points.push(p),
                None => {
                    let last = rounds.last().expect("not the first round").clone();
                    rounds.push(SimRound {
                        kind,
                        converged: true,
                        multimask: false,
                        ..last
                    });
                    continue;
                }
            }
        }
        prompt.prior_mask = Some(prev);
        let out = segmenter.segment(view, &prompt, false).map_err(seg_err)?;
        out.validate(view.w, view.h).map_err(seg_err)?;
        let chosen = out.most_confident();
        let soft = out.masks[chosen].clone();
        rounds.push(SimRound {
            kind,
            prompt: (&prompt).into(),
            multimask: false,
            chosen_mask_index: chosen,
            predicted_iou: out.predicted_ious[chosen],
            iou_after: iou(&soft.binarize(), gt)?,
            converged: false,
        });
        logits = Some(soft);
    }
    Ok(SimTrace { rounds })
}

/// The full training-style simulation for one ground-truth mask.
pub fn run_interactive_sim<S: Segmenter + ?Sized>(
    segmenter: &S,
    gt: &BinaryMask,
    config: &SimConfig,
    rng: &mut impl Rng,
) -> Result<SimTrace, SimError> {
    config.validate()?;
    let initial = sample_initial_prompt(gt, config, rng)?;
    let slot = rng.random_range(0..config.sampled_rounds);
    run_rounds(
        segmenter,
        gt,
        initial,
        &round_schedule(config, slot),
        config.correction,
        rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use crate::scene::{Region, SceneSpec, Shape};
    use crate::segmenter::{NoiseConfig, NoisySegmenter, OracleSegmenter};

    fn one_rect_scene() -> SceneSpec {
        SceneSpec {
            width: 64,
            height: 64,
            regions: vec![Region {
                id: 0,
                parent: None,
                depth: 0,
                shape: Shape::Rect {
                    x: 10,
                    y: 12,
                    w: 30,
                    h: 20,
                },
            }],
        }
    }

    #[test]
    fn single_pixel_point_branch() {
        let gt = BinaryMask::from_pixels(9, 9, [(4, 6)]).unwrap();
        let cfg = SimConfig {
            point_prob: 1.0,
            ..Default::default()
        };
        let p = sample_initial_prompt(&gt, &cfg, &mut rng_from(1)).unwrap();
        assert_eq!(
            p.points,
            vec![PromptPoint::at_pixel(4, 6, PointLabel::Foreground)]
        );
        assert!(sample_initial_prompt(&BinaryMask::empty(3, 3), &cfg, &mut rng_from(1)).is_err());
    }

    #[test]
    fn zero_noise_box_is_exact() {
        let gt = BinaryMask::from_fn(50, 40, |x, y| (5..25).contains(&x) && (8..18).contains(&y));
        let cfg = SimConfig {
            point_prob: 0.0,
            box_noise_std_frac: 0.0,
            ..Default::default()
        };
        let p = sample_initial_prompt(&gt, &cfg, &mut rng_from(2)).unwrap();
        assert_eq!(
            p.bbox,
            Some(BoxPrompt {
                x0: 5.0,
                y0: 8.0,
                x1: 25.0,
                y1: 18.0
            })
        );
    }

    #[test]
    fn box_noise_is_clamped() {
        let gt = BinaryMask::from_fn(400, 400, |x, y| {
            (100..300).contains(&x) && (150..250).contains(&y)
        });
        let cfg = SimConfig {
            point_prob: 0.0,
            ..Default::default()
        };
        let mut rng = rng_from(3);
        for _ in 0..500 {
            let b = sample_initial_prompt(&gt, &cfg, &mut rng)
                .unwrap()
                .bbox
                .unwrap();
            assert!((b.x0 - 100.0).abs() <= 20.0 && (b.x1 - 300.0).abs() <= 20.0);
            assert!((b.y0 - 150.0).abs() <= 20.0 && (b.y1 - 250.0).abs() <= 20.0);
        }
    }

    #[test]
    fn correction_points() {
        let gt = BinaryMask::from_fn(7, 7, |_, _| true);
        let mut rng = rng_from(4);
        assert_eq!(
            sample_correction_point(&gt, &gt, CorrectionMode::Uniform, &mut rng).unwrap(),
            None
        );
        let p = sample_correction_point(
            &BinaryMask::empty(7, 7),
            &gt,
            CorrectionMode::Farthest,
            &mut rng,
        )
        .unwrap();
        assert_eq!(p, Some(PromptPoint::at_pixel(3, 3, PointLabel::Foreground)));

        let gt = BinaryMask::from_fn(20, 20, |x, y| x < 12 && y < 12);
        let pred = BinaryMask::from_fn(20, 20, |x, y| x < 6 && y < 12);
        for _ in 0..50 {
            let p = sample_correction_point(&pred, &gt, CorrectionMode::Uniform, &mut rng)
                .unwrap()
                .unwrap();
            assert_eq!(p.label, PointLabel::Foreground);
            let (x, y) = p.pixel();
            assert!(gt.get(x, y) && !pred.get(x, y));
        }
        let spurious = BinaryMask::from_fn(20, 20, |x, y| x < 12 && y < 16);
        let p = sample_correction_point(&spurious, &gt, CorrectionMode::Farthest, &mut rng)
            .unwrap()
            .unwrap();
        assert_eq!(p.label, PointLabel::Background);
    }

    #[test]
    fn schedule_shape() {
        let cfg = SimConfig::default();
        for slot in 0..8 {
            let kinds = round_schedule(&cfg, slot);
            assert_eq!(kinds.len(), 11);
            assert_eq!(kinds[0], RoundKind::Initial);
            assert_eq!(kinds[slot + 2], RoundKind::Refine);
            assert_eq!(kinds[10], RoundKind::Refine);
            assert_eq!(
                kinds
                    .iter()
                    .filter(|&&k| k == RoundKind::Correction)
                    .count(),
                8
            );
        }
    }

    #[test]
    fn exact_oracle_converges_immediately() {
        let scene = one_rect_scene();
        let gt = scene.region_mask(0);
        let oracle = OracleSegmenter::new(scene);
        for seed in 0..10 {
            let trace =
                run_interactive_sim(&oracle, &gt, &SimConfig::default(), &mut rng_from(seed))
                    .unwrap();
            assert_eq!(trace.rounds.len(), 11);
            assert!(trace.rounds.iter().all(|r| r.iou_after == 1.0));
            assert!(trace.rounds[0].multimask && trace.rounds[1..].iter().all(|r| !r.multimask));
        }
    }

    #[test]
    fn noisy_rounds_keep_structure() {
        let scene = one_rect_scene();
        let gt = scene.region_mask(0);
        let noisy = NoisySegmenter::new(
            OracleSegmenter::new(scene),
            NoiseConfig {
                boundary_std: 3.0,
                ..Default::default()
            },
        );
        let cfg = SimConfig {
            correction: CorrectionMode::Farthest,
            ..Default::default()
        };
        let trace = run_interactive_sim(&noisy, &gt, &cfg, &mut rng_from(9)).unwrap();
        assert_eq!(trace.rounds.len(), 11);
        let mut points = trace.rounds[0].prompt.points.len();
        for r in &trace.rounds[1..] {
            assert!(r.prompt.has_prior_mask);
            let n = r.prompt.points.len();
            match r.kind {
                RoundKind::Correction if !r.converged => assert_eq!(n, points + 1),
                _ => assert_eq!(n, points),
            }
            points = n;
        }
        let json = serde_json::to_string(&trace).unwrap();
        assert_eq!(serde_json::from_str::<SimTrace>(&json).unwrap(), trace);
    }
}
