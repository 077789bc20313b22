use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::drsn::{MaskSegmenter, ReferenceSet};
use crate::error::{Error, Result};
use crate::geometry::{
    crop_resize_mask, iou, random_shift, BinaryMask, BoundingBox, Frame, GaussianSampleConfig,
    ProbabilityMap,
};
use crate::opn::{Proposal, ProposalSource};
use crate::otn::{AppearanceScorer, Descriptor, SampleMemory};
use crate::rng;

/// Ground truth of one object over a whole sequence, for the oracle backends.
#[derive(Debug, Clone)]
pub struct OracleContext {
    masks: Vec<BinaryMask>,
    boxes: Vec<Option<BoundingBox>>,
    seed: u64,
}

impl OracleContext {
    /// `masks[i]` is the ground truth of frame `i + 1`.
    pub fn new(masks: Vec<BinaryMask>, seed: u64) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::NoFrames);
        }
        let boxes = masks.iter().map(BinaryMask::enclosing_box).collect();
        Ok(Self { masks, boxes, seed })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mask(&self, frame_index: usize) -> Result<&BinaryMask> {
        frame_index
            .checked_sub(1)
            .and_then(|i| self.masks.get(i))
            .ok_or_else(|| Error::Backend(format!("oracle has no ground truth for frame {frame_index}")))
    }

    pub fn gt_box(&self, frame_index: usize) -> Result<Option<BoundingBox>> {
        self.mask(frame_index)?;
        Ok(self.boxes[frame_index - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleProposalConfig {
    /// Perturbation of the jittered copies of the ground-truth box.
    pub jitter: GaussianSampleConfig,
    pub n_jittered: usize,
    /// Uniform boxes with IoU below 0.3 against the ground truth.
    pub n_distractors: usize,
    /// Per-frame probability of withholding the ground truth and its copies.
    pub dropout: f64,
}

impl Default for OracleProposalConfig {
    fn default() -> Self {
        Self {
            jitter: GaussianSampleConfig {
                spatial_sigma: 0.05,
                scale_sigma: 0.5,
                ..GaussianSampleConfig::default()
            },
            n_jittered: 16,
            n_distractors: 32,
            dropout: 0.0,
        }
    }
}

/// Ground-truth box, jittered copies and distractors; with `dropout` it
/// misses the object on a fraction of frames the way a learned proposal
/// network does.
#[derive(Debug, Clone)]
pub struct OracleProposalSource {
    ctx: OracleContext,
    cfg: OracleProposalConfig,
}

pub fn oracle_proposal_source(ctx: OracleContext, cfg: OracleProposalConfig) -> Result<OracleProposalSource> {
    cfg.jitter.validate()?;
    if !(0.0..=1.0).contains(&cfg.dropout) {
        return Err(Error::InvalidConfig(format!("dropout {} not in [0, 1]", cfg.dropout)));
    }
    Ok(OracleProposalSource { ctx, cfg })
}

const DISTRACTOR_MAX_IOU: f64 = 0.3;

impl ProposalSource for OracleProposalSource {
    fn propose(&self, frame: &Frame, frame_index: usize) -> Result<Vec<Proposal>> {
        let gt = self.ctx.gt_box(frame_index)?;
        let mut rng = rng::stream(self.ctx.seed, &[rng::stable_hash("oracle-proposals"), frame_index as u64]);
        let dropped = rng.random_bool(self.cfg.dropout);
        let mut out = Vec::new();
        if let (Some(gt), false) = (gt, dropped) {
            out.push(Proposal::new(gt, 1.0));
            let still = self.cfg.jitter.spatial_sigma == 0.0 && self.cfg.jitter.scale_sigma == 0.0;
            if !still {
                for _ in 0..self.cfg.n_jittered {
                    let b = random_shift(&gt, &self.cfg.jitter, &mut rng);
                    out.push(Proposal::new(b, iou(&b, &gt)));
                }
            }
        }
        let (fw, fh) = (frame.width() as f64, frame.height() as f64);
        let mut placed = 0;
        let mut attempts = 0;
        while placed < self.cfg.n_distractors && attempts < 50 * self.cfg.n_distractors {
            attempts += 1;
            let w = fw * rng.random_range(0.05..0.4);
            let h = fh * rng.random_range(0.05..0.4);
            let b = BoundingBox::new(rng.random_range(0.0..fw - w), rng.random_range(0.0..fh - h), w, h);
            if gt.is_some_and(|g| iou(&b, &g) >= DISTRACTOR_MAX_IOU) {
                continue;
            }
            out.push(Proposal::new(b, 0.0));
            placed += 1;
        }
        Ok(out)
    }
}

/// Scores a candidate by its IoU with the ground-truth box, minus 0.5.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    ctx: OracleContext,
}

pub fn oracle_scorer(ctx: OracleContext) -> OracleScorer {
    OracleScorer { ctx }
}

impl AppearanceScorer for OracleScorer {
    fn adapt_to_first_frame(&mut self, _: &Frame, _: &BinaryMask) -> Result<()> {
        Ok(())
    }

    fn score(&self, frame_index: usize, bbox: &BoundingBox, _patch: &Frame) -> Result<f64> {
        Ok(self.ctx.gt_box(frame_index)?.map_or(0.0, |g| iou(bbox, &g)) - 0.5)
    }

    fn describe(&self, _: &Frame) -> Descriptor {
        Descriptor::default()
    }

    fn update(&mut self, _: &SampleMemory, _: usize) -> Result<()> {
        Ok(())
    }

    fn needs_patches(&self) -> bool {
        false
    }
}

/// Emits the ground-truth mask, cut to the current patch.
#[derive(Debug, Clone)]
pub struct OracleSegmenter {
    ctx: OracleContext,
}

pub fn oracle_segmenter(ctx: OracleContext) -> OracleSegmenter {
    OracleSegmenter { ctx }
}

impl MaskSegmenter for OracleSegmenter {
    fn segment(&self, refs: &ReferenceSet) -> Result<ProbabilityMap> {
        let gt = self.ctx.mask(refs.frame_index)?;
        let side = refs.current.mask.width();
        Ok(ProbabilityMap::from_mask(&crop_resize_mask(gt, &refs.current.origin_box, side)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::crop_resize;
    use crate::opn::{recall_at, ProposalFilterConfig};
    use crate::otn::{select_top_k, tracking_success, ScoredCandidate};

    fn moving_square(frames: usize) -> OracleContext {
        let masks = (0..frames)
            .map(|i| {
                let x0 = 20 + 2 * i;
                BinaryMask::from_fn(128, 128, |x, y| (x0..x0 + 30).contains(&x) && (40..70).contains(&y))
            })
            .collect();
        OracleContext::new(masks, 9).unwrap()
    }

    #[test]
    fn exact_mode_returns_only_ground_truth() {
        let ctx = moving_square(3);
        let cfg = OracleProposalConfig {
            jitter: GaussianSampleConfig {
                spatial_sigma: 0.0,
                scale_sigma: 0.0,
                ..Default::default()
            },
            n_distractors: 0,
            ..Default::default()
        };
        let src = oracle_proposal_source(ctx.clone(), cfg).unwrap();
        let props = src.propose(&Frame::new(128, 128), 2).unwrap();
        assert_eq!(props.len(), 1);
        assert_eq!(props[0].bbox, ctx.gt_box(2).unwrap().unwrap());
    }

    #[test]
    fn default_recall_is_perfect_and_deterministic() {
        let ctx = moving_square(30);
        let src = oracle_proposal_source(ctx.clone(), OracleProposalConfig::default()).unwrap();
        let frame = Frame::new(128, 128);
        let per_frame: Vec<_> = (1..=30).map(|i| src.propose(&frame, i).unwrap()).collect();
        let gts: Vec<_> = (1..=30).map(|i| ctx.gt_box(i).unwrap().unwrap()).collect();
        assert_eq!(recall_at(&per_frame, &gts, 0.5).unwrap(), 1.0);
        assert_eq!(src.propose(&frame, 7).unwrap(), per_frame[6]);
        // Distractors never pass the proposal gate.
        let alpha = ProposalFilterConfig::default().alpha;
        assert!(per_frame[3].iter().filter(|p| p.objectness == 0.0).all(|p| iou(&p.bbox, &gts[3]) < alpha));
    }

    #[test]
    fn oracle_scores() {
        let ctx = moving_square(2);
        let scorer = oracle_scorer(ctx.clone());
        let gt = ctx.gt_box(2).unwrap().unwrap();
        let blank = Frame::new(2, 2);
        assert_eq!(scorer.score(2, &gt, &blank).unwrap(), 0.5);
        let far = BoundingBox::new(0.0, 100.0, 10.0, 10.0);
        assert_eq!(scorer.score(2, &far, &blank).unwrap(), -0.5);
    }

    #[test]
    fn oracle_success_matches_enumeration() {
        // Top-5 built from candidates whose IoUs with the truth are known.
        let ctx = moving_square(2);
        let scorer = oracle_scorer(ctx.clone());
        let gt = ctx.gt_box(2).unwrap().unwrap();
        let blank = Frame::new(2, 2);
        let shifted = |s: f64| BoundingBox::new(gt.x + s, gt.y, gt.w, gt.h);
        // IoU of a horizontal shift s on a 30-wide box: (30 - s) / (30 + s).
        for shifts in [
            vec![0.0, 40.0, 40.0, 40.0, 40.0],
            vec![5.0, 7.0, 10.0, 12.0, 15.0],
            vec![12.0, 13.0, 14.0, 15.0, 16.0],
        ] {
            let scored: Vec<_> = shifts
                .iter()
                .enumerate()
                .map(|(i, &s)| ScoredCandidate {
                    bbox: shifted(s),
                    score: scorer.score(2, &shifted(s), &blank).unwrap(),
                    source_index: i,
                })
                .collect();
            let top = select_top_k(&scored, 5).unwrap();
            let expected_mean: f64 = shifts
                .iter()
                .map(|&s| if s >= 30.0 { 0.0 } else { (30.0 - s) / (30.0 + s) })
                .sum::<f64>()
                / 5.0;
            assert_eq!(tracking_success(&top, 0.0), expected_mean > 0.5, "{shifts:?}");
        }
    }

    #[test]
    fn oracle_segmenter_returns_patch_truth() {
        let ctx = moving_square(3);
        let seg = oracle_segmenter(ctx.clone());
        let frame = Frame::new(128, 128);
        let gt = ctx.mask(3).unwrap();
        let origin = gt.enclosing_box().unwrap().expand(1.5);
        let current = crate::drsn::ImageMaskPatch {
            image: crop_resize(&frame, &origin, 64),
            mask: BinaryMask::new(64, 64),
            origin_box: origin,
            image_frame: 3,
            mask_frame: 2,
        };
        let refs = ReferenceSet {
            frame_index: 3,
            static_ref: current.clone(),
            dynamic: vec![],
            current,
        };
        let p = seg.segment(&refs).unwrap();
        assert_eq!(p.threshold(0.5), crop_resize_mask(gt, &origin, 64));
        let missing = ReferenceSet { frame_index: 9, ..refs };
        assert!(seg.segment(&missing).is_err());
    }
}
