//! Proposal stage: take class-agnostic boxes from a [`ProposalSource`], keep
//! the ones overlapping the previous box, and top the set up with Gaussian
//! samples when too few survive.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{gaussian_box_samples, iou, BoundingBox, Frame, GaussianSampleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub bbox: BoundingBox,
    /// Unnormalised objectness; carried along but never used for gating.
    pub objectness: f64,
}

impl Proposal {
    pub fn new(bbox: BoundingBox, objectness: f64) -> Self {
        Self { bbox, objectness }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalFilterConfig {
    /// Proposals need IoU strictly above this with the previous box.
    pub alpha: f64,
    /// Fill-up triggers when fewer than this many proposals survive.
    pub min_count: usize,
    /// Number of Gaussian samples appended on fill-up.
    pub fill_count: usize,
    pub sampling: GaussianSampleConfig,
}

impl Default for ProposalFilterConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            min_count: 5,
            fill_count: 256,
            sampling: GaussianSampleConfig::default(),
        }
    }
}

impl ProposalFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha {} not in [0, 1)", self.alpha)));
        }
        if self.min_count < 1 {
            return Err(Error::InvalidConfig("min_count must be at least 1".into()));
        }
        self.sampling.validate()
    }
}

/// Source of class-agnostic object proposals for one frame.
///
/// Implementations must be deterministic given the frame, its index and
/// their own seed.
pub trait ProposalSource: Send + Sync {
    /// `frame_index` is 1-based.
    fn propose(&self, frame: &Frame, frame_index: usize) -> Result<Vec<Proposal>>;
}

/// Candidate boxes handed to the tracker: gated source boxes first, then any
/// Gaussian fill-up samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub boxes: Vec<BoundingBox>,
    pub n_from_source: usize,
    pub n_filled: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn source_boxes(&self) -> &[BoundingBox] {
        &self.boxes[..self.n_from_source]
    }

    /// Candidates drawn only from the Gaussian sampler around `prev_box`.
    pub fn gaussian_only<R: Rng + ?Sized>(
        prev_box: &BoundingBox,
        cfg: &ProposalFilterConfig,
        rng: &mut R,
    ) -> Self {
        let boxes = gaussian_box_samples(prev_box, cfg.fill_count, &cfg.sampling, rng);
        Self {
            n_filled: boxes.len(),
            n_from_source: 0,
            boxes,
        }
    }
}

/// Boxes of the proposals whose IoU with `prev_box` exceeds `alpha`, in
/// source order.
pub fn filter_proposals(
    proposals: &[Proposal],
    prev_box: &BoundingBox,
    cfg: &ProposalFilterConfig,
) -> Vec<BoundingBox> {
    proposals
        .iter()
        .filter(|p| iou(&p.bbox, prev_box) > cfg.alpha)
        .map(|p| p.bbox)
        .collect()
}

/// Gated proposals plus `fill_count` Gaussian samples around `prev_box` when
/// fewer than `min_count` survive the gate.
pub fn generate_candidates<R: Rng + ?Sized>(
    frame: &Frame,
    frame_index: usize,
    prev_box: &BoundingBox,
    source: &dyn ProposalSource,
    cfg: &ProposalFilterConfig,
    rng: &mut R,
) -> Result<CandidateSet> {
    let proposals = source.propose(frame, frame_index)?;
    Ok(candidates_from_proposals(&proposals, prev_box, cfg, rng))
}

/// [`generate_candidates`] for proposals that were already obtained.
pub fn candidates_from_proposals<R: Rng + ?Sized>(
    proposals: &[Proposal],
    prev_box: &BoundingBox,
    cfg: &ProposalFilterConfig,
    rng: &mut R,
) -> CandidateSet {
    let mut boxes = filter_proposals(proposals, prev_box, cfg);
    let n_from_source = boxes.len();
    let mut n_filled = 0;
    if n_from_source < cfg.min_count {
        boxes.extend(gaussian_box_samples(prev_box, cfg.fill_count, &cfg.sampling, rng));
        n_filled = cfg.fill_count;
    }
    CandidateSet {
        boxes,
        n_from_source,
        n_filled,
    }
}

/// Fraction of frames whose best proposal reaches IoU `thresh` with the
/// frame's ground-truth box.
pub fn recall_at(
    per_frame_proposals: &[Vec<Proposal>],
    gt_boxes: &[BoundingBox],
    thresh: f64,
) -> Result<f64> {
    if per_frame_proposals.is_empty() {
        return Err(Error::NoFrames);
    }
    if per_frame_proposals.len() != gt_boxes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} proposal frames vs {} ground-truth boxes",
            per_frame_proposals.len(),
            gt_boxes.len()
        )));
    }
    let hits = per_frame_proposals
        .iter()
        .zip(gt_boxes)
        .filter(|(props, gt)| props.iter().any(|p| iou(&p.bbox, gt) >= thresh))
        .count();
    Ok(hits as f64 / gt_boxes.len() as f64)
}
