//! Tracking stage: an online appearance model scores every candidate, the
//! top-K decide success, and the sample memory feeds short- and long-term
//! model updates.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{crop_resize, iou, BinaryMask, BoundingBox, Frame};
use crate::opn::CandidateSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub top_k: usize,
    /// Tracking succeeds when the mean top-K score is strictly above this.
    pub success_threshold: f64,
    /// Buckets used by the update after a successful frame.
    pub short_window: usize,
    /// Memory capacity and the window of the periodic long-term update.
    pub long_window: usize,
    /// Long-term updates run on failed frames whose index is a multiple of this.
    pub long_interval: usize,
    pub pos_iou: f64,
    pub neg_iou: f64,
    pub patch_side: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            top_k: 5,
            success_threshold: 0.0,
            short_window: 5,
            long_window: 20,
            long_interval: 10,
            pos_iou: 0.7,
            neg_iou: 0.3,
            patch_side: 107,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("tracker: {m}")));
        if self.top_k < 1 {
            return bad("top_k must be at least 1");
        }
        if self.short_window > self.long_window || self.long_window == 0 {
            return bad("need 0 < short_window <= long_window");
        }
        if self.long_interval == 0 {
            return bad("long_interval must be positive");
        }
        if !(0.0 <= self.neg_iou && self.neg_iou < self.pos_iou && self.pos_iou <= 1.0) {
            return bad("need 0 <= neg_iou < pos_iou <= 1");
        }
        if self.patch_side < 2 {
            return bad("patch_side must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredCandidate {
    pub bbox: BoundingBox,
    pub score: f64,
    pub source_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLabel {
    Positive,
    Negative,
}

/// Sparse feature vector of a patch, `(feature index, value)` pairs.
/// What the features mean is up to the scorer that produced them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Descriptor {
    pub features: Vec<(u32, f32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub descriptor: Descriptor,
    pub label: SampleLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBucket {
    pub frame_index: usize,
    pub samples: Vec<Sample>,
}

/// Per-frame sample buckets, oldest first, capped at a fixed count.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMemory {
    capacity: usize,
    buckets: VecDeque<SampleBucket>,
}

impl SampleMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "memory capacity must be positive");
        Self {
            capacity,
            buckets: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Appends a bucket, returning the evicted oldest one when full.
    pub fn push(&mut self, bucket: SampleBucket) -> Option<SampleBucket> {
        let evicted = if self.buckets.len() == self.capacity {
            self.buckets.pop_front()
        } else {
            None
        };
        self.buckets.push_back(bucket);
        evicted
    }

    /// The newest `window` buckets, oldest first.
    pub fn recent(&self, window: usize) -> impl Iterator<Item = &SampleBucket> {
        let skip = self.buckets.len().saturating_sub(window);
        self.buckets.iter().skip(skip)
    }

    pub fn buckets(&self) -> impl Iterator<Item = &SampleBucket> {
        self.buckets.iter()
    }

    fn undo_push(&mut self, evicted: Option<SampleBucket>) {
        self.buckets.pop_back();
        if let Some(b) = evicted {
            self.buckets.push_front(b);
        }
    }
}

/// Online appearance model behind the tracker.
pub trait AppearanceScorer: Send {
    /// Initialises the model from the annotated first frame.
    fn adapt_to_first_frame(&mut self, frame: &Frame, mask: &BinaryMask) -> Result<()>;

    /// Target confidence of the patch cut from `bbox` in frame `frame_index`;
    /// positive means target.
    fn score(&self, frame_index: usize, bbox: &BoundingBox, patch: &Frame) -> Result<f64>;

    fn describe(&self, patch: &Frame) -> Descriptor;

    /// Adapts the model to the newest `window` buckets of `memory`.
    fn update(&mut self, memory: &SampleMemory, window: usize) -> Result<()>;

    /// Whether [`score`](Self::score) looks at the patch at all.
    fn needs_patches(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub current_box: BoundingBox,
    pub memory: SampleMemory,
    /// Index of the last processed frame (1 after initialisation).
    pub frame_index: usize,
    pub last_success: bool,
}

impl TrackerState {
    pub fn new(first_box: BoundingBox, cfg: &TrackerConfig) -> Self {
        Self {
            current_box: first_box,
            memory: SampleMemory::new(cfg.long_window),
            frame_index: 1,
            last_success: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelUpdate {
    ShortTerm,
    LongTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub bbox: BoundingBox,
    pub success: bool,
    pub top: Vec<ScoredCandidate>,
    pub update: Option<ModelUpdate>,
}

/// The `k` best candidates, score-descending, ties to the lower source index.
pub fn select_top_k(scored: &[ScoredCandidate], k: usize) -> Result<Vec<ScoredCandidate>> {
    if scored.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.source_index.cmp(&b.source_index))
    });
    sorted.truncate(k);
    Ok(sorted)
}

pub fn tracking_success(top: &[ScoredCandidate], threshold: f64) -> bool {
    assert!(!top.is_empty(), "tracking_success needs candidates");
    let mean = top.iter().map(|c| c.score).sum::<f64>() / top.len() as f64;
    mean > threshold
}

/// Component-wise mean of the boxes in `(x, y, w, h)`.
pub fn estimate_box(top: &[ScoredCandidate]) -> BoundingBox {
    assert!(!top.is_empty(), "estimate_box needs candidates");
    let n = top.len() as f64;
    let sum = top.iter().fold([0.0; 4], |acc, c| {
        [acc[0] + c.bbox.x, acc[1] + c.bbox.y, acc[2] + c.bbox.w, acc[3] + c.bbox.h]
    });
    BoundingBox::new(sum[0] / n, sum[1] / n, sum[2] / n, sum[3] / n)
}

/// Labels candidates by IoU with the estimate (positive at `>= pos_iou`,
/// negative at `<= neg_iou`), describes their patches, and returns them as
/// one bucket for `frame_index`.
pub fn collect_samples(
    frame_index: usize,
    frame: &Frame,
    candidates: &[ScoredCandidate],
    est: &BoundingBox,
    scorer: &dyn AppearanceScorer,
    cfg: &TrackerConfig,
) -> SampleBucket {
    let samples = candidates
        .iter()
        .filter_map(|c| {
            let overlap = iou(&c.bbox, est);
            let label = if overlap >= cfg.pos_iou {
                SampleLabel::Positive
            } else if overlap <= cfg.neg_iou {
                SampleLabel::Negative
            } else {
                return None;
            };
            let patch = crop_resize(frame, &c.bbox, cfg.patch_side);
            Some(Sample {
                descriptor: scorer.describe(&patch),
                label,
            })
        })
        .collect();
    SampleBucket {
        frame_index,
        samples,
    }
}

/// Scores every candidate of one frame and advances the tracker.
///
/// On success the box is the mean of the top-K, one sample bucket is stored
/// and a short-term update runs. On failure the previous box is kept as is,
/// nothing is stored, and a long-term update runs every `long_interval`
/// frames. On error `state` is left untouched.
pub fn step(
    state: &mut TrackerState,
    frame: &Frame,
    candidates: &CandidateSet,
    scorer: &mut dyn AppearanceScorer,
    cfg: &TrackerConfig,
) -> Result<StepOutcome> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let frame_index = state.frame_index + 1;
    let scored = score_candidates(frame_index, frame, &candidates.boxes, &*scorer, cfg)?;
    let top = select_top_k(&scored, cfg.top_k)?;
    let success = tracking_success(&top, cfg.success_threshold);

    let (bbox, update) = if success {
        let est = estimate_box(&top);
        let bucket = collect_samples(frame_index, frame, &scored, &est, &*scorer, cfg);
        let evicted = state.memory.push(bucket);
        if let Err(e) = scorer.update(&state.memory, cfg.short_window) {
            state.memory.undo_push(evicted);
            return Err(e);
        }
        (est, Some(ModelUpdate::ShortTerm))
    } else if frame_index.is_multiple_of(cfg.long_interval) {
        scorer.update(&state.memory, cfg.long_window)?;
        (state.current_box, Some(ModelUpdate::LongTerm))
    } else {
        (state.current_box, None)
    };

    state.current_box = bbox;
    state.frame_index = frame_index;
    state.last_success = success;
    Ok(StepOutcome {
        bbox,
        success,
        top,
        update,
    })
}

fn score_candidates(
    frame_index: usize,
    frame: &Frame,
    boxes: &[BoundingBox],
    scorer: &dyn AppearanceScorer,
    cfg: &TrackerConfig,
) -> Result<Vec<ScoredCandidate>> {
    let blank = Frame::new(2, 2);
    boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let score = if scorer.needs_patches() {
                scorer.score(frame_index, b, &crop_resize(frame, b, cfg.patch_side))?
            } else {
                scorer.score(frame_index, b, &blank)?
            };
            if !score.is_finite() {
                return Err(Error::Backend(format!("non-finite score for candidate {i}")));
            }
            Ok(ScoredCandidate {
                bbox: *b,
                score,
                source_index: i,
            })
        })
        .collect()
}
