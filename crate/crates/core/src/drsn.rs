//! Segmentation stage: gathers the annotated first frame plus recent
//! predictions as image-mask references, crops the current frame around the
//! tracked box, runs a [`MaskSegmenter`] and pastes its output back into the
//! frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    crop_resize, crop_resize_mask, expand_box, paste_back, BinaryMask, BoundingBox, Frame,
    LabelMap, ProbabilityMap,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    /// Spacing in frames between dynamic references.
    pub interval: usize,
    /// Number of dynamic references; the look-back window is
    /// `n_dynamic * interval` frames.
    pub n_dynamic: usize,
    /// Boxes are scaled by this factor around their center before cropping.
    pub expand: f64,
    pub patch_side: usize,
    pub fg_threshold: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            interval: 2,
            n_dynamic: 2,
            expand: 1.5,
            patch_side: 256,
            fg_threshold: 0.5,
        }
    }
}

impl ReferenceConfig {
    pub fn window(&self) -> usize {
        self.n_dynamic * self.interval
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("references: {m}")));
        if self.interval < 1 {
            return bad("interval must be at least 1");
        }
        if !(self.expand >= 1.0 && self.expand.is_finite()) {
            return bad("expand must be >= 1");
        }
        if self.patch_side < 2 {
            return bad("patch_side must be at least 2");
        }
        if !(self.fg_threshold > 0.0 && self.fg_threshold < 1.0) {
            return bad("fg_threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Square RGB patch with its mask channel and the frame box it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMaskPatch {
    pub image: Frame,
    pub mask: BinaryMask,
    pub origin_box: BoundingBox,
    /// Frame the image was cut from.
    pub image_frame: usize,
    /// Frame whose annotation or prediction fills the mask channel.
    pub mask_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    /// Index of the frame being segmented.
    pub frame_index: usize,
    /// Annotated first frame.
    pub static_ref: ImageMaskPatch,
    /// Recent predictions, oldest first.
    pub dynamic: Vec<ImageMaskPatch>,
    /// Current frame with the previous prediction, cut around the tracked box.
    pub current: ImageMaskPatch,
}

/// Reference-guided mask predictor.
pub trait MaskSegmenter: Send + Sync {
    fn adapt_to_first_frame(&mut self, _static_ref: &ImageMaskPatch) -> Result<()> {
        Ok(())
    }

    /// Foreground probability for every pixel of `refs.current`, at patch
    /// resolution.
    fn segment(&self, refs: &ReferenceSet) -> Result<ProbabilityMap>;
}

#[derive(Debug, Clone, PartialEq)]
struct HistoryEntry {
    mask: BinaryMask,
    bbox: Option<BoundingBox>,
    reference: Option<ImageMaskPatch>,
}

/// Past predictions of one object, frame 1 being the annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectHistory {
    entries: Vec<HistoryEntry>,
}

impl ObjectHistory {
    pub fn new(first_frame: &Frame, annotation: &BinaryMask, cfg: &ReferenceConfig) -> Result<Self> {
        let reference = build_reference_pair(first_frame, annotation, 1, cfg)?;
        Ok(Self {
            entries: vec![HistoryEntry {
                mask: annotation.clone(),
                bbox: annotation.enclosing_box(),
                reference: Some(reference),
            }],
        })
    }

    /// Number of frames recorded; the next frame to segment is `len() + 1`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Mask predicted for 1-based frame `index`.
    pub fn mask(&self, index: usize) -> Option<&BinaryMask> {
        self.entry(index).map(|e| &e.mask)
    }

    pub fn bbox(&self, index: usize) -> Option<BoundingBox> {
        self.entry(index).and_then(|e| e.bbox)
    }

    pub fn static_reference(&self) -> &ImageMaskPatch {
        self.entries[0]
            .reference
            .as_ref()
            .expect("first entry always has a reference")
    }

    fn entry(&self, index: usize) -> Option<&HistoryEntry> {
        index.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    /// Reference for frame `index`; frames whose prediction is empty fall
    /// back to the static pair.
    fn reference(&self, index: usize) -> &ImageMaskPatch {
        self.entry(index)
            .and_then(|e| e.reference.as_ref())
            .unwrap_or_else(|| self.static_reference())
    }

    fn push(&mut self, frame: &Frame, mask: BinaryMask, cfg: &ReferenceConfig) {
        let reference = if mask.is_empty() || cfg.n_dynamic == 0 {
            None
        } else {
            let index = self.entries.len() + 1;
            Some(build_reference_pair(frame, &mask, index, cfg).expect("mask is non-empty"))
        };
        self.entries.push(HistoryEntry {
            bbox: mask.enclosing_box(),
            mask,
            reference,
        });
        // Patches older than the look-back window can never be selected again.
        let next = self.entries.len() + 1;
        let oldest_needed = next.saturating_sub(cfg.window()).max(2);
        for idx in 2..oldest_needed {
            if let Some(e) = self.entries.get_mut(idx - 1) {
                e.reference = None;
            }
        }
    }
}

/// Dynamic reference frames for frame `n`:
/// `max(1, n - k * interval)` for `k = n_dynamic, ..., 1`.
pub fn select_reference_indices(n: usize, cfg: &ReferenceConfig) -> Vec<usize> {
    assert!(n >= 2, "frame 1 is the annotation");
    (1..=cfg.n_dynamic)
        .rev()
        .map(|k| n.saturating_sub(k * cfg.interval).max(1))
        .collect()
}

/// Cuts a reference pair around the expanded enclosing box of `mask`.
pub fn build_reference_pair(
    frame: &Frame,
    mask: &BinaryMask,
    frame_index: usize,
    cfg: &ReferenceConfig,
) -> Result<ImageMaskPatch> {
    check_dims(frame, mask)?;
    let tight = mask.enclosing_box().ok_or(Error::EmptyReferenceMask)?;
    let mut patch = cut_patch(frame, mask, expand_box(&tight, cfg.expand), cfg.patch_side);
    patch.image_frame = frame_index;
    patch.mask_frame = frame_index;
    Ok(patch)
}

/// Cuts frame `frame_index` and the previous prediction around the expanded
/// tracker box.
pub fn build_current_input(
    frame: &Frame,
    prev_mask: &BinaryMask,
    frame_index: usize,
    otn_box: &BoundingBox,
    cfg: &ReferenceConfig,
) -> Result<ImageMaskPatch> {
    check_dims(frame, prev_mask)?;
    let mut patch = cut_patch(frame, prev_mask, expand_box(otn_box, cfg.expand), cfg.patch_side);
    patch.image_frame = frame_index;
    patch.mask_frame = frame_index.saturating_sub(1);
    Ok(patch)
}

fn cut_patch(frame: &Frame, mask: &BinaryMask, origin_box: BoundingBox, side: usize) -> ImageMaskPatch {
    ImageMaskPatch {
        image: crop_resize(frame, &origin_box, side),
        mask: crop_resize_mask(mask, &origin_box, side),
        origin_box,
        image_frame: 0,
        mask_frame: 0,
    }
}

fn check_dims(frame: &Frame, mask: &BinaryMask) -> Result<()> {
    if frame.dims() != mask.dims() {
        return Err(Error::DimensionMismatch(format!(
            "frame {:?} vs mask {:?}",
            frame.dims(),
            mask.dims()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub mask: BinaryMask,
    /// Full-frame foreground probability, zero outside the pasted region.
    pub probability: ProbabilityMap,
    pub origin_box: BoundingBox,
}

/// Segments frame `frame_idx` of one object and appends the result to its
/// history. On error the history is unchanged.
pub fn segment_object(
    history: &mut ObjectHistory,
    frame: &Frame,
    frame_idx: usize,
    otn_box: &BoundingBox,
    segmenter: &dyn MaskSegmenter,
    cfg: &ReferenceConfig,
) -> Result<Segmentation> {
    if frame_idx < 2 || history.len() != frame_idx - 1 {
        return Err(Error::Data(format!(
            "history holds {} frames, cannot segment frame {frame_idx}",
            history.len()
        )));
    }
    let prev_mask = history.mask(frame_idx - 1).expect("checked length");
    let refs = ReferenceSet {
        frame_index: frame_idx,
        static_ref: history.static_reference().clone(),
        dynamic: select_reference_indices(frame_idx, cfg)
            .into_iter()
            .map(|i| history.reference(i).clone())
            .collect(),
        current: build_current_input(frame, prev_mask, frame_idx, otn_box, cfg)?,
    };
    let patch_prob = segmenter.segment(&refs)?;
    if patch_prob.dims() != (cfg.patch_side, cfg.patch_side) {
        return Err(Error::Backend(format!(
            "segmenter returned {:?}, expected {}x{}",
            patch_prob.dims(),
            cfg.patch_side,
            cfg.patch_side
        )));
    }
    let probability = paste_back(&patch_prob, &refs.current.origin_box, frame.width(), frame.height());
    let mask = probability.threshold(cfg.fg_threshold as f32);
    history.push(frame, mask.clone(), cfg);
    Ok(Segmentation {
        mask,
        probability,
        origin_box: refs.current.origin_box,
    })
}

/// Joins per-object probability maps into one label map: each pixel takes
/// the id with the highest probability at or above `fg_threshold`, ties to
/// the lower id, else background.
pub fn merge_objects(per_object: &[(u8, &ProbabilityMap)], fg_threshold: f64) -> Result<LabelMap> {
    let Some((_, first)) = per_object.first() else {
        return Err(Error::Data("no objects to merge".into()));
    };
    let (w, h) = first.dims();
    let mut seen = [false; 256];
    for (id, p) in per_object {
        if *id == 0 {
            return Err(Error::Data("object id 0 is reserved for background".into()));
        }
        if std::mem::replace(&mut seen[*id as usize], true) {
            return Err(Error::DuplicateId(*id));
        }
        if p.dims() != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "object {id}: {:?} vs {:?}",
                p.dims(),
                (w, h)
            )));
        }
    }
    let t = fg_threshold as f32;
    let mut labels = vec![0u8; w * h];
    for (i, label) in labels.iter_mut().enumerate() {
        let mut best: Option<(f32, u8)> = None;
        for (id, p) in per_object {
            let v = p.data()[i];
            if v < t {
                continue;
            }
            best = match best {
                Some((bv, bid)) if bv > v || (bv == v && bid < *id) => Some((bv, bid)),
                _ => Some((v, *id)),
            };
        }
        *label = best.map_or(0, |(_, id)| id);
    }
    LabelMap::from_labels(w, h, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: usize, x0: usize, y0: usize, s: usize) -> BinaryMask {
        BinaryMask::from_fn(side, side, |x, y| (x0..x0 + s).contains(&x) && (y0..y0 + s).contains(&y))
    }

    #[test]
    fn reference_indices() {
        let cfg = ReferenceConfig::default();
        assert_eq!(select_reference_indices(10, &cfg), vec![6, 8]);
        assert_eq!(select_reference_indices(2, &cfg), vec![1, 1]);
        assert_eq!(select_reference_indices(7, &cfg), vec![3, 5]);
        let three = ReferenceConfig { n_dynamic: 3, ..cfg };
        assert_eq!(select_reference_indices(10, &three), vec![4, 6, 8]);
        let none = ReferenceConfig { n_dynamic: 0, ..cfg };
        assert!(select_reference_indices(10, &none).is_empty());
    }

    #[test]
    fn reference_pair_area_ratio() {
        let frame = Frame::filled(200, 200, [50, 60, 70]);
        let mask = square(200, 70, 70, 60);
        let cfg = ReferenceConfig::default();
        let pair = build_reference_pair(&frame, &mask, 1, &cfg).unwrap();
        let ratio = pair.mask.count() as f64 / (256.0 * 256.0);
        assert!((ratio - 1.0 / 2.25).abs() < 0.05, "{ratio}");

        let tight = ReferenceConfig { expand: 1.0, ..cfg };
        let pair = build_reference_pair(&frame, &mask, 1, &tight).unwrap();
        assert_eq!(pair.mask.count(), 256 * 256);

        let empty = BinaryMask::new(200, 200);
        assert!(matches!(
            build_reference_pair(&frame, &empty, 1, &cfg),
            Err(Error::EmptyReferenceMask)
        ));
    }

    #[test]
    fn current_input_geometry() {
        let frame = Frame::filled(100, 100, [255, 255, 255]);
        let cfg = ReferenceConfig { patch_side: 64, ..Default::default() };
        let mask = square(100, 30, 30, 20);
        let b = mask.enclosing_box().unwrap();
        let cur = build_current_input(&frame, &mask, 2, &b, &cfg).unwrap();
        let pair = build_reference_pair(&frame, &mask, 1, &cfg).unwrap();
        assert_eq!((&cur.image, &cur.mask, cur.origin_box), (&pair.image, &pair.mask, pair.origin_box));
        assert_eq!((cur.image_frame, cur.mask_frame), (2, 1));

        let empty = BinaryMask::new(100, 100);
        let cur = build_current_input(&frame, &empty, 2, &b, &cfg).unwrap();
        assert!(cur.mask.is_empty());

        // Expanded box spans x in [-40, 40): the left half of the patch is padding.
        let half_out = BoundingBox::new(-20.0, 30.0, 40.0, 40.0);
        let full = BinaryMask::from_fn(100, 100, |_, _| true);
        let cur = build_current_input(&frame, &full, 2, &half_out, &cfg).unwrap();
        let black = cur.image.pixels().filter(|p| p[0] < 128).count();
        let background = 64 * 64 - cur.mask.count();
        assert_eq!(background, 32 * 64);
        assert!((black as f64 - 32.0 * 64.0).abs() <= 0.02 * 64.0 * 64.0);
    }

    struct Constant(f32);

    impl MaskSegmenter for Constant {
        fn segment(&self, refs: &ReferenceSet) -> Result<ProbabilityMap> {
            let (w, h) = refs.current.mask.dims();
            ProbabilityMap::from_data(w, h, vec![self.0; w * h])
        }
    }

    /// Records which dynamic references it was handed.
    struct Probe(std::sync::Mutex<Vec<Vec<BoundingBox>>>);

    impl MaskSegmenter for Probe {
        fn segment(&self, refs: &ReferenceSet) -> Result<ProbabilityMap> {
            self.0
                .lock()
                .unwrap()
                .push(refs.dynamic.iter().map(|r| r.origin_box).collect());
            Ok(ProbabilityMap::from_mask(&refs.current.mask))
        }
    }

    #[test]
    fn zero_probability_gives_empty_mask() {
        let frame = Frame::filled(64, 64, [1, 2, 3]);
        let cfg = ReferenceConfig { patch_side: 32, ..Default::default() };
        let mask = square(64, 10, 10, 20);
        let mut hist = ObjectHistory::new(&frame, &mask, &cfg).unwrap();
        let b = mask.enclosing_box().unwrap();
        let seg = segment_object(&mut hist, &frame, 2, &b, &Constant(0.0), &cfg).unwrap();
        assert!(seg.mask.is_empty());
        assert_eq!(hist.len(), 2);
    }

    #[test]
    fn lost_frames_fall_back_to_static_reference() {
        let frame = Frame::filled(64, 64, [1, 2, 3]);
        let cfg = ReferenceConfig { patch_side: 32, ..Default::default() };
        let mask = square(64, 10, 10, 20);
        let mut hist = ObjectHistory::new(&frame, &mask, &cfg).unwrap();
        let b = BoundingBox::new(20.0, 20.0, 20.0, 20.0);
        segment_object(&mut hist, &frame, 2, &b, &Constant(1.0), &cfg).unwrap();
        segment_object(&mut hist, &frame, 3, &b, &Constant(0.0), &cfg).unwrap();
        let probe = Probe(Default::default());
        segment_object(&mut hist, &frame, 4, &b, &probe, &cfg).unwrap();
        segment_object(&mut hist, &frame, 5, &b, &probe, &cfg).unwrap();
        let stat = hist.static_reference().origin_box;
        let second = expand_box(&hist.bbox(2).unwrap(), cfg.expand);
        assert_ne!(stat, second);
        let seen = probe.0.lock().unwrap();
        assert_eq!(seen[0], vec![stat, second]);
        assert_eq!(seen[1], vec![stat, stat]);
    }

    #[test]
    fn second_frame_uses_first_frame_twice() {
        let frame = Frame::filled(64, 64, [1, 2, 3]);
        let cfg = ReferenceConfig { patch_side: 32, ..Default::default() };
        let mask = square(64, 10, 10, 20);
        let mut hist = ObjectHistory::new(&frame, &mask, &cfg).unwrap();
        let probe = Probe(Default::default());
        let b = BoundingBox::new(12.0, 12.0, 20.0, 20.0);
        segment_object(&mut hist, &frame, 2, &b, &probe, &cfg).unwrap();
        let stat = hist.static_reference().origin_box;
        assert_eq!(probe.0.lock().unwrap()[0], vec![stat, stat]);
    }

    #[test]
    fn history_must_be_contiguous() {
        let frame = Frame::filled(32, 32, [0, 0, 0]);
        let cfg = ReferenceConfig { patch_side: 16, ..Default::default() };
        let mask = square(32, 4, 4, 8);
        let mut hist = ObjectHistory::new(&frame, &mask, &cfg).unwrap();
        let b = mask.enclosing_box().unwrap();
        assert!(segment_object(&mut hist, &frame, 3, &b, &Constant(1.0), &cfg).is_err());
        assert_eq!(hist.len(), 1);
    }

    #[test]
    fn merge_rules() {
        let mk = |v: &[f32]| ProbabilityMap::from_data(v.len(), 1, v.to_vec()).unwrap();
        let single = mk(&[0.2, 0.9, 0.5]);
        assert_eq!(merge_objects(&[(3, &single)], 0.5).unwrap().labels(), &[0, 3, 3]);

        let a = mk(&[0.9, 0.0, 0.8, 0.7]);
        let b = mk(&[0.0, 0.9, 0.6, 0.7]);
        let merged = merge_objects(&[(5, &b), (2, &a)], 0.5).unwrap();
        assert_eq!(merged.labels(), &[2, 5, 2, 2]);

        assert!(matches!(merge_objects(&[(2, &a), (2, &b)], 0.5), Err(Error::DuplicateId(2))));
    }
}
