use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{crop_resize, BinaryMask, BoundingBox, Frame};
use crate::otn::{AppearanceScorer, Descriptor, SampleLabel, SampleMemory};

/// Joint RGB histogram over `bins³` cells with add-one smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorHistogram {
    bins: usize,
    counts: Vec<f64>,
    total: f64,
}

impl ColorHistogram {
    pub fn new(bins: usize) -> Self {
        assert!((1..=256).contains(&bins), "bins per channel must be in 1..=256");
        Self {
            bins,
            counts: vec![0.0; bins * bins * bins],
            total: 0.0,
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn cells(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn cell_of(&self, rgb: [u8; 3]) -> usize {
        let q = |c: u8| c as usize * self.bins / 256;
        (q(rgb[0]) * self.bins + q(rgb[1])) * self.bins + q(rgb[2])
    }

    pub fn add(&mut self, rgb: [u8; 3], weight: f64) {
        let i = self.cell_of(rgb);
        self.add_cell(i, weight);
    }

    pub fn add_cell(&mut self, cell: usize, weight: f64) {
        self.counts[cell] += weight;
        self.total += weight;
    }

    /// Smoothed probability of a cell: `(count + 1) / (total + cells)`.
    pub fn cell_probability(&self, cell: usize) -> f64 {
        (self.counts[cell] + 1.0) / (self.total + self.cells() as f64)
    }

    pub fn probability(&self, rgb: [u8; 3]) -> f64 {
        self.cell_probability(self.cell_of(rgb))
    }

    /// Mixture `a_weight * a + (1 - a_weight) * b` of the two normalised
    /// histograms, rescaled to `a`'s total so smoothing strength is kept.
    pub fn mix(a: &ColorHistogram, b: &ColorHistogram, a_weight: f64) -> ColorHistogram {
        assert_eq!(a.bins, b.bins, "histograms differ in bin count");
        if b.total <= 0.0 {
            return a.clone();
        }
        let t = a.total;
        let counts: Vec<f64> = a
            .counts
            .iter()
            .zip(&b.counts)
            .map(|(&ca, &cb)| {
                let pa = if a.total > 0.0 { ca / a.total } else { 0.0 };
                t * (a_weight * pa + (1.0 - a_weight) * cb / b.total)
            })
            .collect();
        let total = counts.iter().sum();
        ColorHistogram {
            bins: a.bins,
            counts,
            total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramScorerConfig {
    pub bins: usize,
    /// Side of the patch used to calibrate the first-frame score.
    pub patch_side: usize,
    /// Weight of the first-frame foreground histogram in every update.
    pub initial_weight: f64,
    /// Same for the background histogram. Negative patches routinely
    /// overlap the target, so adapting the background to them teaches the
    /// model that target colours are background; 1 keeps it fixed.
    pub initial_background_weight: f64,
}

impl Default for HistogramScorerConfig {
    fn default() -> Self {
        Self {
            bins: 16,
            patch_side: 107,
            initial_weight: 0.5,
            initial_background_weight: 1.0,
        }
    }
}

impl HistogramScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=64).contains(&self.bins) || self.patch_side == 0 {
            return Err(Error::InvalidConfig("histogram bins must lie in 2..=64 and patch_side be positive".into()));
        }
        for w in [self.initial_weight, self.initial_background_weight] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidConfig(format!("histogram weight {w} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Colour appearance model. The raw score of a box is the per-pixel log
/// ratio of foreground to background likelihood summed over the box, in
/// units of the first-frame box area, so boxes that crop the object and
/// boxes that swallow background both lose. It is affinely calibrated so
/// the annotated box scores +1 and a background box of the same size about −1.
#[derive(Debug, Clone)]
pub struct HistogramScorer {
    cfg: HistogramScorerConfig,
    initial_fg: ColorHistogram,
    initial_bg: ColorHistogram,
    fg: ColorHistogram,
    bg: ColorHistogram,
    log_ratio: Vec<f64>,
    reference_area: f64,
    gain: f64,
    offset: f64,
}

/// Builds a [`HistogramScorer`] from the annotated first frame.
pub fn histogram_scorer(
    first_frame: &Frame,
    first_mask: &BinaryMask,
    cfg: HistogramScorerConfig,
) -> Result<HistogramScorer> {
    cfg.validate()?;
    let mut scorer = HistogramScorer {
        cfg,
        initial_fg: ColorHistogram::new(cfg.bins),
        initial_bg: ColorHistogram::new(cfg.bins),
        fg: ColorHistogram::new(cfg.bins),
        bg: ColorHistogram::new(cfg.bins),
        log_ratio: Vec::new(),
        reference_area: 1.0,
        gain: 1.0,
        offset: 0.0,
    };
    scorer.adapt_to_first_frame(first_frame, first_mask)?;
    Ok(scorer)
}

impl HistogramScorer {
    pub fn foreground(&self) -> &ColorHistogram {
        &self.fg
    }

    pub fn background(&self) -> &ColorHistogram {
        &self.bg
    }

    fn refresh_lut(&mut self) {
        self.log_ratio = (0..self.fg.cells())
            .map(|i| (self.fg.cell_probability(i) / self.bg.cell_probability(i)).ln())
            .collect();
    }

    fn mean_log_ratio(&self, patch: &Frame) -> f64 {
        let n = (patch.width() * patch.height()) as f64;
        patch
            .pixels()
            .map(|p| self.log_ratio[self.fg.cell_of(p)])
            .sum::<f64>()
            / n
    }
}

impl AppearanceScorer for HistogramScorer {
    fn adapt_to_first_frame(&mut self, frame: &Frame, mask: &BinaryMask) -> Result<()> {
        if frame.dims() != mask.dims() {
            return Err(Error::DimensionMismatch("first frame vs mask".into()));
        }
        let target = mask.enclosing_box().ok_or(Error::EmptyMask)?;
        let mut fg = ColorHistogram::new(self.cfg.bins);
        let mut bg = ColorHistogram::new(self.cfg.bins);
        for (p, &m) in frame.pixels().zip(mask.bits()) {
            if m {
                fg.add(p, 1.0);
            } else {
                bg.add(p, 1.0);
            }
        }
        self.initial_fg = fg.clone();
        self.initial_bg = bg.clone();
        self.fg = fg;
        self.bg = bg;
        self.refresh_lut();

        self.reference_area = target.area();
        let target_raw = self.mean_log_ratio(&crop_resize(frame, &target, self.cfg.patch_side));
        let background_raw = if self.bg.total() > 0.0 {
            self.bg
                .counts()
                .iter()
                .zip(&self.log_ratio)
                .map(|(c, l)| c * l)
                .sum::<f64>()
                / self.bg.total()
        } else {
            target_raw - 2.0
        };
        let spread = target_raw - background_raw;
        self.gain = if spread > 1e-9 { 2.0 / spread } else { 1.0 };
        self.offset = 1.0 - self.gain * target_raw;
        Ok(())
    }

    fn score(&self, _frame_index: usize, bbox: &BoundingBox, patch: &Frame) -> Result<f64> {
        let raw = self.mean_log_ratio(patch) * bbox.area() / self.reference_area;
        Ok(self.gain * raw + self.offset)
    }

    fn describe(&self, patch: &Frame) -> Descriptor {
        let mut hist = ColorHistogram::new(self.cfg.bins);
        for p in patch.pixels() {
            hist.add(p, 1.0);
        }
        Descriptor {
            features: hist
                .counts()
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0.0)
                .map(|(i, &c)| (i as u32, c as f32))
                .collect(),
        }
    }

    fn update(&mut self, memory: &SampleMemory, window: usize) -> Result<()> {
        let mut pos = ColorHistogram::new(self.cfg.bins);
        let mut neg = ColorHistogram::new(self.cfg.bins);
        for bucket in memory.recent(window) {
            for s in &bucket.samples {
                let target = match s.label {
                    SampleLabel::Positive => &mut pos,
                    SampleLabel::Negative => &mut neg,
                };
                for &(cell, v) in &s.descriptor.features {
                    let cell = cell as usize;
                    if cell >= target.cells() {
                        return Err(Error::Backend(format!("descriptor cell {cell} out of range")));
                    }
                    target.add_cell(cell, v as f64);
                }
            }
        }
        self.fg = ColorHistogram::mix(&self.initial_fg, &pos, self.cfg.initial_weight);
        self.bg = ColorHistogram::mix(&self.initial_bg, &neg, self.cfg.initial_background_weight);
        self.refresh_lut();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otn::{Sample, SampleBucket};

    const RED: [u8; 3] = [220, 30, 30];
    const BLUE: [u8; 3] = [30, 40, 200];

    fn red_square_on_blue() -> (Frame, BinaryMask) {
        let inside = |x: usize, y: usize| (40..80).contains(&x) && (30..70).contains(&y);
        let frame = Frame::from_fn(160, 120, |x, y| if inside(x, y) { RED } else { BLUE });
        (frame, BinaryMask::from_fn(160, 120, inside))
    }

    #[test]
    fn smoothed_probabilities_sum_to_one() {
        let mut h = ColorHistogram::new(16);
        for i in 0..500u32 {
            h.add([(i * 7 % 256) as u8, (i * 13 % 256) as u8, (i % 256) as u8], 1.5);
        }
        let sum: f64 = (0..h.cells()).map(|i| h.cell_probability(i)).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let empty = ColorHistogram::new(16);
        let sum: f64 = (0..empty.cells()).map(|i| empty.cell_probability(i)).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn calibration_anchor_and_ordering() {
        let (frame, mask) = red_square_on_blue();
        let scorer = histogram_scorer(&frame, &mask, HistogramScorerConfig::default()).unwrap();
        let gt = mask.enclosing_box().unwrap();
        let patch = |b: &BoundingBox| crop_resize(&frame, b, 107);
        let s_gt = scorer.score(1, &gt, &patch(&gt)).unwrap();
        assert!((s_gt - 1.0).abs() < 1e-9, "{s_gt}");
        for b in [
            BoundingBox::new(0.0, 75.0, 40.0, 40.0),
            BoundingBox::new(100.0, 80.0, 40.0, 40.0),
            BoundingBox::new(110.0, 0.0, 40.0, 40.0),
        ] {
            let s = scorer.score(1, &b, &patch(&b)).unwrap();
            assert!((s + 1.0).abs() < 0.05, "pure background scored {s}");
        }
        // Boxes that crop the object or swallow background both score lower.
        for b in [
            BoundingBox::new(50.0, 40.0, 20.0, 20.0),
            BoundingBox::new(45.0, 30.0, 30.0, 40.0),
            BoundingBox::new(30.0, 20.0, 60.0, 60.0),
            BoundingBox::new(20.0, 10.0, 80.0, 80.0),
        ] {
            let s = scorer.score(1, &b, &patch(&b)).unwrap();
            assert!(s < s_gt, "{b:?} scored {s}");
        }
    }

    #[test]
    fn empty_mask_is_rejected() {
        let (frame, _) = red_square_on_blue();
        let r = histogram_scorer(&frame, &BinaryMask::new(160, 120), HistogramScorerConfig::default());
        assert!(matches!(r, Err(Error::EmptyMask)));
    }

    #[test]
    fn update_with_drifted_positives_raises_their_score() {
        let (frame, mask) = red_square_on_blue();
        let mut scorer = histogram_scorer(&frame, &mask, HistogramScorerConfig::default()).unwrap();
        let drifted = Frame::filled(107, 107, [200, 120, 40]);
        let b = BoundingBox::new(0.0, 0.0, 1.0, 1.0);
        let before = scorer.score(5, &b, &drifted).unwrap();
        let mut memory = SampleMemory::new(20);
        for f in 2..5 {
            memory.push(SampleBucket {
                frame_index: f,
                samples: vec![
                    Sample {
                        descriptor: scorer.describe(&drifted),
                        label: SampleLabel::Positive,
                    },
                    Sample {
                        descriptor: scorer.describe(&Frame::filled(107, 107, BLUE)),
                        label: SampleLabel::Negative,
                    },
                ],
            });
        }
        scorer.update(&memory, 5).unwrap();
        let after = scorer.score(5, &b, &drifted).unwrap();
        assert!(after > before, "{before} -> {after}");
    }
}
