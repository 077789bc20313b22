use image::{GrayImage, Luma};
use imageproc::distance_transform::euclidean_squared_distance_transform;
use imageproc::region_labelling::{connected_components, Connectivity};
use serde::{Deserialize, Serialize};

use crate::backends::ColorHistogram;
use crate::drsn::{ImageMaskPatch, MaskSegmenter, ReferenceSet};
use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, ProbabilityMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorSegmenterConfig {
    pub bins: usize,
    /// Weight of each dynamic reference relative to the static one.
    pub dynamic_weight: f64,
    /// Spatial prior decay length as a fraction of the patch side.
    pub tau_fraction: f64,
    pub fg_threshold: f64,
}

impl Default for ColorSegmenterConfig {
    fn default() -> Self {
        Self {
            bins: 16,
            dynamic_weight: 2.0,
            tau_fraction: 0.15,
            fg_threshold: 0.5,
        }
    }
}

/// Reference-guided colour model. Foreground and background histograms are
/// pooled over the static and dynamic references; the per-pixel posterior
/// is damped by distance to the previous mask, and only the largest
/// confident component is kept.
#[derive(Debug, Clone)]
pub struct ColorModelSegmenter {
    cfg: ColorSegmenterConfig,
}

pub fn color_model_segmenter(cfg: ColorSegmenterConfig) -> Result<ColorModelSegmenter> {
    if !(cfg.tau_fraction > 0.0 && cfg.dynamic_weight >= 0.0 && cfg.fg_threshold > 0.0 && cfg.fg_threshold < 1.0) {
        return Err(Error::InvalidConfig(format!("colour segmenter {cfg:?}")));
    }
    if !(1..=256).contains(&cfg.bins) {
        return Err(Error::InvalidConfig(format!("bins {}", cfg.bins)));
    }
    Ok(ColorModelSegmenter { cfg })
}

impl ColorModelSegmenter {
    fn accumulate(&self, pair: &ImageMaskPatch, weight: f64, fg: &mut ColorHistogram, bg: &mut ColorHistogram) {
        for (p, &m) in pair.image.pixels().zip(pair.mask.bits()) {
            if m {
                fg.add(p, weight);
            } else {
                bg.add(p, weight);
            }
        }
    }

    /// `exp(-d / tau)` with `d` the distance to the nearest mask pixel; all
    /// ones when the mask is empty.
    fn spatial_prior(&self, mask: &BinaryMask) -> Vec<f64> {
        let n = mask.width() * mask.height();
        if mask.is_empty() {
            return vec![1.0; n];
        }
        let tau = self.cfg.tau_fraction * mask.width() as f64;
        let dist2 = euclidean_squared_distance_transform(&mask.to_gray());
        dist2.pixels().map(|d| (-d[0].sqrt() / tau).exp()).collect()
    }
}

impl MaskSegmenter for ColorModelSegmenter {
    fn segment(&self, refs: &ReferenceSet) -> Result<ProbabilityMap> {
        let mut fg = ColorHistogram::new(self.cfg.bins);
        let mut bg = ColorHistogram::new(self.cfg.bins);
        self.accumulate(&refs.static_ref, 1.0, &mut fg, &mut bg);
        for pair in &refs.dynamic {
            self.accumulate(pair, self.cfg.dynamic_weight, &mut fg, &mut bg);
        }

        let current = &refs.current;
        let (w, h) = current.image.dims();
        let prior = self.spatial_prior(&current.mask);
        let prob: Vec<f32> = current
            .image
            .pixels()
            .zip(&prior)
            .map(|(p, &s)| {
                let pf = fg.probability(p);
                let pb = bg.probability(p);
                (s * pf / (pf + pb)) as f32
            })
            .collect();

        let t = self.cfg.fg_threshold as f32;
        let above = GrayImage::from_fn(w as u32, h as u32, |x, y| {
            Luma([if prob[y as usize * w + x as usize] >= t { 255 } else { 0 }])
        });
        let labels = connected_components(&above, Connectivity::Four, Luma([0u8]));
        let mut sizes = vec![0usize; 1];
        for l in labels.pixels() {
            let l = l[0] as usize;
            if l >= sizes.len() {
                sizes.resize(l + 1, 0);
            }
            sizes[l] += 1;
        }
        let keep = (1..sizes.len()).max_by_key(|&l| (sizes[l], std::cmp::Reverse(l)));
        let prob = prob
            .into_iter()
            .zip(labels.pixels())
            .map(|(p, l)| match keep {
                Some(k) if l[0] != 0 && l[0] as usize != k => 0.0,
                _ => p,
            })
            .collect();
        ProbabilityMap::from_data(w, h, prob)
    }
}
