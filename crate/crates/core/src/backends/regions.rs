use image::{ImageBuffer, Luma};
use imageproc::region_labelling::{connected_components, Connectivity};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Frame};
use crate::opn::{Proposal, ProposalSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionSourceConfig {
    /// Quantization levels per channel; each level count is also used with
    /// bins shifted by half a bin, so a colour near a bin edge in one
    /// quantization sits mid-bin in the other.
    pub levels: Vec<u32>,
    /// Components smaller than this fraction of the frame are dropped.
    pub min_area_fraction: f64,
    /// Components larger than this fraction of the frame are dropped.
    pub max_area_fraction: f64,
}

impl Default for RegionSourceConfig {
    fn default() -> Self {
        Self {
            levels: vec![3, 4, 5, 6],
            min_area_fraction: 0.002,
            max_area_fraction: 0.5,
        }
    }
}

impl RegionSourceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.iter().any(|&l| !(2..=16).contains(&l)) {
            return Err(Error::InvalidConfig("region levels must lie in 2..=16".into()));
        }
        if !(0.0 <= self.min_area_fraction && self.min_area_fraction <= self.max_area_fraction && self.max_area_fraction <= 1.0) {
            return Err(Error::InvalidConfig("region area fractions must satisfy 0 <= min <= max <= 1".into()));
        }
        Ok(())
    }
}

/// Class-agnostic proposals from colour-homogeneous regions: the enclosing
/// boxes of the 8-connected components of the quantized frame.
#[derive(Debug, Clone)]
pub struct RegionProposalSource {
    cfg: RegionSourceConfig,
}

pub fn region_proposal_source(cfg: RegionSourceConfig) -> Result<RegionProposalSource> {
    cfg.validate()?;
    Ok(RegionProposalSource { cfg })
}

fn component_boxes(frame: &Frame, levels: u32, shift: u32, min_area: usize, max_area: usize) -> Vec<(BoundingBox, usize)> {
    let (w, h) = frame.dims();
    let width = 256u32.div_ceil(levels);
    let q = |c: u8| ((c as u32 + shift) / width) as u16;
    let n = levels as u16 + 1;
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let [r, g, b] = frame.pixel(x as usize, y as usize);
        Luma([(q(r) * n + q(g)) * n + q(b)])
    });
    let labels = connected_components(&img, Connectivity::Eight, Luma([u16::MAX]));
    // (x0, y0, x1, y1, area) per label.
    let mut stats: Vec<(usize, usize, usize, usize, usize)> = Vec::new();
    for (x, y, l) in labels.enumerate_pixels() {
        let l = l[0] as usize;
        if l == 0 {
            continue;
        }
        if l > stats.len() {
            stats.resize(l, (usize::MAX, usize::MAX, 0, 0, 0));
        }
        let s = &mut stats[l - 1];
        let (x, y) = (x as usize, y as usize);
        s.0 = s.0.min(x);
        s.1 = s.1.min(y);
        s.2 = s.2.max(x + 1);
        s.3 = s.3.max(y + 1);
        s.4 += 1;
    }
    stats
        .into_iter()
        .filter(|s| s.4 >= min_area && s.4 <= max_area)
        .map(|(x0, y0, x1, y1, a)| (BoundingBox::new(x0 as f64, y0 as f64, (x1 - x0) as f64, (y1 - y0) as f64), a))
        .collect()
}

impl ProposalSource for RegionProposalSource {
    fn propose(&self, frame: &Frame, _frame_index: usize) -> Result<Vec<Proposal>> {
        let area = (frame.width() * frame.height()) as f64;
        let min_area = (self.cfg.min_area_fraction * area).ceil().max(1.0) as usize;
        let max_area = (self.cfg.max_area_fraction * area).floor() as usize;
        let mut out = Vec::new();
        for &levels in &self.cfg.levels {
            let half = 256u32.div_ceil(levels) / 2;
            for shift in [0, half] {
                for (b, a) in component_boxes(frame, levels, shift, min_area, max_area) {
                    // Objectness: how much of its box the region fills.
                    out.push(Proposal::new(b, a as f64 / b.area()));
                }
            }
        }
        Ok(out)
    }
}

/// Concatenates the proposals of several sources, in order.
pub struct ProposalUnion {
    sources: Vec<Box<dyn ProposalSource>>,
}

impl ProposalUnion {
    pub fn new(sources: Vec<Box<dyn ProposalSource>>) -> Self {
        Self { sources }
    }
}

impl ProposalSource for ProposalUnion {
    fn propose(&self, frame: &Frame, frame_index: usize) -> Result<Vec<Proposal>> {
        let mut out = Vec::new();
        for s in &self.sources {
            out.extend(s.propose(frame, frame_index)?);
        }
        Ok(out)
    }
}
