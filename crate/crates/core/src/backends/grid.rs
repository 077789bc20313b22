use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Frame};
use crate::opn::{Proposal, ProposalSource};

/// Sliding-window proposals. Scales are fractions of the frame size, so the
/// box count does not depend on resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSourceConfig {
    pub scales: Vec<f64>,
    /// Width / height multipliers applied as `(sqrt(a), 1 / sqrt(a))`.
    pub aspect_ratios: Vec<f64>,
    /// Window step as a fraction of the window size.
    pub stride_fraction: f64,
}

impl Default for GridSourceConfig {
    fn default() -> Self {
        Self {
            scales: vec![0.1, 0.15, 0.22, 0.33, 0.5, 0.75, 1.0],
            aspect_ratios: vec![0.5, 1.0, 2.0],
            stride_fraction: 0.5,
        }
    }
}

impl GridSourceConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: &[f64]| !v.is_empty() && v.iter().all(|&s| s > 0.0 && s.is_finite());
        if !positive(&self.scales) || !positive(&self.aspect_ratios) {
            return Err(Error::InvalidConfig("grid scales and aspect ratios must be non-empty and positive".into()));
        }
        if !(self.stride_fraction > 0.0 && self.stride_fraction.is_finite()) {
            return Err(Error::InvalidConfig("stride_fraction must be positive".into()));
        }
        Ok(())
    }

    /// Number of boxes emitted per frame.
    pub fn box_count(&self) -> usize {
        self.windows(1.0, 1.0).len()
    }

    /// Picks the stride whose box count is closest to `target`, keeping
    /// scales and aspect ratios.
    pub fn with_target(mut self, target: usize) -> Self {
        let (mut lo, mut hi) = (1e-3, 4.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            self.stride_fraction = mid;
            if self.box_count() > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let below = Self { stride_fraction: hi, ..self.clone() };
        let above = Self { stride_fraction: lo, ..self };
        if above.box_count().abs_diff(target) < below.box_count().abs_diff(target) {
            above
        } else {
            below
        }
    }

    fn windows(&self, width: f64, height: f64) -> Vec<BoundingBox> {
        let mut out = Vec::new();
        for &s in &self.scales {
            for &a in &self.aspect_ratios {
                let w = (s * width * a.sqrt()).min(width);
                let h = (s * height / a.sqrt()).min(height);
                let xs = positions(width, w, self.stride_fraction * w);
                let ys = positions(height, h, self.stride_fraction * h);
                for &y in &ys {
                    for &x in &xs {
                        out.push(BoundingBox::new(x, y, w, h));
                    }
                }
            }
        }
        out
    }
}

/// Window origins from 0 in steps of `stride`, with the last one flush
/// against the far edge.
fn positions(extent: f64, size: f64, stride: f64) -> Vec<f64> {
    let room = extent - size;
    if room <= 1e-9 {
        return vec![0.0];
    }
    let n = (room / stride + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|i| i as f64 * stride).collect();
    if room - n as f64 * stride > 1e-9 {
        out.push(room);
    }
    out
}

#[derive(Debug, Clone)]
pub struct GridProposalSource {
    cfg: GridSourceConfig,
}

pub fn grid_proposal_source(cfg: GridSourceConfig) -> Result<GridProposalSource> {
    cfg.validate()?;
    Ok(GridProposalSource { cfg })
}

impl ProposalSource for GridProposalSource {
    fn propose(&self, frame: &Frame, _frame_index: usize) -> Result<Vec<Proposal>> {
        let (w, h) = (frame.width() as f64, frame.height() as f64);
        Ok(self
            .cfg
            .windows(w, h)
            .into_iter()
            .map(|b| Proposal::new(b, 0.0))
            .collect())
    }
}
