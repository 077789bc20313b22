use imageproc::distance_transform::Norm;
use imageproc::morphology::{dilate, erode};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, BoundingBox};

/// Parameters of the Gaussian box sampler used for candidate fill-up and
/// for box perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianSampleConfig {
    /// Center-offset standard deviation as a fraction of `(w + h) / 2`.
    pub spatial_sigma: f64,
    /// Standard deviation of the scale exponent `k`.
    pub scale_sigma: f64,
    /// Width and height are multiplied by `scale_base^k`.
    pub scale_base: f64,
    /// `|k|` is clipped to this many steps.
    pub max_scale_steps: f64,
}

impl Default for GaussianSampleConfig {
    fn default() -> Self {
        Self {
            spatial_sigma: 0.1,
            scale_sigma: 1.5,
            scale_base: 1.05,
            max_scale_steps: 2.0,
        }
    }
}

impl GaussianSampleConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.spatial_sigma >= 0.0
            && self.scale_sigma >= 0.0
            && self.scale_base > 0.0
            && self.max_scale_steps >= 0.0
            && [self.spatial_sigma, self.scale_sigma, self.scale_base, self.max_scale_steps]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("gaussian sampling {self:?}")))
        }
    }
}

fn draw_one<R: Rng + ?Sized>(b: &BoundingBox, cfg: &GaussianSampleConfig, rng: &mut R) -> BoundingBox {
    let d = (b.w + b.h) / 2.0;
    let nx: f64 = StandardNormal.sample(rng);
    let ny: f64 = StandardNormal.sample(rng);
    let nk: f64 = StandardNormal.sample(rng);
    let dx = nx * cfg.spatial_sigma * d;
    let dy = ny * cfg.spatial_sigma * d;
    let k = (nk * cfg.scale_sigma).clamp(-cfg.max_scale_steps, cfg.max_scale_steps);
    let s = cfg.scale_base.powf(k);
    let w = b.w * s;
    let h = b.h * s;
    // Written relative to the corner so zero offsets reproduce `b` exactly.
    BoundingBox::new(
        b.x + dx + b.w * (1.0 - s) / 2.0,
        b.y + dy + b.h * (1.0 - s) / 2.0,
        w,
        h,
    )
}

/// `n` boxes around `b`: per-axis Normal center offsets and a clipped
/// log-normal joint rescale of width and height.
pub fn gaussian_box_samples<R: Rng + ?Sized>(
    b: &BoundingBox,
    n: usize,
    cfg: &GaussianSampleConfig,
    rng: &mut R,
) -> Vec<BoundingBox> {
    (0..n).map(|_| draw_one(b, cfg, rng)).collect()
}

/// A single perturbed copy of `b`, as the tracker would plausibly report it.
pub fn random_shift<R: Rng + ?Sized>(b: &BoundingBox, cfg: &GaussianSampleConfig, rng: &mut R) -> BoundingBox {
    draw_one(b, cfg, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradeConfig {
    /// Morphology radius is drawn uniformly from `0..=max_radius`.
    pub max_radius: u8,
    /// Probability of flipping each pixel of the boundary band.
    pub flip_rate: f64,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self {
            max_radius: 3,
            flip_rate: 0.05,
        }
    }
}

/// Simulates an imperfect previous prediction: random dilation or erosion
/// followed by random flips in a one-pixel band around the new boundary.
pub fn degrade_mask<R: Rng + ?Sized>(mask: &BinaryMask, rng: &mut R) -> BinaryMask {
    degrade_mask_with(mask, &DegradeConfig::default(), rng)
}

pub fn degrade_mask_with<R: Rng + ?Sized>(
    mask: &BinaryMask,
    cfg: &DegradeConfig,
    rng: &mut R,
) -> BinaryMask {
    let radius: u8 = rng.random_range(0..=cfg.max_radius);
    let grow: bool = rng.random();
    if mask.is_empty() {
        return mask.clone();
    }
    let gray = mask.to_gray();
    let morphed = match (radius, grow) {
        (0, _) => gray,
        (r, true) => dilate(&gray, Norm::LInf, r),
        (r, false) => erode(&gray, Norm::LInf, r),
    };
    let mut out = BinaryMask::from_gray(&morphed);
    if cfg.flip_rate <= 0.0 {
        return out;
    }
    let band = boundary_band(&out);
    for (i, in_band) in band.into_iter().enumerate() {
        if in_band && rng.random_bool(cfg.flip_rate.min(1.0)) {
            let (x, y) = (i % out.width(), i / out.width());
            let v = out.get(x, y);
            out.set(x, y, !v);
        }
    }
    out
}

/// Pixels whose 4-neighbourhood contains both labels.
fn boundary_band(mask: &BinaryMask) -> Vec<bool> {
    let (w, h) = mask.dims();
    let mut band = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let v = mask.get(x, y);
            let differs = (x > 0 && mask.get(x - 1, y) != v)
                || (x + 1 < w && mask.get(x + 1, y) != v)
                || (y > 0 && mask.get(x, y - 1) != v)
                || (y + 1 < h && mask.get(x, y + 1) != v);
            band[y * w + x] = differs;
        }
    }
    band
}
