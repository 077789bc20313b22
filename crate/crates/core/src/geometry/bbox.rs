use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel units, `(x, y)` is the top-left corner.
///
/// Coordinates are real-valued so that averaged boxes keep sub-pixel
/// precision; boxes may extend past the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        debug_assert!(
            Self::is_valid_parts(x, y, w, h),
            "invalid box ({x}, {y}, {w}, {h})"
        );
        Self { x, y, w, h }
    }

    /// Returns `None` unless `w > 0`, `h > 0` and all coordinates are finite.
    pub fn try_new(x: f64, y: f64, w: f64, h: f64) -> Option<Self> {
        Self::is_valid_parts(x, y, w, h).then_some(Self { x, y, w, h })
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    fn is_valid_parts(x: f64, y: f64, w: f64, h: f64) -> bool {
        x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0
    }

    pub fn is_valid(&self) -> bool {
        Self::is_valid_parts(self.x, self.y, self.w, self.h)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Half-open containment test, `[x, x + w) × [y, y + h)`.
    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.bottom()
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw > 0.0 && ih > 0.0 {
            iw * ih
        } else {
            0.0
        }
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        iou(self, other)
    }

    /// Scales width and height by `factor` around the same center.
    pub fn expand(&self, factor: f64) -> BoundingBox {
        expand_box(self, factor)
    }

    /// Snaps the box to integer pixel edges: `[x0, x1) × [y0, y1)`, at least
    /// one pixel wide and high.
    pub fn to_pixel_grid(&self) -> PixelRect {
        let x0 = self.x.round() as i64;
        let y0 = self.y.round() as i64;
        let x1 = (self.right().round() as i64).max(x0 + 1);
        let y1 = (self.bottom().round() as i64).max(y0 + 1);
        PixelRect { x0, y0, x1, y1 }
    }
}

/// Integer pixel rectangle `[x0, x1) × [y0, y1)`; may lie partly outside a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl PixelRect {
    pub fn width(&self) -> i64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> i64 {
        self.y1 - self.y0
    }

    /// Intersection with `[0, width) × [0, height)`, or `None` when empty.
    pub fn clip(&self, width: usize, height: usize) -> Option<PixelRect> {
        let r = PixelRect {
            x0: self.x0.max(0),
            y0: self.y0.max(0),
            x1: self.x1.min(width as i64),
            y1: self.y1.min(height as i64),
        };
        (r.x1 > r.x0 && r.y1 > r.y0).then_some(r)
    }
}

/// Intersection-over-union of two boxes; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

pub fn expand_box(b: &BoundingBox, factor: f64) -> BoundingBox {
    assert!(factor > 0.0, "expansion factor must be positive");
    let w = b.w * factor;
    let h = b.h * factor;
    BoundingBox::new(
        b.x + b.w * (1.0 - factor) / 2.0,
        b.y + b.h * (1.0 - factor) / 2.0,
        w,
        h,
    )
}

/// Point-sampling estimate of IoU: counts regular-grid sample points (cell
/// centers, spacing `grid_step`) inside each box and inside both.
///
/// Independent of the closed-form path; used to cross-check [`iou`].
pub fn rasterized_iou(a: &BoundingBox, b: &BoundingBox, grid_step: f64) -> f64 {
    assert!(grid_step > 0.0, "grid_step must be positive");
    let count_in = |outer: &BoundingBox, inner: Option<&BoundingBox>| -> u64 {
        let nx = (outer.w / grid_step).ceil() as u64;
        let ny = (outer.h / grid_step).ceil() as u64;
        let mut n = 0;
        for j in 0..ny {
            let py = outer.y + (j as f64 + 0.5) * grid_step;
            if py >= outer.bottom() {
                continue;
            }
            if let Some(other) = inner {
                if py < other.y || py >= other.bottom() {
                    continue;
                }
            }
            for i in 0..nx {
                let px = outer.x + (i as f64 + 0.5) * grid_step;
                if px >= outer.right() {
                    continue;
                }
                match inner {
                    Some(other) if !other.contains_point(px, py) => {}
                    _ => n += 1,
                }
            }
        }
        n
    };
    let area_a = count_in(a, None);
    let area_b = count_in(b, None);
    // Sample the intersection on the grid of whichever box is smaller.
    let inter = if a.area() <= b.area() {
        count_in(a, Some(b))
    } else {
        count_in(b, Some(a))
    };
    let union = area_a + area_b - inter;
    if union == 0 {
        return 0.0;
    }
    inter as f64 / union as f64
}
