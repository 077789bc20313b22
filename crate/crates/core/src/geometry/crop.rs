use crate::geometry::{BinaryMask, BoundingBox, Frame, PixelRect, ProbabilityMap};

/// Maps output sample `i` of `out` samples onto the source span `[lo, lo + len)`
/// using pixel-center alignment, clamped to the span.
fn source_coord(i: usize, out: usize, lo: i64, len: i64) -> f64 {
    let s = lo as f64 + (i as f64 + 0.5) * len as f64 / out as f64 - 0.5;
    s.clamp(lo as f64, (lo + len - 1) as f64)
}

/// Crops the region under `bbox` (snapped to the pixel grid) and resamples it
/// to `out_side × out_side` with bilinear interpolation. Pixels of the region
/// that fall outside the frame read as black.
pub fn crop_resize(frame: &Frame, bbox: &BoundingBox, out_side: usize) -> Frame {
    assert!(out_side >= 2, "out_side must be at least 2");
    let rect = bbox.to_pixel_grid();
    let (fw, fh) = (frame.width() as i64, frame.height() as i64);
    let mut out = Frame::new(out_side, out_side);
    if rect.clip(frame.width(), frame.height()).is_none() {
        return out;
    }
    let fetch = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= fw || y >= fh {
            [0.0; 3]
        } else {
            let p = frame.pixel(x as usize, y as usize);
            [p[0] as f64, p[1] as f64, p[2] as f64]
        }
    };
    let xs: Vec<(i64, f64)> = (0..out_side)
        .map(|i| split(source_coord(i, out_side, rect.x0, rect.width())))
        .collect();
    for j in 0..out_side {
        let (y0, ay) = split(source_coord(j, out_side, rect.y0, rect.height()));
        for (i, &(x0, ax)) in xs.iter().enumerate() {
            let p00 = fetch(x0, y0);
            let p10 = if ax > 0.0 { fetch(x0 + 1, y0) } else { [0.0; 3] };
            let p01 = if ay > 0.0 { fetch(x0, y0 + 1) } else { [0.0; 3] };
            let p11 = if ax > 0.0 && ay > 0.0 {
                fetch(x0 + 1, y0 + 1)
            } else {
                [0.0; 3]
            };
            let mut c = [0u8; 3];
            for k in 0..3 {
                let v = (1.0 - ay) * ((1.0 - ax) * p00[k] + ax * p10[k])
                    + ay * ((1.0 - ax) * p01[k] + ax * p11[k]);
                c[k] = v.round().clamp(0.0, 255.0) as u8;
            }
            out.set_pixel(i, j, c);
        }
    }
    out
}

fn split(s: f64) -> (i64, f64) {
    let f = s.floor();
    (f as i64, s - f)
}

/// Nearest-neighbour counterpart of [`crop_resize`] for masks; outside the
/// mask is background.
pub fn crop_resize_mask(mask: &BinaryMask, bbox: &BoundingBox, out_side: usize) -> BinaryMask {
    assert!(out_side >= 2, "out_side must be at least 2");
    let rect = bbox.to_pixel_grid();
    let (mw, mh) = (mask.width() as i64, mask.height() as i64);
    let nearest = |i: usize, lo: i64, len: i64| -> i64 {
        lo + ((i as f64 + 0.5) * len as f64 / out_side as f64).floor() as i64
    };
    let xs: Vec<i64> = (0..out_side)
        .map(|i| nearest(i, rect.x0, rect.width()))
        .collect();
    let mut out = BinaryMask::new(out_side, out_side);
    for j in 0..out_side {
        let y = nearest(j, rect.y0, rect.height());
        if y < 0 || y >= mh {
            continue;
        }
        for (i, &x) in xs.iter().enumerate() {
            if x >= 0 && x < mw && mask.get(x as usize, y as usize) {
                out.set(i, j, true);
            }
        }
    }
    out
}

/// Full-frame pixels covered by `origin` once snapped to the pixel grid.
pub fn paste_footprint(origin: &BoundingBox, width: usize, height: usize) -> Option<PixelRect> {
    origin.to_pixel_grid().clip(width, height)
}

/// Inverse of the crop: bilinearly resamples a square patch-resolution map
/// into the frame region `origin` was cut from. Everything outside that
/// region (clipped to the frame) is zero.
pub fn paste_back(
    patch: &ProbabilityMap,
    origin: &BoundingBox,
    width: usize,
    height: usize,
) -> ProbabilityMap {
    let mut out = ProbabilityMap::zeros(width, height);
    let Some(foot) = paste_footprint(origin, width, height) else {
        return out;
    };
    let rect = origin.to_pixel_grid();
    let (pw, ph) = patch.dims();
    let to_patch = |p: i64, lo: i64, len: i64, n: usize| -> (usize, usize, f32) {
        let u = ((p - lo) as f64 + 0.5) * n as f64 / len as f64 - 0.5;
        let u = u.clamp(0.0, (n - 1) as f64);
        let f = u.floor();
        let i0 = f as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, (u - f) as f32)
    };
    let xs: Vec<_> = (foot.x0..foot.x1)
        .map(|px| to_patch(px, rect.x0, rect.width(), pw))
        .collect();
    for py in foot.y0..foot.y1 {
        let (j0, j1, ay) = to_patch(py, rect.y0, rect.height(), ph);
        for (k, &(i0, i1, ax)) in xs.iter().enumerate() {
            let top = (1.0 - ax) * patch.get(i0, j0) + ax * patch.get(i1, j0);
            let bot = (1.0 - ax) * patch.get(i0, j1) + ax * patch.get(i1, j1);
            let v = (1.0 - ay) * top + ay * bot;
            out.set(foot.x0 as usize + k, py as usize, v.clamp(0.0, 1.0));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, |x, y| [(x * 7 % 256) as u8, (y * 13 % 256) as u8, ((x + y) % 256) as u8])
    }

    #[test]
    fn identity_crop_is_pixel_exact() {
        let f = gradient(32, 32);
        let out = crop_resize(&f, &BoundingBox::new(0.0, 0.0, 32.0, 32.0), 32);
        assert_eq!(out, f);
    }

    #[test]
    fn constant_field_stays_constant() {
        let f = Frame::filled(40, 30, [90, 90, 90]);
        for b in [
            BoundingBox::new(0.0, 0.0, 40.0, 30.0),
            BoundingBox::new(3.3, 2.7, 11.1, 17.9),
            BoundingBox::new(39.0, 29.0, 1.0, 1.0),
        ] {
            let out = crop_resize(&f, &b, 17);
            assert!(out.pixels().all(|p| p == [90, 90, 90]), "{b:?}");
        }
    }

    #[test]
    fn half_outside_box_is_black_in_proportion() {
        let f = Frame::filled(64, 64, [255, 255, 255]);
        let b = BoundingBox::new(-32.0, 0.0, 64.0, 64.0);
        let out = crop_resize(&f, &b, 50);
        let black = out.pixels().filter(|p| p[0] < 128).count() as f64;
        let frac = black / (50.0 * 50.0);
        // Per-pixel containment: output column i samples source x < 0 for half of them.
        let expected = (0..50)
            .filter(|&i| -32.0 + (i as f64 + 0.5) * 64.0 / 50.0 - 0.5 < -0.5)
            .count() as f64
            / 50.0;
        assert!((frac - 0.5).abs() <= 0.02, "black fraction {frac}");
        assert!((frac - expected).abs() <= 0.02);
    }

    #[test]
    fn fully_outside_box_gives_zero_patch() {
        let f = Frame::filled(10, 10, [200, 10, 10]);
        let out = crop_resize(&f, &BoundingBox::new(50.0, 50.0, 5.0, 5.0), 8);
        assert!(out.pixels().all(|p| p == [0, 0, 0]));
        let m = BinaryMask::from_fn(10, 10, |_, _| true);
        assert!(crop_resize_mask(&m, &BoundingBox::new(-20.0, 0.0, 5.0, 5.0), 8).is_empty());
    }

    #[test]
    fn mask_identity_and_empty() {
        let m = BinaryMask::from_fn(24, 24, |x, y| (x * y) % 5 == 1);
        let full = BoundingBox::new(0.0, 0.0, 24.0, 24.0);
        assert_eq!(crop_resize_mask(&m, &full, 24), m);
        assert!(crop_resize_mask(&BinaryMask::new(24, 24), &full, 16).is_empty());
    }

    #[test]
    fn disk_under_its_box_keeps_area_ratio() {
        let (cx, cy, r) = (50.0, 40.0, 20.0);
        let m = BinaryMask::from_fn(100, 100, |x, y| {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            dx * dx + dy * dy <= r * r
        });
        let b = m.enclosing_box().unwrap();
        let before = m.count() as f64 / b.area();
        let patch = crop_resize_mask(&m, &b, 64);
        let after = patch.count() as f64 / (64.0 * 64.0);
        assert!((after / before - 1.0).abs() < 0.05, "{before} vs {after}");
        assert_eq!(patch.enclosing_box(), Some(BoundingBox::new(0.0, 0.0, 64.0, 64.0)));
    }

    #[test]
    fn paste_back_stays_in_footprint() {
        let patch = ProbabilityMap::from_data(4, 4, vec![1.0; 16]).unwrap();
        let origin = BoundingBox::new(-3.0, 5.0, 8.0, 8.0);
        let out = paste_back(&patch, &origin, 10, 10);
        let foot = paste_footprint(&origin, 10, 10).unwrap();
        for y in 0..10 {
            for x in 0..10 {
                let inside = (x as i64) >= foot.x0
                    && (x as i64) < foot.x1
                    && (y as i64) >= foot.y0
                    && (y as i64) < foot.y1;
                assert_eq!(out.get(x, y) > 0.0, inside, "({x},{y})");
            }
        }
    }
}
