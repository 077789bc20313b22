use imageproc::distance_transform::euclidean_squared_distance_transform;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BinaryMask, BoundingBox};

fn check_dims(pred: &BinaryMask, gt: &BinaryMask) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    Ok(())
}

/// Mask IoU; two empty masks count as a perfect match.
pub fn region_similarity(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    check_dims(pred, gt)?;
    let union = pred.union_count(gt);
    if union == 0 {
        return Ok(1.0);
    }
    Ok(pred.intersection_count(gt) as f64 / union as f64)
}

/// Boundary matching distance for the contour measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tolerance {
    Pixels(f64),
    /// `ceil(0.008 * image diagonal)`.
    #[default]
    Auto,
}

impl Tolerance {
    pub fn resolve(&self, width: usize, height: usize) -> f64 {
        match *self {
            Tolerance::Pixels(t) => t,
            Tolerance::Auto => (0.008 * ((width * width + height * height) as f64).sqrt()).ceil(),
        }
    }
}

/// Foreground pixels with a 4-neighbour in the background or on the frame edge.
pub fn boundary(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        mask.get(x, y)
            && (x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1))
    })
}

/// Fraction of `from`'s pixels lying within `tol` of some pixel of `to`.
fn matched_fraction(from: &BinaryMask, to: &BinaryMask, tol: f64) -> f64 {
    let n = from.count();
    if n == 0 || to.is_empty() {
        return 0.0;
    }
    let dist2 = euclidean_squared_distance_transform(&to.to_gray());
    let tol2 = tol * tol + 1e-9;
    let hits = from
        .bits()
        .iter()
        .zip(dist2.pixels())
        .filter(|(&b, d)| b && d[0] <= tol2)
        .count();
    hits as f64 / n as f64
}

/// Boundary F-measure between two masks.
pub fn contour_accuracy(pred: &BinaryMask, gt: &BinaryMask, tol: Tolerance) -> Result<f64> {
    check_dims(pred, gt)?;
    let pb = boundary(pred);
    let gb = boundary(gt);
    match (pb.is_empty(), gb.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let t = tol.resolve(pred.width(), pred.height());
    let precision = matched_fraction(&pb, &gb, t);
    let recall = matched_fraction(&gb, &pb, t);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Number of success-plot thresholds, `0, 0.05, ..., 1`.
pub const AUC_THRESHOLDS: usize = 21;

/// Fraction of frames whose box IoU is at least `t`.
pub fn success_rate(pred: &[BoundingBox], gt: &[BoundingBox], t: f64) -> f64 {
    let hits = pred.iter().zip(gt).filter(|(p, g)| iou(p, g) >= t).count();
    hits as f64 / pred.len() as f64
}

/// Area under the success plot, averaged over [`AUC_THRESHOLDS`] thresholds.
pub fn auc_success(pred: &[BoundingBox], gt: &[BoundingBox]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::NoFrames);
    }
    if pred.len() != gt.len() {
        return Err(Error::DimensionMismatch(format!("{} predicted vs {} ground-truth boxes", pred.len(), gt.len())));
    }
    let overlaps: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| iou(p, g)).collect();
    let n = overlaps.len() as f64;
    let total: f64 = (0..AUC_THRESHOLDS)
        .map(|k| {
            let t = k as f64 / (AUC_THRESHOLDS - 1) as f64;
            overlaps.iter().filter(|&&o| o >= t).count() as f64 / n
        })
        .sum();
    Ok(total / AUC_THRESHOLDS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: usize, h: usize, x0: usize, y0: usize, s: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| (x0..x0 + s).contains(&x) && (y0..y0 + s).contains(&y))
    }

    /// Brute-force boundary F: compares every boundary pixel pair.
    fn brute_f(pred: &BinaryMask, gt: &BinaryMask, tol: f64) -> f64 {
        let pts = |m: &BinaryMask| -> Vec<(i64, i64)> {
            let (w, h) = m.dims();
            let mut v = vec![];
            for y in 0..h {
                for x in 0..w {
                    if !m.get(x, y) {
                        continue;
                    }
                    let bg = |dx: i64, dy: i64| {
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 || !m.get(nx as usize, ny as usize)
                    };
                    if bg(-1, 0) || bg(1, 0) || bg(0, -1) || bg(0, 1) {
                        v.push((x as i64, y as i64));
                    }
                }
            }
            v
        };
        let (a, b) = (pts(pred), pts(gt));
        let frac = |from: &[(i64, i64)], to: &[(i64, i64)]| {
            from.iter()
                .filter(|p| to.iter().any(|q| (((p.0 - q.0).pow(2) + (p.1 - q.1).pow(2)) as f64) <= tol * tol))
                .count() as f64
                / from.len() as f64
        };
        let (p, r) = (frac(&a, &b), frac(&b, &a));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    #[test]
    fn region_examples() {
        let a = square(40, 40, 5, 5, 10);
        assert_eq!(region_similarity(&a, &a).unwrap(), 1.0);
        assert_eq!(region_similarity(&a, &square(40, 40, 25, 25, 10)).unwrap(), 0.0);
        let b = square(40, 40, 10, 10, 10);
        assert!((region_similarity(&a, &b).unwrap() - 25.0 / 175.0).abs() < 1e-12);
        let e = BinaryMask::new(40, 40);
        assert_eq!(region_similarity(&e, &e).unwrap(), 1.0);
        assert!(region_similarity(&a, &BinaryMask::new(41, 40)).is_err());
    }

    #[test]
    fn contour_examples() {
        let a = square(50, 50, 10, 10, 20);
        assert_eq!(contour_accuracy(&a, &a, Tolerance::Pixels(0.0)).unwrap(), 1.0);
        let far = square(50, 50, 0, 0, 3);
        let b = square(50, 50, 30, 30, 15);
        assert_eq!(contour_accuracy(&far, &b, Tolerance::Pixels(2.0)).unwrap(), 0.0);
        let shifted = square(50, 50, 11, 10, 20);
        assert_eq!(contour_accuracy(&a, &shifted, Tolerance::Pixels(2.0)).unwrap(), 1.0);
        let strict = contour_accuracy(&a, &shifted, Tolerance::Pixels(0.0)).unwrap();
        assert!(strict < 1.0);
        assert!((strict - brute_f(&a, &shifted, 0.0)).abs() < 1e-12);
        let e = BinaryMask::new(50, 50);
        assert_eq!(contour_accuracy(&e, &e, Tolerance::Auto).unwrap(), 1.0);
        assert_eq!(contour_accuracy(&e, &a, Tolerance::Auto).unwrap(), 0.0);
    }

    #[test]
    fn contour_matches_brute_force() {
        let a = BinaryMask::from_fn(40, 30, |x, y| (x as i64 - 18).pow(2) + (y as i64 - 14).pow(2) < 90);
        let b = BinaryMask::from_fn(40, 30, |x, y| (5..27).contains(&x) && (6..20).contains(&y));
        for tol in [0.0, 1.0, 1.5, 2.0, 3.0] {
            let fast = contour_accuracy(&a, &b, Tolerance::Pixels(tol)).unwrap();
            assert!((fast - brute_f(&a, &b, tol)).abs() < 1e-12, "tol {tol}");
            assert_eq!(fast, contour_accuracy(&b, &a, Tolerance::Pixels(tol)).unwrap());
        }
    }

    #[test]
    fn auto_tolerance() {
        assert_eq!(Tolerance::Auto.resolve(256, 256), 3.0);
        assert_eq!(Tolerance::Auto.resolve(854, 480), 8.0);
    }

    #[test]
    fn auc_examples() {
        let g: Vec<_> = (0..8).map(|i| BoundingBox::new(i as f64, 0.0, 10.0, 10.0)).collect();
        assert_eq!(auc_success(&g, &g).unwrap(), 1.0);
        let far: Vec<_> = g.iter().map(|b| BoundingBox::new(b.x + 100.0, 0.0, 10.0, 10.0)).collect();
        assert!((auc_success(&far, &g).unwrap() - 1.0 / 21.0).abs() < 1e-15);
        // Half-height boxes overlap the truth with IoU exactly 0.5.
        let half: Vec<_> = g.iter().map(|b| BoundingBox::new(b.x, 0.0, 10.0, 5.0)).collect();
        assert!(half.iter().zip(&g).all(|(p, q)| iou(p, q) == 0.5));
        assert!((auc_success(&half, &g).unwrap() - 11.0 / 21.0).abs() < 1e-15);
        assert!(auc_success(&[], &[]).is_err());
    }
}
