use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{contour_accuracy, region_similarity, Tolerance};
use crate::error::{Error, Result};
use crate::geometry::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Score the annotated first frame and the last frame too. By default
    /// both are skipped whenever the sequence has at least three frames.
    pub include_first_last: bool,
    pub tolerance: Tolerance,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            include_first_last: false,
            tolerance: Tolerance::Auto,
        }
    }
}

/// One scored (sequence, object, frame) triple. Frames are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub sequence: String,
    pub object: u8,
    pub frame: usize,
    pub j: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSummary {
    pub sequence: String,
    pub object: u8,
    pub frames: usize,
    pub j_mean: f64,
    pub f_mean: f64,
}

/// Per-frame scores with aggregates. `j_mean` and `f_mean` average the
/// per-object frame means, so every object weighs the same regardless of
/// its length.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<FrameScore>,
    pub objects: Vec<ObjectSummary>,
    pub j_mean: f64,
    pub f_mean: f64,
    pub g: f64,
}

impl EvalReport {
    pub fn from_records(mut records: Vec<FrameScore>) -> Self {
        records.sort_by(|a, b| (&a.sequence, a.object, a.frame).cmp(&(&b.sequence, b.object, b.frame)));
        let mut groups: BTreeMap<(&str, u8), (usize, f64, f64)> = BTreeMap::new();
        for r in &records {
            let e = groups.entry((r.sequence.as_str(), r.object)).or_default();
            e.0 += 1;
            e.1 += r.j;
            e.2 += r.f;
        }
        let objects: Vec<ObjectSummary> = groups
            .into_iter()
            .map(|((s, o), (n, j, f))| ObjectSummary {
                sequence: s.to_string(),
                object: o,
                frames: n,
                j_mean: j / n as f64,
                f_mean: f / n as f64,
            })
            .collect();
        let (j_mean, f_mean) = if objects.is_empty() {
            (0.0, 0.0)
        } else {
            let n = objects.len() as f64;
            (
                objects.iter().map(|o| o.j_mean).sum::<f64>() / n,
                objects.iter().map(|o| o.f_mean).sum::<f64>() / n,
            )
        };
        Self {
            records,
            objects,
            j_mean,
            f_mean,
            g: (j_mean + f_mean) / 2.0,
        }
    }

    /// Combines several per-sequence reports into one.
    pub fn merge(reports: impl IntoIterator<Item = EvalReport>) -> Self {
        Self::from_records(reports.into_iter().flat_map(|r| r.records).collect())
    }

    pub fn frame_count(&self) -> usize {
        self.records.len()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for o in &self.objects {
            let _ = writeln!(
                s,
                "sequence={} object={} frames={} j_mean={:.6} f_mean={:.6}",
                o.sequence, o.object, o.frames, o.j_mean, o.f_mean
            );
        }
        let _ = writeln!(s, "objects={} frames={}", self.objects.len(), self.records.len());
        let _ = writeln!(s, "j_mean={:.6}", self.j_mean);
        let _ = writeln!(s, "f_mean={:.6}", self.f_mean);
        let _ = writeln!(s, "g={:.6}", self.g);
        s
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// `sequence,object,frame,j,f`, one row per scored frame.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::format(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
        let records = r
            .deserialize()
            .collect::<std::result::Result<Vec<FrameScore>, _>>()
            .map_err(|e| Error::format(path, e))?;
        Ok(Self::from_records(records))
    }
}

/// 1-based frame indices that are scored in a sequence of `n` frames.
pub fn scored_frames(n: usize, include_first_last: bool) -> std::ops::RangeInclusive<usize> {
    if include_first_last || n < 3 {
        1..=n
    } else {
        2..=n - 1
    }
}

/// Scores every object on every scored frame; `preds[i]` and `gts[i]` are
/// frame `i + 1`.
pub fn evaluate_sequence(
    sequence: &str,
    preds: &[LabelMap],
    gts: &[LabelMap],
    object_ids: &[u8],
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if preds.len() != gts.len() {
        return Err(Error::DimensionMismatch(format!(
            "{sequence}: {} predicted frames vs {} ground-truth frames",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::NoFrames);
    }
    let mut records = Vec::new();
    for frame in scored_frames(preds.len(), opts.include_first_last) {
        let (p, g) = (&preds[frame - 1], &gts[frame - 1]);
        for &id in object_ids {
            let (pm, gm) = (p.mask_of(id), g.mask_of(id));
            records.push(FrameScore {
                sequence: sequence.to_string(),
                object: id,
                frame,
                j: region_similarity(&pm, &gm)?,
                f: contour_accuracy(&pm, &gm, opts.tolerance)?,
            });
        }
    }
    Ok(EvalReport::from_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_with(w: usize, h: usize, rects: &[(u8, usize, usize, usize, usize)]) -> LabelMap {
        let mut labels = vec![0u8; w * h];
        for &(id, x0, y0, x1, y1) in rects {
            for y in y0..y1 {
                for x in x0..x1 {
                    labels[y * w + x] = id;
                }
            }
        }
        LabelMap::from_labels(w, h, labels).unwrap()
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let gts: Vec<_> = (0..5).map(|i| map_with(40, 30, &[(1, 5 + i, 5, 20 + i, 20)])).collect();
        let r = evaluate_sequence("s", &gts, &gts, &[1], &EvalOptions::default()).unwrap();
        assert_eq!((r.j_mean, r.f_mean, r.g), (1.0, 1.0, 1.0));
        assert_eq!(r.frame_count(), 3);
        let blank = vec![LabelMap::new(40, 30); 5];
        let r = evaluate_sequence("s", &blank, &gts, &[1], &EvalOptions::default()).unwrap();
        assert_eq!(r.j_mean, 0.0);
        assert!(evaluate_sequence("s", &blank[..4], &gts, &[1], &EvalOptions::default()).is_err());
    }

    #[test]
    fn frame_exclusion() {
        assert_eq!(scored_frames(5, false), 2..=4);
        assert_eq!(scored_frames(5, true), 1..=5);
        assert_eq!(scored_frames(2, false), 1..=2);
    }

    #[test]
    fn objects_weigh_equally_across_sequences() {
        let rec = |s: &str, o, frame, j| FrameScore {
            sequence: s.into(),
            object: o,
            frame,
            j,
            f: j,
        };
        let a = EvalReport::from_records(vec![rec("a", 1, 2, 1.0), rec("a", 1, 3, 1.0), rec("a", 1, 4, 1.0)]);
        let b = EvalReport::from_records(vec![rec("b", 1, 2, 0.0)]);
        let m = EvalReport::merge([a, b]);
        assert_eq!(m.j_mean, 0.5);
        assert_eq!(m.g, 0.5);
        assert_eq!(m.objects.len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let gts: Vec<_> = (0..4).map(|i| map_with(30, 30, &[(1, i, 0, 10 + i, 9), (2, 15, 15, 25, 28)])).collect();
        let preds: Vec<_> = (0..4).map(|i| map_with(30, 30, &[(1, 0, 0, 10, 9), (2, 15 + i, 15, 25, 28)])).collect();
        let opts = EvalOptions {
            include_first_last: true,
            ..Default::default()
        };
        let r = evaluate_sequence("s", &preds, &gts, &[1, 2], &opts).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        r.write_csv(&path).unwrap();
        let back = EvalReport::read_csv(&path).unwrap();
        assert_eq!(back, r);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sequence,object,frame,j,f\n"));
        r.write_text(&dir.path().join("report.txt")).unwrap();
    }
}
