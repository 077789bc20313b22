use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::davis::{read_label_maps, write_label_maps, ImageFormat};
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::geometry::{BoundingBox, LabelMap};

pub const CONFIG_SNAPSHOT: &str = "config.snapshot";
pub const BOXES_CSV: &str = "boxes.csv";
pub const PROPOSALS_CSV: &str = "proposals.csv";
pub const MASKS_DIR: &str = "masks";
pub const REPORT_TXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";
pub const TIMING_TXT: &str = "timing.txt";

/// One predicted (or ground-truth) box row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub sequence: String,
    pub object: u8,
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub success: bool,
}

impl BoxRecord {
    pub fn new(sequence: &str, object: u8, frame: usize, b: &BoundingBox, success: bool) -> Self {
        Self {
            sequence: sequence.to_string(),
            object,
            frame,
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            success,
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        BoundingBox {
            x: self.x,
            y: self.y,
            w: self.w,
            h: self.h,
        }
    }
}

/// One candidate box emitted by a proposal source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub sequence: String,
    pub object: u8,
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub objectness: f64,
}

impl ProposalRecord {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox {
            x: self.x,
            y: self.y,
            w: self.w,
            h: self.h,
        }
    }
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::format(path, e))
}

/// A run directory: `config.snapshot`, `boxes.csv`, `masks/<sequence>/`,
/// `report.txt`, `report.csv`, plus optional `proposals.csv` and `timing.txt`.
#[derive(Debug, Clone)]
pub struct RunRecord {
    root: PathBuf,
}

impl RunRecord {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let masks = root.join(MASKS_DIR);
        std::fs::create_dir_all(&masks).map_err(|e| Error::io(&masks, e))?;
        Ok(Self { root })
    }

    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.is_dir() {
            return Err(Error::format(&root, "not a run directory"));
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn masks_dir(&self, sequence: &str) -> PathBuf {
        self.root.join(MASKS_DIR).join(sequence)
    }

    pub fn write_config_snapshot(&self, text: &str) -> Result<()> {
        let p = self.path(CONFIG_SNAPSHOT);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    pub fn read_config_snapshot(&self) -> Result<String> {
        let p = self.path(CONFIG_SNAPSHOT);
        std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    }

    pub fn write_predictions(&self, sequence: &str, maps: &[LabelMap], format: ImageFormat) -> Result<()> {
        write_label_maps(&self.masks_dir(sequence), maps, format)
    }

    pub fn read_predictions(&self, sequence: &str) -> Result<Vec<LabelMap>> {
        read_label_maps(&self.masks_dir(sequence))
    }

    pub fn write_boxes(&self, rows: &[BoxRecord]) -> Result<()> {
        write_csv_rows(&self.path(BOXES_CSV), rows)
    }

    pub fn read_boxes(&self) -> Result<Vec<BoxRecord>> {
        read_csv_rows(&self.path(BOXES_CSV))
    }

    pub fn write_proposals(&self, rows: &[ProposalRecord]) -> Result<()> {
        write_csv_rows(&self.path(PROPOSALS_CSV), rows)
    }

    pub fn write_report(&self, report: &EvalReport) -> Result<()> {
        report.write_text(&self.path(REPORT_TXT))?;
        report.write_csv(&self.path(REPORT_CSV))
    }

    pub fn write_timing(&self, text: &str) -> Result<()> {
        let p = self.path(TIMING_TXT);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }
}
