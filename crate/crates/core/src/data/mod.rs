//! Datasets on disk in DAVIS layout, synthetic scenes with exact ground
//! truth, and run directories.

mod davis;
mod presets;
mod run;
mod synth;

pub use davis::{
    davis_palette, frame_stem, list_sequences, read_davis_sequence, read_frame, read_label_dir, read_label_map,
    read_label_maps, read_sequence, write_frame, write_label_map, write_label_maps, write_sequence, ImageFormat,
    VideoSequence, ANNOTATIONS_DIR, FRAMES_DIR,
};
pub use presets::{camera_drift, easy, hue_drift, multi_object, occlusion, preset, presets, scale_change, PRESET_NAMES};
pub use run::{
    read_csv_rows, write_csv_rows, BoxRecord, ProposalRecord, RunRecord, BOXES_CSV, CONFIG_SNAPSHOT, MASKS_DIR,
    PROPOSALS_CSV, REPORT_CSV, REPORT_TXT, TIMING_TXT,
};
pub use synth::{
    generate_scene, visible_areas, visible_mask, BackgroundSpec, ObjectSpec, ScaleKey, SceneSpec, Shape, ShapeSpec,
    SyntheticVideo, Waypoint,
};

use std::path::Path;

use crate::error::Result;

/// Ground-truth boxes of a synthetic video as rows (hidden frames omitted).
pub fn ground_truth_rows(video: &SyntheticVideo) -> Vec<BoxRecord> {
    let mut rows = Vec::new();
    for (&id, boxes) in &video.boxes {
        for (i, b) in boxes.iter().enumerate() {
            if let Some(b) = b {
                rows.push(BoxRecord::new(&video.sequence.name, id, i + 1, b, true));
            }
        }
    }
    rows
}

pub const GT_BOXES_DIR: &str = "Boxes";

/// Writes a synthetic video in DAVIS layout plus `Boxes/<name>.csv`.
pub fn write_synthetic(root: &Path, video: &SyntheticVideo, format: ImageFormat) -> Result<()> {
    write_sequence(root, &video.sequence, format)?;
    let dir = root.join(GT_BOXES_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| crate::Error::io(&dir, e))?;
    write_csv_rows(&dir.join(format!("{}.csv", video.sequence.name)), &ground_truth_rows(video))
}
