//! Segmentation and tracking metrics: region similarity (mask IoU), boundary
//! F-measure, their mean, and the success-plot AUC for boxes.

mod metrics;
mod report;

pub use metrics::{
    auc_success, boundary, contour_accuracy, region_similarity, success_rate, Tolerance, AUC_THRESHOLDS,
};
pub use report::{evaluate_sequence, scored_frames, EvalOptions, EvalReport, FrameScore, ObjectSummary};
