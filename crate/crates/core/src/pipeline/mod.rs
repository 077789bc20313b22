//! End-to-end driver: per object, frame by frame, proposals are gated and
//! scored by the tracker, the tracked box is segmented against the
//! references, and the objects are merged into one label map per frame.

mod causal;
mod config;
mod driver;

pub use causal::{Access, AccessKind, AccessLog};
pub use config::{BackendKind, BackendSelection, PipelineConfig, ReferenceProfile};
pub use driver::{
    evaluate_directories, ground_truth_boxes, persist_results, proposal_recall, run_dataset, run_sequence,
    run_sequences, thread_pool, track_eval, DatasetRun, SequenceResult,
};
