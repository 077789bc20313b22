//! Concrete proposal sources, appearance scorers and segmenters.
//!
//! The oracle family reads ground truth and exists to test the cascade
//! logic in isolation. The classical family (grid windows, colour
//! histograms) is the default desk-scale implementation.

mod color_segmenter;
mod grid;
mod histogram;
mod oracle;
mod regions;

pub use color_segmenter::{color_model_segmenter, ColorModelSegmenter, ColorSegmenterConfig};
pub use grid::{grid_proposal_source, GridProposalSource, GridSourceConfig};
pub use histogram::{histogram_scorer, ColorHistogram, HistogramScorer, HistogramScorerConfig};
pub use oracle::{
    oracle_proposal_source, oracle_scorer, oracle_segmenter, OracleContext, OracleProposalConfig,
    OracleProposalSource, OracleScorer, OracleSegmenter,
};
pub use regions::{region_proposal_source, ProposalUnion, RegionProposalSource, RegionSourceConfig};
