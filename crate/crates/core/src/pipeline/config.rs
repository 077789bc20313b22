use serde::{Deserialize, Serialize};

use crate::backends::{ColorSegmenterConfig, GridSourceConfig, HistogramScorerConfig, OracleProposalConfig, RegionSourceConfig};
use crate::data::ImageFormat;
use crate::drsn::ReferenceConfig;
use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::opn::ProposalFilterConfig;
use crate::otn::TrackerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    /// Reads the ground truth; an upper bound for the cascade logic.
    Oracle,
    /// Colour-region and grid proposals, colour-histogram scorer,
    /// colour-model segmenter.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSelection {
    pub proposals: BackendKind,
    pub scorer: BackendKind,
    pub segmenter: BackendKind,
}

impl Default for BackendSelection {
    fn default() -> Self {
        Self::all(BackendKind::Classical)
    }
}

impl BackendSelection {
    pub fn all(kind: BackendKind) -> Self {
        Self {
            proposals: kind,
            scorer: kind,
            segmenter: kind,
        }
    }

    pub fn needs_ground_truth(&self) -> bool {
        [self.proposals, self.scorer, self.segmenter].contains(&BackendKind::Oracle)
    }
}

/// Number of dynamic references on top of the annotated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceProfile {
    #[serde(rename = "gt-only")]
    GtOnly,
    #[serde(rename = "gt+1")]
    Gt1,
    #[serde(rename = "gt+2")]
    Gt2,
    #[serde(rename = "gt+3")]
    Gt3,
}

impl ReferenceProfile {
    pub fn n_dynamic(self) -> usize {
        match self {
            ReferenceProfile::GtOnly => 0,
            ReferenceProfile::Gt1 => 1,
            ReferenceProfile::Gt2 => 2,
            ReferenceProfile::Gt3 => 3,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "gt-only" => Self::GtOnly,
            "gt+1" => Self::Gt1,
            "gt+2" => Self::Gt2,
            "gt+3" => Self::Gt3,
            _ => return None,
        })
    }
}

/// Everything that determines a run. Serialized verbatim into the run
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 uses all cores. Results do not depend on it.
    pub jobs: usize,
    /// Take candidates from the proposal source; off samples only around
    /// the previous box.
    pub use_opn: bool,
    /// Track with the appearance model; off uses the enclosing box of the
    /// previous predicted mask.
    pub use_otn: bool,
    /// Off keeps only the annotated frame as reference.
    pub dynamic_refs: bool,
    /// Overrides `references.n_dynamic` when set.
    pub reference_profile: Option<ReferenceProfile>,
    /// Also store every raw proposal in `proposals.csv`.
    pub dump_proposals: bool,
    pub output_format: ImageFormat,
    pub backends: BackendSelection,
    pub filter: ProposalFilterConfig,
    pub tracker: TrackerConfig,
    pub references: ReferenceConfig,
    pub grid: GridSourceConfig,
    pub regions: RegionSourceConfig,
    pub oracle: OracleProposalConfig,
    pub histogram: HistogramScorerConfig,
    pub segmenter: ColorSegmenterConfig,
    pub eval: EvalOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: 0,
            use_opn: true,
            use_otn: true,
            dynamic_refs: true,
            reference_profile: None,
            dump_proposals: false,
            output_format: ImageFormat::default(),
            backends: BackendSelection::default(),
            filter: ProposalFilterConfig::default(),
            tracker: TrackerConfig::default(),
            references: ReferenceConfig::default(),
            grid: GridSourceConfig::default(),
            regions: RegionSourceConfig::default(),
            oracle: OracleProposalConfig::default(),
            histogram: HistogramScorerConfig::default(),
            segmenter: ColorSegmenterConfig::default(),
            eval: EvalOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn oracle() -> Self {
        Self {
            backends: BackendSelection::all(BackendKind::Oracle),
            ..Self::default()
        }
    }

    pub fn classical() -> Self {
        Self::default()
    }

    /// Reference settings after applying the profile and ablation flags.
    pub fn effective_references(&self) -> ReferenceConfig {
        let mut r = self.references;
        if let Some(p) = self.reference_profile {
            r.n_dynamic = p.n_dynamic();
        }
        if !self.dynamic_refs {
            r.n_dynamic = 0;
        }
        r
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.tracker.validate()?;
        self.effective_references().validate()?;
        self.grid.validate()?;
        self.regions.validate()?;
        self.histogram.validate()?;
        if !(0.0..=1.0).contains(&self.oracle.dropout) {
            return Err(Error::InvalidConfig(format!("oracle dropout {}", self.oracle.dropout)));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config always serializes")
    }
}
