//! Run configuration: every tunable of the pipeline in one JSON document.
//!
//! Missing sections and fields take their defaults, so `{}` is a complete configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{PoolingSpec, TrainConfig, DEFAULT_POOLING};
use crate::error::{Error, Result};
use crate::fusion::{FusionWeights, SearchConfig};
use crate::heatmap::{CropBox, CropJitter, EdgeList, HeatmapParams, KeypointSubset};
use crate::io::skeleton::SkeletonSequence;
use crate::taylor::TaylorParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub heatmap: HeatmapConfig,
    pub taylor: TaylorParams,
    pub classifier: ClassifierConfig,
    pub fusion: FusionConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.heatmap.validate()?;
        self.taylor.validate()?;
        self.classifier.validate()?;
        self.fusion.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), format!("bad run configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&super::read_to_string(path)?)
    }
}

/// How the source-frame region mapped onto the heatmap grid is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum CropMode {
    /// Square box around the confident keypoints of the whole sequence.
    Auto { padding: f64 },
    Fixed {
        #[serde(rename = "box")]
        bounds: CropBox,
    },
}

impl Default for CropMode {
    fn default() -> Self {
        CropMode::Auto { padding: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub params: HeatmapParams,
    pub subset: KeypointSubset,
    /// Pairs of subset-local keypoint indices.
    pub edges: Vec<[usize; 2]>,
    pub crop: CropMode,
    pub jitter: Option<CropJitter>,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            params: HeatmapParams::default(),
            subset: KeypointSubset::default(),
            edges: EdgeList::default().edges().iter().map(|&(a, b)| [a, b]).collect(),
            crop: CropMode::default(),
            jitter: None,
        }
    }
}

impl HeatmapConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.edge_list()?;
        match &self.crop {
            CropMode::Auto { padding } if !(padding.is_finite() && *padding >= 0.0) => {
                return Err(Error::Validation(format!("crop padding {padding} must be non-negative")));
            }
            CropMode::Fixed { bounds } if !(bounds.width() > 0.0 && bounds.height() > 0.0) => {
                return Err(Error::Validation(format!("crop box {bounds:?} has no area")));
            }
            _ => {}
        }
        if let Some(j) = &self.jitter {
            j.validate()?;
        }
        Ok(())
    }

    pub fn edge_list(&self) -> Result<EdgeList> {
        EdgeList::new(
            self.edges.iter().map(|&[a, b]| (a, b)).collect(),
            self.subset.len(),
        )
    }

    /// Crop box for one sample; `stream` keys the optional jitter.
    pub fn crop_box(&self, s: &SkeletonSequence, stream: u64) -> Result<CropBox> {
        let base = match &self.crop {
            CropMode::Fixed { bounds } => *bounds,
            CropMode::Auto { padding } => crate::heatmap::auto_crop_box(s, *padding)
                .ok_or_else(|| Error::Validation("skeleton has no confident keypoint to crop around".into()))?,
        };
        Ok(match &self.jitter {
            Some(j) => j.sample(&base, stream),
            None => base,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub pooling: String,
    pub train: TrainConfig,
    /// Fit a per-feature standardizer on the training split and store it with the model.
    pub standardize: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            pooling: DEFAULT_POOLING.to_string(),
            train: TrainConfig::default(),
            standardize: true,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        PoolingSpec::parse(&self.pooling)?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Fixed weights; when absent, weights are searched on the validation split.
    pub weights: Option<FusionWeights>,
    pub search: SearchConfig,
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = &self.weights {
            w.validate()?;
        }
        Ok(())
    }
}
