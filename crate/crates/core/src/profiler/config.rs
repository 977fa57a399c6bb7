use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lenet::CaptureMode;
use crate::tensor_io::{Split, Variant};

/// Keep indices `offset, offset + stride, ...` of the training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reduction {
    pub stride: usize,
    #[serde(default)]
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub images: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Pre-dumped traces when an epoch has them, otherwise its weight bundle.
    #[default]
    Auto,
    Weights,
    Traces,
}

fn default_epochs() -> Vec<u32> {
    (1..=15).collect()
}

fn default_splits() -> Vec<Split> {
    vec![Split::Train, Split::Test]
}

fn default_subset_size() -> usize {
    10_000
}

fn default_memory_budget() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Expected network variant; checked against each bundle when set.
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default)]
    pub source: Source,
    /// Image sets per split, needed when forwarding weight bundles.
    #[serde(default)]
    pub datasets: BTreeMap<Split, DatasetPaths>,
    #[serde(default = "default_epochs")]
    pub epochs: Vec<u32>,
    #[serde(default = "default_splits")]
    pub splits: Vec<Split>,
    #[serde(default = "default_subset_size")]
    pub subset_size: usize,
    #[serde(default)]
    pub reduction: Option<Reduction>,
    #[serde(default = "default_capture_mode")]
    pub capture_mode: CaptureMode,
    #[serde(default)]
    pub dropout_seed: Option<u64>,
    #[serde(default)]
    pub subsample: Option<SubsampleSpec>,
    /// Upper bound on captured activations held at once, in MiB.
    #[serde(default = "default_memory_budget")]
    pub memory_budget_mb: usize,
}

fn default_capture_mode() -> CaptureMode {
    CaptureMode::Eval
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: None,
            source: Source::Auto,
            datasets: BTreeMap::new(),
            epochs: default_epochs(),
            splits: default_splits(),
            subset_size: default_subset_size(),
            reduction: None,
            capture_mode: CaptureMode::Eval,
            dropout_seed: None,
            subsample: None,
            memory_budget_mb: default_memory_budget(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs.is_empty() {
            return Err(Error::Parameter("epochs must not be empty".into()));
        }
        if self.epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(format!(
                "epochs must be strictly increasing, got {:?}",
                self.epochs
            )));
        }
        if self.splits.is_empty() {
            return Err(Error::Parameter("splits must not be empty".into()));
        }
        if self.subset_size < 2 {
            return Err(Error::Parameter(format!(
                "subset_size must be at least 2, got {}",
                self.subset_size
            )));
        }
        if let Some(r) = self.reduction {
            check_reduction(r.stride, r.offset)?;
        }
        Ok(())
    }

    /// Parses a JSON config; relative dataset paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Format(format!("run config: {e}")))?;
        for paths in cfg.datasets.values_mut() {
            for p in [&mut paths.images, &mut paths.labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub(crate) fn check_reduction(stride: usize, offset: usize) -> Result<()> {
    if stride == 0 || offset >= stride {
        return Err(Error::Parameter(format!(
            "reduction needs stride >= 1 and 0 <= offset < stride, got stride {stride}, offset {offset}"
        )));
    }
    Ok(())
}
