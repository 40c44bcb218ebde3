//! Experiment configuration: one mode, one data source, one master seed.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{DrnsSweepConfig, EvalConfig, OptimizeConfig, ShiftConfig};
use crate::datagen::{
    parse_multiclass_csv, read_multiclass_csv, read_multilabel_sparse, read_regression_csv,
    synthetic_multiclass, synthetic_multilabel, synthetic_regression, MulticlassDataset,
    MulticlassSpec, MultilabelDataset, MultilabelSpec, RegressionDataset, RegressionSpec,
    BUNDLED_MULTICLASS,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    EvalStationary,
    Optimize,
    CovariateShift,
    Drns,
}

impl Mode {
    pub fn default_replicates(self) -> usize {
        match self {
            Mode::EvalStationary => 500,
            Mode::Optimize => 30,
            Mode::CovariateShift => 100,
            Mode::Drns => 50,
        }
    }

    fn default_data(self) -> DataSource {
        match self {
            Mode::EvalStationary | Mode::Optimize => DataSource::Bundled,
            Mode::CovariateShift => DataSource::SyntheticRegression(RegressionSpec::default()),
            Mode::Drns => DataSource::SyntheticMultilabel(MultilabelSpec::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// The multiclass set shipped with the crate.
    Bundled,
    SyntheticMulticlass(MulticlassSpec),
    SyntheticMultilabel(MultilabelSpec),
    SyntheticRegression(RegressionSpec),
    MulticlassCsv {
        path: PathBuf,
        #[serde(default)]
        header: bool,
    },
    RegressionCsv {
        path: PathBuf,
        #[serde(default)]
        header: bool,
    },
    MultilabelSparse {
        path: PathBuf,
        #[serde(default, rename = "K")]
        k: Option<usize>,
    },
}

pub enum LoadedData {
    Multiclass(MulticlassDataset),
    Multilabel(MultilabelDataset),
    Regression(RegressionDataset),
}

/// Materializes a data source; synthetic generators draw from the data
/// stream of the master seed.
pub fn load_data(source: &DataSource, seed: u64) -> Result<LoadedData> {
    let data_seed = derive_seed(seed, streams::DATA, 0);
    Ok(match source {
        DataSource::Bundled => {
            LoadedData::Multiclass(parse_multiclass_csv(BUNDLED_MULTICLASS.as_bytes(), false)?)
        }
        DataSource::SyntheticMulticlass(spec) => {
            LoadedData::Multiclass(synthetic_multiclass(spec, data_seed)?)
        }
        DataSource::SyntheticMultilabel(spec) => {
            LoadedData::Multilabel(synthetic_multilabel(spec, data_seed)?)
        }
        DataSource::SyntheticRegression(spec) => {
            LoadedData::Regression(synthetic_regression(spec, data_seed)?)
        }
        DataSource::MulticlassCsv { path, header } => {
            LoadedData::Multiclass(read_multiclass_csv(path, *header)?)
        }
        DataSource::RegressionCsv { path, header } => {
            LoadedData::Regression(read_regression_csv(path, *header)?)
        }
        DataSource::MultilabelSparse { path, k } => {
            LoadedData::Multilabel(read_multilabel_sparse(path, *k)?)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Defaults to the mode's standard count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Defaults to the mode's standard data set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSource>,
    pub eval: EvalConfig,
    pub optimize: OptimizeConfig,
    pub shift: ShiftConfig,
    pub drns: DrnsSweepConfig,
}

impl ExperimentConfig {
    pub fn for_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn replicates(&self) -> usize {
        self.replicates
            .unwrap_or_else(|| self.mode.default_replicates())
    }

    pub fn data_source(&self) -> DataSource {
        self.data
            .clone()
            .unwrap_or_else(|| self.mode.default_data())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates() == 0 {
            return Err(Error::validation("replicates must be at least 1"));
        }
        match self.mode {
            Mode::EvalStationary => self.eval.validate(),
            Mode::Optimize => self.optimize.validate(),
            Mode::CovariateShift => self.shift.validate(),
            Mode::Drns => self.drns.validate(),
        }
    }
}
