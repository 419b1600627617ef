//! TOML run configuration. Every key mirrors a CLI flag; flags win.
//!
//! ```toml
//! seed = 7
//!
//! [weighting]
//! scheme = "ad"
//! stats_scope = "train"   # or "all"
//!
//! [aggregation]
//! method = "la"
//!
//! [extract]
//! tags = "hpai"
//!
//! [representation]
//! l2_normalize = false
//!
//! [filters]
//! min_site_traffic = 100
//! min_user_site_freq = 5
//! min_content_words = 10
//! min_sites_per_user = 20
//!
//! [learn]
//! classifier = "svm"       # or "logistic"
//! attribute = "gender"     # or "age"
//! c_grid = [0.03125, 0.125, 0.5, 2.0, 8.0, 32.0]
//! folds = 5
//! train_fraction = 0.6
//! standardize = false
//! epsilon = 0.1
//! max_epochs = 200
//! tol = 1e-4
//!
//! [input]
//! data = "synthetic"       # directory holding the files below
//! embeddings = "synthetic/embeddings.bin"
//! html = "synthetic/html"
//! browsing = "synthetic/browsing.tsv"
//! tendency = "synthetic/tendency.tsv"
//! cache_dir = ".cache"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::data::Attribute;
use super::experiment::{Classifier, ExperimentConfig, StatsScope};
use super::filter::FilterConfig;
use super::PipelineError;
use crate::aggregation::AggregationMethod;
use crate::html_extract::TagMask;
use crate::weighting::WeightingScheme;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    #[serde(default)]
    pub weighting: WeightingSection,
    #[serde(default)]
    pub aggregation: AggregationSection,
    #[serde(default)]
    pub extract: ExtractSection,
    #[serde(default)]
    pub representation: RepresentationSection,
    #[serde(default)]
    pub filters: FiltersSection,
    #[serde(default)]
    pub learn: LearnSection,
    #[serde(default)]
    pub input: InputPaths,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightingSection {
    pub scheme: Option<WeightingScheme>,
    pub stats_scope: Option<StatsScope>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregationSection {
    pub method: Option<AggregationMethod>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    pub tags: Option<TagMask>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationSection {
    pub l2_normalize: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersSection {
    pub min_site_traffic: Option<u64>,
    pub min_user_site_freq: Option<u64>,
    pub min_content_words: Option<usize>,
    pub min_sites_per_user: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnSection {
    pub classifier: Option<Classifier>,
    pub attribute: Option<Attribute>,
    pub c_grid: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub train_fraction: Option<f64>,
    pub standardize: Option<bool>,
    pub epsilon: Option<f64>,
    pub max_epochs: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub html: Option<PathBuf>,
    pub browsing: Option<PathBuf>,
    pub tendency: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

impl InputPaths {
    fn resolve(&self, explicit: &Option<PathBuf>, default_name: &str) -> Result<PathBuf, PipelineError> {
        match (explicit, &self.data) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(dir)) => Ok(dir.join(default_name)),
            (None, None) => Err(PipelineError::Usage(format!(
                "no path for {default_name}; pass --data or configure [input]"
            ))),
        }
    }

    pub fn embeddings_path(&self) -> Result<PathBuf, PipelineError> {
        self.resolve(&self.embeddings, "embeddings.bin")
    }

    pub fn html_path(&self) -> Result<PathBuf, PipelineError> {
        self.resolve(&self.html, "html")
    }

    pub fn browsing_path(&self) -> Result<PathBuf, PipelineError> {
        self.resolve(&self.browsing, "browsing.tsv")
    }

    pub fn tendency_path(&self) -> Result<PathBuf, PipelineError> {
        self.resolve(&self.tendency, "tendency.tsv")
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::parse(&text)
    }

    /// Experiment settings: defaults overlaid with whatever the file sets.
    pub fn experiment(&self) -> ExperimentConfig {
        let mut e = ExperimentConfig::default();
        let f = &self.filters;
        let d = FilterConfig::default();
        e.filters = FilterConfig {
            min_site_traffic: f.min_site_traffic.unwrap_or(d.min_site_traffic),
            min_user_site_freq: f.min_user_site_freq.unwrap_or(d.min_user_site_freq),
            min_content_words: f.min_content_words.unwrap_or(d.min_content_words),
            min_sites_per_user: f.min_sites_per_user.unwrap_or(d.min_sites_per_user),
        };
        if let Some(s) = self.seed {
            e.seed = s;
        }
        if let Some(m) = self.extract.tags {
            e.mask = m;
        }
        if let Some(s) = self.weighting.stats_scope {
            e.stats_scope = s;
        }
        if let Some(v) = self.representation.l2_normalize {
            e.l2_normalize = v;
        }
        let l = &self.learn;
        if let Some(v) = &l.c_grid {
            e.c_grid = v.clone();
        }
        if let Some(v) = l.folds {
            e.folds = v;
        }
        if let Some(v) = l.train_fraction {
            e.train_fraction = v;
        }
        if let Some(v) = l.standardize {
            e.standardize = v;
        }
        if let Some(v) = l.epsilon {
            e.epsilon = v;
        }
        if let Some(v) = l.max_epochs {
            e.max_epochs = v;
        }
        if let Some(v) = l.tol {
            e.tol = v;
        }
        e
    }
}
