//! Ingestion, filtering, experiment orchestration and persistence.

pub mod config;
pub mod corpus;
pub mod data;
pub mod experiment;
pub mod filter;

use thiserror::Error;

use crate::aggregation::AggregationError;
use crate::embedding::EmbeddingError;
use crate::learn::LearnError;
use crate::representation::StoreError;
use crate::weighting::WeightingError;

pub use config::{Config, InputPaths};
pub use corpus::{
    build_site_vectors, corpus_stats_for, extract_corpus, load_html_dir, SiteCorpus,
    CacheKey, SiteVectorCache, SiteVectors,
};
pub use data::{
    load_browsing_log, load_tendency, parse_browsing_log, parse_tendency, AgeBand, Attribute,
    BrowsingLog, Gender, UserLabels,
};
pub use experiment::{
    run_demography_experiment, run_tag_experiment, Classifier, DatasetSummary, ExperimentCell,
    prepare_demography, DemographyInputs, ExperimentConfig, ExperimentReport, PreparedDemography,
    StatsScope, TagInputs,
};
pub use filter::{apply_filters, FilterConfig, FilterOutcome, StageCounts};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("every user was filtered out (stage counts: {})", format_stages(.0))]
    AllUsersFiltered(Vec<StageCounts>),
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Weighting(#[from] WeightingError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<PipelineError>,
    },
}

fn format_stages(stages: &[StageCounts]) -> String {
    stages
        .iter()
        .map(|s| format!("{} users={} sites={} entries={}", s.stage, s.users, s.sites, s.entries))
        .collect::<Vec<_>>()
        .join("; ")
}

impl PipelineError {
    pub(crate) fn in_cell(self, cell: impl Into<String>) -> Self {
        PipelineError::Cell {
            cell: cell.into(),
            source: Box::new(self),
        }
    }
}
