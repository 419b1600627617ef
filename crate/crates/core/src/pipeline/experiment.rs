//! Demography and tag-combination experiments and their reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{
    build_site_vectors, corpus_stats_for, extract_corpus, CacheKey, SiteCorpus, SiteVectorCache,
    SiteVectors,
};
use super::data::{Attribute, BrowsingLog};
use super::filter::{apply_filters, FilterConfig, StageCounts};
use super::PipelineError;
use crate::aggregation::{aggregate, AggregationError, AggregationMethod, BrowsingMatrix};
use crate::embedding::EmbeddingMatrix;
use crate::html_extract::TagMask;
use crate::learn::{
    default_c_grid, evaluate, shuffle_split, stratified_split, Dataset, GridSearch,
    GridSearchResult, Learner, Metrics, SolverConfig,
};
use crate::weighting::WeightingScheme;

pub const REPORT_VERSION: u32 = 1;

/// Which documents feed the document frequencies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsScope {
    /// Sites seen on the training side only (visited by training users, or
    /// training sites in the tag experiment).
    #[default]
    Train,
    /// Every site that is vectorized.
    All,
}

impl FromStr for StatsScope {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(StatsScope::Train),
            "all" => Ok(StatsScope::All),
            _ => Err(PipelineError::Usage(format!(
                "unknown stats scope {s:?} (expected train or all)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classifier {
    Svm,
    Logistic,
}

impl Classifier {
    pub fn learner(self) -> Learner {
        match self {
            Classifier::Svm => Learner::Svm,
            Classifier::Logistic => Learner::Logistic,
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classifier::Svm => "svm",
            Classifier::Logistic => "logistic",
        })
    }
}

impl FromStr for Classifier {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "svm" => Ok(Classifier::Svm),
            "logistic" | "lr" => Ok(Classifier::Logistic),
            _ => Err(PipelineError::Usage(format!(
                "unknown classifier {s:?} (expected svm or logistic)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub filters: FilterConfig,
    pub mask: TagMask,
    pub stats_scope: StatsScope,
    pub l2_normalize: bool,
    pub standardize: bool,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub train_fraction: f64,
    /// SVR tube half-width.
    pub epsilon: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        ExperimentConfig {
            seed: 0,
            filters: FilterConfig::default(),
            mask: TagMask::HPAI,
            stats_scope: StatsScope::Train,
            l2_normalize: false,
            standardize: false,
            c_grid: default_c_grid(),
            folds: 5,
            train_fraction: 0.6,
            epsilon: 0.1,
            max_epochs: solver.max_epochs,
            tol: solver.tol,
        }
    }
}

impl ExperimentConfig {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            seed: self.seed,
            max_epochs: self.max_epochs,
            tol: self.tol,
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(PipelineError::Usage(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.c_grid.is_empty() {
            return Err(PipelineError::Usage("empty C grid".into()));
        }
        Ok(())
    }

    fn grid_search(&self, learner: Learner) -> GridSearch {
        GridSearch {
            learner,
            c_grid: self.c_grid.clone(),
            folds: self.folds,
            standardize: self.standardize,
            solver: self.solver(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    /// Filter cascade counts (demography only).
    pub filter_stages: Vec<StageCounts>,
    /// Users (demography) or sites (tag experiment) entering the split.
    pub samples: usize,
    pub train: usize,
    pub test: usize,
    /// Sites that received a vector.
    pub sites: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub embedding_terms: usize,
    pub embedding_dim: usize,
    pub embedding_fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    /// Full configuration of the cell, e.g. `ad/la/svm/gender` or `tags/hpai/ad/svr`.
    pub name: String,
    pub scheme: WeightingScheme,
    pub mask: TagMask,
    pub aggregation: Option<AggregationMethod>,
    pub classifier: Option<Classifier>,
    pub attribute: Option<Attribute>,
    pub learner: Learner,
    pub n_train: usize,
    pub n_test: usize,
    /// Users that had no usable site vector, or sites with no tokens.
    pub excluded: usize,
    pub grid: GridSearchResult,
    pub test: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub report_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub cells: Vec<ExperimentCell>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(s).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// One row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "experiment,name,scheme,mask,aggregation,classifier,attribute,best_c,n_train,n_test,excluded,accuracy,rmse\n",
        );
        let opt = |v: Option<String>| v.unwrap_or_default();
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.experiment,
                c.name,
                c.scheme,
                c.mask,
                opt(c.aggregation.map(|a| a.to_string())),
                opt(c.classifier.map(|a| a.to_string())),
                opt(c.attribute.map(|a| a.to_string())),
                c.grid.best_c,
                c.n_train,
                c.n_test,
                c.excluded,
                opt(c.test.accuracy.map(|a| a.to_string())),
                opt(c.test.rmse.map(|a| a.to_string())),
            ));
        }
        out
    }
}

/// Everything the demography experiment reads.
pub struct DemographyInputs<'a> {
    pub log: &'a BrowsingLog,
    /// Pages extracted under `config.mask`.
    pub corpus: &'a SiteCorpus,
    pub embedding: &'a EmbeddingMatrix,
    pub cache: Option<&'a SiteVectorCache>,
}

fn summary_for(emb: &EmbeddingMatrix) -> DatasetSummary {
    DatasetSummary {
        embedding_terms: emb.len(),
        embedding_dim: emb.dim(),
        embedding_fingerprint: emb.fingerprint(),
        ..Default::default()
    }
}

#[allow(clippy::too_many_arguments)]
fn vectors_for(
    corpus: &SiteCorpus,
    sites: &[String],
    stats_sites: &[String],
    scheme: WeightingScheme,
    emb: &EmbeddingMatrix,
    fingerprint: &str,
    normalize: bool,
    cache: Option<&SiteVectorCache>,
) -> Result<SiteVectors, PipelineError> {
    let build = || {
        let stats = corpus_stats_for(corpus, stats_sites.iter().map(String::as_str))?;
        build_site_vectors(corpus, sites, &stats, scheme, emb, normalize)
    };
    match cache {
        None => build(),
        Some(cache) => {
            let stats_digest = corpus.digest(stats_sites.iter().map(String::as_str));
            let sites_digest = corpus.digest(sites.iter().map(String::as_str));
            let key = CacheKey {
                scheme,
                mask: corpus.mask,
                embedding_fingerprint: fingerprint,
                stats_digest: &stats_digest,
                sites_digest: &sites_digest,
                normalize,
            };
            cache.get_or_build(&key, build)
        }
    }
}

/// Filtered users, their labels and the shared train/test split.
pub struct PreparedDemography {
    pub matrix: BrowsingMatrix,
    pub stages: Vec<StageCounts>,
    pub users: Vec<String>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    /// Sites surviving the filters; these get vectors.
    pub sites: Vec<String>,
    /// Sites whose documents feed the corpus statistics.
    pub stats_sites: Vec<String>,
}

/// Filters the log and splits the surviving users 3:2 (by default),
/// stratified by `attribute`.
pub fn prepare_demography(
    log: &BrowsingLog,
    corpus: &SiteCorpus,
    attribute: Attribute,
    config: &ExperimentConfig,
) -> Result<PreparedDemography, PipelineError> {
    config.validate()?;
    let filtered = apply_filters(&log.matrix, &corpus.token_counts(), &config.filters)?;
    let users = filtered.users;
    let class_names = attribute.class_names();
    let mut labels = Vec::with_capacity(users.len());
    for u in &users {
        let l = log
            .labels
            .get(u)
            .ok_or_else(|| PipelineError::Usage(format!("user {u:?} has no labels")))?;
        labels.push(attribute.label_index(l));
    }
    let (train_idx, test_idx) =
        stratified_split(&labels, class_names.len(), config.train_fraction, config.seed);
    let matrix = filtered.matrix;
    let sites = matrix.sites();
    let stats_sites: Vec<String> = match config.stats_scope {
        StatsScope::All => sites.clone(),
        StatsScope::Train => {
            let set: BTreeSet<&String> = train_idx
                .iter()
                .flat_map(|&i| matrix.row(&users[i]).into_iter().flat_map(|r| r.keys()))
                .collect();
            set.into_iter().cloned().collect()
        }
    };
    Ok(PreparedDemography {
        matrix,
        stages: filtered.stages,
        users,
        labels,
        class_names,
        train_idx,
        test_idx,
        sites,
        stats_sites,
    })
}

impl PreparedDemography {
    /// Site vectors for every surviving site under `scheme`.
    pub fn site_vectors(
        &self,
        corpus: &SiteCorpus,
        embedding: &EmbeddingMatrix,
        scheme: WeightingScheme,
        config: &ExperimentConfig,
        cache: Option<&SiteVectorCache>,
    ) -> Result<SiteVectors, PipelineError> {
        vectors_for(
            corpus,
            &self.sites,
            &self.stats_sites,
            scheme,
            embedding,
            &embedding.fingerprint(),
            config.l2_normalize,
            cache,
        )
    }

    /// Aggregated user vectors for the users at `idx`. Users without any
    /// usable site vector are skipped; their ids are returned separately.
    pub fn user_dataset(
        &self,
        idx: &[usize],
        vectors: &SiteVectors,
        method: AggregationMethod,
    ) -> Result<(Dataset, Vec<String>, Vec<String>), PipelineError> {
        let mut feats = Vec::new();
        let mut labs = Vec::new();
        let mut kept = Vec::new();
        let mut excluded = Vec::new();
        for &i in idx {
            let user = &self.users[i];
            let row = self.matrix.row(user).expect("filtered user has a row");
            match aggregate(method, user, row, vectors) {
                Ok(uv) => {
                    feats.push(uv.vec);
                    labs.push(self.labels[i]);
                    kept.push(user.clone());
                }
                Err(AggregationError::NoSites(_)) => excluded.push(user.clone()),
                Err(e) => return Err(e.into()),
            }
        }
        let data = Dataset::classification(feats, labs, self.class_names.clone())?;
        Ok((data, kept, excluded))
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.users.len()).collect()
    }
}

/// Sweeps every (scheme, aggregation, classifier) cell on one attribute.
///
/// Users surviving the filters are split once, stratified by the attribute,
/// so every cell sees the same train/test users; C is grid-searched by
/// cross-validation on the training side only.
pub fn run_demography_experiment(
    inputs: &DemographyInputs<'_>,
    schemes: &[WeightingScheme],
    methods: &[AggregationMethod],
    classifiers: &[Classifier],
    attribute: Attribute,
    config: &ExperimentConfig,
) -> Result<ExperimentReport, PipelineError> {
    if schemes.is_empty() || methods.is_empty() || classifiers.is_empty() {
        return Err(PipelineError::Usage(
            "need at least one scheme, aggregation method and classifier".into(),
        ));
    }
    let DemographyInputs {
        log,
        corpus,
        embedding,
        cache,
    } = *inputs;
    let prep = prepare_demography(log, corpus, attribute, config)?;

    let mut summary = summary_for(embedding);
    summary.filter_stages = prep.stages.clone();
    summary.samples = prep.users.len();
    summary.train = prep.train_idx.len();
    summary.test = prep.test_idx.len();
    summary.sites = prep.sites.len();
    for &l in &prep.labels {
        *summary.class_counts.entry(prep.class_names[l].clone()).or_default() += 1;
    }

    let vectors: Vec<SiteVectors> = schemes
        .par_iter()
        .map(|&scheme| {
            prep.site_vectors(corpus, embedding, scheme, config, cache)
                .map_err(|e| e.in_cell(scheme.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut grid = Vec::new();
    for (si, &scheme) in schemes.iter().enumerate() {
        for &method in methods {
            for &classifier in classifiers {
                grid.push((si, scheme, method, classifier));
            }
        }
    }
    let cells: Vec<ExperimentCell> = grid
        .par_iter()
        .map(|&(si, scheme, method, classifier)| {
            let name = format!("{scheme}/{method}/{classifier}/{attribute}");
            let run = || -> Result<ExperimentCell, PipelineError> {
                let (train, _, ex_train) = prep.user_dataset(&prep.train_idx, &vectors[si], method)?;
                let (test, _, ex_test) = prep.user_dataset(&prep.test_idx, &vectors[si], method)?;
                let search = config.grid_search(classifier.learner());
                let grid = search.run(&train)?;
                let model = search
                    .learner
                    .train_scaled(&train, grid.best_c, &search.solver, config.standardize)?;
                let test_metrics = evaluate(&model, &test)?;
                Ok(ExperimentCell {
                    name: name.clone(),
                    scheme,
                    mask: corpus.mask,
                    aggregation: Some(method),
                    classifier: Some(classifier),
                    attribute: Some(attribute),
                    learner: classifier.learner(),
                    n_train: train.len(),
                    n_test: test.len(),
                    excluded: ex_train.len() + ex_test.len(),
                    grid,
                    test: test_metrics,
                })
            };
            run().map_err(|e| e.in_cell(name.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut warnings = Vec::new();
    for c in &cells {
        if c.excluded > 0 {
            warnings.push(format!("{}: {} users had no usable site vector", c.name, c.excluded));
        }
    }
    Ok(ExperimentReport {
        report_version: REPORT_VERSION,
        experiment: "demography".into(),
        config: config.clone(),
        dataset: summary,
        cells,
        warnings,
    })
}

/// Everything the tag-combination experiment reads.
pub struct TagInputs<'a> {
    /// Site and male-tendency score in [0, 1].
    pub tendency: &'a [(String, f64)],
    pub pages: &'a BTreeMap<String, Vec<u8>>,
    pub embedding: &'a EmbeddingMatrix,
    pub cache: Option<&'a SiteVectorCache>,
}

/// Regresses site tendency on site vectors built under each tag mask.
/// Cells are sorted by test RMSE, ascending.
pub fn run_tag_experiment(
    inputs: &TagInputs<'_>,
    masks: &[TagMask],
    scheme: WeightingScheme,
    config: &ExperimentConfig,
) -> Result<ExperimentReport, PipelineError> {
    if masks.is_empty() {
        return Err(PipelineError::Usage("need at least one tag mask".into()));
    }
    config.validate()?;
    let mut tendency: Vec<(String, f64)> = inputs.tendency.to_vec();
    tendency.sort_by(|a, b| a.0.cmp(&b.0));
    for (site, score) in &tendency {
        if !(0.0..=1.0).contains(score) {
            return Err(PipelineError::Usage(format!(
                "tendency of {site:?} is {score}, outside [0, 1]"
            )));
        }
    }
    if tendency.len() < 2 {
        return Err(PipelineError::Usage(format!(
            "the tag experiment needs at least 2 sites, got {}",
            tendency.len()
        )));
    }
    let sites: Vec<String> = tendency.iter().map(|(s, _)| s.clone()).collect();
    let targets: Vec<f64> = tendency.iter().map(|(_, t)| *t).collect();
    let (train_idx, test_idx) = shuffle_split(sites.len(), config.train_fraction, config.seed);
    let pages: BTreeMap<String, Vec<u8>> = sites
        .iter()
        .filter_map(|s| inputs.pages.get(s).map(|p| (s.clone(), p.clone())))
        .collect();
    let stats_sites: Vec<String> = match config.stats_scope {
        StatsScope::All => sites.clone(),
        StatsScope::Train => train_idx.iter().map(|&i| sites[i].clone()).collect(),
    };

    let mut summary = summary_for(inputs.embedding);
    summary.samples = sites.len();
    summary.train = train_idx.len();
    summary.test = test_idx.len();
    summary.sites = pages.len();
    let fingerprint = &summary.embedding_fingerprint;
    let dim = inputs.embedding.dim();
    let learner = Learner::Svr {
        epsilon: config.epsilon,
    };

    let results: Vec<(ExperimentCell, Option<String>)> = masks
        .par_iter()
        .map(|&mask| {
            let name = format!("tags/{mask}/{scheme}/svr");
            let run = || -> Result<(ExperimentCell, Option<String>), PipelineError> {
                let corpus = extract_corpus(&pages, mask);
                let empty = sites
                    .iter()
                    .filter(|s| corpus.get(s).is_none_or(|d| d.total_terms() == 0))
                    .count();
                let vectors = vectors_for(
                    &corpus,
                    &sites,
                    &stats_sites,
                    scheme,
                    inputs.embedding,
                    fingerprint,
                    config.l2_normalize,
                    inputs.cache,
                )?;
                let feature = |i: usize| -> Vec<f64> {
                    match vectors.get(&sites[i]) {
                        Some(v) => v.iter().map(|&x| x as f64).collect(),
                        None => vec![0.0; dim],
                    }
                };
                let side = |idx: &[usize]| {
                    Dataset::regression(
                        idx.iter().map(|&i| feature(i)).collect(),
                        idx.iter().map(|&i| targets[i]).collect(),
                    )
                };
                let train = side(&train_idx)?;
                let test = side(&test_idx)?;
                let search = config.grid_search(learner);
                let grid = search.run(&train)?;
                let model =
                    learner.train_scaled(&train, grid.best_c, &search.solver, config.standardize)?;
                let metrics = evaluate(&model, &test)?;
                let warning = (2 * empty > sites.len()).then(|| {
                    format!("{name}: {empty} of {} sites have no tokens", sites.len())
                });
                Ok((
                    ExperimentCell {
                        name: name.clone(),
                        scheme,
                        mask,
                        aggregation: None,
                        classifier: None,
                        attribute: None,
                        learner,
                        n_train: train.len(),
                        n_test: test.len(),
                        excluded: empty,
                        grid,
                        test: metrics,
                    },
                    warning,
                ))
            };
            run().map_err(|e| e.in_cell(name))
        })
        .collect::<Result<_, _>>()?;

    let mut cells = Vec::with_capacity(results.len());
    let mut warnings = Vec::new();
    for (cell, warning) in results {
        cells.push(cell);
        warnings.extend(warning);
    }
    // Stable sort keeps the mask order among equal RMSEs.
    cells.sort_by(|a, b| {
        let (ra, rb) = (a.test.rmse.unwrap_or(f64::INFINITY), b.test.rmse.unwrap_or(f64::INFINITY));
        ra.total_cmp(&rb)
    });
    Ok(ExperimentReport {
        report_version: REPORT_VERSION,
        experiment: "tags".into(),
        config: config.clone(),
        dataset: summary,
        cells,
        warnings,
    })
}
