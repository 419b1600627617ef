//! Seeded splits, k-fold assignment and grid search over C.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Scaler};
use super::metrics::evaluate;
use super::model::LinearModel;
use super::{LearnError, SolverConfig};

/// Which training routine to run for a given C.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "learner")]
pub enum Learner {
    Svm,
    Logistic,
    Svr { epsilon: f64 },
}

impl Learner {
    pub fn train(&self, data: &Dataset, c: f64, cfg: &SolverConfig) -> Result<LinearModel, LearnError> {
        match *self {
            Learner::Svm => super::train_svm(data, c, cfg),
            Learner::Logistic => super::train_logistic(data, c, cfg),
            Learner::Svr { epsilon } => super::train_svr(data, c, epsilon, cfg),
        }
    }

    /// Trains on `data`, optionally standardizing with statistics of `data`.
    pub fn train_scaled(
        &self,
        data: &Dataset,
        c: f64,
        cfg: &SolverConfig,
        standardize: bool,
    ) -> Result<LinearModel, LearnError> {
        if !standardize {
            return self.train(data, c, cfg);
        }
        let scaler = Scaler::fit(data);
        let mut model = self.train(&data.scaled(&scaler), c, cfg)?;
        model.scaler = Some(scaler);
        Ok(model)
    }

    pub fn is_regression(&self) -> bool {
        matches!(self, Learner::Svr { .. })
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_k(k: usize, n: usize) -> Result<(), LearnError> {
    if k < 2 {
        return Err(LearnError::BadHyperparameter(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(LearnError::TooFewSamples { n, k });
    }
    Ok(())
}

/// Fold index per sample, balanced within every class.
pub fn stratified_folds(
    labels: &[usize],
    class_names: &[String],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>, LearnError> {
    check_k(k, labels.len())?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_names.len()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng(seed);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(LearnError::ClassTooSmall {
                class: class_names[class].clone(),
                members: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = next % k;
            next += 1;
        }
    }
    Ok(folds)
}

/// Fold index per sample for unstratified k-fold.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<usize>, LearnError> {
    check_k(k, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    let mut folds = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

/// Per-class shuffled split; each class contributes `round(train_fraction * n_c)`
/// samples to the training side. Both index lists are sorted.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = rng(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        let cut = (train_fraction * members.len() as f64).round() as usize;
        train.extend_from_slice(&members[..cut]);
        test.extend_from_slice(&members[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Shuffled split of `0..n` with `round(train_fraction * n)` training samples.
pub fn shuffle_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng(seed));
    let cut = (train_fraction * n as f64).round() as usize;
    let mut train = order[..cut].to_vec();
    let mut test = order[cut..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    /// Mean fold accuracy for classifiers, mean fold RMSE for regression.
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_c: f64,
    pub metric: String,
    pub points: Vec<GridPoint>,
}

#[derive(Clone, Debug)]
pub struct GridSearch {
    pub learner: Learner,
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub standardize: bool,
    pub solver: SolverConfig,
}

/// `2^-5, 2^-3, ..., 2^5`.
pub fn default_c_grid() -> Vec<f64> {
    (-5..=5).step_by(2).map(|e| 2f64.powi(e)).collect()
}

impl GridSearch {
    pub fn new(learner: Learner) -> Self {
        GridSearch {
            learner,
            c_grid: default_c_grid(),
            folds: 5,
            standardize: false,
            solver: SolverConfig::default(),
        }
    }

    /// Runs k-fold cross-validation for every C. Classifier folds are
    /// stratified. Best C maximizes mean accuracy (minimizes mean RMSE);
    /// ties go to the smallest C.
    pub fn run(&self, data: &Dataset) -> Result<GridSearchResult, LearnError> {
        if self.c_grid.is_empty() {
            return Err(LearnError::BadHyperparameter("empty C grid".into()));
        }
        let regression = self.learner.is_regression();
        let folds = match (regression, data.labels(), data.class_names()) {
            (false, Some(labels), Some(names)) => {
                stratified_folds(labels, names, self.folds, self.solver.seed)?
            }
            (false, _, _) => return Err(LearnError::Unsupported("classifier needs categorical labels")),
            (true, _, _) => kfold(data.len(), self.folds, self.solver.seed)?,
        };
        let splits: Vec<(Dataset, Dataset)> = (0..self.folds)
            .map(|f| {
                let train: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
                let test: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
                (data.subset(&train), data.subset(&test))
            })
            .collect();

        let points: Vec<GridPoint> = self
            .c_grid
            .par_iter()
            .map(|&c| -> Result<GridPoint, LearnError> {
                let fold_scores = splits
                    .iter()
                    .map(|(train, test)| {
                        let model = self.learner.train_scaled(train, c, &self.solver, self.standardize)?;
                        let m = evaluate(&model, test)?;
                        Ok(if regression {
                            m.rmse.expect("regression metrics")
                        } else {
                            m.accuracy.expect("classification metrics")
                        })
                    })
                    .collect::<Result<Vec<f64>, LearnError>>()?;
                let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
                Ok(GridPoint {
                    c,
                    mean_score,
                    fold_scores,
                })
            })
            .collect::<Result<_, _>>()?;

        let mut best = 0;
        for (i, p) in points.iter().enumerate() {
            let b = &points[best];
            let better = if regression {
                p.mean_score < b.mean_score
            } else {
                p.mean_score > b.mean_score
            };
            if better || (p.mean_score == b.mean_score && p.c < b.c) {
                best = i;
            }
        }
        Ok(GridSearchResult {
            best_c: points[best].c,
            metric: if regression { "rmse" } else { "accuracy" }.into(),
            points,
        })
    }
}

/// Convenience wrapper over [`GridSearch::run`].
pub fn grid_search_cv(
    data: &Dataset,
    learner: Learner,
    c_grid: &[f64],
    k: usize,
    seed: u64,
) -> Result<GridSearchResult, LearnError> {
    GridSearch {
        learner,
        c_grid: c_grid.to_vec(),
        folds: k,
        standardize: false,
        solver: SolverConfig {
            seed,
            ..SolverConfig::default()
        },
    }
    .run(data)
}
