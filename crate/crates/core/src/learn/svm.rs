//! Linear SVM classification (hinge loss) and epsilon-SVR.

use super::dataset::Dataset;
use super::model::{LinearModel, ModelKind, TrainingMetadata, MODEL_FORMAT_VERSION};
use super::smo::{self, DualProblem};
use super::{LearnError, SolverConfig};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1/2 |w|^2 + C sum max(0, 1 - y_i (w.x_i + b))` with `y_i` in {-1, +1}.
pub fn hinge_objective(w: &[f64], b: f64, features: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let loss: f64 = features
        .iter()
        .zip(y)
        .map(|(x, &yi)| (1.0 - yi * (dot(w, x) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * loss
}

/// `1/2 |w|^2 + C sum max(0, |y_i - (w.x_i + b)| - eps)`.
pub fn epsilon_insensitive_objective(
    w: &[f64],
    b: f64,
    features: &[Vec<f64>],
    targets: &[f64],
    c: f64,
    epsilon: f64,
) -> f64 {
    let loss: f64 = features
        .iter()
        .zip(targets)
        .map(|(x, &t)| ((t - dot(w, x) - b).abs() - epsilon).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * loss
}

pub(crate) fn check_c(c: f64) -> Result<(), LearnError> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(LearnError::BadHyperparameter(format!("C must be positive, got {c}")))
    }
}

/// Class indices present in `labels`, in schema order.
pub(crate) fn present_classes(labels: &[usize], n_names: usize) -> Vec<usize> {
    let mut seen = vec![false; n_names];
    for &l in labels {
        seen[l] = true;
    }
    (0..n_names).filter(|&k| seen[k]).collect()
}

/// One (positive-class) label vector in {-1, +1} per binary sub-problem.
pub(crate) fn one_vs_rest_targets(labels: &[usize], present: &[usize]) -> Vec<Vec<f64>> {
    let positives: Vec<usize> = if present.len() == 2 {
        vec![present[1]]
    } else {
        present.to_vec()
    };
    positives
        .iter()
        .map(|&k| labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect())
        .collect()
}

pub(crate) fn classification_parts(data: &Dataset) -> Result<(Vec<usize>, Vec<String>), LearnError> {
    let (Some(labels), Some(names)) = (data.labels(), data.class_names()) else {
        return Err(LearnError::Unsupported("classifier needs categorical labels"));
    };
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    let present = present_classes(labels, names.len());
    if present.len() < 2 {
        let name = present.first().map(|&k| names[k].clone()).unwrap_or_default();
        return Err(LearnError::SingleClass(name));
    }
    let classes = present.iter().map(|&k| names[k].clone()).collect();
    Ok((present, classes))
}

/// Trains an L2-regularized hinge-loss SVM; multiclass data is handled one-vs-rest.
pub fn train_svm(data: &Dataset, c: f64, cfg: &SolverConfig) -> Result<LinearModel, LearnError> {
    check_c(c)?;
    let (present, classes) = classification_parts(data)?;
    let labels = data.labels().expect("checked");
    let features = data.features();

    let mut model = LinearModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::SvmClassifier,
        classes: Some(classes),
        weights: Vec::new(),
        bias: Vec::new(),
        c_param: c,
        epsilon: None,
        seed: cfg.seed,
        scaler: None,
        training: TrainingMetadata {
            max_epochs: cfg.max_epochs,
            tol: cfg.tol,
            ..Default::default()
        },
    };
    for y in one_vs_rest_targets(labels, &present) {
        let problem = DualProblem {
            rows: features,
            sample: (0..features.len()).collect(),
            p: vec![-1.0; y.len()],
            y: y.clone(),
            c,
        };
        let sol = smo::solve(&problem, cfg.tol, cfg.max_epochs);
        let b = -sol.rho;
        model.training.objective.push(hinge_objective(&sol.w, b, features, &y, c));
        model.training.iterations.push(sol.iterations);
        model.training.converged.push(sol.converged);
        model.training.objective_trace.push(sol.objective_trace);
        model.weights.push(sol.w);
        model.bias.push(b);
    }
    Ok(model)
}

/// Trains a linear epsilon-insensitive support vector regressor.
pub fn train_svr(
    data: &Dataset,
    c: f64,
    epsilon: f64,
    cfg: &SolverConfig,
) -> Result<LinearModel, LearnError> {
    check_c(c)?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(LearnError::BadHyperparameter(format!(
            "epsilon must be non-negative, got {epsilon}"
        )));
    }
    let Some(targets) = data.real_targets() else {
        return Err(LearnError::Unsupported("regression needs real targets"));
    };
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    let n = targets.len();
    let features = data.features();
    let mut sample: Vec<usize> = (0..n).collect();
    sample.extend(0..n);
    let mut y = vec![1.0; n];
    y.extend(std::iter::repeat_n(-1.0, n));
    let mut p: Vec<f64> = targets.iter().map(|t| epsilon - t).collect();
    p.extend(targets.iter().map(|t| epsilon + t));
    let problem = DualProblem {
        rows: features,
        sample,
        y,
        p,
        c,
    };
    let sol = smo::solve(&problem, cfg.tol, cfg.max_epochs);
    let b = -sol.rho;
    let objective = epsilon_insensitive_objective(&sol.w, b, features, targets, c, epsilon);
    Ok(LinearModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Svr,
        classes: None,
        weights: vec![sol.w],
        bias: vec![b],
        c_param: c,
        epsilon: Some(epsilon),
        seed: cfg.seed,
        scaler: None,
        training: TrainingMetadata {
            iterations: vec![sol.iterations],
            converged: vec![sol.converged],
            objective: vec![objective],
            objective_trace: vec![sol.objective_trace],
            max_epochs: cfg.max_epochs,
            tol: cfg.tol,
        },
    })
}
