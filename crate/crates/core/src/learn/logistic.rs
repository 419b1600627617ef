//! L2-regularized logistic regression trained by damped Newton steps.

use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use super::model::{LinearModel, ModelKind, TrainingMetadata, MODEL_FORMAT_VERSION};
use super::svm::{check_c, classification_parts, one_vs_rest_targets};
use super::{LearnError, SolverConfig};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn margin(w: &[f64], b: f64, x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b
}

/// `1/2 |w|^2 + C sum ln(1 + exp(-y_i (w.x_i + b)))`, `y_i` in {-1, +1}.
pub fn logistic_objective(w: &[f64], b: f64, features: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let loss: f64 = features
        .iter()
        .zip(y)
        .map(|(x, &yi)| softplus(-yi * margin(w, b, x)))
        .sum();
    0.5 * w.iter().map(|v| v * v).sum::<f64>() + c * loss
}

/// Gradient of [`logistic_objective`] as `(d/dw, d/db)`.
pub fn logistic_gradient(
    w: &[f64],
    b: f64,
    features: &[Vec<f64>],
    y: &[f64],
    c: f64,
) -> (Vec<f64>, f64) {
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for (x, &yi) in features.iter().zip(y) {
        let coef = -c * yi * sigmoid(-yi * margin(w, b, x));
        for (g, v) in gw.iter_mut().zip(x) {
            *g += coef * v;
        }
        gb += coef;
    }
    (gw, gb)
}

struct Fit {
    w: Vec<f64>,
    b: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
}

fn fit_binary(features: &[Vec<f64>], y: &[f64], c: f64, cfg: &SolverConfig) -> Fit {
    let d = features.first().map_or(0, Vec::len);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut obj = logistic_objective(&w, b, features, y, c);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_epochs {
        let (gw, gb) = logistic_gradient(&w, b, features, y, c);
        let gnorm = gw.iter().map(|v| v.abs()).fold(gb.abs(), f64::max);
        if gnorm <= cfg.tol {
            converged = true;
            break;
        }
        let mut h = DMatrix::<f64>::identity(d + 1, d + 1);
        // The intercept is unregularized; a tiny ridge keeps H positive definite.
        h[(d, d)] = 1e-10;
        for (x, &yi) in features.iter().zip(y) {
            let z = yi * margin(&w, b, x);
            let s = c * sigmoid(z) * sigmoid(-z);
            if s == 0.0 {
                continue;
            }
            for r in 0..=d {
                let xr = if r < d { x[r] } else { 1.0 };
                if xr == 0.0 {
                    continue;
                }
                for col in 0..=r {
                    let xc = if col < d { x[col] } else { 1.0 };
                    h[(r, col)] += s * xr * xc;
                }
            }
        }
        for r in 0..=d {
            for col in r + 1..=d {
                h[(r, col)] = h[(col, r)];
            }
        }
        let mut g = DVector::from_vec(gw);
        g = g.insert_row(d, gb);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };

        let slope: f64 = step.dot(&g);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let w_new: Vec<f64> = w.iter().enumerate().map(|(k, v)| v - t * step[k]).collect();
            let b_new = b - t * step[d];
            let new_obj = logistic_objective(&w_new, b_new, features, y, c);
            if new_obj <= obj - 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                obj = new_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        trace.push(obj);
        if !accepted {
            converged = true;
            break;
        }
    }
    Fit {
        w,
        b,
        iterations,
        converged,
        trace,
    }
}

/// Trains a logistic-regression classifier; multiclass data is handled one-vs-rest.
pub fn train_logistic(
    data: &Dataset,
    c: f64,
    cfg: &SolverConfig,
) -> Result<LinearModel, LearnError> {
    check_c(c)?;
    let (present, classes) = classification_parts(data)?;
    let labels = data.labels().expect("checked");
    let features = data.features();
    let mut model = LinearModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: ModelKind::Logistic,
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
        let fit = fit_binary(features, &y, c, cfg);
        model.training.iterations.push(fit.iterations);
        model.training.converged.push(fit.converged);
        model.training.objective.push(*fit.trace.last().expect("non-empty"));
        model.training.objective_trace.push(fit.trace);
        model.weights.push(fit.w);
        model.bias.push(fit.b);
    }
    Ok(model)
}
