use serde::{Deserialize, Serialize};

use super::dataset::Scaler;
use super::LearnError;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SvmClassifier,
    Svr,
    Logistic,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    /// One entry per trained binary sub-problem.
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Final primal objective per sub-problem.
    pub objective: Vec<f64>,
    /// Solver objective per epoch, per sub-problem (dual for SMO, primal for
    /// Newton). Non-increasing.
    pub objective_trace: Vec<Vec<f64>>,
    pub max_epochs: usize,
    pub tol: f64,
}

/// A trained linear model.
///
/// Binary classifiers keep a single weight vector scoring `classes[1]`
/// against `classes[0]`; K-class one-vs-rest models keep K. Regression
/// models keep one vector and no classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub classes: Option<Vec<String>>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub c_param: f64,
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub scaler: Option<Scaler>,
    pub training: TrainingMetadata,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Class { index: usize, name: String },
    Real(f64),
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn is_classifier(&self) -> bool {
        self.kind != ModelKind::Svr
    }

    fn prepared<'a>(&self, x: &'a [f64]) -> Result<std::borrow::Cow<'a, [f64]>, LearnError> {
        if x.len() != self.dim() {
            return Err(LearnError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(match &self.scaler {
            Some(s) => std::borrow::Cow::Owned(s.transform(x)),
            None => std::borrow::Cow::Borrowed(x),
        })
    }

    /// Raw decision values `w_k . x + b_k`, one per stored weight vector.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        let x = self.prepared(x)?;
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x.iter()).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect())
    }

    /// Per-class scores. A binary model with decision value `s` scores
    /// `(-s, s)`.
    pub fn class_scores(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        let d = self.decision_values(x)?;
        Ok(if d.len() == 1 && self.is_classifier() {
            vec![-d[0], d[0]]
        } else {
            d
        })
    }

    /// Argmax class (first maximal score wins) or the regression value.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, LearnError> {
        if !self.is_classifier() {
            return Ok(Prediction::Real(self.decision_values(x)?[0]));
        }
        let scores = self.class_scores(x)?;
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        let name = self
            .classes
            .as_ref()
            .and_then(|c| c.get(best))
            .cloned()
            .unwrap_or_default();
        Ok(Prediction::Class { index: best, name })
    }

    /// Class probabilities of a logistic model. One-vs-rest sigmoids are
    /// renormalized to sum to one.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        if self.kind != ModelKind::Logistic {
            return Err(LearnError::Unsupported("probabilities need a logistic model"));
        }
        let d = self.decision_values(x)?;
        if d.len() == 1 {
            let p = super::logistic::sigmoid(d[0]);
            return Ok(vec![1.0 - p, p]);
        }
        let s: Vec<f64> = d.iter().map(|&v| super::logistic::sigmoid(v)).collect();
        let total: f64 = s.iter().sum();
        Ok(s.into_iter().map(|v| v / total).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LearnError> {
        let m: LinearModel =
            serde_json::from_str(s).map_err(|e| LearnError::Format(e.to_string()))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::Format(format!(
                "unsupported model version {}",
                m.format_version
            )));
        }
        if m.weights.len() != m.bias.len() || m.weights.is_empty() {
            return Err(LearnError::Format("weights and bias disagree".into()));
        }
        Ok(m)
    }
}
