use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Targets};
use super::model::{LinearModel, Prediction};
use super::LearnError;

/// Rows are true classes, columns predicted classes, both in dataset schema order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
}

pub fn evaluate(model: &LinearModel, test: &Dataset) -> Result<Metrics, LearnError> {
    if test.is_empty() {
        return Err(LearnError::Empty);
    }
    match test.targets() {
        Targets::Classes { names, labels } => {
            if !model.is_classifier() {
                return Err(LearnError::SchemaMismatch("regression model on class labels".into()));
            }
            let k = names.len();
            let mut counts = vec![vec![0u64; k]; k];
            let mut correct = 0usize;
            for (x, &truth) in test.features().iter().zip(labels) {
                let Prediction::Class { name, .. } = model.predict(x)? else {
                    unreachable!("classifier predicts classes")
                };
                let predicted = names
                    .iter()
                    .position(|n| *n == name)
                    .ok_or_else(|| LearnError::SchemaMismatch(format!("model class {name:?} not in data schema")))?;
                counts[truth][predicted] += 1;
                if predicted == truth {
                    correct += 1;
                }
            }
            Ok(Metrics {
                n: test.len(),
                accuracy: Some(correct as f64 / test.len() as f64),
                rmse: None,
                confusion: Some(ConfusionMatrix {
                    classes: names.clone(),
                    counts,
                }),
            })
        }
        Targets::Real(targets) => {
            if model.is_classifier() {
                return Err(LearnError::SchemaMismatch("classifier on real targets".into()));
            }
            let mut sse = 0.0;
            for (x, &t) in test.features().iter().zip(targets) {
                let Prediction::Real(v) = model.predict(x)? else {
                    unreachable!("regressor predicts reals")
                };
                sse += (v - t).powi(2);
            }
            Ok(Metrics {
                n: test.len(),
                accuracy: None,
                rmse: Some((sse / test.len() as f64).sqrt()),
                confusion: None,
            })
        }
    }
}
