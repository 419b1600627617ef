use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    /// `labels[i]` indexes into `names`.
    Classes { names: Vec<String>, labels: Vec<usize> },
    Real(Vec<f64>),
}

/// Feature rows plus categorical or real targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    targets: Targets,
}

fn check_features(features: &[Vec<f64>]) -> Result<usize, LearnError> {
    let dim = features.first().map_or(0, Vec::len);
    for (i, row) in features.iter().enumerate() {
        if row.len() != dim {
            return Err(LearnError::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::NonFinite(i));
        }
    }
    Ok(dim)
}

impl Dataset {
    pub fn classification(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        names: Vec<String>,
    ) -> Result<Self, LearnError> {
        if features.len() != labels.len() {
            return Err(LearnError::LengthMismatch(features.len(), labels.len()));
        }
        check_features(&features)?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= names.len()) {
            return Err(LearnError::UnknownLabel(bad));
        }
        Ok(Dataset {
            features,
            targets: Targets::Classes { names, labels },
        })
    }

    pub fn regression(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, LearnError> {
        if features.len() != targets.len() {
            return Err(LearnError::LengthMismatch(features.len(), targets.len()));
        }
        check_features(&features)?;
        if let Some(i) = targets.iter().position(|t| !t.is_finite()) {
            return Err(LearnError::NonFinite(i));
        }
        Ok(Dataset {
            features,
            targets: Targets::Real(targets),
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn class_names(&self) -> Option<&[String]> {
        match &self.targets {
            Targets::Classes { names, .. } => Some(names),
            Targets::Real(_) => None,
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Real(_) => None,
        }
    }

    pub fn real_targets(&self) -> Option<&[f64]> {
        match &self.targets {
            Targets::Real(t) => Some(t),
            Targets::Classes { .. } => None,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let targets = match &self.targets {
            Targets::Classes { names, labels } => Targets::Classes {
                names: names.clone(),
                labels: indices.iter().map(|&i| labels[i]).collect(),
            },
            Targets::Real(t) => Targets::Real(indices.iter().map(|&i| t[i]).collect()),
        };
        Dataset { features, targets }
    }

    /// Applies `scaler` to every feature row.
    pub fn scaled(&self, scaler: &Scaler) -> Dataset {
        Dataset {
            features: self.features.iter().map(|r| scaler.transform(r)).collect(),
            targets: self.targets.clone(),
        }
    }
}

/// Per-feature standardization fitted on a training set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    /// Mean and population standard deviation; constant features get scale 1.
    pub fn fit(data: &Dataset) -> Scaler {
        let d = data.dim();
        let n = data.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in data.features() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in data.features() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { mean, scale }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}
