//! User vectors from the sites a user visited.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("no representable sites for user {0:?}")]
    NoSites(String),
    #[error("unknown aggregation method {0:?} (expected wa, la or sa)")]
    BadMethod(String),
    #[error("site vectors for user {0:?} have inconsistent dimensions")]
    DimensionMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggregationMethod {
    /// Weights proportional to visit frequency.
    Weighted,
    /// Weights proportional to ln(visit frequency).
    Log,
    /// Uniform weights over visited sites.
    Simple,
}

impl AggregationMethod {
    pub const ALL: [AggregationMethod; 3] = [
        AggregationMethod::Weighted,
        AggregationMethod::Log,
        AggregationMethod::Simple,
    ];

    pub fn code(self) -> &'static str {
        match self {
            AggregationMethod::Weighted => "wa",
            AggregationMethod::Log => "la",
            AggregationMethod::Simple => "sa",
        }
    }
}

impl fmt::Display for AggregationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AggregationMethod {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wa" => Ok(AggregationMethod::Weighted),
            "la" => Ok(AggregationMethod::Log),
            "sa" => Ok(AggregationMethod::Simple),
            _ => Err(AggregationError::BadMethod(s.to_string())),
        }
    }
}

impl Serialize for AggregationMethod {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for AggregationMethod {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sparse user x site visit-frequency matrix. Absent entries are zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BrowsingMatrix {
    rows: BTreeMap<String, BTreeMap<String, u64>>,
}

impl BrowsingMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `freq` visits; repeated (user, site) pairs accumulate. Zero adds nothing.
    pub fn add(&mut self, user: &str, site: &str, freq: u64) {
        if freq == 0 {
            return;
        }
        *self
            .rows
            .entry(user.to_string())
            .or_default()
            .entry(site.to_string())
            .or_default() += freq;
    }

    pub fn row(&self, user: &str) -> Option<&BTreeMap<String, u64>> {
        self.rows.get(user)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u64>)> {
        self.rows.iter().map(|(u, r)| (u.as_str(), r))
    }

    pub fn users(&self) -> Vec<String> {
        self.rows.keys().cloned().collect()
    }

    pub fn sites(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.rows.values().flat_map(|r| r.keys()).collect();
        set.into_iter().cloned().collect()
    }

    pub fn get(&self, user: &str, site: &str) -> u64 {
        self.rows
            .get(user)
            .and_then(|r| r.get(site))
            .copied()
            .unwrap_or(0)
    }

    pub fn n_users(&self) -> usize {
        self.rows.len()
    }

    pub fn n_entries(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    /// Total visits per site across all users.
    pub fn site_traffic(&self) -> BTreeMap<String, u64> {
        let mut out: BTreeMap<String, u64> = BTreeMap::new();
        for row in self.rows.values() {
            for (site, &f) in row {
                *out.entry(site.clone()).or_default() += f;
            }
        }
        out
    }

    /// Keeps entries for which `keep(user, site, freq)` holds; empty rows are removed.
    pub fn retain(&mut self, mut keep: impl FnMut(&str, &str, u64) -> bool) {
        for (user, row) in self.rows.iter_mut() {
            row.retain(|site, f| keep(user, site, *f));
        }
        self.rows.retain(|_, row| !row.is_empty());
    }

    pub fn retain_users(&mut self, mut keep: impl FnMut(&str, &BTreeMap<String, u64>) -> bool) {
        self.rows.retain(|u, r| keep(u, r));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserVector {
    pub user_id: String,
    pub vec: Vec<f64>,
    pub n_sites: usize,
}

/// Normalized aggregation weights for the given visit frequencies.
///
/// Log weights whose sum is zero (every frequency is 1) fall back to uniform.
pub fn aggregation_weights(method: AggregationMethod, freqs: &[u64]) -> Vec<f64> {
    let raw: Vec<f64> = match method {
        AggregationMethod::Weighted => freqs.iter().map(|&f| f as f64).collect(),
        AggregationMethod::Log => freqs.iter().map(|&f| (f.max(1) as f64).ln()).collect(),
        AggregationMethod::Simple => vec![1.0; freqs.len()],
    };
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.into_iter().map(|w| w / total).collect()
    } else if freqs.is_empty() {
        Vec::new()
    } else {
        vec![1.0 / freqs.len() as f64; freqs.len()]
    }
}

/// Aggregates one user's row. Sites without a vector, or with an all-zero
/// vector, are excluded before weighting.
pub fn aggregate<V: AsRef<[f32]>>(
    method: AggregationMethod,
    user_id: &str,
    row: &BTreeMap<String, u64>,
    site_vecs: &HashMap<String, V>,
) -> Result<UserVector, AggregationError> {
    let mut freqs = Vec::new();
    let mut vecs: Vec<&[f32]> = Vec::new();
    for (site, &f) in row {
        if f == 0 {
            continue;
        }
        let Some(v) = site_vecs.get(site) else {
            continue;
        };
        let v = v.as_ref();
        if v.iter().all(|&x| x == 0.0) {
            continue;
        }
        freqs.push(f);
        vecs.push(v);
    }
    let dim = match vecs.first() {
        Some(v) => v.len(),
        None => return Err(AggregationError::NoSites(user_id.to_string())),
    };
    if vecs.iter().any(|v| v.len() != dim) {
        return Err(AggregationError::DimensionMismatch(user_id.to_string()));
    }
    let weights = aggregation_weights(method, &freqs);
    let mut acc = vec![0f64; dim];
    for (w, v) in weights.iter().zip(&vecs) {
        for (a, &x) in acc.iter_mut().zip(v.iter()) {
            *a += w * x as f64;
        }
    }
    Ok(UserVector {
        user_id: user_id.to_string(),
        vec: acc,
        n_sites: vecs.len(),
    })
}
