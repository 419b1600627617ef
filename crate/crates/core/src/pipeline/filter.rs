//! The four-stage filtering cascade applied to browsing data.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::aggregation::BrowsingMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Sites whose total visits across users fall below this are dropped.
    pub min_site_traffic: u64,
    /// Entries visited fewer times than this are dropped from the user's row.
    pub min_user_site_freq: u64,
    /// Sites with fewer extracted tokens (or no content) are dropped.
    pub min_content_words: usize,
    /// Users left with fewer sites are dropped.
    pub min_sites_per_user: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_site_traffic: 100,
            min_user_site_freq: 5,
            min_content_words: 10,
            min_sites_per_user: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub stage: String,
    pub users: usize,
    pub sites: usize,
    pub entries: usize,
}

impl StageCounts {
    fn of(stage: &str, m: &BrowsingMatrix) -> Self {
        StageCounts {
            stage: stage.to_string(),
            users: m.n_users(),
            sites: m.sites().len(),
            entries: m.n_entries(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutcome {
    pub matrix: BrowsingMatrix,
    pub users: Vec<String>,
    /// Counts before filtering and after each stage.
    pub stages: Vec<StageCounts>,
}

/// Applies, in order: site traffic, per-user site frequency, site content,
/// sites per user. `token_counts` maps each crawled site to its token count;
/// sites missing from it count as uncrawlable.
pub fn apply_filters(
    matrix: &BrowsingMatrix,
    token_counts: &HashMap<String, usize>,
    cfg: &FilterConfig,
) -> Result<FilterOutcome, PipelineError> {
    let mut m = matrix.clone();
    let mut stages = vec![StageCounts::of("input", &m)];

    let traffic = m.site_traffic();
    m.retain(|_, site, _| traffic[site] >= cfg.min_site_traffic);
    stages.push(StageCounts::of("site_traffic", &m));

    m.retain(|_, _, f| f >= cfg.min_user_site_freq);
    stages.push(StageCounts::of("user_site_frequency", &m));

    m.retain(|_, site, _| {
        token_counts
            .get(site)
            .is_some_and(|&n| n > 0 && n >= cfg.min_content_words)
    });
    stages.push(StageCounts::of("site_content", &m));

    m.retain_users(|_, row| row.len() >= cfg.min_sites_per_user);
    stages.push(StageCounts::of("sites_per_user", &m));

    if m.n_users() == 0 {
        return Err(PipelineError::AllUsersFiltered(stages));
    }
    Ok(FilterOutcome {
        users: m.users(),
        matrix: m,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FilterConfig {
        FilterConfig {
            min_site_traffic: 100,
            min_user_site_freq: 5,
            min_content_words: 10,
            min_sites_per_user: 2,
        }
    }

    #[test]
    fn traffic_boundary() {
        let mut m = BrowsingMatrix::new();
        m.add("u1", "low", 99);
        m.add("u1", "ok", 100);
        m.add("u1", "ok2", 100);
        let tokens = HashMap::from([
            ("low".to_string(), 50),
            ("ok".to_string(), 50),
            ("ok2".to_string(), 50),
        ]);
        let out = apply_filters(&m, &tokens, &cfg()).unwrap();
        assert_eq!(out.matrix.get("u1", "low"), 0);
        assert_eq!(out.stages[1].sites, 2);
    }

    #[test]
    fn user_site_count_boundary() {
        let mut m = BrowsingMatrix::new();
        let mut tokens = HashMap::new();
        for s in 0..20 {
            let site = format!("s{s}");
            m.add("keep", &site, 200);
            if s < 19 {
                m.add("drop", &site, 200);
            }
            tokens.insert(site, 10);
        }
        let c = FilterConfig {
            min_sites_per_user: 20,
            ..cfg()
        };
        let out = apply_filters(&m, &tokens, &c).unwrap();
        assert_eq!(out.users, ["keep"]);
    }

    #[test]
    fn content_and_frequency_stages() {
        let mut m = BrowsingMatrix::new();
        m.add("u1", "thin", 200);
        m.add("u1", "uncrawled", 200);
        m.add("u1", "a", 200);
        m.add("u1", "b", 4);
        m.add("u2", "b", 200);
        m.add("u1", "c", 200);
        let tokens = HashMap::from([
            ("thin".to_string(), 9),
            ("a".to_string(), 10),
            ("b".to_string(), 10),
            ("c".to_string(), 10),
        ]);
        let out = apply_filters(&m, &tokens, &cfg()).unwrap();
        assert_eq!(out.users, ["u1"]);
        let row = out.matrix.row("u1").unwrap();
        assert_eq!(row.keys().collect::<Vec<_>>(), ["a", "c"]);
        let names: Vec<_> = out.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(
            names,
            ["input", "site_traffic", "user_site_frequency", "site_content", "sites_per_user"]
        );
    }

    #[test]
    fn everything_filtered_reports_stages() {
        let mut m = BrowsingMatrix::new();
        m.add("u1", "s", 3);
        match apply_filters(&m, &HashMap::new(), &cfg()) {
            Err(PipelineError::AllUsersFiltered(stages)) => assert_eq!(stages.len(), 5),
            other => panic!("{other:?}"),
        }
    }
}
