//! Corpus statistics and the twelve tf-idf weighting schemes.
//!
//! A scheme is named by two letters: the tf variant (`d`efault, `b`inary,
//! `l`ogarithm, `a`ugmented) followed by the idf variant (`u`nary,
//! `d`efault, `s`moothed). All logarithms are natural.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WeightingError {
    #[error("duplicate site id {0:?} in corpus")]
    DuplicateSite(String),
    #[error("term {0:?} does not occur in the corpus; default idf is undefined")]
    UnseenTerm(String),
    #[error("idf requires a non-empty corpus")]
    EmptyCorpus,
    #[error("invalid scheme code {0:?}: expected tf letter [dbla] then idf letter [uds]")]
    BadScheme(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TfVariant {
    Default,
    Binary,
    Logarithm,
    Augmented,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdfVariant {
    Unary,
    Default,
    Smoothed,
}

impl TfVariant {
    pub const ALL: [TfVariant; 4] = [
        TfVariant::Default,
        TfVariant::Binary,
        TfVariant::Logarithm,
        TfVariant::Augmented,
    ];

    fn letter(self) -> char {
        match self {
            TfVariant::Default => 'd',
            TfVariant::Binary => 'b',
            TfVariant::Logarithm => 'l',
            TfVariant::Augmented => 'a',
        }
    }
}

impl IdfVariant {
    pub const ALL: [IdfVariant; 3] = [IdfVariant::Unary, IdfVariant::Default, IdfVariant::Smoothed];

    fn letter(self) -> char {
        match self {
            IdfVariant::Unary => 'u',
            IdfVariant::Default => 'd',
            IdfVariant::Smoothed => 's',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightingScheme {
    pub tf: TfVariant,
    pub idf: IdfVariant,
}

impl WeightingScheme {
    pub const AD: WeightingScheme = WeightingScheme {
        tf: TfVariant::Augmented,
        idf: IdfVariant::Default,
    };
    pub const DU: WeightingScheme = WeightingScheme {
        tf: TfVariant::Default,
        idf: IdfVariant::Unary,
    };

    /// All twelve schemes, tf-major.
    pub fn all() -> Vec<WeightingScheme> {
        TfVariant::ALL
            .iter()
            .flat_map(|&tf| IdfVariant::ALL.iter().map(move |&idf| WeightingScheme { tf, idf }))
            .collect()
    }
}

impl fmt::Display for WeightingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.tf.letter(), self.idf.letter())
    }
}

impl FromStr for WeightingScheme {
    type Err = WeightingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WeightingError::BadScheme(s.to_string());
        let mut chars = s.trim().chars();
        let (Some(t), Some(i), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(bad());
        };
        let tf = match t {
            'd' => TfVariant::Default,
            'b' => TfVariant::Binary,
            'l' => TfVariant::Logarithm,
            'a' => TfVariant::Augmented,
            _ => return Err(bad()),
        };
        let idf = match i {
            'u' => IdfVariant::Unary,
            'd' => IdfVariant::Default,
            's' => IdfVariant::Smoothed,
            _ => return Err(bad()),
        };
        Ok(WeightingScheme { tf, idf })
    }
}

impl Serialize for WeightingScheme {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WeightingScheme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Raw term counts of one site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SiteDocument {
    pub site_id: String,
    term_counts: BTreeMap<String, u32>,
    max_count: u32,
    total_terms: u64,
}

impl SiteDocument {
    pub fn from_tokens<I, S>(site_id: impl Into<String>, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.as_ref().to_string()).or_default() += 1;
        }
        Self::from_counts(site_id, counts)
    }

    /// Zero counts are dropped.
    pub fn from_counts(site_id: impl Into<String>, mut term_counts: BTreeMap<String, u32>) -> Self {
        term_counts.retain(|_, c| *c > 0);
        let max_count = term_counts.values().copied().max().unwrap_or(0);
        let total_terms = term_counts.values().map(|&c| c as u64).sum();
        SiteDocument {
            site_id: site_id.into(),
            term_counts,
            max_count,
            total_terms,
        }
    }

    /// Term counts in lexicographic term order.
    pub fn term_counts(&self) -> &BTreeMap<String, u32> {
        &self.term_counts
    }

    pub fn count(&self, term: &str) -> u32 {
        self.term_counts.get(term).copied().unwrap_or(0)
    }

    pub fn max_count(&self) -> u32 {
        self.max_count
    }

    pub fn total_terms(&self) -> u64 {
        self.total_terms
    }

    pub fn unique_terms(&self) -> usize {
        self.term_counts.len()
    }
}

/// Document count and per-term document frequencies of a corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub n_docs: u64,
    pub doc_freq: HashMap<String, u64>,
}

impl CorpusStats {
    pub fn doc_freq(&self, term: &str) -> u64 {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }
}

pub fn build_corpus_stats<'a, I>(docs: I) -> Result<CorpusStats, WeightingError>
where
    I: IntoIterator<Item = &'a SiteDocument>,
{
    let mut ids = HashSet::new();
    let mut stats = CorpusStats::default();
    for doc in docs {
        if !ids.insert(doc.site_id.as_str()) {
            return Err(WeightingError::DuplicateSite(doc.site_id.clone()));
        }
        stats.n_docs += 1;
        for term in doc.term_counts.keys() {
            *stats.doc_freq.entry(term.clone()).or_default() += 1;
        }
    }
    Ok(stats)
}

pub fn tf_weight(variant: TfVariant, f_td: u32, max_in_doc: u32) -> f64 {
    if f_td == 0 {
        // 1 + ln(f) is undefined at 0; an absent term contributes nothing.
        return match variant {
            TfVariant::Augmented => 0.5,
            _ => 0.0,
        };
    }
    let f = f_td as f64;
    match variant {
        TfVariant::Default => f,
        TfVariant::Binary => 1.0,
        TfVariant::Logarithm => 1.0 + f.ln(),
        TfVariant::Augmented => 0.5 + 0.5 * f / max_in_doc.max(f_td) as f64,
    }
}

pub fn idf_weight(variant: IdfVariant, n_docs: u64, n_t: u64) -> Result<f64, WeightingError> {
    if variant == IdfVariant::Unary {
        return Ok(1.0);
    }
    if n_docs == 0 {
        return Err(WeightingError::EmptyCorpus);
    }
    let n = n_docs as f64;
    match variant {
        IdfVariant::Unary => unreachable!(),
        IdfVariant::Default => {
            if n_t == 0 {
                return Err(WeightingError::UnseenTerm(String::new()));
            }
            Ok((n / n_t as f64).ln())
        }
        IdfVariant::Smoothed => Ok(1.0 + (n / (1.0 + n_t as f64)).ln()),
    }
}

/// `tf * idf` for every term of `doc`. Terms absent from `stats` fail under
/// default idf.
pub fn term_weights(
    doc: &SiteDocument,
    stats: &CorpusStats,
    scheme: WeightingScheme,
) -> Result<BTreeMap<String, f64>, WeightingError> {
    doc.term_counts
        .iter()
        .map(|(term, &f)| {
            let n_t = stats.doc_freq(term);
            let idf = idf_weight(scheme.idf, stats.n_docs, n_t).map_err(|e| match e {
                WeightingError::UnseenTerm(_) => WeightingError::UnseenTerm(term.clone()),
                other => other,
            })?;
            Ok((term.clone(), tf_weight(scheme.tf, f, doc.max_count) * idf))
        })
        .collect()
}

/// Like [`term_weights`], but terms unseen by `stats` under default idf are
/// dropped instead of failing. Returns the weights and the number dropped.
pub fn term_weights_skipping_unseen(
    doc: &SiteDocument,
    stats: &CorpusStats,
    scheme: WeightingScheme,
) -> Result<(BTreeMap<String, f64>, usize), WeightingError> {
    let mut skipped = 0;
    let mut out = BTreeMap::new();
    for (term, &f) in &doc.term_counts {
        let n_t = stats.doc_freq(term);
        if n_t == 0 && scheme.idf == IdfVariant::Default {
            skipped += 1;
            continue;
        }
        let idf = idf_weight(scheme.idf, stats.n_docs, n_t)?;
        out.insert(term.clone(), tf_weight(scheme.tf, f, doc.max_count) * idf);
    }
    if skipped > 0 {
        log::debug!(
            "site {}: skipped {skipped} terms unseen by corpus statistics",
            doc.site_id
        );
    }
    Ok((out, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<SiteDocument> {
        vec![
            SiteDocument::from_tokens("d1", ["cat", "cat", "dog"]),
            SiteDocument::from_tokens("d2", ["dog"]),
        ]
    }

    #[test]
    fn stats_counted_by_hand() {
        let stats = build_corpus_stats(&corpus()).unwrap();
        assert_eq!(stats.n_docs, 2);
        assert_eq!(stats.doc_freq("cat"), 1);
        assert_eq!(stats.doc_freq("dog"), 2);
        let empty = build_corpus_stats(&[]).unwrap();
        assert_eq!(empty.n_docs, 0);
        assert!(empty.doc_freq.is_empty());
    }

    #[test]
    fn duplicate_site_rejected() {
        let mut docs = corpus();
        docs.push(SiteDocument::from_tokens("d1", ["x"]));
        assert_eq!(
            build_corpus_stats(&docs),
            Err(WeightingError::DuplicateSite("d1".into()))
        );
    }

    #[test]
    fn document_bookkeeping() {
        let d = SiteDocument::from_tokens("d", ["a", "b", "a", "c", "a"]);
        assert_eq!(d.max_count(), 3);
        assert_eq!(d.total_terms(), 5);
        assert_eq!(d.unique_terms(), 3);
        let e = SiteDocument::from_tokens("e", Vec::<String>::new());
        assert_eq!((e.max_count(), e.total_terms()), (0, 0));
    }

    #[test]
    fn tf_examples() {
        assert_eq!(tf_weight(TfVariant::Augmented, 2, 4), 0.75);
        assert_eq!(tf_weight(TfVariant::Logarithm, 1, 9), 1.0);
        assert_eq!(tf_weight(TfVariant::Binary, 17, 20), 1.0);
        assert_eq!(tf_weight(TfVariant::Default, 17, 20), 17.0);
        assert_eq!(tf_weight(TfVariant::Logarithm, 0, 3), 0.0);
        assert_eq!(tf_weight(TfVariant::Binary, 0, 3), 0.0);
    }

    #[test]
    fn idf_examples() {
        assert_eq!(idf_weight(IdfVariant::Default, 100, 100).unwrap(), 0.0);
        assert_eq!(idf_weight(IdfVariant::Unary, 0, 0).unwrap(), 1.0);
        let s = idf_weight(IdfVariant::Smoothed, 1, 1).unwrap();
        assert!((s - (1.0 + 0.5f64.ln())).abs() < 1e-15);
        assert!((s - 0.30685).abs() < 1e-5);
        assert!(idf_weight(IdfVariant::Default, 10, 0).is_err());
        let unseen = idf_weight(IdfVariant::Smoothed, 10, 0).unwrap();
        assert!((unseen - (1.0 + 10f64.ln())).abs() < 1e-15);
        assert_eq!(
            idf_weight(IdfVariant::Default, 0, 0),
            Err(WeightingError::EmptyCorpus)
        );
    }

    #[test]
    fn hand_computed_weights() {
        let docs = corpus();
        let stats = build_corpus_stats(&docs).unwrap();
        let dd = term_weights(&docs[0], &stats, "dd".parse().unwrap()).unwrap();
        assert!((dd["cat"] - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((dd["cat"] - 1.3863).abs() < 1e-4);
        assert_eq!(dd["dog"], 0.0);
        let ad = term_weights(&docs[0], &stats, WeightingScheme::AD).unwrap();
        assert!((ad["cat"] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unseen_terms() {
        let stats = build_corpus_stats(&corpus()).unwrap();
        let fresh = SiteDocument::from_tokens("d3", ["cat", "emu"]);
        assert_eq!(
            term_weights(&fresh, &stats, WeightingScheme::AD),
            Err(WeightingError::UnseenTerm("emu".into()))
        );
        let (w, skipped) = term_weights_skipping_unseen(&fresh, &stats, WeightingScheme::AD).unwrap();
        assert_eq!(skipped, 1);
        assert_eq!(w.len(), 1);
        let (w, skipped) =
            term_weights_skipping_unseen(&fresh, &stats, "as".parse().unwrap()).unwrap();
        assert_eq!(skipped, 0);
        assert!((w["emu"] - (1.0 + 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn scheme_codes() {
        let all = WeightingScheme::all();
        assert_eq!(all.len(), 12);
        for s in &all {
            assert_eq!(s.to_string().parse::<WeightingScheme>().unwrap(), *s);
        }
        for bad in ["", "a", "add", "xd", "ax", "AD"] {
            assert!(bad.parse::<WeightingScheme>().is_err(), "{bad}");
        }
    }

    #[test]
    fn du_is_raw_frequency() {
        let docs = corpus();
        let stats = build_corpus_stats(&docs).unwrap();
        for doc in &docs {
            let w = term_weights(doc, &stats, WeightingScheme::DU).unwrap();
            for (t, &c) in doc.term_counts() {
                assert_eq!(w[t], c as f64);
            }
        }
    }
}
