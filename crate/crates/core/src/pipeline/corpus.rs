//! Extracted site corpora, corpus statistics and cached site vectors.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::embedding::EmbeddingMatrix;
use crate::html_extract::{extract, TagMask};
use crate::representation::{
    compose_site_vector, l2_normalize, load_site_vectors, save_site_vector_records,
};
use crate::weighting::{
    build_corpus_stats, term_weights_skipping_unseen, CorpusStats, SiteDocument, WeightingScheme,
};

/// Site id to vector.
pub type SiteVectors = HashMap<String, Vec<f32>>;

/// Reads every `*.html` / `*.htm` file in `dir`; the file stem is the site id.
pub fn load_html_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<u8>>, PipelineError> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir.as_ref())? {
        let path = entry?.path();
        let is_html = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"));
        if !is_html || !path.is_file() {
            continue;
        }
        let Some(site) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        out.insert(site.to_string(), std::fs::read(&path)?);
    }
    Ok(out)
}

/// Every crawled site's extracted text under one tag mask.
#[derive(Clone, Debug)]
pub struct SiteCorpus {
    pub mask: TagMask,
    docs: BTreeMap<String, SiteDocument>,
}

/// Extracts all pages in parallel.
pub fn extract_corpus(pages: &BTreeMap<String, Vec<u8>>, mask: TagMask) -> SiteCorpus {
    let docs: Vec<(String, SiteDocument)> = pages
        .par_iter()
        .map(|(site, html)| {
            let doc = extract(site.clone(), html, mask);
            let sd = SiteDocument::from_tokens(site.clone(), doc.tokens());
            (site.clone(), sd)
        })
        .collect();
    SiteCorpus {
        mask,
        docs: docs.into_iter().collect(),
    }
}

impl SiteCorpus {
    pub fn from_documents(mask: TagMask, docs: impl IntoIterator<Item = SiteDocument>) -> Self {
        SiteCorpus {
            mask,
            docs: docs.into_iter().map(|d| (d.site_id.clone(), d)).collect(),
        }
    }

    pub fn get(&self, site: &str) -> Option<&SiteDocument> {
        self.docs.get(site)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> impl Iterator<Item = &SiteDocument> {
        self.docs.values()
    }

    /// Token count per crawled site, for the content filter.
    pub fn token_counts(&self) -> HashMap<String, usize> {
        self.docs
            .iter()
            .map(|(s, d)| (s.clone(), d.total_terms() as usize))
            .collect()
    }

    /// Digest of the given sites' term counts, used in cache keys.
    pub fn digest<'a>(&self, sites: impl IntoIterator<Item = &'a str>) -> String {
        let mut h = Sha256::new();
        for site in sites {
            h.update((site.len() as u64).to_le_bytes());
            h.update(site.as_bytes());
            match self.docs.get(site) {
                Some(doc) => {
                    for (term, count) in doc.term_counts() {
                        h.update((term.len() as u64).to_le_bytes());
                        h.update(term.as_bytes());
                        h.update(count.to_le_bytes());
                    }
                    h.update([1]);
                }
                None => h.update([0]),
            }
        }
        hex::encode(h.finalize())
    }
}

/// Corpus statistics over the listed sites that were crawled.
pub fn corpus_stats_for<'a>(
    corpus: &SiteCorpus,
    sites: impl IntoIterator<Item = &'a str>,
) -> Result<CorpusStats, PipelineError> {
    Ok(build_corpus_stats(sites.into_iter().filter_map(|s| corpus.get(s)))?)
}

/// Site vectors for the listed sites that were crawled, computed in
/// parallel. Terms unseen by `stats` are skipped under default idf.
pub fn build_site_vectors(
    corpus: &SiteCorpus,
    sites: &[String],
    stats: &CorpusStats,
    scheme: WeightingScheme,
    emb: &EmbeddingMatrix,
    normalize: bool,
) -> Result<SiteVectors, PipelineError> {
    sites
        .par_iter()
        .filter_map(|s| corpus.get(s))
        .map(|doc| {
            let (weights, _) = term_weights_skipping_unseen(doc, stats, scheme)?;
            let mut sv = compose_site_vector(doc, &weights, emb);
            if normalize {
                l2_normalize(&mut sv.vec);
            }
            Ok((sv.site_id, sv.vec))
        })
        .collect()
}

/// On-disk cache of site vectors keyed by everything they depend on.
#[derive(Clone, Debug)]
pub struct SiteVectorCache {
    dir: PathBuf,
}

pub struct CacheKey<'a> {
    pub scheme: WeightingScheme,
    pub mask: TagMask,
    pub embedding_fingerprint: &'a str,
    /// Digest of the documents that produced the corpus statistics.
    pub stats_digest: &'a str,
    /// Digest of the documents being vectorized.
    pub sites_digest: &'a str,
    pub normalize: bool,
}

impl CacheKey<'_> {
    pub fn file_name(&self) -> String {
        let mut h = Sha256::new();
        for part in [
            self.scheme.to_string().as_str(),
            self.mask.to_string().as_str(),
            self.embedding_fingerprint,
            self.stats_digest,
            self.sites_digest,
            if self.normalize { "l2" } else { "raw" },
        ] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        format!("{}-{}-{}.svec", self.scheme, self.mask, &hex::encode(h.finalize())[..24])
    }
}

impl SiteVectorCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(SiteVectorCache { dir })
    }

    pub fn path(&self, key: &CacheKey<'_>) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// Returns the cached vectors for `key`, computing and storing them on a miss.
    pub fn get_or_build(
        &self,
        key: &CacheKey<'_>,
        build: impl FnOnce() -> Result<SiteVectors, PipelineError>,
    ) -> Result<SiteVectors, PipelineError> {
        let path = self.path(key);
        if path.is_file() {
            match load_site_vectors(&path) {
                Ok(records) => {
                    log::debug!("site-vector cache hit {}", path.display());
                    return Ok(records.into_iter().collect());
                }
                Err(e) => log::warn!("ignoring unreadable cache {}: {e}", path.display()),
            }
        }
        let vectors = build()?;
        let sorted: BTreeMap<&str, &[f32]> =
            vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
        save_site_vector_records(&path, sorted)?;
        Ok(vectors)
    }
}
