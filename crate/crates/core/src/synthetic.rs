//! Synthetic corpora with planted structure, for offline end-to-end runs.
//!
//! Word embeddings are Gaussian noise plus a fixed offset along a hidden
//! gender direction (and, for age words, an age direction). Each site has a
//! male tendency `s` and a dominant age band; its page draws gender words
//! with male probability `s`. Users favour sites whose tendency matches
//! their gender, so the user aggregate is linearly separable along the
//! hidden direction.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embedding::{save_word2vec_binary, EmbeddingMatrix};
use crate::pipeline::{AgeBand, Gender, UserLabels};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Gender and age signal spread through every tag.
    #[default]
    Planted,
    /// Signal carried by a few rare words; very frequent words appear on
    /// every page with random counts.
    Idf,
    /// Tendency signal confined to `<p>` text.
    Tags,
    /// As `Tags`, plus untagged visible text full of signal-free noise words.
    TagsNoise,
}

impl Profile {
    pub const ALL: [Profile; 4] = [Profile::Planted, Profile::Idf, Profile::Tags, Profile::TagsNoise];

    pub fn code(self) -> &'static str {
        match self {
            Profile::Planted => "planted",
            Profile::Idf => "idf",
            Profile::Tags => "tags",
            Profile::TagsNoise => "tags-noise",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Profile::ALL
            .into_iter()
            .find(|p| p.code() == s)
            .ok_or_else(|| format!("unknown profile {s:?} (expected planted, idf, tags or tags-noise)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub profile: Profile,
    pub seed: u64,
    pub users: usize,
    pub sites: usize,
    pub dim: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            profile: Profile::Planted,
            seed: 0,
            users: 500,
            sites: 300,
            dim: 50,
        }
    }
}

pub struct SyntheticCorpus {
    pub embedding: EmbeddingMatrix,
    /// Site id to HTML. Sites meant to be uncrawlable have no page.
    pub pages: BTreeMap<String, String>,
    /// `(user, site, frequency)`, sorted.
    pub visits: Vec<(String, String, u64)>,
    pub labels: BTreeMap<String, UserLabels>,
    /// Male tendency per site, sorted by site.
    pub tendency: Vec<(String, f64)>,
}

const STOPWORDS: [&str; 40] = [
    "the", "and", "for", "with", "this", "that", "from", "your", "you", "are", "our", "all",
    "new", "more", "about", "home", "page", "site", "here", "will", "can", "has", "have", "was",
    "not", "but", "one", "out", "get", "now", "just", "like", "also", "see", "top", "best",
    "free", "find", "news", "today",
];

struct Vocab {
    male: Vec<String>,
    female: Vec<String>,
    age: [Vec<String>; 4],
    neutral: Vec<String>,
    common: Vec<String>,
    oov: Vec<String>,
}

struct Site {
    id: String,
    tendency: f64,
    age: usize,
    kind: SiteKind,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SiteKind {
    Normal,
    /// Rarely visited, dropped by the traffic filter.
    LowTraffic,
    /// Fewer than ten tokens, dropped by the content filter.
    Thin,
    /// No page at all.
    Missing,
}

fn unit(rng: &mut ChaCha8Rng, dim: usize, orth: Option<&[f32]>) -> Vec<f32> {
    let normal = Normal::new(0.0f64, 1.0).expect("valid normal");
    let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    if let Some(o) = orth {
        let proj: f64 = v.iter().zip(o).map(|(a, &b)| a * b as f64).sum();
        for (a, &b) in v.iter_mut().zip(o) {
            *a -= proj * b as f64;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| (x / norm) as f32).collect()
}

fn build_vocab(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> (Vocab, EmbeddingMatrix) {
    let dim = cfg.dim;
    let gender_dir = unit(rng, dim, None);
    let age_dir = unit(rng, dim, Some(&gender_dir));
    let (signal, sigma, n_common) = match cfg.profile {
        Profile::Idf => (1.0f32, 1.0f64, 120),
        Profile::Tags | Profile::TagsNoise => (2.0, 1.0, STOPWORDS.len()),
        Profile::Planted => (1.0, 1.0, STOPWORDS.len()),
    };
    let normal = Normal::new(0.0f64, sigma).expect("valid normal");

    // Shuffled opaque names so a word's spelling says nothing about its pool.
    let n_pool = 150;
    let n_neutral = 600;
    let total = 2 * n_pool + 4 * 60 + n_neutral + n_common.saturating_sub(STOPWORDS.len());
    let mut ids: Vec<usize> = (0..total).collect();
    ids.shuffle(rng);
    let mut names = ids.into_iter().map(|i| format!("w{i:04}"));
    let mut take = |n: usize| -> Vec<String> { names.by_ref().take(n).collect() };
    let male = take(n_pool);
    let female = take(n_pool);
    let age = [take(60), take(60), take(60), take(60)];
    let neutral = take(n_neutral);
    let mut common: Vec<String> = STOPWORDS.iter().map(|s| s.to_string()).collect();
    common.extend(take(n_common.saturating_sub(STOPWORDS.len())));
    common.truncate(n_common);
    let oov = (0..40).map(|i| format!("zz{i:02}")).collect();

    let mut rows = Vec::new();
    let mut push = |words: &[String], dir: Option<(&[f32], f32)>, rng: &mut ChaCha8Rng| {
        for w in words {
            let mut v: Vec<f32> = (0..dim).map(|_| normal.sample(rng) as f32).collect();
            if let Some((d, scale)) = dir {
                for (a, &b) in v.iter_mut().zip(d) {
                    *a += scale * b;
                }
            }
            rows.push((w.clone(), v));
        }
    };
    push(&male, Some((&gender_dir, signal)), rng);
    push(&female, Some((&gender_dir, -signal)), rng);
    for (band, words) in age.iter().enumerate() {
        let offset = (band as f32 - 1.5) * signal;
        push(words, Some((&age_dir, offset)), rng);
    }
    push(&neutral, None, rng);
    push(&common, None, rng);
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let emb = EmbeddingMatrix::new(dim, rows).expect("unique synthetic vocabulary");
    (
        Vocab {
            male,
            female,
            age,
            neutral,
            common,
            oov,
        },
        emb,
    )
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &'a [String]) -> &'a str {
    &words[rng.gen_range(0..words.len())]
}

fn gender_word<'a>(rng: &mut ChaCha8Rng, v: &'a Vocab, tendency: f64) -> &'a str {
    if rng.gen_bool(tendency) {
        pick(rng, &v.male)
    } else {
        pick(rng, &v.female)
    }
}

fn words(rng: &mut ChaCha8Rng, n: usize, mut f: impl FnMut(&mut ChaCha8Rng) -> String) -> String {
    (0..n).map(|_| f(rng)).collect::<Vec<_>>().join(" ")
}

/// Occasionally capitalized, to exercise case folding.
fn styled(rng: &mut ChaCha8Rng, w: &str) -> String {
    if rng.gen_bool(0.1) {
        let mut c = w.chars();
        match c.next() {
            Some(first) => first.to_uppercase().chain(c).collect(),
            None => String::new(),
        }
    } else {
        w.to_string()
    }
}

fn planted_page(rng: &mut ChaCha8Rng, v: &Vocab, site: &Site) -> String {
    if site.kind == SiteKind::Thin {
        let t = gender_word(rng, v, site.tendency).to_string();
        return format!("<html><head><title>{t}</title></head><body><p>{}</p></body></html>", pick(rng, &v.neutral));
    }
    let token = |rng: &mut ChaCha8Rng| -> String {
        let r: f64 = rng.gen();
        let w = if r < 0.35 {
            gender_word(rng, v, site.tendency).to_string()
        } else if r < 0.5 {
            let band = if rng.gen_bool(0.7) { site.age } else { rng.gen_range(0..4) };
            pick(rng, &v.age[band]).to_string()
        } else if r < 0.85 {
            pick(rng, &v.neutral).to_string()
        } else if r < 0.97 {
            pick(rng, &v.common).to_string()
        } else {
            pick(rng, &v.oov).to_string()
        };
        styled(rng, &w)
    };
    let title = words(rng, 4, token);
    let h1 = words(rng, 5, token);
    let paras: Vec<String> = (0..rng.gen_range(2..=4))
        .map(|_| format!("<p>{}</p>", words(rng, 30, token)))
        .collect();
    let links: Vec<String> = (0..4)
        .map(|i| format!("<li><a href=\"/n{i}\">{}</a></li>", words(rng, 2, token)))
        .collect();
    let alt = words(rng, 3, token);
    let footer = words(rng, 4, |r| pick(r, &v.neutral).to_string());
    format!(
        "<!DOCTYPE html>\n<html><head><title>{title}</title>\
         <style>body {{ font-family: sans-serif }}</style>\
         <script>var tracker = \"{}\";</script></head>\n<body><h1>{h1}</h1>\
         <ul class=\"nav\">{}</ul>\n{}\n<img src=\"hero.png\" alt=\"{alt}\">\
         <footer><span>{footer}</span></footer></body></html>\n",
        pick(rng, &v.male),
        links.join(""),
        paras.join("\n"),
    )
}

fn idf_page(rng: &mut ChaCha8Rng, v: &Vocab, site: &Site) -> String {
    // Page length scales every common word; each count also varies on its own.
    let length: f64 = rng.gen_range(1.0..10.0);
    let mut tokens: Vec<String> = Vec::new();
    for w in &v.common {
        let n = (length * rng.gen_range(0.2..3.0)).round().max(1.0) as usize;
        tokens.extend(std::iter::repeat_n(w.clone(), n));
    }
    for _ in 0..2 {
        tokens.push(gender_word(rng, v, site.tendency).to_string());
    }
    for _ in 0..10 {
        tokens.push(pick(rng, &v.neutral).to_string());
    }
    tokens.shuffle(rng);
    let paras: Vec<String> = tokens.chunks(40).map(|c| format!("<p>{}</p>", c.join(" "))).collect();
    format!(
        "<html><head><title>{}</title></head><body>\n{}\n</body></html>\n",
        words(rng, 3, |r| pick(r, &v.neutral).to_string()),
        paras.join("\n")
    )
}

fn tags_page(rng: &mut ChaCha8Rng, v: &Vocab, site: &Site, noise: bool) -> String {
    let neutral = |n: usize, rng: &mut ChaCha8Rng| words(rng, n, |r| pick(r, &v.neutral).to_string());
    let title = neutral(3, rng);
    let h = neutral(4, rng);
    let paras: Vec<String> = (0..2)
        .map(|_| {
            let body = words(rng, 25, |r| {
                if r.gen_bool(0.5) {
                    gender_word(r, v, site.tendency).to_string()
                } else {
                    pick(r, &v.neutral).to_string()
                }
            });
            format!("<p>{body}</p>")
        })
        .collect();
    let links: Vec<String> = (0..4)
        .map(|i| format!("<a href=\"/l{i}\">{}</a>", neutral(2, rng)))
        .collect();
    let alt = neutral(2, rng);
    let extra = if noise {
        (0..3)
            .map(|_| {
                let body = words(rng, 30, |r| gender_word(r, v, 0.5).to_string());
                format!("<div class=\"sidebar\">{body}</div>")
            })
            .collect::<Vec<_>>()
            .join("\n")
    } else {
        String::new()
    };
    format!(
        "<html><head><title>{title}</title></head><body><h2>{h}</h2>\n{}\n{}\n\
         <img src=\"i.png\" alt=\"{alt}\">\n{extra}\n</body></html>\n",
        links.join(" "),
        paras.join("\n")
    )
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> u64 {
    rng.gen_range(lo.ln()..hi.ln()).exp().round() as u64
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (vocab, embedding) = build_vocab(cfg, &mut rng);

    let special = matches!(cfg.profile, Profile::Planted) && cfg.sites >= 40;
    let sites: Vec<Site> = (0..cfg.sites)
        .map(|j| {
            let kind = match cfg.sites - j {
                _ if !special => SiteKind::Normal,
                1..=8 => SiteKind::LowTraffic,
                9..=14 => SiteKind::Thin,
                15..=18 => SiteKind::Missing,
                _ => SiteKind::Normal,
            };
            Site {
                id: format!("site{j:04}.example"),
                tendency: rng.gen_range(0.05..0.95),
                age: rng.gen_range(0..4),
                kind,
            }
        })
        .collect();

    let mut pages = BTreeMap::new();
    for site in &sites {
        let html = match (cfg.profile, site.kind) {
            (_, SiteKind::Missing) => continue,
            (Profile::Planted, _) => planted_page(&mut rng, &vocab, site),
            (Profile::Idf, _) => idf_page(&mut rng, &vocab, site),
            (Profile::Tags, _) => tags_page(&mut rng, &vocab, site, false),
            (Profile::TagsNoise, _) => tags_page(&mut rng, &vocab, site, true),
        };
        pages.insert(site.id.clone(), html);
    }

    let age_weights = [0.15, 0.35, 0.3, 0.2];
    let popular: Vec<usize> = (0..sites.len())
        .filter(|&j| sites[j].kind != SiteKind::LowTraffic)
        .collect();
    let mut labels = BTreeMap::new();
    let mut visits: BTreeMap<(String, String), u64> = BTreeMap::new();
    let user_ids: Vec<String> = (0..cfg.users).map(|i| format!("u{i:05}")).collect();
    for user in &user_ids {
        let gender = if rng.gen_bool(0.5) { Gender::Male } else { Gender::Female };
        let band = {
            let r: f64 = rng.gen();
            let mut acc = 0.0;
            let mut b = 3;
            for (k, w) in age_weights.iter().enumerate() {
                acc += w;
                if r < acc {
                    b = k;
                    break;
                }
            }
            b
        };
        labels.insert(
            user.clone(),
            UserLabels {
                gender,
                age: AgeBand::ALL[band],
            },
        );
        let k = if special && rng.gen_bool(0.05) {
            rng.gen_range(5..=15)
        } else {
            rng.gen_range(30..=60)
        }
        .min(popular.len());
        let chosen: Vec<usize> = popular
            .choose_multiple_weighted(&mut rng, k, |&j| {
                let s = sites[j].tendency;
                let g = if gender == Gender::Male { s } else { 1.0 - s };
                let a = if sites[j].age == band { 3.0 } else { 1.0 };
                g * g * a
            })
            .expect("positive weights")
            .copied()
            .collect();
        for j in chosen {
            let f = log_uniform(&mut rng, 2.0, 200.0);
            *visits.entry((user.clone(), sites[j].id.clone())).or_default() += f;
        }
    }
    for site in sites.iter().filter(|s| s.kind == SiteKind::LowTraffic) {
        for _ in 0..2 {
            let user = &user_ids[rng.gen_range(0..user_ids.len())];
            *visits.entry((user.clone(), site.id.clone())).or_default() += rng.gen_range(5..=30);
        }
    }

    SyntheticCorpus {
        embedding,
        pages,
        visits: visits.into_iter().map(|((u, s), f)| (u, s, f)).collect(),
        labels,
        tendency: sites.iter().map(|s| (s.id.clone(), s.tendency)).collect(),
    }
}

impl SyntheticCorpus {
    pub fn browsing_tsv(&self) -> String {
        let mut out = String::from("user_id\tsite_id\tfrequency\tgender\tage_band\n");
        for (u, s, f) in &self.visits {
            let l = &self.labels[u];
            out.push_str(&format!("{u}\t{s}\t{f}\t{}\t{}\n", l.gender.token(), l.age.token()));
        }
        out
    }

    pub fn tendency_tsv(&self) -> String {
        let mut out = String::from("site_id\tmale_tendency\n");
        for (s, t) in &self.tendency {
            out.push_str(&format!("{s}\t{t:.6}\n"));
        }
        out
    }

    /// Writes `embeddings.bin`, `html/<site>.html`, `browsing.tsv` and
    /// `tendency.tsv` under `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> std::io::Result<()> {
        let dir = dir.as_ref();
        let html = dir.join("html");
        std::fs::create_dir_all(&html)?;
        save_word2vec_binary(&self.embedding, dir.join("embeddings.bin"), true)?;
        for (site, page) in &self.pages {
            std::fs::write(html.join(format!("{site}.html")), page)?;
        }
        std::fs::File::create(dir.join("browsing.tsv"))?.write_all(self.browsing_tsv().as_bytes())?;
        std::fs::File::create(dir.join("tendency.tsv"))?.write_all(self.tendency_tsv().as_bytes())?;
        Ok(())
    }
}
