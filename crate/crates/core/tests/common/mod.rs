//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random corpus: up to `max_docs` token lists over up to `max_terms` terms.
pub fn random_corpus(rng: &mut ChaCha8Rng, max_docs: usize, max_terms: usize) -> Vec<Vec<String>> {
    let n_docs = rng.gen_range(1..=max_docs);
    let n_terms = rng.gen_range(1..=max_terms);
    (0..n_docs)
        .map(|_| {
            let len = rng.gen_range(1..=60);
            (0..len)
                .map(|_| {
                    // Skewed toward low ids so some terms are frequent.
                    let r: f64 = rng.gen();
                    format!("t{}", ((r * r) * n_terms as f64) as usize)
                })
                .collect()
        })
        .collect()
}

/// Raw ingredients for every distinct term of `docs[doc]`, gathered by
/// linear scans: `(term, f, max f in doc, N, n_t)`.
pub fn naive_counts(docs: &[Vec<String>], doc: usize) -> Vec<(String, f64, f64, f64, f64)> {
    let tokens = &docs[doc];
    let mut max = 0.0f64;
    let mut distinct: Vec<&String> = Vec::new();
    for t in tokens {
        if distinct.contains(&t) {
            continue;
        }
        distinct.push(t);
        let c = tokens.iter().filter(|u| *u == t).count() as f64;
        if c > max {
            max = c;
        }
    }
    distinct
        .into_iter()
        .map(|term| {
            let f = tokens.iter().filter(|t| *t == term).count() as f64;
            let n_t = docs.iter().filter(|d| d.iter().any(|t| t == term)).count() as f64;
            (term.clone(), f, max, docs.len() as f64, n_t)
        })
        .collect()
}

/// tf-idf straight from the textbook formulas.
pub fn naive_formula(code: &str, f: f64, max: f64, n: f64, n_t: f64) -> f64 {
    let mut chars = code.chars();
    let tf = match chars.next().unwrap() {
        'd' => f,
        'b' => {
            if f > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        'l' => {
            if f > 0.0 {
                1.0 + f.ln()
            } else {
                0.0
            }
        }
        'a' => 0.5 + 0.5 * f / max,
        other => panic!("tf letter {other}"),
    };
    let idf = match chars.next().unwrap() {
        'u' => 1.0,
        'd' => (n / n_t).ln(),
        's' => 1.0 + (n / (1.0 + n_t)).ln(),
        other => panic!("idf letter {other}"),
    };
    tf * idf
}

/// Compares the library against the naive oracle on `corpora` random corpora;
/// returns the worst relative error seen.
pub fn weighting_oracle_check(seed: u64, corpora: usize) -> f64 {
    use audience::weighting::{build_corpus_stats, term_weights, SiteDocument, WeightingScheme};
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..corpora {
        let docs = random_corpus(&mut r, 50, 200);
        let site_docs: Vec<SiteDocument> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| SiteDocument::from_tokens(format!("d{i}"), d.iter().map(String::as_str)))
            .collect();
        let stats = build_corpus_stats(site_docs.iter()).unwrap();
        for (i, sd) in site_docs.iter().enumerate() {
            let counts = naive_counts(&docs, i);
            for code in SCHEME_CODES {
                let scheme: WeightingScheme = code.parse().unwrap();
                let got = term_weights(sd, &stats, scheme).unwrap();
                assert_eq!(got.len(), counts.len());
                for (term, f, max, n, n_t) in &counts {
                    let want = naive_formula(code, *f, *max, *n, *n_t);
                    let have = got[term];
                    let err = if want == have {
                        0.0
                    } else {
                        (want - have).abs() / want.abs().max(have.abs())
                    };
                    worst = worst.max(err);
                }
            }
        }
    }
    worst
}

pub const SCHEME_CODES: [&str; 12] = [
    "du", "dd", "ds", "bu", "bd", "bs", "lu", "ld", "ls", "au", "ad", "as",
];

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Optimal primal value of the bias-including hinge SVM, found by solving the
/// dual on every assignment of variables to {0, C, free} (3^n faces).
///
/// On each face the stationarity conditions `Q_FF a_F + y_F b = 1 - C Q_FU 1`
/// and `y_F' a_F = -C y_U' 1` are solved by pseudo-inverse; consistent,
/// box-feasible solutions are candidate optima. The primal optimum is the
/// negated smallest dual value.
pub fn svm_qp_oracle(x: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = x.len();
    assert!(n <= 8, "oracle is exponential");
    let q = DMatrix::from_fn(n, n, |i, j| {
        y[i] * y[j] * x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let mut best = f64::INFINITY;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut k = code;
        for s in state.iter_mut() {
            *s = (k % 3) as u8;
            k /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let upper: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut alpha = DVector::zeros(n);
        for &i in &upper {
            alpha[i] = c;
        }
        let m = free.len();
        if m == 0 {
            let s: f64 = upper.iter().map(|&i| y[i] * c).sum();
            if s.abs() > 1e-12 {
                continue;
            }
        } else {
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = q[(i, j)];
                }
                a[(r, m)] = y[i];
                a[(m, r)] = y[i];
                rhs[r] = 1.0 - upper.iter().map(|&j| q[(i, j)] * c).sum::<f64>();
            }
            rhs[m] = -upper.iter().map(|&j| y[j] * c).sum::<f64>();
            let pinv = a.clone().pseudo_inverse(1e-12).unwrap();
            let sol = &pinv * &rhs;
            if (&a * &sol - &rhs).amax() > 1e-8 {
                continue;
            }
            if free.iter().enumerate().any(|(r, _)| sol[r] < -1e-12 || sol[r] > c + 1e-12) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
        }
        let dual = 0.5 * (alpha.transpose() * &q * &alpha)[(0, 0)] - alpha.sum();
        if dual < best {
            best = dual;
        }
    }
    -best
}

/// The four filter stages applied one at a time over plain `(user, site, freq)`
/// rows, recounting after each stage.
pub fn naive_filter(
    rows: &[(String, String, u64)],
    tokens: &BTreeMap<String, usize>,
    min_traffic: u64,
    min_freq: u64,
    min_words: usize,
    min_sites: usize,
) -> Vec<(usize, usize, usize)> {
    let count = |rows: &[(String, String, u64)]| {
        let users: BTreeSet<&String> = rows.iter().map(|r| &r.0).collect();
        let sites: BTreeSet<&String> = rows.iter().map(|r| &r.1).collect();
        (users.len(), sites.len(), rows.len())
    };
    let mut cur = rows.to_vec();
    let mut out = vec![count(&cur)];
    let mut traffic: BTreeMap<String, u64> = BTreeMap::new();
    for r in &cur {
        *traffic.entry(r.1.clone()).or_default() += r.2;
    }
    cur.retain(|r| traffic[&r.1] >= min_traffic);
    out.push(count(&cur));
    cur.retain(|r| r.2 >= min_freq);
    out.push(count(&cur));
    cur.retain(|r| tokens.get(&r.1).is_some_and(|&n| n > 0 && n >= min_words));
    out.push(count(&cur));
    let mut per_user: BTreeMap<String, usize> = BTreeMap::new();
    for r in &cur {
        *per_user.entry(r.0.clone()).or_default() += 1;
    }
    cur.retain(|r| per_user[&r.0] >= min_sites);
    out.push(count(&cur));
    out
}

/// Random document, weights and embedding. Some terms are left out of the
/// vocabulary to exercise out-of-vocabulary skipping.
pub fn random_site(
    r: &mut ChaCha8Rng,
    dim: usize,
) -> (
    audience::weighting::SiteDocument,
    BTreeMap<String, f64>,
    audience::embedding::EmbeddingMatrix,
) {
    let n_terms = r.gen_range(1..=50);
    let mut counts = BTreeMap::new();
    let mut weights = BTreeMap::new();
    let mut rows = Vec::new();
    for k in 0..n_terms {
        let term = format!("t{k}");
        counts.insert(term.clone(), r.gen_range(1..6));
        weights.insert(term.clone(), r.gen_range(0.0..1.0));
        if r.gen_bool(0.85) {
            rows.push((term, (0..dim).map(|_| r.gen_range(-0.5f32..0.5)).collect()));
        }
    }
    let emb = audience::embedding::EmbeddingMatrix::new(dim, rows).unwrap();
    (audience::weighting::SiteDocument::from_counts("s", counts), weights, emb)
}

/// Worst (linearity relative error, permutation absolute error) over `n`
/// random sites. The permutation oracle sums terms in a shuffled order and
/// also rebuilds the document from shuffled tokens.
pub fn composition_errors(seed: u64, n: usize) -> (f64, f64) {
    use audience::representation::compose_site_vector;
    use audience::weighting::SiteDocument;
    use rand::seq::SliceRandom;

    let mut r = rng(seed);
    let (mut lin, mut perm) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let (doc, weights, emb) = random_site(&mut r, 16);
        let base = compose_site_vector(&doc, &weights, &emb);

        let c: f64 = r.gen_range(0.1..10.0);
        let scaled_w: BTreeMap<String, f64> = weights.iter().map(|(k, v)| (k.clone(), v * c)).collect();
        let scaled = compose_site_vector(&doc, &scaled_w, &emb);
        let scale = base.vec.iter().map(|v| (*v as f64).abs()).fold(0.0, f64::max) * c;
        if scale > 0.0 {
            for (a, b) in base.vec.iter().zip(&scaled.vec) {
                lin = lin.max((*a as f64 * c - *b as f64).abs() / scale);
            }
        }

        let mut tokens: Vec<&str> = doc
            .term_counts()
            .iter()
            .flat_map(|(t, &k)| std::iter::repeat_n(t.as_str(), k as usize))
            .collect();
        tokens.shuffle(&mut r);
        let rebuilt = compose_site_vector(&SiteDocument::from_tokens("s", tokens), &weights, &emb);

        let mut terms: Vec<&String> = weights.keys().collect();
        terms.shuffle(&mut r);
        let mut acc = vec![0f64; emb.dim()];
        for t in terms {
            if let Some(row) = emb.lookup(t) {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += weights[t] * v as f64;
                }
            }
        }
        for ((a, b), o) in base.vec.iter().zip(&rebuilt.vec).zip(&acc) {
            perm = perm.max((*a as f64 - *b as f64).abs());
            perm = perm.max((*a as f64 - *o as f32 as f64).abs());
        }
    }
    (lin, perm)
}

pub fn tight_solver() -> audience::learn::SolverConfig {
    audience::learn::SolverConfig {
        seed: 0,
        max_epochs: 10_000,
        tol: 1e-7,
    }
}

/// Two Gaussian clusters in `d` dimensions centred at `±shift` on every axis.
pub fn two_clusters(r: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut x = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let l = i % 2;
        let s = if l == 1 { shift } else { -shift };
        x.push((0..d).map(|_| { let z: f64 = StandardNormal.sample(r); s + 0.5 * z }).collect());
        labels.push(l);
    }
    (x, labels)
}

pub fn class_names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

/// Worst relative gap between the SVM's primal objective and the brute-force
/// QP optimum over `cases` random 6-point problems.
pub fn svm_oracle_rel_err(seed: u64, cases: usize) -> f64 {
    use audience::learn::{train_svm, Dataset};
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < cases {
        let x: Vec<Vec<f64>> = (0..6).map(|_| vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)]).collect();
        let labels: Vec<usize> = (0..6).map(|i| if i < 3 { 0 } else { usize::from(r.gen_bool(0.5)) }).collect();
        if labels.iter().all(|&l| l == 0) {
            continue;
        }
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let c = [0.1, 1.0, 10.0][done % 3];
        let data = Dataset::classification(x.clone(), labels, class_names(2)).unwrap();
        let model = train_svm(&data, c, &tight_solver()).unwrap();
        let want = svm_qp_oracle(&x, &y, c);
        let got = model.training.objective[0];
        worst = worst.max((got - want).abs() / want.abs());
        done += 1;
    }
    worst
}

/// Training accuracy of a C = 1 SVM on two well-separated clusters.
pub fn separable_training_accuracy(seed: u64) -> f64 {
    use audience::learn::{evaluate, train_svm, Dataset};
    let (x, labels) = two_clusters(&mut rng(seed), 200, 5, 3.0);
    let data = Dataset::classification(x, labels, class_names(2)).unwrap();
    let model = train_svm(&data, 1.0, &audience::learn::SolverConfig::default()).unwrap();
    evaluate(&model, &data).unwrap().accuracy.unwrap()
}

/// Worst relative disagreement between the analytic logistic gradient and
/// central differences at random points.
pub fn logistic_gradient_rel_err(seed: u64, trials: usize) -> f64 {
    use audience::learn::{logistic_gradient, logistic_objective};
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let d = r.gen_range(1..6);
        let n = r.gen_range(2..30);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let w: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let b: f64 = r.gen_range(-1.0..1.0);
        let c: f64 = r.gen_range(0.1..5.0);
        let (gw, gb) = logistic_gradient(&w, b, &x, &y, c);
        let h = 1e-5;
        let mut check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max((analytic - numeric).abs() / denom);
        };
        for k in 0..d {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[k] += h;
            wm[k] -= h;
            let num = (logistic_objective(&wp, b, &x, &y, c) - logistic_objective(&wm, b, &x, &y, c)) / (2.0 * h);
            check(gw[k], num);
        }
        let num = (logistic_objective(&w, b + h, &x, &y, c) - logistic_objective(&w, b - h, &x, &y, c)) / (2.0 * h);
        check(gb, num);
    }
    worst
}

/// Test RMSE of epsilon-SVR (eps = 0.01, C = 10) on a noiseless linear target
/// with 500 training samples in 10 dimensions.
pub fn svr_linear_rmse(seed: u64) -> f64 {
    use audience::learn::{evaluate, train_svr, Dataset, SolverConfig};
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    let d = 10;
    let w: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let b = 0.3;
    let mut sample = |n: usize| {
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut r)).collect())
            .collect();
        let t: Vec<f64> = x
            .iter()
            .map(|xi| xi.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b)
            .collect();
        Dataset::regression(x, t).unwrap()
    };
    let train = sample(500);
    let test = sample(200);
    let model = train_svr(&train, 10.0, 0.01, &SolverConfig::default()).unwrap();
    evaluate(&model, &test).unwrap().rmse.unwrap()
}

/// A `vocab` x `dim` matrix of arbitrary float bit patterns, including NaN
/// payloads, signed zeros and subnormals.
pub fn random_embedding(seed: u64, vocab: usize, dim: usize) -> audience::embedding::EmbeddingMatrix {
    let mut r = rng(seed);
    let specials = [0.0f32, -0.0, f32::MIN_POSITIVE / 8.0, f32::INFINITY, f32::NAN, f32::MAX];
    let rows = (0..vocab)
        .map(|i| {
            let row = (0..dim)
                .map(|k| {
                    if (i + k) % 97 == 0 {
                        specials[(i + k) % specials.len()]
                    } else {
                        f32::from_bits(r.gen())
                    }
                })
                .collect();
            (format!("w{i}_{}", r.gen_range(0..1000)), row)
        })
        .collect();
    audience::embedding::EmbeddingMatrix::new(dim, rows).unwrap()
}

/// Writes and re-reads `m` in one layout; true when terms, float bits and
/// the re-serialized bytes are all identical.
pub fn word2vec_round_trip_exact(m: &audience::embedding::EmbeddingMatrix, trailing_newline: bool) -> bool {
    use audience::embedding::{read_word2vec_binary, write_word2vec_binary, LoadOptions};
    let mut bytes = Vec::new();
    write_word2vec_binary(m, &mut bytes, trailing_newline).unwrap();
    let back = read_word2vec_binary(&bytes[..], LoadOptions::default()).unwrap();
    if back.terms() != m.terms() || back.dim() != m.dim() {
        return false;
    }
    let same_bits = (0..m.len()).all(|i| {
        m.row(i).iter().zip(back.row(i)).all(|(a, b)| a.to_bits() == b.to_bits())
    });
    let mut again = Vec::new();
    write_word2vec_binary(&back, &mut again, trailing_newline).unwrap();
    same_bits && again == bytes
}

/// The synthetic browsing log pushed through the TSV parser.
pub fn synthetic_log(corpus: &audience::synthetic::SyntheticCorpus) -> audience::pipeline::BrowsingLog {
    audience::pipeline::parse_browsing_log(corpus.browsing_tsv().as_bytes()).unwrap()
}

pub fn synthetic_pages(corpus: &audience::synthetic::SyntheticCorpus) -> BTreeMap<String, Vec<u8>> {
    corpus
        .pages
        .iter()
        .map(|(k, v)| (k.clone(), v.as_bytes().to_vec()))
        .collect()
}

/// Test accuracy per scheme code of the gender experiment (LA, SVM) on a
/// generated corpus.
pub fn demography_accuracy(
    profile: audience::synthetic::Profile,
    schemes: &[&str],
    seed: u64,
) -> BTreeMap<String, f64> {
    use audience::aggregation::AggregationMethod;
    use audience::pipeline::{
        extract_corpus, run_demography_experiment, Attribute, Classifier, DemographyInputs,
        ExperimentConfig,
    };
    use audience::synthetic::{generate, SyntheticConfig};

    let synth = generate(&SyntheticConfig {
        profile,
        seed,
        ..SyntheticConfig::default()
    });
    let log = synthetic_log(&synth);
    let config = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    let corpus = extract_corpus(&synthetic_pages(&synth), config.mask);
    let schemes: Vec<_> = schemes.iter().map(|s| s.parse().unwrap()).collect();
    let report = run_demography_experiment(
        &DemographyInputs {
            log: &log,
            corpus: &corpus,
            embedding: &synth.embedding,
            cache: None,
        },
        &schemes,
        &[AggregationMethod::Log],
        &[Classifier::Svm],
        Attribute::Gender,
        &config,
    )
    .unwrap();
    report
        .cells
        .iter()
        .map(|c| (c.scheme.to_string(), c.test.accuracy.unwrap()))
        .collect()
}

/// Test RMSE per mask string of the tag experiment (scheme ad).
pub fn tag_rmse(profile: audience::synthetic::Profile, masks: &[&str], seed: u64) -> BTreeMap<String, f64> {
    use audience::pipeline::{run_tag_experiment, ExperimentConfig, TagInputs};
    use audience::synthetic::{generate, SyntheticConfig};
    use audience::weighting::WeightingScheme;

    let synth = generate(&SyntheticConfig {
        profile,
        seed,
        ..SyntheticConfig::default()
    });
    let pages = synthetic_pages(&synth);
    let masks: Vec<_> = masks.iter().map(|m| m.parse().unwrap()).collect();
    let config = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    let report = run_tag_experiment(
        &TagInputs {
            tendency: &synth.tendency,
            pages: &pages,
            embedding: &synth.embedding,
            cache: None,
        },
        &masks,
        WeightingScheme::AD,
        &config,
    )
    .unwrap();
    report
        .cells
        .iter()
        .map(|c| (c.mask.to_string(), c.test.rmse.unwrap()))
        .collect()
}

/// Every mask containing `p`, as strings.
pub fn paragraph_masks() -> Vec<String> {
    audience::html_extract::TagMask::tag_combinations()
        .into_iter()
        .filter(|m| m.paragraphs)
        .map(|m| m.to_string())
        .collect()
}

pub fn audience_bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_audience"))
}

/// Runs the binary with `args`, panicking with its stderr on failure.
pub fn run_cli(args: &[&str]) -> std::process::Output {
    let out = audience_bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "audience {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Generates the planted corpus into `dir` and runs the ad/la scheme sweep;
/// returns the report JSON text.
pub fn cli_planted_sweep(dir: &std::path::Path, seed: u64) -> String {
    let data = dir.join("data");
    let report = dir.join("report.json");
    let seed = seed.to_string();
    run_cli(&["gen-synthetic", "--out", data.to_str().unwrap(), "--seed", &seed]);
    run_cli(&[
        "sweep-schemes",
        "--data",
        data.to_str().unwrap(),
        "--seed",
        &seed,
        "--scheme",
        "ad",
        "--aggregate",
        "la",
        "--out",
        report.to_str().unwrap(),
    ]);
    std::fs::read_to_string(report).unwrap()
}

/// Test accuracy of the single cell in a report.
pub fn report_accuracy(json: &str) -> f64 {
    let report = audience::pipeline::ExperimentReport::from_json(json).unwrap();
    assert_eq!(report.cells.len(), 1);
    report.cells[0].test.accuracy.unwrap()
}
