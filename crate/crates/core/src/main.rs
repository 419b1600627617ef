use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use audience::aggregation::AggregationMethod;
use audience::embedding::{load_word2vec_binary, EmbeddingMatrix, LoadOptions};
use audience::html_extract::{extract, fetch, TagMask};
use audience::learn::{evaluate, LinearModel, Metrics, Prediction};
use audience::pipeline::{
    extract_corpus, load_browsing_log, load_html_dir, load_tendency, prepare_demography,
    run_demography_experiment, run_tag_experiment, Attribute, BrowsingLog, Classifier, Config,
    DemographyInputs, ExperimentConfig, ExperimentReport, SiteCorpus, SiteVectorCache, TagInputs,
};
use audience::representation::save_site_vector_records;
use audience::synthetic::{generate, Profile, SyntheticConfig};
use audience::weighting::{build_corpus_stats, WeightingScheme};

#[derive(Parser)]
#[command(name = "audience", version, about = "Predict audience demographics from browsing logs")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Weighting scheme code (tf letter + idf letter). Sweeps accept a comma list.
    #[arg(long, global = true)]
    scheme: Option<String>,
    /// Aggregation method: wa, la or sa. Sweeps accept a comma list.
    #[arg(long, global = true)]
    aggregate: Option<String>,
    /// Tag mask such as hpai. The tag sweep accepts a comma list.
    #[arg(long, global = true)]
    tags: Option<String>,
    /// Directory with embeddings.bin, html/, browsing.tsv and tendency.tsv.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Standardize features with training-set mean and variance.
    #[arg(long, global = true)]
    standardize: bool,
    /// Directory for cached site vectors.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract tokens from an HTML file, a directory of pages, or a URL.
    Extract {
        input: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        timeout_secs: u64,
    },
    /// Report filter-stage counts and corpus statistics.
    Stats,
    /// Compute site vectors and write them to a store file.
    Sitevec {
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute user vectors and write them as TSV.
    Aggregate {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier on the training users and save it.
    Train {
        #[command(flatten)]
        task: TaskArgs,
        /// Fixed C; grid-searched by cross-validation when absent.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Predict the attribute of every filtered user with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model on the held-out users.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Compare weighting schemes (all twelve unless --scheme is given).
    SweepSchemes(SweepArgs),
    /// Compare aggregation methods (all three unless --aggregate is given).
    SweepAggregation(SweepArgs),
    /// Compare tag masks on the tendency regression task.
    SweepTags {
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write a synthetic corpus with planted structure.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "planted")]
        profile: Profile,
        #[arg(long, default_value_t = 500)]
        users: usize,
        #[arg(long, default_value_t = 300)]
        sites: usize,
        #[arg(long, default_value_t = 50)]
        dim: usize,
    },
}

#[derive(Args, Clone)]
struct TaskArgs {
    /// gender or age.
    #[arg(long)]
    attribute: Option<Attribute>,
    /// svm or logistic; sweeps accept a comma list.
    #[arg(long)]
    classifier: Option<String>,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SweepArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    output: OutputArgs,
}

/// A trained model together with the pipeline settings that produced its features.
#[derive(Serialize, Deserialize)]
struct ModelBundle {
    scheme: WeightingScheme,
    aggregation: AggregationMethod,
    attribute: Attribute,
    experiment: ExperimentConfig,
    model: LinearModel,
}

struct Settings {
    config: Config,
    experiment: ExperimentConfig,
    cli_scheme: Option<String>,
    cli_aggregate: Option<String>,
    cli_tags: Option<String>,
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| anyhow::anyhow!("{e}")))
        .collect()
}

fn single<T: Clone>(items: Vec<T>, what: &str) -> Result<T> {
    match items.as_slice() {
        [one] => Ok(one.clone()),
        _ => bail!("expected exactly one {what}"),
    }
}

impl Settings {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(p) => Config::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => Config::default(),
        };
        if let Some(d) = &cli.data {
            config.input.data = Some(d.clone());
        }
        if let Some(c) = &cli.cache_dir {
            config.input.cache_dir = Some(c.clone());
        }
        let mut experiment = config.experiment();
        if let Some(seed) = cli.seed {
            experiment.seed = seed;
        }
        if cli.standardize {
            experiment.standardize = true;
        }
        if let Some(tags) = &cli.tags {
            if let [mask] = parse_list::<TagMask>(tags)?.as_slice() {
                experiment.mask = *mask;
            }
        }
        Ok(Settings {
            config,
            experiment,
            cli_scheme: cli.scheme.clone(),
            cli_aggregate: cli.aggregate.clone(),
            cli_tags: cli.tags.clone(),
        })
    }

    fn schemes(&self) -> Result<Option<Vec<WeightingScheme>>> {
        match &self.cli_scheme {
            Some(s) => Ok(Some(parse_list(s)?)),
            None => Ok(self.config.weighting.scheme.map(|s| vec![s])),
        }
    }

    fn scheme(&self) -> Result<WeightingScheme> {
        Ok(match self.schemes()? {
            Some(list) => single(list, "--scheme")?,
            None => WeightingScheme::AD,
        })
    }

    fn methods(&self) -> Result<Option<Vec<AggregationMethod>>> {
        match &self.cli_aggregate {
            Some(s) => Ok(Some(parse_list(s)?)),
            None => Ok(self.config.aggregation.method.map(|m| vec![m])),
        }
    }

    fn method(&self) -> Result<AggregationMethod> {
        Ok(match self.methods()? {
            Some(list) => single(list, "--aggregate")?,
            None => AggregationMethod::Log,
        })
    }

    fn attribute(&self, task: &TaskArgs) -> Attribute {
        task.attribute
            .or(self.config.learn.attribute)
            .unwrap_or(Attribute::Gender)
    }

    fn classifiers(&self, task: &TaskArgs) -> Result<Vec<Classifier>> {
        match &task.classifier {
            Some(s) => parse_list(s),
            None => Ok(vec![self.config.learn.classifier.unwrap_or(Classifier::Svm)]),
        }
    }

    fn cache(&self) -> Result<Option<SiteVectorCache>> {
        self.config
            .input
            .cache_dir
            .as_ref()
            .map(|d| SiteVectorCache::new(d).map_err(Into::into))
            .transpose()
    }

    fn embedding(&self) -> Result<EmbeddingMatrix> {
        let path = self.config.input.embeddings_path()?;
        load_word2vec_binary(&path, LoadOptions::default())
            .with_context(|| format!("loading embeddings {}", path.display()))
    }

    fn pages(&self) -> Result<BTreeMap<String, Vec<u8>>> {
        let path = self.config.input.html_path()?;
        load_html_dir(&path).with_context(|| format!("reading pages in {}", path.display()))
    }

    fn log(&self) -> Result<BrowsingLog> {
        let path = self.config.input.browsing_path()?;
        load_browsing_log(&path).with_context(|| format!("reading {}", path.display()))
    }

    fn corpus(&self, mask: TagMask) -> Result<SiteCorpus> {
        Ok(extract_corpus(&self.pages()?, mask))
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn emit_report(report: &ExperimentReport, output: &OutputArgs) -> Result<()> {
    for w in &report.warnings {
        log::warn!("{w}");
    }
    for c in &report.cells {
        match (c.test.accuracy, c.test.rmse) {
            (Some(a), _) => eprintln!("{:<28} accuracy {a:.4}  (C = {})", c.name, c.grid.best_c),
            (_, Some(r)) => eprintln!("{:<28} rmse {r:.4}  (C = {})", c.name, c.grid.best_c),
            _ => {}
        }
    }
    let mut json = report.to_json();
    json.push('\n');
    write_output(output.out.as_deref(), &json)?;
    if let Some(csv) = &output.csv {
        std::fs::write(csv, report.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    }
    Ok(())
}

fn sweep(settings: &Settings, args: &SweepArgs, by_scheme: bool) -> Result<()> {
    let schemes = match settings.schemes()? {
        Some(s) => s,
        None if by_scheme => WeightingScheme::all(),
        None => vec![WeightingScheme::AD],
    };
    let methods = match settings.methods()? {
        Some(m) => m,
        None if by_scheme => vec![AggregationMethod::Log],
        None => AggregationMethod::ALL.to_vec(),
    };
    let exp = &settings.experiment;
    let log = settings.log()?;
    let corpus = settings.corpus(exp.mask)?;
    let embedding = settings.embedding()?;
    let cache = settings.cache()?;
    let inputs = DemographyInputs {
        log: &log,
        corpus: &corpus,
        embedding: &embedding,
        cache: cache.as_ref(),
    };
    let report = run_demography_experiment(
        &inputs,
        &schemes,
        &methods,
        &settings.classifiers(&args.task)?,
        settings.attribute(&args.task),
        exp,
    )?;
    emit_report(&report, &args.output)
}

fn sweep_tags(settings: &Settings, output: &OutputArgs) -> Result<()> {
    let masks = match &settings.cli_tags {
        Some(t) => parse_list::<TagMask>(t)?,
        None => TagMask::experiment_masks(),
    };
    let tendency_path = settings.config.input.tendency_path()?;
    let tendency = load_tendency(&tendency_path)
        .with_context(|| format!("reading {}", tendency_path.display()))?;
    let pages = settings.pages()?;
    let embedding = settings.embedding()?;
    let cache = settings.cache()?;
    let inputs = TagInputs {
        tendency: &tendency,
        pages: &pages,
        embedding: &embedding,
        cache: cache.as_ref(),
    };
    let report = run_tag_experiment(&inputs, &masks, settings.scheme()?, &settings.experiment)?;
    emit_report(&report, output)
}

fn extract_cmd(settings: &Settings, input: &str, out: Option<&Path>, timeout: u64) -> Result<()> {
    let mask = settings.experiment.mask;
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();
    if input.starts_with("http://") || input.starts_with("https://") {
        let body = fetch(input, Duration::from_secs(timeout))?;
        rows.push((input.to_string(), extract(input, &body, mask).into_tokens()));
    } else if Path::new(input).is_dir() {
        for (site, html) in load_html_dir(input)? {
            let doc = extract(site.clone(), &html, mask);
            rows.push((site, doc.into_tokens()));
        }
    } else {
        let path = Path::new(input);
        let html = std::fs::read(path).with_context(|| format!("reading {input}"))?;
        let site = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(input)
            .to_string();
        let doc = extract(site.clone(), &html, mask);
        rows.push((site, doc.into_tokens()));
    }
    let mut text = String::from("site_id\ttokens\ttext\n");
    for (site, tokens) in rows {
        text.push_str(&format!("{site}\t{}\t{}\n", tokens.len(), tokens.join(" ")));
    }
    write_output(out, &text)
}

fn stats_cmd(settings: &Settings) -> Result<()> {
    let exp = &settings.experiment;
    let log = settings.log()?;
    let corpus = settings.corpus(exp.mask)?;
    let prep = prepare_demography(&log, &corpus, Attribute::Gender, exp)?;
    let stats = build_corpus_stats(prep.stats_sites.iter().filter_map(|s| corpus.get(s)))?;
    let summary = serde_json::json!({
        "mask": exp.mask.to_string(),
        "filter_stages": prep.stages,
        "crawled_sites": corpus.len(),
        "stats_documents": stats.n_docs,
        "stats_vocabulary": stats.doc_freq.len(),
        "users": prep.users.len(),
        "train_users": prep.train_idx.len(),
        "test_users": prep.test_idx.len(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn sitevec_cmd(settings: &Settings, out: &Path) -> Result<()> {
    let exp = &settings.experiment;
    let log = settings.log()?;
    let corpus = settings.corpus(exp.mask)?;
    let embedding = settings.embedding()?;
    let prep = prepare_demography(&log, &corpus, Attribute::Gender, exp)?;
    let vectors = prep.site_vectors(&corpus, &embedding, settings.scheme()?, exp, settings.cache()?.as_ref())?;
    let sorted: BTreeMap<&str, &[f32]> = vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice())).collect();
    save_site_vector_records(out, sorted).with_context(|| format!("writing {}", out.display()))?;
    eprintln!("wrote {} site vectors to {}", vectors.len(), out.display());
    Ok(())
}

fn aggregate_cmd(settings: &Settings, out: Option<&Path>) -> Result<()> {
    let exp = &settings.experiment;
    let log = settings.log()?;
    let corpus = settings.corpus(exp.mask)?;
    let embedding = settings.embedding()?;
    let prep = prepare_demography(&log, &corpus, Attribute::Gender, exp)?;
    let vectors = prep.site_vectors(&corpus, &embedding, settings.scheme()?, exp, settings.cache()?.as_ref())?;
    let (data, users, excluded) = prep.user_dataset(&prep.all_indices(), &vectors, settings.method()?)?;
    if !excluded.is_empty() {
        log::warn!("{} users have no usable site vector", excluded.len());
    }
    let mut text = String::new();
    for (user, x) in users.iter().zip(data.features()) {
        let values: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        text.push_str(&format!("{user}\t{}\n", values.join("\t")));
    }
    write_output(out, &text)
}

fn train_cmd(settings: &Settings, task: &TaskArgs, c: Option<f64>, model_path: &Path) -> Result<()> {
    let exp = &settings.experiment;
    let attribute = settings.attribute(task);
    let classifier = single(settings.classifiers(task)?, "--classifier")?;
    let scheme = settings.scheme()?;
    let method = settings.method()?;
    let log = settings.log()?;
    let corpus = settings.corpus(exp.mask)?;
    let embedding = settings.embedding()?;
    let prep = prepare_demography(&log, &corpus, attribute, exp)?;
    let vectors = prep.site_vectors(&corpus, &embedding, scheme, exp, settings.cache()?.as_ref())?;
    let (train, _, _) = prep.user_dataset(&prep.train_idx, &vectors, method)?;
    let learner = classifier.learner();
    let best_c = match c {
        Some(c) => c,
        None => {
            let mut search = audience::learn::GridSearch::new(learner);
            search.c_grid = exp.c_grid.clone();
            search.folds = exp.folds;
            search.standardize = exp.standardize;
            search.solver = exp.solver();
            let result = search.run(&train)?;
            eprintln!("cross-validated C = {}", result.best_c);
            result.best_c
        }
    };
    let model = learner.train_scaled(&train, best_c, &exp.solver(), exp.standardize)?;
    let bundle = ModelBundle {
        scheme,
        aggregation: method,
        attribute,
        experiment: exp.clone(),
        model,
    };
    std::fs::write(model_path, serde_json::to_string_pretty(&bundle)? + "\n")
        .with_context(|| format!("writing {}", model_path.display()))?;
    eprintln!("trained on {} users; model saved to {}", train.len(), model_path.display());
    Ok(())
}

fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let bundle: ModelBundle = serde_json::from_str(&text).context("parsing model bundle")?;
    // Re-validates the embedded model's format version.
    LinearModel::from_json(&serde_json::to_string(&bundle.model)?)?;
    Ok(bundle)
}

fn predict_cmd(settings: &Settings, model: &Path, out: Option<&Path>) -> Result<()> {
    let b = load_bundle(model)?;
    let log = settings.log()?;
    let corpus = settings.corpus(b.experiment.mask)?;
    let embedding = settings.embedding()?;
    let prep = prepare_demography(&log, &corpus, b.attribute, &b.experiment)?;
    let vectors = prep.site_vectors(&corpus, &embedding, b.scheme, &b.experiment, settings.cache()?.as_ref())?;
    let (data, users, _) = prep.user_dataset(&prep.all_indices(), &vectors, b.aggregation)?;
    let mut text = format!("user_id\tpredicted_{}\n", b.attribute);
    for (user, x) in users.iter().zip(data.features()) {
        let label = match b.model.predict(x)? {
            Prediction::Class { name, .. } => name,
            Prediction::Real(v) => v.to_string(),
        };
        text.push_str(&format!("{user}\t{label}\n"));
    }
    write_output(out, &text)
}

fn evaluate_cmd(settings: &Settings, model: &Path) -> Result<()> {
    let b = load_bundle(model)?;
    let log = settings.log()?;
    let corpus = settings.corpus(b.experiment.mask)?;
    let embedding = settings.embedding()?;
    let prep = prepare_demography(&log, &corpus, b.attribute, &b.experiment)?;
    let vectors = prep.site_vectors(&corpus, &embedding, b.scheme, &b.experiment, settings.cache()?.as_ref())?;
    let (test, _, _) = prep.user_dataset(&prep.test_idx, &vectors, b.aggregation)?;
    let metrics: Metrics = evaluate(&b.model, &test)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings::new(&cli)?;
    match &cli.command {
        Command::Extract {
            input,
            out,
            timeout_secs,
        } => extract_cmd(&settings, input, out.as_deref(), *timeout_secs),
        Command::Stats => stats_cmd(&settings),
        Command::Sitevec { out } => sitevec_cmd(&settings, out),
        Command::Aggregate { out } => aggregate_cmd(&settings, out.as_deref()),
        Command::Train { task, c, model } => train_cmd(&settings, task, *c, model),
        Command::Predict { model, out } => predict_cmd(&settings, model, out.as_deref()),
        Command::Evaluate { model } => evaluate_cmd(&settings, model),
        Command::SweepSchemes(args) => sweep(&settings, args, true),
        Command::SweepAggregation(args) => sweep(&settings, args, false),
        Command::SweepTags { output } => sweep_tags(&settings, output),
        Command::GenSynthetic {
            out,
            profile,
            users,
            sites,
            dim,
        } => {
            let cfg = SyntheticConfig {
                profile: *profile,
                seed: settings.experiment.seed,
                users: *users,
                sites: *sites,
                dim: *dim,
            };
            generate(&cfg)
                .write_to(out)
                .with_context(|| format!("writing corpus to {}", out.display()))?;
            eprintln!("wrote {profile} corpus ({users} users, {sites} sites, d = {dim}) to {}", out.display());
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
