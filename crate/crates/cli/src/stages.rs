//! One function per subcommand. Every stage writes into its own directory
//! under the output root and finishes with a manifest.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context as _, Result};
use infdecomp_core::cluster::{evaluate, kmeans, make_eval_packets, KMeansOptions};
use infdecomp_core::corpus::{load_corpus, CorpusFormat, CorpusView, Document, Source, ViewKind};
use infdecomp_core::covote::{
    build_features, coefficient_table, format_table, load_legislators, write_coefficients_csv, FeatureInputs,
    LmmOptions, VoteTable, FEATURE_NAMES,
};
use infdecomp_core::decomposer::{
    decompose_corpus, load_exemplars, load_template, DecomposeOptions, DecomposeReport, Decomposition,
    DecompositionCache, GenerationBackend, GenerationRequest, HttpBackend, MockBackend, PromptConfig, Sampling,
};
use infdecomp_core::embedder::{
    embed_batch, EmbeddingCache, EmbeddingProvider, HashingProvider, HttpEmbeddingProvider,
};
use infdecomp_core::http::RetryPolicy;
use infdecomp_core::simeval::{format_comparison, run_sts_benchmark, write_report_csv, GenerationSource, Mode, StsDataset};
use infdecomp_core::topics::{
    doc_topic_distribution, fit_lda, select_top_tweets, top_words, LdaParams, TokenizedCorpus, TopicModelState,
    TopicSelection, TweetSelections,
};
use serde::Serialize;

use crate::config::{Distance, LoadedConfig, PromptSpec, ProviderKind};
use crate::output::{write_atomic, StageOutput};

struct CountingBackend {
    inner: Box<dyn GenerationBackend>,
    calls: AtomicUsize,
}

impl GenerationBackend for CountingBackend {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn complete(&self, req: &GenerationRequest) -> infdecomp_core::Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(req)
    }
}

struct CountingProvider {
    inner: Box<dyn EmbeddingProvider>,
    calls: AtomicUsize,
}

impl EmbeddingProvider for CountingProvider {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn embed(&self, texts: &[String]) -> infdecomp_core::Result<Vec<Vec<f64>>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.embed(texts)
    }
}

/// Calls made to remote (or mock) services during one invocation.
#[derive(Debug, Default, Serialize)]
pub struct RunStats {
    pub generation_calls: usize,
    pub embedding_calls: usize,
    pub decomposition_cache_hits: usize,
}

/// Providers and caches shared by all stages of one invocation.
pub struct Context {
    pub cfg: LoadedConfig,
    backend: CountingBackend,
    provider: CountingProvider,
    dcache: DecompositionCache,
    ecache: EmbeddingCache,
    cache_hits: AtomicUsize,
}

fn token(env: &Option<String>) -> Option<String> {
    env.as_ref().and_then(|name| std::env::var(name).ok())
}

fn retry(max_attempts: u32) -> RetryPolicy {
    RetryPolicy {
        max_attempts,
        ..RetryPolicy::default()
    }
}

impl Context {
    pub fn new(cfg: LoadedConfig) -> Result<Self> {
        let c = &cfg.config;
        let inner: Box<dyn GenerationBackend> = match c.generation.provider {
            ProviderKind::Mock => Box::new(MockBackend::new()),
            ProviderKind::Http => Box::new(HttpBackend::new(
                c.generation.endpoint.as_deref().unwrap_or_default(),
                c.generation.model.as_deref().unwrap_or_default(),
                token(&c.generation.token_env),
                retry(c.generation.max_attempts),
            )),
        };
        let provider: Box<dyn EmbeddingProvider> = match c.embedding.provider {
            ProviderKind::Mock => Box::new(HashingProvider::new(c.embedding.dim)),
            ProviderKind::Http => Box::new(HttpEmbeddingProvider::new(
                c.embedding.endpoint.as_deref().unwrap_or_default(),
                c.embedding.provider_id.as_deref().unwrap_or_default(),
                token(&c.embedding.token_env),
                retry(c.embedding.max_attempts),
            )),
        };
        let cache_dir = cfg.cache_dir();
        std::fs::create_dir_all(&cache_dir).with_context(|| format!("creating {}", cache_dir.display()))?;
        let dcache = DecompositionCache::open(&cache_dir.join("decompositions.jsonl"))?;
        let ecache = EmbeddingCache::open(&cache_dir.join("embeddings.jsonl"))?;
        Ok(Self {
            cfg,
            backend: CountingBackend {
                inner,
                calls: AtomicUsize::new(0),
            },
            provider: CountingProvider {
                inner: provider,
                calls: AtomicUsize::new(0),
            },
            dcache,
            ecache,
            cache_hits: AtomicUsize::new(0),
        })
    }

    pub fn stats(&self) -> RunStats {
        RunStats {
            generation_calls: self.backend.calls.load(Ordering::SeqCst),
            embedding_calls: self.provider.calls.load(Ordering::SeqCst),
            decomposition_cache_hits: self.cache_hits.load(Ordering::SeqCst),
        }
    }

    /// Writes the call counters for this invocation. Kept out of manifests
    /// since they depend on cache state.
    pub fn write_stats(&self) -> Result<()> {
        let mut s = serde_json::to_string_pretty(&self.stats())?;
        s.push('\n');
        write_atomic(&self.cfg.output_dir().join("run_stats.json"), s.as_bytes())
    }

    fn seed(&self) -> u64 {
        self.cfg.config.seed
    }

    fn options(&self) -> DecomposeOptions {
        let g = &self.cfg.config.generation;
        DecomposeOptions {
            sampling: Sampling {
                temperature: g.temperature,
                max_tokens: g.max_tokens,
            },
            concurrency: g.concurrency,
            model_id: self.backend.model_id().to_string(),
        }
    }

    /// Each prompt gets its own exemplar-sampling seed.
    fn prompt_configs(&self, specs: &[PromptSpec], out: &mut StageOutput) -> Result<Vec<PromptConfig>> {
        specs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                out.input(&self.cfg, &s.template)?;
                let template = load_template(&self.cfg.resolve(&s.template))?;
                let exemplars = match &s.exemplars {
                    Some(p) => {
                        out.input(&self.cfg, p)?;
                        load_exemplars(&self.cfg.resolve(p))?
                    }
                    None => Vec::new(),
                };
                Ok(PromptConfig {
                    template,
                    exemplars,
                    k: s.k,
                    seed: self.seed().wrapping_add(i as u64),
                })
            })
            .collect()
    }

    fn decompose(&self, view: &CorpusView, configs: &[PromptConfig]) -> Result<DecomposeReport> {
        let report = decompose_corpus(view, configs, Some(&self.backend), &self.dcache, &self.options())?;
        self.cache_hits.fetch_add(report.cache_hits, Ordering::SeqCst);
        Ok(report)
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let vecs = embed_batch(texts, &self.provider, &self.ecache, self.cfg.config.embedding.batch_size)?;
        Ok(vecs.into_iter().map(|v| v.values).collect())
    }

    fn corpus(&self, out: &mut StageOutput) -> Result<Vec<Document>> {
        let Some(path) = &self.cfg.config.paths.corpus else {
            bail!("paths.corpus is not configured");
        };
        out.input(&self.cfg, path)?;
        Ok(load_corpus(&self.cfg.resolve(path), CorpusFormat::Jsonl)?)
    }

    fn corpus_decompositions(&self, docs: &[Document], out: &mut StageOutput) -> Result<DecomposeReport> {
        let configs = self.prompt_configs(&self.cfg.config.prompts, out)?;
        self.decompose(&CorpusView::comments(docs), &configs)
    }
}

#[derive(Serialize)]
struct DecomposeSummary {
    documents: usize,
    decomposed: usize,
    failures: Vec<(String, String)>,
    total_generations: usize,
    mean_generations: f64,
}

fn jsonl<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn decompose(ctx: &Context) -> Result<()> {
    let mut out = StageOutput::new(&ctx.cfg, "decompose");
    let docs = ctx.corpus(&mut out)?;
    let report = ctx.corpus_decompositions(&docs, &mut out)?;
    out.write("decompositions.jsonl", &jsonl(&report.decompositions)?)?;
    out.write_json(
        "summary.json",
        &DecomposeSummary {
            documents: docs.len(),
            decomposed: report.decompositions.len(),
            failures: report.failures.iter().map(|(id, e)| (id.clone(), e.to_string())).collect(),
            total_generations: report.total_generations,
            mean_generations: report.mean_generations(),
        },
    )?;
    out.finish(&ctx.cfg, "decompose")?;
    Ok(())
}

fn views(docs: &[Document], decomps: &[Decomposition]) -> BTreeMap<&'static str, CorpusView> {
    BTreeMap::from([
        (ViewKind::Comments.as_str(), CorpusView::comments(docs)),
        (ViewKind::Sentences.as_str(), CorpusView::sentences(docs)),
        (ViewKind::Generations.as_str(), CorpusView::generations(docs, decomps)),
    ])
}

#[derive(Serialize)]
struct EmbedSummary {
    view: String,
    items: usize,
    dim: usize,
}

pub fn embed(ctx: &Context) -> Result<()> {
    let mut out = StageOutput::new(&ctx.cfg, "embed");
    let docs = ctx.corpus(&mut out)?;
    let report = ctx.corpus_decompositions(&docs, &mut out)?;
    let mut summary = Vec::new();
    for (name, view) in views(&docs, &report.decompositions) {
        let vecs = ctx.embed(&view.texts())?;
        let rows: Vec<_> = view
            .items
            .iter()
            .zip(&vecs)
            .map(|(item, v)| serde_json::json!({ "id": item.item_id, "vector": v }))
            .collect();
        out.write(&format!("{name}.jsonl"), &jsonl(&rows)?)?;
        summary.push(EmbedSummary {
            view: name.to_string(),
            items: view.len(),
            dim: vecs.first().map_or(0, Vec::len),
        });
    }
    out.write_json("summary.json", &summary)?;
    out.finish(&ctx.cfg, "embed")?;
    Ok(())
}

pub fn sts(ctx: &Context) -> Result<()> {
    let Some(sts) = &ctx.cfg.config.sts else {
        bail!("the config has no [sts] section");
    };
    let mut out = StageOutput::new(&ctx.cfg, "sts");
    let mut datasets = Vec::new();
    for d in &sts.datasets {
        out.input(&ctx.cfg, &d.path)?;
        datasets.push(StsDataset::load(&ctx.cfg.resolve(&d.path), &d.name)?);
    }
    let configs = ctx.prompt_configs(&sts.prompts, &mut out)?;
    let baseline = run_sts_benchmark(&datasets, Mode::Baseline, &ctx.provider, &ctx.ecache, None, sts.pooling)?;
    let options = ctx.options();
    let augmented = run_sts_benchmark(
        &datasets,
        Mode::Augmented,
        &ctx.provider,
        &ctx.ecache,
        Some(GenerationSource::Decompose {
            configs: &configs,
            backend: Some(&ctx.backend),
            cache: &ctx.dcache,
            options: &options,
        }),
        sts.pooling,
    )?;
    let mut rows = baseline.rows.clone();
    rows.extend(augmented.rows.iter().cloned());
    let mut csv = Vec::new();
    write_report_csv(&rows, &mut csv)?;
    out.write("sts_report.csv", &csv)?;
    let mut table = String::new();
    for (b, a) in baseline.rows.iter().zip(&augmented.rows) {
        table.push_str(&format!("{}  [{}]\n", format_comparison(&b.dataset, b.value, a.value), b.metric));
    }
    out.write("sts_table.txt", table.as_bytes())?;
    out.finish(&ctx.cfg, "sts")?;
    print!("{table}");
    Ok(())
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

pub fn cluster(ctx: &Context) -> Result<()> {
    let Some(cl) = &ctx.cfg.config.cluster else {
        bail!("the config has no [cluster] section");
    };
    let mut out = StageOutput::new(&ctx.cfg, "cluster");
    let docs = ctx.corpus(&mut out)?;
    let report = ctx.corpus_decompositions(&docs, &mut out)?;
    let all = views(&docs, &report.decompositions);
    let mut metrics = String::from("K,view,silhouette,calinski_harabasz,davies_bouldin,n_items\n");
    let mut skipped = String::new();
    for &k in &cl.k_grid {
        for kind in &cl.views {
            let mut view = all[kind.as_str()].clone();
            if let Some(n) = cl.subsample {
                if n < view.len() {
                    view = view.subsample(n, ctx.seed())?;
                }
            }
            if k >= view.len() {
                bail!("K = {k} needs more than {} items in the {} view", view.len(), kind.as_str());
            }
            let texts = view.texts();
            let mut vectors = ctx.embed(&texts)?;
            if cl.distance == Distance::Cosine {
                vectors = vectors.into_iter().map(unit).collect();
            }
            let model = kmeans(&vectors, &KMeansOptions::new(k, ctx.seed()))?;
            let m = evaluate(&vectors, &model.assignments)?;
            metrics.push_str(&format!(
                "{k},{},{},{},{},{}\n",
                kind.as_str(),
                m.silhouette,
                m.calinski_harabasz,
                m.davies_bouldin,
                view.len()
            ));
            let stem = format!("{}_k{k}", kind.as_str());
            let ids: Vec<&str> = view.items.iter().map(|i| i.item_id.as_str()).collect();
            out.write_json(
                &format!("models/{stem}.json"),
                &serde_json::json!({ "view": kind.as_str(), "item_ids": ids, "model": model }),
            )?;
            let (packets, warnings) = make_eval_packets(&model, &texts, cl.packets_per_cluster, ctx.seed())?;
            for w in warnings {
                skipped.push_str(&format!("{stem}: {w}\n"));
            }
            out.write(&format!("packets/{stem}.jsonl"), &jsonl(&packets)?)?;
        }
    }
    out.write("cluster_metrics.csv", metrics.as_bytes())?;
    out.write("packets/skipped.txt", skipped.as_bytes())?;
    out.finish(&ctx.cfg, "cluster")?;
    print!("{metrics}");
    Ok(())
}

struct TopicRun {
    tweets: Vec<Document>,
    state: TopicModelState,
    selections: TweetSelections,
}

fn fit_topics(ctx: &Context, out: &mut StageOutput) -> Result<TopicRun> {
    let Some(t) = &ctx.cfg.config.topics else {
        bail!("the config has no [topics] section");
    };
    out.input(&ctx.cfg, &t.tweets)?;
    out.input(&ctx.cfg, &t.selection)?;
    let tweets = load_corpus(&ctx.cfg.resolve(&t.tweets), CorpusFormat::Jsonl)?;
    let corpus = TokenizedCorpus::build(tweets.iter().map(|d| (d.doc_id.as_str(), d.text.as_str())), t.min_count);
    if !corpus.excluded.is_empty() {
        log::warn!("{} tweets have no tokens after preprocessing", corpus.excluded.len());
    }
    let state = fit_lda(
        &corpus,
        LdaParams {
            k_topics: t.k_topics,
            alpha: t.alpha,
            beta: t.beta,
            iterations: t.iterations,
            seed: ctx.seed(),
        },
    )?;
    let selection = TopicSelection::load(&ctx.cfg.resolve(&t.selection))?;
    let mut by_leg: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for d in &tweets {
        let Some(leg) = d.meta.get("legislator_id") else {
            bail!("tweet {} has no legislator_id in its meta", d.doc_id);
        };
        by_leg.entry(leg.clone()).or_default().push(d.doc_id.clone());
    }
    let selections = select_top_tweets(&state, &selection, &by_leg, t.threshold, t.top_m)?;
    Ok(TopicRun {
        tweets,
        state,
        selections,
    })
}

pub fn topics(ctx: &Context) -> Result<()> {
    let mut out = StageOutput::new(&ctx.cfg, "topics");
    let run = fit_topics(ctx, &mut out)?;
    let n_words = ctx.cfg.config.topics.as_ref().map_or(10, |t| t.top_words);
    let mut words_csv = String::from("topic,words\n");
    for k in 0..run.state.k_topics() {
        let (words, _) = top_words(&run.state, k, n_words)?;
        words_csv.push_str(&format!("{k},{}\n", words.join(" ")));
    }
    out.write("topic_words.csv", words_csv.as_bytes())?;
    let mut theta = String::from("doc_id");
    for k in 0..run.state.k_topics() {
        theta.push_str(&format!("\ttopic_{k}"));
    }
    theta.push('\n');
    for id in &run.state.doc_ids {
        theta.push_str(id);
        for p in doc_topic_distribution(&run.state, id)? {
            theta.push_str(&format!("\t{p}"));
        }
        theta.push('\n');
    }
    out.write("theta.tsv", theta.as_bytes())?;
    out.write_json("selections.json", &selections_json(&run.selections))?;
    out.finish(&ctx.cfg, "topics")?;
    Ok(())
}

fn selections_json(sel: &TweetSelections) -> BTreeMap<String, BTreeMap<String, Vec<String>>> {
    let mut out: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for ((leg, topic), tweets) in sel {
        out.entry(leg.clone()).or_default().insert(topic.to_string(), tweets.clone());
    }
    out
}

pub fn covote(ctx: &Context) -> Result<()> {
    let Some(cv) = &ctx.cfg.config.covote else {
        bail!("the config has no [covote] section");
    };
    let mut out = StageOutput::new(&ctx.cfg, "covote");
    let run = fit_topics(ctx, &mut out)?;
    out.input(&ctx.cfg, &cv.votes)?;
    out.input(&ctx.cfg, &cv.legislators)?;
    let votes = VoteTable::load_csv(&ctx.cfg.resolve(&cv.votes))?;
    let legislators = load_legislators(&ctx.cfg.resolve(&cv.legislators))?;

    let selected: BTreeSet<&str> = run.selections.values().flatten().map(String::as_str).collect();
    let docs: Vec<Document> = run
        .tweets
        .iter()
        .filter(|d| selected.contains(d.doc_id.as_str()))
        .map(|d| Document { source: Source::Tweet, ..d.clone() })
        .collect();
    if docs.is_empty() {
        bail!("no tweets pass the topic filter");
    }
    let configs = ctx.prompt_configs(&cv.prompts, &mut out)?;
    let report = ctx.decompose(&CorpusView::comments(&docs), &configs)?;

    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let tweet_embeddings: HashMap<String, Vec<f64>> = docs
        .iter()
        .map(|d| d.doc_id.clone())
        .zip(ctx.embed(&texts)?)
        .collect();
    let mut generation_embeddings = HashMap::new();
    for d in &report.decompositions {
        generation_embeddings.insert(d.parent_id.clone(), ctx.embed(&d.generations)?);
    }
    let features = build_features(
        &votes,
        &legislators,
        &FeatureInputs {
            selections: &run.selections,
            tweet_embeddings: &tweet_embeddings,
            generation_embeddings: &generation_embeddings,
            percentile: cv.percentile,
        },
    )?;
    let opts = LmmOptions {
        standardize: cv.standardize,
        starts: cv.starts,
        seed: ctx.seed(),
        ..LmmOptions::default()
    };
    let table = coefficient_table(&features.observations, &FEATURE_NAMES, &opts)?;

    std::fs::create_dir_all(&out.dir)?;
    let coef_path = out.dir.join("coefficients.csv");
    write_coefficients_csv(&table, &coef_path)?;
    let coef_bytes = std::fs::read(&coef_path)?;
    out.write("coefficients.csv", &coef_bytes)?;
    let mut report_text = format_table(&table);
    report_text.push_str(&format!("pairs dropped: {}\n", features.dropped.len()));
    out.write("report.txt", report_text.as_bytes())?;
    out.write_json("fit.json", &table.full)?;
    out.write("observations.jsonl", &jsonl(&features.observations)?)?;
    out.write("dropped.jsonl", &jsonl(&features.dropped)?)?;
    out.finish(&ctx.cfg, "covote")?;
    print!("{report_text}");
    Ok(())
}

pub fn pipeline(ctx: &Context) -> Result<()> {
    let c = &ctx.cfg.config;
    if c.paths.corpus.is_some() {
        decompose(ctx)?;
        embed(ctx)?;
    }
    if c.sts.is_some() {
        sts(ctx)?;
    }
    if c.cluster.is_some() {
        cluster(ctx)?;
    }
    if c.topics.is_some() {
        topics(ctx)?;
    }
    if c.covote.is_some() {
        covote(ctx)?;
    }
    Ok(())
}

