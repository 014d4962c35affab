//! Run configuration: one TOML file, paths relative to the file's directory.
//! Secrets are read from environment variables named in the file.

use std::path::{Path, PathBuf};

use infdecomp_core::corpus::ViewKind;
use infdecomp_core::embedder::Pooling;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    /// Decomposition prompts for the comment corpus.
    #[serde(default)]
    pub prompts: Vec<PromptSpec>,
    pub sts: Option<StsConfig>,
    pub cluster: Option<ClusterConfig>,
    pub topics: Option<TopicsConfig>,
    pub covote: Option<CovoteConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub provider: ProviderKind,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub token_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub concurrency: usize,
    pub max_attempts: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Mock,
            endpoint: None,
            model: None,
            token_env: None,
            temperature: 0.7,
            max_tokens: 256,
            concurrency: 4,
            max_attempts: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub provider: ProviderKind,
    /// Bucket count of the hashing provider.
    pub dim: usize,
    pub endpoint: Option<String>,
    pub provider_id: Option<String>,
    pub token_env: Option<String>,
    pub batch_size: usize,
    pub max_attempts: u32,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Mock,
            dim: 256,
            endpoint: None,
            provider_id: None,
            token_env: None,
            batch_size: 64,
            max_attempts: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptSpec {
    pub template: PathBuf,
    pub exemplars: Option<PathBuf>,
    #[serde(default)]
    pub k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StsConfig {
    pub datasets: Vec<DatasetSpec>,
    pub prompts: Vec<PromptSpec>,
    #[serde(default)]
    pub pooling: Pooling,
}

fn default_k_grid() -> Vec<usize> {
    vec![15, 25, 50]
}

fn default_views() -> Vec<ViewKind> {
    vec![ViewKind::Comments, ViewKind::Sentences, ViewKind::Generations]
}

fn one() -> usize {
    1
}

/// `cosine` clusters L2-normalized vectors; `euclidean` uses them as embedded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    #[default]
    Cosine,
    Euclidean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_views")]
    pub views: Vec<ViewKind>,
    /// Cluster a seeded subsample of this many items per view.
    pub subsample: Option<usize>,
    #[serde(default = "one")]
    pub packets_per_cluster: usize,
    #[serde(default)]
    pub distance: Distance,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopicsConfig {
    pub tweets: PathBuf,
    pub selection: PathBuf,
    pub k_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub min_count: usize,
    pub threshold: f64,
    pub top_m: usize,
    pub top_words: usize,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        Self {
            tweets: PathBuf::new(),
            selection: PathBuf::new(),
            k_topics: 50,
            alpha: 0.1,
            beta: 0.01,
            iterations: 500,
            min_count: 3,
            threshold: 0.5,
            top_m: 5,
            top_words: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovoteConfig {
    pub votes: PathBuf,
    pub legislators: PathBuf,
    pub prompts: Vec<PromptSpec>,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default = "default_starts")]
    pub starts: usize,
}

fn default_percentile() -> f64 {
    10.0
}

fn default_starts() -> usize {
    3
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub provider: Option<ProviderKind>,
    pub output_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Parse(String),
    Invalid(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read(p, e) => write!(f, "cannot read config {}: {e}", p.display()),
            ConfigError::Parse(m) => write!(f, "config does not parse: {m}"),
            ConfigError::Invalid(issues) => {
                writeln!(f, "invalid config:")?;
                for i in issues {
                    writeln!(f, "  {i}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// A validated configuration with every path made absolute.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub config_path: PathBuf,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        let mut config: RunConfig = toml::from_str(&raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        let base_dir = if base_dir.as_os_str().is_empty() { PathBuf::from(".") } else { base_dir };
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(p) = overrides.provider {
            config.generation.provider = p;
            config.embedding.provider = p;
        }
        if let Some(out) = &overrides.output_dir {
            config.paths.output_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
        }
        if let Some(cache) = &overrides.cache_dir {
            config.paths.cache_dir = std::path::absolute(cache).unwrap_or_else(|_| cache.clone());
        }
        let loaded = Self {
            config,
            config_path: path.to_path_buf(),
            base_dir,
        };
        let issues = loaded.validate();
        if issues.is_empty() {
            Ok(loaded)
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.output_dir)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.resolve(&self.config.paths.cache_dir)
    }

    fn validate(&self) -> Vec<String> {
        let c = &self.config;
        let mut issues = Vec::new();
        let mut file = |field: &str, p: &Path| {
            if p.as_os_str().is_empty() {
                issues.push(format!("{field}: required"));
            } else if !self.resolve(p).is_file() {
                issues.push(format!("{field}: file not found: {}", self.resolve(p).display()));
            }
        };
        if let Some(corpus) = &c.paths.corpus {
            file("paths.corpus", corpus);
        }
        let prompt_files = |file: &mut dyn FnMut(&str, &Path), prefix: &str, prompts: &[PromptSpec]| {
            for (i, p) in prompts.iter().enumerate() {
                file(&format!("{prefix}[{i}].template"), &p.template);
                if let Some(e) = &p.exemplars {
                    file(&format!("{prefix}[{i}].exemplars"), e);
                }
            }
        };
        prompt_files(&mut file, "prompts", &c.prompts);
        if let Some(sts) = &c.sts {
            for (i, d) in sts.datasets.iter().enumerate() {
                file(&format!("sts.datasets[{i}].path"), &d.path);
            }
            prompt_files(&mut file, "sts.prompts", &sts.prompts);
        }
        if let Some(t) = &c.topics {
            file("topics.tweets", &t.tweets);
            file("topics.selection", &t.selection);
        }
        if let Some(v) = &c.covote {
            file("covote.votes", &v.votes);
            file("covote.legislators", &v.legislators);
            prompt_files(&mut file, "covote.prompts", &v.prompts);
        }

        let need = |issues: &mut Vec<String>, field: &str, v: &Option<String>| {
            if v.as_deref().is_none_or(|s| s.trim().is_empty()) {
                issues.push(format!("{field}: required when the provider is http"));
            }
        };
        if c.generation.provider == ProviderKind::Http {
            need(&mut issues, "generation.endpoint", &c.generation.endpoint);
            need(&mut issues, "generation.model", &c.generation.model);
        }
        if c.embedding.provider == ProviderKind::Http {
            need(&mut issues, "embedding.endpoint", &c.embedding.endpoint);
            need(&mut issues, "embedding.provider_id", &c.embedding.provider_id);
        }
        if c.generation.concurrency == 0 {
            issues.push("generation.concurrency: must be at least 1".into());
        }
        if c.embedding.dim == 0 {
            issues.push("embedding.dim: must be at least 1".into());
        }
        if c.embedding.batch_size == 0 {
            issues.push("embedding.batch_size: must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&c.generation.temperature) {
            issues.push("generation.temperature: must lie in [0, 2]".into());
        }
        if c.paths.corpus.is_none() && (c.cluster.is_some() || !c.prompts.is_empty()) {
            issues.push("paths.corpus: required by the prompts and cluster sections".into());
        }
        if c.paths.corpus.is_some() && c.prompts.is_empty() {
            issues.push("prompts: at least one prompt is required to decompose the corpus".into());
        }
        if let Some(sts) = &c.sts {
            if sts.datasets.is_empty() {
                issues.push("sts.datasets: at least one dataset is required".into());
            }
            if sts.prompts.is_empty() {
                issues.push("sts.prompts: at least one prompt is required".into());
            }
        }
        if let Some(cl) = &c.cluster {
            if cl.k_grid.is_empty() || cl.k_grid.iter().any(|&k| k < 2) {
                issues.push("cluster.k_grid: needs one or more values, each at least 2".into());
            }
            if cl.views.is_empty() {
                issues.push("cluster.views: at least one view is required".into());
            }
        }
        if let Some(t) = &c.topics {
            if t.k_topics == 0 {
                issues.push("topics.k_topics: must be at least 1".into());
            }
            if !(t.threshold > 0.0 && t.threshold <= 1.0) {
                issues.push("topics.threshold: must lie in (0, 1]".into());
            }
            if t.top_m == 0 {
                issues.push("topics.top_m: must be at least 1".into());
            }
            if t.alpha <= 0.0 || t.beta <= 0.0 {
                issues.push("topics.alpha/topics.beta: must be positive".into());
            }
        }
        if let Some(v) = &c.covote {
            if !(0.0..=100.0).contains(&v.percentile) {
                issues.push("covote.percentile: must lie in [0, 100]".into());
            }
            if v.prompts.is_empty() {
                issues.push("covote.prompts: at least one prompt is required".into());
            }
            if c.topics.is_none() {
                issues.push("covote: needs a [topics] section to select tweets".into());
            }
            if v.starts == 0 {
                issues.push("covote.starts: must be at least 1".into());
            }
        }
        issues
    }
}
