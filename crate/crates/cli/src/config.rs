//! Run configuration: a TOML file with full command-line overrides,
//! precedence flags > file > defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use newsvol_core::classify::EnsembleSpec;
use newsvol_core::eval::{RollingConfig, WindowMode};
use newsvol_core::explain::PeriodSpec;
use newsvol_core::features::Channel;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable overriding the embedding cache path.
pub const CACHE_ENV_VAR: &str = "NEWSVOL_CACHE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub bars: PathBuf,
    pub news: PathBuf,
    /// Word-vector file; required when the embedding channel reads from a
    /// local store.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vectors: Option<PathBuf>,
    /// Lexicon file; the bundled financial lexicon is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    /// Embedding cache for the remote provider.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleaningConfig {
    pub min_tokens: usize,
    pub boilerplate: Vec<String>,
    pub extra_patterns: Vec<String>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            min_tokens: 3,
            boilerplate: Vec::new(),
            extra_patterns: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesConfig {
    /// Lag order for the news-derived channels; the lagged-RV benchmark
    /// already encodes its own history and is never lagged further.
    pub p: usize,
    pub channels: Vec<Channel>,
    pub interval_minutes: u32,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        Self {
            p: 5,
            channels: vec![
                Channel::Count,
                Channel::Sentiment,
                Channel::Embedding,
                Channel::Har,
            ],
            interval_minutes: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapConfig {
    pub n_samples: usize,
    pub background_size: usize,
    pub top_k: usize,
    /// Extra stopwords on top of the built-in list.
    pub extra_stopwords: Vec<String>,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            n_samples: 4096,
            background_size: 100,
            top_k: 20,
            extra_stopwords: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    #[default]
    File,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingsConfig {
    pub source: EmbeddingSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    pub batch_size: usize,
}

/// The fully resolved run configuration; serialized verbatim into every
/// stage manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub paths: PathsConfig,
    #[serde(default)]
    pub cleaning: CleaningConfig,
    #[serde(default)]
    pub features: FeaturesConfig,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub rolling: RollingConfig,
    #[serde(default)]
    pub shap: ShapConfig,
    #[serde(default)]
    pub embeddings: EmbeddingsConfig,
    #[serde(default = "default_periods")]
    pub periods: Vec<PeriodSpec>,
}

fn default_seed() -> u64 {
    42
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

/// Default regime segmentation: pre-pandemic, pandemic shock, stabilization,
/// and the conflict period from 2022-02-24 onward.
pub fn default_periods() -> Vec<PeriodSpec> {
    vec![
        PeriodSpec {
            name: "pre_pandemic".into(),
            start: date(1900, 1, 1),
            end: date(2019, 12, 31),
        },
        PeriodSpec {
            name: "pandemic_shock".into(),
            start: date(2020, 1, 1),
            end: date(2020, 6, 30),
        },
        PeriodSpec {
            name: "stabilization".into(),
            start: date(2020, 7, 1),
            end: date(2022, 2, 23),
        },
        PeriodSpec {
            name: "conflict".into(),
            start: date(2022, 2, 24),
            end: date(2100, 12, 31),
        },
    ]
}

/// Command-line overrides applied on top of the file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub p: Option<usize>,
    pub train_fraction: Option<f64>,
    pub channels: Option<Vec<Channel>>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(vec![format!("cannot read config {}: {e}", path.display())])
        })?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(vec![format!("invalid config: {e}")]))?;
        config.apply_overrides(overrides);
        if let Ok(cache) = std::env::var(CACHE_ENV_VAR) {
            config.paths.cache = Some(PathBuf::from(cache));
        }
        config.validate()?;
        Ok(config)
    }

    fn apply_overrides(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.output_dir {
            self.paths.output_dir = out.clone();
        }
        if let Some(p) = overrides.p {
            self.features.p = p;
        }
        if let Some(tf) = overrides.train_fraction {
            self.rolling.train_fraction = tf;
        }
        if let Some(channels) = &overrides.channels {
            self.features.channels = channels.clone();
        }
    }

    /// Collects every invalid field instead of stopping at the first.
    pub fn validate(&self) -> CliResult<()> {
        let mut problems = Vec::new();
        let must_exist = |problems: &mut Vec<String>, name: &str, path: &Path| {
            if !path.exists() {
                problems.push(format!("paths.{name}: {} does not exist", path.display()));
            }
        };
        must_exist(&mut problems, "bars", &self.paths.bars);
        must_exist(&mut problems, "news", &self.paths.news);
        if let Some(lexicon) = &self.paths.lexicon {
            must_exist(&mut problems, "lexicon", lexicon);
        }
        let uses_embedding = self.features.channels.contains(&Channel::Embedding);
        match self.embeddings.source {
            EmbeddingSource::File => {
                if uses_embedding {
                    match &self.paths.vectors {
                        Some(v) => must_exist(&mut problems, "vectors", v),
                        None => problems.push(
                            "paths.vectors: required when embeddings.source = \"file\"".into(),
                        ),
                    }
                }
            }
            EmbeddingSource::Remote => {
                if self.embeddings.endpoint.is_none() {
                    problems.push("embeddings.endpoint: required for remote source".into());
                }
                if self.embeddings.model_name.is_none() {
                    problems.push("embeddings.model_name: required for remote source".into());
                }
                if self.embeddings.batch_size == 0 {
                    problems.push("embeddings.batch_size: must be >= 1".into());
                }
                if self.paths.cache.is_none() {
                    problems.push("paths.cache: required for remote source".into());
                }
            }
        }
        if self.features.channels.is_empty() {
            problems.push("features.channels: at least one channel required".into());
        }
        if self.features.interval_minutes == 0 {
            problems.push("features.interval_minutes: must be positive".into());
        }
        if !(self.rolling.train_fraction > 0.0 && self.rolling.train_fraction < 1.0) {
            problems.push(format!(
                "rolling.train_fraction: {} outside (0, 1)",
                self.rolling.train_fraction
            ));
        }
        if self.rolling.step == 0 {
            problems.push("rolling.step: must be positive".into());
        }
        if self.ensemble.k == 0 || self.ensemble.k % 2 == 0 {
            problems.push(format!(
                "ensemble.k: must be a positive odd integer, got {}",
                self.ensemble.k
            ));
        }
        if self.ensemble.var_floor <= 0.0 {
            problems.push("ensemble.var_floor: must be positive".into());
        }
        if let Some(w) = &self.ensemble.voting_weights {
            if w.len() != 3 || w.iter().any(|v| *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
                problems.push(
                    "ensemble.voting_weights: need 3 nonnegative weights with positive sum".into(),
                );
            }
        }
        if self.shap.background_size == 0 {
            problems.push("shap.background_size: must be positive".into());
        }
        if self.shap.top_k == 0 {
            problems.push("shap.top_k: must be positive".into());
        }
        if self.periods.is_empty() {
            problems.push("periods: at least one period required".into());
        }
        for p in &self.periods {
            if p.start > p.end {
                problems.push(format!("periods.{}: start after end", p.name));
            }
        }
        for pair in self.periods.windows(2) {
            if pair[1].start <= pair[0].end {
                problems.push(format!(
                    "periods: {} and {} overlap or are out of order",
                    pair[0].name, pair[1].name
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(problems))
        }
    }

    /// The `# key=value` header echoed into every artifact so reports carry
    /// the seed and the assumed hyperparameters.
    pub fn run_header(&self) -> String {
        let weights = match &self.ensemble.voting_weights {
            None => "uniform".to_string(),
            Some(w) => w
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join("/"),
        };
        format!(
            "# newsvol {} seed={} k={} l2_lambda={} var_floor={} weights={} p={} train_fraction={} window={:?}",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.ensemble.k,
            self.ensemble.l2_lambda,
            self.ensemble.var_floor,
            weights,
            self.features.p,
            self.rolling.train_fraction,
            self.rolling.window_mode,
        )
    }

    /// Stable map form used in manifests.
    pub fn snapshot(&self) -> BTreeMap<String, serde_json::Value> {
        let value = serde_json::to_value(self).expect("config serializes");
        match value {
            serde_json::Value::Object(map) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        }
    }
}

/// Window-mode helper shared by clap argument parsing.
pub fn parse_window_mode(s: &str) -> Result<WindowMode, String> {
    match s {
        "sliding" => Ok(WindowMode::Sliding),
        "expanding" => Ok(WindowMode::Expanding),
        other => Err(format!("unknown window mode {other:?}")),
    }
}
