//! Run configuration: TOML file, `INTENTFORGE_<SECTION>_<KEY>` environment
//! variables and command-line overrides, merged in that order over the
//! defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discriminator::OccurrenceScale;
use crate::error::{Error, Result};
use crate::llm::{CompletionProvider, HttpProvider, HttpProviderConfig, RecordingProvider, ReplayProvider};
use crate::pipeline::{PipelineConfig, RunnerConfig};
use crate::promptgen::{Ablation, Granularity};
use crate::retrieval::{CachedEmbedder, EmbeddingProvider, HashingEmbedder, HttpEmbedder, HttpEmbedderConfig};
use crate::source::AdapterConfig;

pub const ENV_PREFIX: &str = "INTENTFORGE_";
pub const DEFAULT_CONFIG_FILE: &str = "intentforge.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub alpha: f64,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        RetrievalSection { alpha: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// Offline character-trigram hashing.
    #[default]
    Hashing,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub provider: EmbeddingKind,
    pub endpoint: String,
    pub api_key_env: String,
    pub auth_header: String,
    pub max_retries: u32,
    pub timeout_secs: u64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let http = HttpEmbedderConfig::default();
        EmbeddingSection {
            provider: EmbeddingKind::Hashing,
            endpoint: http.endpoint,
            api_key_env: String::new(),
            auth_header: http.auth_header,
            max_retries: http.max_retries,
            timeout_secs: http.timeout_secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorSection {
    pub beta: f64,
    pub top_k: usize,
    pub depth: usize,
    /// `raw` mixes the unnormalized occurrence sum into the likelihood.
    pub occurrence_scale: OccurrenceScale,
}

impl Default for DiscriminatorSection {
    fn default() -> Self {
        DiscriminatorSection {
            beta: crate::discriminator::DEFAULT_BETA,
            top_k: crate::discriminator::DEFAULT_TOP_K,
            depth: crate::discriminator::DEFAULT_DEPTH,
            occurrence_scale: OccurrenceScale::Normalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSection {
    pub max_outer: usize,
    pub max_refine: usize,
    pub granularity: Granularity,
    pub ablation: Vec<Ablation>,
    /// Empty means detect from the project's test imports.
    pub framework_version: String,
    /// Empty means no system prompt.
    pub system_prompt_file: String,
    pub record_timings: bool,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            max_outer: 5,
            max_refine: 4,
            granularity: Granularity::Full,
            ablation: Vec::new(),
            framework_version: String::new(),
            system_prompt_file: String::new(),
            record_timings: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Http,
    Replay,
    Record,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub provider: ProviderKind,
    pub endpoint: String,
    pub api_key_env: String,
    pub model_id: String,
    pub response_path: String,
    pub replay_dir: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: u64,
}

impl Default for LlmSection {
    fn default() -> Self {
        let http = HttpProviderConfig::default();
        LlmSection {
            provider: ProviderKind::Http,
            endpoint: String::new(),
            api_key_env: String::new(),
            model_id: "default".into(),
            response_path: http.response_path,
            replay_dir: String::new(),
            temperature: 0.0,
            max_retries: http.max_retries,
            timeout_secs: http.timeout_secs,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub retrieval: RetrievalSection,
    pub embedding: EmbeddingSection,
    pub discriminator: DiscriminatorSection,
    pub pipeline: PipelineSection,
    pub runner: RunnerConfig,
    pub llm: LlmSection,
    pub adapter: AdapterConfig,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn to_table<T: Serialize>(value: &T) -> Result<toml::Table> {
    toml::Table::try_from(value).map_err(|e| config_err(format!("cannot serialize configuration: {e}")))
}

/// Reads a raw string override as the TOML type of the key it replaces.
/// Lists accept comma-separated values.
fn coerce(raw: &str, like: Option<&toml::Value>) -> toml::Value {
    if let Some(toml::Value::Array(_)) = like {
        if !raw.trim_start().starts_with('[') {
            let items = raw
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| toml::Value::String(s.to_string()))
                .collect();
            return toml::Value::Array(items);
        }
    }
    if let Some(toml::Value::String(_)) = like {
        return toml::Value::String(raw.to_string());
    }
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_key(table: &mut toml::Table, defaults: &toml::Table, section: &str, key: &str, raw: &str, origin: &str) -> Result<()> {
    let Some(toml::Value::Table(default_section)) = defaults.get(section) else {
        return Err(config_err(format!("{origin}: unknown section {section:?}")));
    };
    let Some(like) = default_section.get(key) else {
        return Err(config_err(format!("{origin}: unknown key {section}.{key}")));
    };
    insert(table, section, key, coerce(raw, Some(like)))
}

fn insert(table: &mut toml::Table, section: &str, key: &str, value: toml::Value) -> Result<()> {
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        _ => Err(config_err(format!("{section} is not a table"))),
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    /// Pure resolution: defaults < file text < environment < flags.
    /// `env` holds every variable (non-prefixed ones are ignored); `flags`
    /// are `section.key = value` overrides.
    pub fn resolve(file_text: Option<&str>, env: &BTreeMap<String, String>, flags: &[(String, String)]) -> Result<Self> {
        let defaults = to_table(&RunConfig::default())?;
        let mut merged = defaults.clone();
        if let Some(text) = file_text {
            let file: toml::Table = text.parse().map_err(|e| config_err(format!("config file: {e}")))?;
            // typecheck the file on its own first so errors name the file
            let _: RunConfig = file
                .clone()
                .try_into()
                .map_err(|e| config_err(format!("config file: {e}")))?;
            merge(&mut merged, file);
        }
        let sections: BTreeSet<&String> = defaults.keys().collect();
        for (name, raw) in env {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            let rest = rest.to_ascii_lowercase();
            let Some((section, key)) = rest.split_once('_') else { continue };
            if !sections.contains(&section.to_string()) {
                log::debug!("ignoring {name}: no section {section:?}");
                continue;
            }
            set_key(&mut merged, &defaults, section, key, raw, name)?;
        }
        for (path, raw) in flags {
            let (section, key) = path
                .split_once('.')
                .ok_or_else(|| config_err(format!("override {path:?} is not section.key")))?;
            set_key(&mut merged, &defaults, section, key, raw, "flag")?;
        }
        let config: RunConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Resolves with the process environment, reading `file` when given, else
    /// `./intentforge.toml` when it exists.
    pub fn load(file: Option<&Path>, flags: &[(String, String)]) -> Result<Self> {
        let path: Option<PathBuf> = match file {
            Some(p) => Some(p.to_path_buf()),
            None => Some(PathBuf::from(DEFAULT_CONFIG_FILE)).filter(|p| p.is_file()),
        };
        let text = match &path {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::io(format!("reading config {}", p.display()), e))?),
            None => None,
        };
        let env: BTreeMap<String, String> = std::env::vars().collect();
        Self::resolve(text.as_deref(), &env, flags)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline_config_unchecked().validate()?;
        if !(self.llm.temperature >= 0.0) {
            return Err(config_err("llm.temperature must be non-negative"));
        }
        Ok(())
    }

    fn pipeline_config_unchecked(&self) -> PipelineConfig {
        PipelineConfig {
            alpha: self.retrieval.alpha,
            beta: self.discriminator.beta,
            top_k: self.discriminator.top_k,
            depth: self.discriminator.depth,
            occurrence_scale: self.discriminator.occurrence_scale,
            max_outer: self.pipeline.max_outer,
            max_refine: self.pipeline.max_refine,
            granularity: self.pipeline.granularity,
            ablations: self.pipeline.ablation.iter().copied().collect(),
            framework_version: Some(self.pipeline.framework_version.clone()).filter(|v| !v.is_empty()),
            model_id: self.llm.model_id.clone(),
            temperature: self.llm.temperature,
            system_prompt: None,
            runner: self.runner.clone(),
            record_timings: self.pipeline.record_timings,
        }
    }

    /// Pipeline settings, with the system prompt file read in.
    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut cfg = self.pipeline_config_unchecked();
        if !self.pipeline.system_prompt_file.is_empty() {
            let p = Path::new(&self.pipeline.system_prompt_file);
            cfg.system_prompt =
                Some(fs::read_to_string(p).map_err(|e| Error::io(format!("reading system prompt {}", p.display()), e))?);
        }
        Ok(cfg)
    }

    pub fn embedder(&self) -> Result<Box<dyn EmbeddingProvider>> {
        match self.embedding.provider {
            EmbeddingKind::Hashing => Ok(Box::new(HashingEmbedder::new())),
            EmbeddingKind::Http => {
                if self.embedding.endpoint.is_empty() {
                    return Err(config_err("embedding.endpoint is required for the http embedder"));
                }
                let http = HttpEmbedder::new(HttpEmbedderConfig {
                    endpoint: self.embedding.endpoint.clone(),
                    auth_header: self.embedding.auth_header.clone(),
                    api_key_env: Some(self.embedding.api_key_env.clone()).filter(|s| !s.is_empty()),
                    max_retries: self.embedding.max_retries,
                    timeout_secs: self.embedding.timeout_secs,
                });
                Ok(Box::new(CachedEmbedder::new(http)))
            }
        }
    }

    fn http_provider(&self) -> Result<HttpProvider> {
        if self.llm.endpoint.is_empty() {
            return Err(config_err("llm.endpoint is required for the http and record providers"));
        }
        Ok(HttpProvider::new(HttpProviderConfig {
            endpoint: self.llm.endpoint.clone(),
            api_key_env: Some(self.llm.api_key_env.clone()).filter(|s| !s.is_empty()),
            response_path: self.llm.response_path.clone(),
            max_retries: self.llm.max_retries,
            timeout_secs: self.llm.timeout_secs,
        }))
    }

    fn replay_dir(&self) -> Result<&Path> {
        if self.llm.replay_dir.is_empty() {
            return Err(config_err("llm.replay_dir is required for the replay and record providers"));
        }
        Ok(Path::new(&self.llm.replay_dir))
    }

    pub fn completion_provider(&self) -> Result<Box<dyn CompletionProvider>> {
        Ok(match self.llm.provider {
            ProviderKind::Http => Box::new(self.http_provider()?),
            ProviderKind::Replay => Box::new(ReplayProvider::from_dir(self.replay_dir()?)?),
            ProviderKind::Record => Box::new(RecordingProvider::new(self.http_provider()?, self.replay_dir()?)),
        })
    }
}
