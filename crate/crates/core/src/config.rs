//! Service configuration: TOML file, then `CATALOG_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::TechDomain;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    /// Bearer credential for admin routes. Admin routes are closed when unset.
    pub admin_token: Option<String>,
    /// Seconds allowed for a synchronous single-article import.
    pub import_budget_secs: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { bind: "127.0.0.1".into(), port: 8080, admin_token: None, import_budget_secs: 60 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreConfig {
    pub path: PathBuf,
    /// Exported catalog loaded when the store is empty at startup.
    pub seed_catalog: Option<PathBuf>,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig { path: PathBuf::from("catalog.db"), seed_catalog: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Rule table for the mock provider (TOML or JSON).
    pub rules: Option<PathBuf>,
    pub seed: u64,
    pub endpoint: Option<String>,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub token_cap: Option<u64>,
    pub requests_per_minute: Option<u32>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Mock,
            rules: None,
            seed: crate::gateway::MockProvider::DEFAULT_SEED,
            endpoint: None,
            model: "default".into(),
            api_key_env: None,
            timeout_secs: 60,
            token_cap: None,
            requests_per_minute: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    /// Fixed labels from a `text,label` CSV.
    Stub,
    /// Trained bag-of-words model (JSON).
    Baseline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub path: Option<PathBuf>,
    pub endpoint: Option<String>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { kind: ClassifierKind::Stub, path: None, endpoint: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub parallelism: usize,
    pub truncation_chars: usize,
    pub summary_max_tokens: u32,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        let d = crate::pipeline::PipelineConfig::default();
        PipelineSettings { parallelism: d.parallelism, truncation_chars: d.truncation_chars, summary_max_tokens: d.summary_max_tokens }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpdateConfig {
    pub enabled: bool,
    pub cadence_days: u32,
    /// `[[sources]]` file.
    pub sources: Option<PathBuf>,
    pub per_keyword_limit: usize,
    /// How often the scheduler checks whether a run is due.
    pub check_interval_secs: u64,
}

impl Default for UpdateConfig {
    fn default() -> Self {
        UpdateConfig { enabled: true, cadence_days: 7, sources: None, per_keyword_limit: 20, check_interval_secs: 3600 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub server: ServerConfig,
    pub store: StoreConfig,
    pub provider: ProviderConfig,
    pub classifier: ClassifierConfig,
    pub pipeline: PipelineSettings,
    pub updates: UpdateConfig,
    /// Domains registered at startup.
    pub domains: Vec<TechDomain>,
}

fn parse_env<T: std::str::FromStr>(name: &'static str, raw: String) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse().map_err(|e: T::Err| ConfigError::Env { name, message: e.to_string() })
}

impl AppConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Defaults, overlaid by `path` when given, then by the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::File { path: p.into(), message: e.to_string() })?;
                let mut c = Self::from_toml(&text).map_err(|message| ConfigError::File { path: p.into(), message })?;
                c.resolve_paths(p.parent().unwrap_or(Path::new(".")));
                c
            }
            None => AppConfig::default(),
        };
        config.apply_env(|k| std::env::var(k).ok())?;
        config.validate()?;
        Ok(config)
    }

    /// Relative file references in a config file are taken relative to it.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store.path);
        for p in [&mut self.store.seed_catalog, &mut self.provider.rules, &mut self.classifier.path, &mut self.updates.sources] {
            if let Some(p) = p.as_mut() {
                fix(p);
            }
        }
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = var("CATALOG_BIND") {
            self.server.bind = v;
        }
        if let Some(v) = var("CATALOG_PORT") {
            self.server.port = parse_env("CATALOG_PORT", v)?;
        }
        if let Some(v) = var("CATALOG_ADMIN_TOKEN") {
            self.server.admin_token = Some(v).filter(|t| !t.is_empty());
        }
        if let Some(v) = var("CATALOG_DB") {
            self.store.path = v.into();
        }
        if let Some(v) = var("CATALOG_SEED_CATALOG") {
            self.store.seed_catalog = Some(v.into());
        }
        if let Some(v) = var("CATALOG_PROVIDER") {
            self.provider.kind = match v.trim() {
                "mock" => ProviderKind::Mock,
                "http" => ProviderKind::Http,
                other => return Err(ConfigError::Env { name: "CATALOG_PROVIDER", message: format!("unknown provider {other:?}") }),
            };
        }
        if let Some(v) = var("CATALOG_PROVIDER_ENDPOINT") {
            self.provider.endpoint = Some(v);
        }
        if let Some(v) = var("CATALOG_RULES") {
            self.provider.rules = Some(v.into());
        }
        if let Some(v) = var("CATALOG_TOKEN_CAP") {
            self.provider.token_cap = Some(parse_env("CATALOG_TOKEN_CAP", v)?);
        }
        if let Some(v) = var("CATALOG_RPM") {
            self.provider.requests_per_minute = Some(parse_env("CATALOG_RPM", v)?);
        }
        if let Some(v) = var("CATALOG_CLASSIFIER") {
            self.classifier.kind = match v.trim() {
                "stub" => ClassifierKind::Stub,
                "baseline" => ClassifierKind::Baseline,
                "remote" => ClassifierKind::Remote,
                other => return Err(ConfigError::Env { name: "CATALOG_CLASSIFIER", message: format!("unknown classifier {other:?}") }),
            };
        }
        if let Some(v) = var("CATALOG_CLASSIFIER_PATH") {
            self.classifier.path = Some(v.into());
        }
        if let Some(v) = var("CATALOG_SOURCES") {
            self.updates.sources = Some(v.into());
        }
        if let Some(v) = var("CATALOG_CADENCE_DAYS") {
            self.updates.cadence_days = parse_env("CATALOG_CADENCE_DAYS", v)?;
        }
        if let Some(v) = var("CATALOG_PARALLELISM") {
            self.pipeline.parallelism = parse_env("CATALOG_PARALLELISM", v)?;
        }
        if let Some(v) = var("CATALOG_TRUNCATION") {
            self.pipeline.truncation_chars = parse_env("CATALOG_TRUNCATION", v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        if self.pipeline.parallelism == 0 {
            return bad("pipeline.parallelism must be at least 1");
        }
        if self.pipeline.truncation_chars == 0 {
            return bad("pipeline.truncation_chars must be at least 1");
        }
        if self.updates.cadence_days == 0 {
            return bad("updates.cadence_days must be at least 1");
        }
        if self.provider.kind == ProviderKind::Http && self.provider.endpoint.is_none() {
            return bad("provider.endpoint is required for the http provider");
        }
        if self.classifier.kind == ClassifierKind::Baseline && self.classifier.path.is_none() {
            return bad("classifier.path is required for the baseline classifier");
        }
        if self.classifier.kind == ClassifierKind::Remote && self.classifier.endpoint.is_none() {
            return bad("classifier.endpoint is required for the remote classifier");
        }
        for d in &self.domains {
            d.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }
}
