//! Catalog engine: wires ingestion, the pipeline and the store into the
//! operations the service and CLI expose.

mod jobs;
mod scheduler;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use url::Url;

use crate::clock::Clock;
use crate::config::{AppConfig, ClassifierKind, ProviderKind};
use crate::gateway::{
    BaselineTitleClassifier, Gateway, GatewayError, HttpProvider, MockProvider, Provider, RemoteTitleClassifier, RuleTable,
    StubTitleClassifier, TitleClassifier,
};
use crate::ingest::{canonicalize_url, extract_article, poll_updates_since, Fetcher, IngestError, Source, SourceConfig};
use crate::model::{Article, PipelineReport, TechDomain};
use crate::pipeline::{process_article, run_pipeline_with_progress, ArticleOutcome, PipelineConfig};
use crate::store::{ClientToken, ImportState, PendingImport, Rejection, RunRecord, Store, StoreError};

pub use jobs::{BulkSpec, JobState, JobStatus};
pub use scheduler::Scheduler;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("malformed URL: {0:?}")]
    MalformedUrl(String),
    #[error("rejected at the {} stage: {}", .0.rejection.as_ref().map_or("", |r| r.stage.as_str()), .0.rejection.as_ref().map_or("", |r| r.reason.as_str()))]
    PipelineRejected(Box<PendingImport>),
    #[error(transparent)]
    Provider(#[from] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("bulk job {0} is still running")]
    JobRunning(String),
    #[error("unknown job {0}")]
    UnknownJob(String),
    #[error("{0}")]
    InvalidRequest(String),
    #[error("{0}")]
    Setup(String),
}

/// Outcome of pipelining a batch into the catalog.
#[derive(Debug, Clone, Default)]
pub struct BatchResult {
    pub report: PipelineReport,
    pub published: usize,
    pub errors: Vec<String>,
}

pub struct Engine {
    pub store: Arc<Store>,
    pub gateway: Arc<Gateway>,
    pub classifier: Arc<dyn TitleClassifier>,
    pub fetcher: Arc<dyn Fetcher>,
    pub clock: Arc<dyn Clock>,
    pub pipeline: PipelineConfig,
    pub per_keyword_limit: usize,
    sources: Vec<Source>,
    jobs: jobs::JobTable,
    update_lock: Mutex<()>,
}

/// Host of `url` without a leading `www.`.
fn bare_host(url: &str) -> Option<String> {
    Url::parse(url).ok()?.host_str().map(|h| h.trim_start_matches("www.").to_ascii_lowercase())
}

impl Engine {
    pub fn new(
        store: Arc<Store>,
        gateway: Arc<Gateway>,
        classifier: Arc<dyn TitleClassifier>,
        fetcher: Arc<dyn Fetcher>,
        clock: Arc<dyn Clock>,
        sources: Vec<SourceConfig>,
        pipeline: PipelineConfig,
    ) -> Result<Self, EngineError> {
        let sources = sources
            .into_iter()
            .map(|c| Source::new(c, fetcher.clone(), clock.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Engine {
            store,
            gateway,
            classifier,
            fetcher,
            clock,
            pipeline,
            per_keyword_limit: 20,
            sources,
            jobs: jobs::JobTable::default(),
            update_lock: Mutex::new(()),
        })
    }

    /// Build everything a config describes. Blocking HTTP clients are
    /// created here, so call this outside an async runtime.
    pub fn from_config(config: &AppConfig, fetcher: Arc<dyn Fetcher>, clock: Arc<dyn Clock>) -> Result<Self, EngineError> {
        let setup = |e: &dyn std::fmt::Display| EngineError::Setup(e.to_string());
        let p = &config.provider;
        let provider: Arc<dyn Provider> = match p.kind {
            ProviderKind::Mock => {
                let rules = match &p.rules {
                    Some(path) => RuleTable::load(path)?,
                    None => RuleTable::default(),
                };
                Arc::new(MockProvider::new(rules, p.seed))
            }
            ProviderKind::Http => {
                let endpoint = p.endpoint.clone().ok_or_else(|| EngineError::Setup("provider.endpoint is not set".into()))?;
                let key = p.api_key_env.as_deref().and_then(|k| std::env::var(k).ok());
                Arc::new(HttpProvider::new(endpoint, p.model.clone(), key, Duration::from_secs(p.timeout_secs))?)
            }
        };
        let gateway = Gateway::builder(provider, clock.clone()).token_cap(p.token_cap).requests_per_minute(p.requests_per_minute).build();

        let c = &config.classifier;
        let classifier: Arc<dyn TitleClassifier> = match (c.kind, &c.path, &c.endpoint) {
            (ClassifierKind::Stub, Some(path), _) => Arc::new(StubTitleClassifier::load_csv(path)?),
            (ClassifierKind::Stub, None, _) => Arc::new(StubTitleClassifier::default()),
            (ClassifierKind::Baseline, Some(path), _) => Arc::new(BaselineTitleClassifier::load(path)?),
            (ClassifierKind::Remote, _, Some(endpoint)) => Arc::new(RemoteTitleClassifier::new(endpoint.clone(), Duration::from_secs(p.timeout_secs))?),
            _ => return Err(EngineError::Setup("classifier is missing its path or endpoint".into())),
        };

        let sources = match &config.updates.sources {
            Some(path) => crate::ingest::load_sources(path)?,
            None => Vec::new(),
        };
        let store = Store::open(&config.store.path)?;
        for d in &config.domains {
            store.upsert_domain(&TechDomain { approved: true, ..d.clone() })?;
        }
        let pipeline = PipelineConfig {
            parallelism: config.pipeline.parallelism,
            truncation_chars: config.pipeline.truncation_chars,
            summary_max_tokens: config.pipeline.summary_max_tokens,
            ..PipelineConfig::default()
        };
        pipeline.prompts.validate().map_err(|e| setup(&e))?;
        let mut engine = Engine::new(Arc::new(store), Arc::new(gateway), classifier, fetcher, clock, sources, pipeline)?;
        engine.per_keyword_limit = config.updates.per_keyword_limit;
        if let Some(seed) = &config.store.seed_catalog {
            if engine.store.card_count() == 0 {
                let loaded = engine.store.import_catalog(seed, &engine.gateway)?;
                tracing::info!(cards = loaded.cards, "loaded seed catalog");
            }
        }
        Ok(engine)
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    fn source_for(&self, url: &str) -> Option<&Source> {
        let host = bare_host(url)?;
        self.sources.iter().find(|s| bare_host(&s.config.base_url).as_deref() == Some(host.as_str()))
    }

    /// Display name of the publisher of `url`: the configured source with
    /// the same host, else the host itself.
    pub fn source_name_for(&self, url: &str) -> String {
        match self.source_for(url) {
            Some(s) => s.name().to_string(),
            None => bare_host(url).unwrap_or_else(|| url.to_string()),
        }
    }

    /// Download and extract one page. Pages of configured sources go through
    /// that source's rate limiter and content selector.
    pub fn fetch_article(&self, url: &str) -> Result<Article, IngestError> {
        let canonical = canonicalize_url(url)?;
        match self.source_for(&canonical) {
            Some(source) => source.fetch_article(&canonical),
            None => {
                let html = self.fetcher.get(&canonical)?;
                extract_article(&html, &canonical, &self.source_name_for(&canonical), self.clock.now())
            }
        }
    }

    fn run_config(&self) -> PipelineConfig {
        PipelineConfig { created_at: self.clock.now(), ..self.pipeline.clone() }
    }

    fn domain_or_proposed(&self, name: &str) -> Result<TechDomain, EngineError> {
        if name.trim().is_empty() {
            return Err(EngineError::InvalidRequest("domain must not be empty".into()));
        }
        Ok(self.store.domain(name).unwrap_or_else(|| TechDomain { approved: false, ..TechDomain::new(name.trim(), &[name.trim()]) }))
    }

    /// Run ingestion and the pipeline on one user-submitted URL. A card
    /// yields a pending item; a pipeline refusal is recorded as a rejected
    /// item and returned as [`EngineError::PipelineRejected`].
    pub fn submit_import(&self, client: &ClientToken, url: &str, proposed_domain: &str) -> Result<PendingImport, EngineError> {
        let canonical = canonicalize_url(url).map_err(|_| EngineError::MalformedUrl(url.to_string()))?;
        let domain = self.domain_or_proposed(proposed_domain)?;
        let mut item = PendingImport {
            id: String::new(),
            submitted_by: client.clone(),
            url: canonical.clone(),
            proposed_domain: domain.name.clone(),
            extracted_card: None,
            article: None,
            state: ImportState::Pending,
            submitted_at: self.clock.now(),
            rejection: None,
            decided_at: None,
        };
        let reject = |mut item: PendingImport, stage: &str, reason: String| -> Result<PendingImport, EngineError> {
            item.state = ImportState::Rejected;
            item.decided_at = Some(item.submitted_at);
            item.rejection = Some(Rejection { stage: stage.into(), reason });
            let item = self.store.create_import(item)?;
            Err(EngineError::PipelineRejected(Box::new(item)))
        };
        let article = match self.fetch_article(&canonical) {
            Ok(a) => a,
            Err(e @ IngestError::Fetch { .. }) => return reject(item, "fetch", e.to_string()),
            Err(e) => return reject(item, "extract", e.to_string()),
        };
        item.article = Some(article.clone());
        match process_article(&article, &domain, self.classifier.as_ref(), &self.gateway, &self.run_config()) {
            ArticleOutcome::Card { card } => {
                item.extracted_card = Some(*card);
                Ok(self.store.create_import(item)?)
            }
            ArticleOutcome::TitleRejected => reject(item, "title", "title classifier judged the article irrelevant".into()),
            ArticleOutcome::ContentRejected => reject(item, "content", "content filter answered no".into()),
            ArticleOutcome::ContentUndetermined => reject(item, "content", "content filter gave no yes/no answer".into()),
            ArticleOutcome::InvalidSummary { rule } => reject(item, "summary", format!("summary failed validation: {rule}")),
            ArticleOutcome::Uncategorizable { raw } => reject(item, "aspect", format!("no aspect in model output {raw:?}")),
            ArticleOutcome::ProviderError { message, .. } => Err(EngineError::Provider(GatewayError::ProviderUnavailable(message))),
        }
    }

    pub fn approve_import(&self, id: &str) -> Result<PendingImport, EngineError> {
        Ok(self.store.approve_import(id, self.clock.now(), &self.gateway)?)
    }

    pub fn reject_import(&self, id: &str) -> Result<PendingImport, EngineError> {
        Ok(self.store.reject_import(id, self.clock.now())?)
    }

    /// Store `articles`, run them through the pipeline per domain and publish
    /// the resulting cards directly.
    pub fn pipeline_and_publish(&self, by_domain: &BTreeMap<String, (TechDomain, Vec<Article>)>, live: Option<&Mutex<PipelineReport>>) -> BatchResult {
        let mut result = BatchResult::default();
        let config = self.run_config();
        for (domain, articles) in by_domain.values() {
            for a in articles {
                if let Err(e) = self.store.insert_article(a) {
                    result.errors.push(format!("{}: {e}", a.canonical_url));
                }
            }
            let run = run_pipeline_with_progress(articles, domain, self.classifier.as_ref(), &self.gateway, &config, live);
            for (article, outcome) in &run.outcomes {
                if let ArticleOutcome::ProviderError { stage, message } = outcome {
                    result.errors.push(format!("{article}: {stage} stage: {message}"));
                }
            }
            if !run.cards.is_empty() {
                if let Err(e) = self.store.upsert_domain(domain) {
                    result.errors.push(e.to_string());
                }
            }
            for card in &run.cards {
                match self.store.upsert_card(card, &self.gateway) {
                    Ok(_) => result.published += 1,
                    Err(e) => result.errors.push(format!("{}: {e}", card.id)),
                }
            }
            result.report.merge(&run.report);
        }
        result
    }

    /// Poll every source for new articles on approved domains, pipeline
    /// them and publish the cards. Failures are recorded in the returned
    /// (and stored) run record.
    pub fn run_weekly_update(&self) -> Result<RunRecord, EngineError> {
        let _guard = self.update_lock.lock().unwrap_or_else(|e| e.into_inner());
        let started_at = self.clock.now();
        let weekly: Vec<RunRecord> = self.store.runs()?.into_iter().filter(|r| r.kind == "weekly").collect();
        // A source's window starts at the last run that polled it successfully.
        let since = |source: &str| weekly.iter().rev().find(|r| !r.failed_sources.iter().any(|f| f == source)).map(|r| r.started_at);
        let domains: Vec<TechDomain> = self.store.domains().into_iter().filter(|d| d.approved).collect();
        let polled = poll_updates_since(&self.sources, &domains, &since, self.store.as_ref(), self.per_keyword_limit);
        let mut failed_sources: Vec<String> = polled.errors.iter().map(|f| f.source.clone()).collect();
        failed_sources.dedup();

        let mut by_domain: BTreeMap<String, (TechDomain, Vec<Article>)> = BTreeMap::new();
        for p in polled.articles {
            let Some(d) = domains.iter().find(|d| d.name == p.domain) else { continue };
            by_domain.entry(d.key()).or_insert_with(|| (d.clone(), Vec::new())).1.push(p.article);
        }
        let mut result = self.pipeline_and_publish(&by_domain, None);
        result.report.domain = domains.iter().map(|d| d.name.as_str()).collect::<Vec<_>>().join(", ");
        let mut errors: Vec<String> = polled.errors.iter().map(|f| format!("{}: {}", f.source, f.message)).collect();
        errors.extend(result.errors);
        let mut run = RunRecord { id: 0, kind: "weekly".into(), started_at, finished_at: self.clock.now(), report: result.report, errors, failed_sources };
        run.id = self.store.record_run(&run)?;
        tracing::info!(published = result.published, errors = run.errors.len(), "weekly update finished");
        Ok(run)
    }

    pub fn start_bulk(self: &Arc<Self>, spec: BulkSpec) -> Result<String, EngineError> {
        jobs::start(self, spec)
    }

    pub fn job(&self, id: &str) -> Result<JobStatus, EngineError> {
        self.jobs.status(id).ok_or_else(|| EngineError::UnknownJob(id.into()))
    }

    /// Block until job `id` has finished and return its final status.
    pub fn wait_for_job(&self, id: &str) -> Result<JobStatus, EngineError> {
        self.jobs.wait(id).ok_or_else(|| EngineError::UnknownJob(id.into()))
    }

    pub fn export(&self, dir: &Path) -> Result<crate::store::LoadSummary, EngineError> {
        Ok(self.store.export_catalog(dir)?)
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }
}
