#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};

use catalog::app::Engine;
use catalog::clock::FakeClock;
use catalog::gateway::{CompletionRequest, CompletionResponse, Gateway, MockProvider, Provider, ProviderError, RuleTable, StubTitleClassifier};
use catalog::ingest::{load_sources, Fetcher, IngestError, StaticFetcher};
use catalog::model::{Article, TechDomain};
use catalog::pipeline::PipelineConfig;
use catalog::store::Store;

pub const DOMAIN: &str = "virtual reality";

pub fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

pub fn domain() -> TechDomain {
    TechDomain::new(DOMAIN, &[DOMAIN])
}

pub fn fetcher() -> StaticFetcher {
    StaticFetcher::from_manifest(&corpus().join("manifest.json")).unwrap()
}

pub fn gateway(clock: Arc<FakeClock>) -> Gateway {
    let rules = RuleTable::load(&corpus().join("rules.toml")).unwrap();
    Gateway::builder(Arc::new(MockProvider::new(rules, MockProvider::DEFAULT_SEED)), clock).build()
}

pub fn classifier() -> StubTitleClassifier {
    StubTitleClassifier::load_csv(&corpus().join("titles.csv")).unwrap()
}

/// Article URLs of the corpus in manifest order.
pub fn article_urls() -> Vec<String> {
    let text = std::fs::read_to_string(corpus().join("urls.csv")).unwrap();
    text.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect()
}

pub struct Fixture {
    pub engine: Arc<Engine>,
    pub fetcher: StaticFetcher,
    pub clock: Arc<FakeClock>,
}

pub fn engine_with(store: Store, parallelism: usize) -> Fixture {
    let fetcher = fetcher();
    build(store, Arc::new(fetcher.clone()), None, parallelism, fetcher)
}

/// Engine over the corpus with a custom fetcher and, optionally, a custom
/// provider in place of the rule table.
pub fn build(store: Store, via: Arc<dyn Fetcher>, provider: Option<Arc<dyn Provider>>, parallelism: usize, fetcher: StaticFetcher) -> Fixture {
    let clock = Arc::new(FakeClock::fixed());
    let gateway = match provider {
        Some(p) => Gateway::builder(p, clock.clone()).build(),
        None => gateway(clock.clone()),
    };
    let sources = load_sources(&corpus().join("sources.toml")).unwrap();
    let pipeline = PipelineConfig { parallelism, ..PipelineConfig::default() };
    let engine = Engine::new(Arc::new(store), Arc::new(gateway), Arc::new(classifier()), via, clock.clone(), sources, pipeline).unwrap();
    engine.store.upsert_domain(&domain()).unwrap();
    Fixture { engine: Arc::new(engine), fetcher, clock }
}

/// Fetcher that blocks every request until opened.
pub struct Gate {
    inner: StaticFetcher,
    open: Mutex<bool>,
    changed: Condvar,
}

impl Gate {
    pub fn new(inner: StaticFetcher) -> Arc<Self> {
        Arc::new(Gate { inner, open: Mutex::new(false), changed: Condvar::new() })
    }

    pub fn open(&self) {
        *self.open.lock().unwrap() = true;
        self.changed.notify_all();
    }
}

impl Fetcher for Gate {
    fn get(&self, url: &str) -> Result<Vec<u8>, IngestError> {
        let mut open = self.open.lock().unwrap();
        while !*open {
            open = self.changed.wait(open).unwrap();
        }
        drop(open);
        self.inner.get(url)
    }
}

/// Provider whose every call fails.
pub struct DownProvider;

impl Provider for DownProvider {
    fn id(&self) -> &str {
        "down"
    }
    fn model(&self) -> &str {
        "none"
    }
    fn complete(&self, _: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        Err(ProviderError::Fatal("connection refused".into()))
    }
    fn embed(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
        Err(ProviderError::Fatal("connection refused".into()))
    }
}

pub fn engine() -> Fixture {
    engine_with(Store::open_in_memory().unwrap(), 4)
}

/// Every corpus article, fetched and extracted through the engine.
pub fn articles(engine: &Engine) -> Vec<Article> {
    article_urls().iter().map(|u| engine.fetch_article(u).unwrap()).collect()
}
