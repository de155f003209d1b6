use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use scraper::{Html, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

use super::{canonicalize_url, extract_article_with, Fetcher, IngestError};
use crate::clock::Clock;
use crate::model::{Article, TechDomain};
use crate::ratelimit::RateLimiter;

const KEYWORD_PLACEHOLDER: &str = "{keyword}";

fn default_true() -> bool {
    true
}

/// A publisher that can be searched by keyword.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub name: String,
    pub base_url: String,
    /// Path and query appended to `base_url`; must contain `{keyword}` once.
    pub search_path_template: String,
    /// Maximum requests per minute against this source.
    pub rate_limit: u32,
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// CSS selector for result links on the search page (default `a[href]`).
    #[serde(default)]
    pub result_selector: Option<String>,
    /// CSS selector for the article body container, overriding the generic
    /// largest-container heuristic.
    #[serde(default)]
    pub content_selector: Option<String>,
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| IngestError::InvalidSource(format!("{}: {m}", self.name));
        if self.name.trim().is_empty() {
            return Err(IngestError::InvalidSource("source without a name".into()));
        }
        if self.rate_limit < 1 {
            return Err(bad("rate_limit must be >= 1".into()));
        }
        if self.search_path_template.matches(KEYWORD_PLACEHOLDER).count() != 1 {
            return Err(bad(format!("search_path_template must contain {KEYWORD_PLACEHOLDER} exactly once")));
        }
        Url::parse(&self.base_url).map_err(|e| bad(format!("base_url: {e}")))?;
        if let Some(css) = &self.result_selector {
            Selector::parse(css).map_err(|e| bad(format!("result_selector: {e}")))?;
        }
        Ok(())
    }

    pub fn search_url(&self, keyword: &str) -> Result<String, IngestError> {
        let encoded: String = url::form_urlencoded::byte_serialize(keyword.trim().as_bytes()).collect();
        let path = self.search_path_template.replace(KEYWORD_PLACEHOLDER, &encoded);
        let base = Url::parse(&self.base_url).map_err(|_| IngestError::MalformedUrl(self.base_url.clone()))?;
        base.join(&path).map(|u| u.to_string()).map_err(|_| IngestError::MalformedUrl(path))
    }
}

#[derive(Deserialize)]
struct SourcesFile {
    #[serde(default)]
    sources: Vec<SourceConfig>,
}

/// Read `[[sources]]` tables from a TOML file.
pub fn load_sources(path: &Path) -> Result<Vec<SourceConfig>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::InvalidSource(format!("{}: {e}", path.display())))?;
    let file: SourcesFile = toml::from_str(&text).map_err(|e| IngestError::InvalidSource(e.to_string()))?;
    for s in &file.sources {
        s.validate()?;
    }
    Ok(file.sources)
}

/// A configured source bound to a fetcher and its own rate limiter.
pub struct Source {
    pub config: SourceConfig,
    fetcher: Arc<dyn Fetcher>,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
}

impl Source {
    pub fn new(config: SourceConfig, fetcher: Arc<dyn Fetcher>, clock: Arc<dyn Clock>) -> Result<Self, IngestError> {
        config.validate()?;
        let seed = config.name.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b.into()));
        let limiter = RateLimiter::per_minute(config.rate_limit, clock.clone()).with_jitter(0.1, seed);
        Ok(Source { config, fetcher, limiter, clock })
    }

    pub fn name(&self) -> &str {
        &self.config.name
    }

    fn get(&self, url: &str) -> Result<Vec<u8>, IngestError> {
        self.limiter.acquire();
        self.fetcher.get(url)
    }

    /// Download and extract one article page.
    pub fn fetch_article(&self, canonical_url: &str) -> Result<Article, IngestError> {
        let html = self.get(canonical_url)?;
        extract_article_with(&html, canonical_url, &self.config.name, self.clock.now(), self.config.content_selector.as_deref())
    }
}

fn same_site(a: &Url, b: &Url) -> bool {
    let strip = |u: &Url| u.host_str().map(|h| h.trim_start_matches("www.").to_ascii_lowercase());
    strip(a) == strip(b) && a.port_or_known_default() == b.port_or_known_default()
}

/// Up to `limit` article URLs from the source's search results for
/// `keyword`, canonicalized and deduplicated, in result order.
pub fn search_source(source: &Source, keyword: &str, limit: usize) -> Result<Vec<String>, IngestError> {
    let name = source.name().to_string();
    if !source.config.enabled {
        return Err(IngestError::SourceDisabled(name));
    }
    let search_url = source.config.search_url(keyword).map_err(|e| e.in_source(&name))?;
    let page = source.get(&search_url).map_err(|e| e.in_source(&name))?;
    let page_url = Url::parse(&search_url).expect("search url is absolute");
    let canonical_search = canonicalize_url(&search_url).ok();

    let html = Html::parse_document(&String::from_utf8_lossy(&page));
    let selector = Selector::parse(source.config.result_selector.as_deref().unwrap_or("a[href]"))
        .map_err(|e| IngestError::InvalidSource(e.to_string()).in_source(&name))?;

    let mut seen = HashSet::new();
    let mut urls = Vec::new();
    for link in html.select(&selector) {
        if urls.len() >= limit {
            break;
        }
        let Some(href) = link.value().attr("href") else { continue };
        let Ok(resolved) = page_url.join(href) else { continue };
        if !same_site(&resolved, &page_url) {
            continue;
        }
        let Ok(canonical) = canonicalize_url(resolved.as_str()) else { continue };
        if Some(&canonical) == canonical_search.as_ref() || Url::parse(&canonical).is_ok_and(|u| u.path() == "/") {
            continue;
        }
        if seen.insert(canonical.clone()) {
            urls.push(canonical);
        }
    }
    Ok(urls)
}

/// Lookup of already-stored articles by canonical URL.
pub trait KnownUrls: Sync {
    fn contains_url(&self, canonical_url: &str) -> bool;
}

impl KnownUrls for HashSet<String> {
    fn contains_url(&self, canonical_url: &str) -> bool {
        self.contains(canonical_url)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PolledArticle {
    pub domain: String,
    pub article: Article,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceFailure {
    pub source: String,
    pub message: String,
}

#[derive(Debug, Default, Serialize)]
pub struct PollOutcome {
    pub articles: Vec<PolledArticle>,
    pub errors: Vec<SourceFailure>,
}

/// Search every enabled source for every domain keyword and extract the
/// articles not already known. Sources are polled concurrently; a failing
/// source is recorded in `errors` without affecting the others.
///
/// Articles with a known publication date before `since` are skipped.
pub fn poll_updates(
    sources: &[Source],
    domains: &[TechDomain],
    since: Option<DateTime<Utc>>,
    known: &dyn KnownUrls,
    per_keyword_limit: usize,
) -> PollOutcome {
    poll_updates_since(sources, domains, &|_| since, known, per_keyword_limit)
}

/// [`poll_updates`] with a cutoff chosen per source name.
pub fn poll_updates_since(
    sources: &[Source],
    domains: &[TechDomain],
    since: &(dyn Fn(&str) -> Option<DateTime<Utc>> + Sync),
    known: &dyn KnownUrls,
    per_keyword_limit: usize,
) -> PollOutcome {
    let per_source: Vec<(Vec<PolledArticle>, Vec<SourceFailure>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = sources
            .iter()
            .filter(|s| s.config.enabled)
            .map(|source| {
                let cutoff = since(source.name());
                scope.spawn(move || poll_one(source, domains, cutoff, known, per_keyword_limit))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("poll worker panicked")).collect()
    });

    let mut outcome = PollOutcome::default();
    let mut seen = HashSet::new();
    for (articles, errors) in per_source {
        for found in articles {
            if seen.insert((found.article.canonical_url.clone(), found.domain.clone())) {
                outcome.articles.push(found);
            }
        }
        outcome.errors.extend(errors);
    }
    outcome
}

fn poll_one(
    source: &Source,
    domains: &[TechDomain],
    since: Option<DateTime<Utc>>,
    known: &dyn KnownUrls,
    limit: usize,
) -> (Vec<PolledArticle>, Vec<SourceFailure>) {
    let mut found = Vec::new();
    let mut errors = Vec::new();
    let mut fetched: HashSet<String> = HashSet::new();
    let mut fail = |message: String| {
        tracing::warn!(source = source.name(), %message, "poll failure");
        errors.push(SourceFailure { source: source.name().to_string(), message });
    };
    for domain in domains {
        for keyword in &domain.keywords {
            let urls = match search_source(source, keyword, limit) {
                Ok(urls) => urls,
                Err(e) => {
                    fail(e.to_string());
                    continue;
                }
            };
            for url in urls {
                if known.contains_url(&url) {
                    continue;
                }
                if let Some(existing) = found.iter().find(|p: &&PolledArticle| p.article.canonical_url == url) {
                    if existing.domain != domain.name {
                        let article = existing.article.clone();
                        found.push(PolledArticle { domain: domain.name.clone(), article });
                    }
                    continue;
                }
                if !fetched.insert(url.clone()) {
                    continue;
                }
                match source.fetch_article(&url) {
                    Ok(article) => {
                        let too_old = matches!((article.published_at, since), (Some(p), Some(s)) if p < s.date_naive());
                        if !too_old {
                            found.push(PolledArticle { domain: domain.name.clone(), article });
                        }
                    }
                    Err(e) => fail(format!("{url}: {e}")),
                }
            }
        }
    }
    // same-domain duplicates can arise from overlapping keywords
    let mut seen = HashSet::new();
    found.retain(|p| seen.insert((p.article.canonical_url.clone(), p.domain.clone())));
    (found, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FakeClock;
    use crate::ingest::StaticFetcher;

    fn config(name: &str) -> SourceConfig {
        SourceConfig {
            name: name.into(),
            base_url: format!("https://{name}.example"),
            search_path_template: "/search?q={keyword}".into(),
            rate_limit: 60,
            enabled: true,
            result_selector: None,
            content_selector: None,
        }
    }

    fn page(title: &str) -> String {
        format!("<html><head><title>{title}</title></head><body><article><p>{}</p></article></body></html>", vec!["word"; 60].join(" "))
    }

    #[test]
    fn validation() {
        assert!(config("a").validate().is_ok());
        let mut c = config("a");
        c.rate_limit = 0;
        assert!(c.validate().is_err());
        let mut c = config("a");
        c.search_path_template = "/s?q={keyword}&r={keyword}".into();
        assert!(c.validate().is_err());
        c.search_path_template = "/s".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn search_url_encodes_keyword() {
        assert_eq!(config("a").search_url("voice assistant").unwrap(), "https://a.example/search?q=voice+assistant");
    }

    #[test]
    fn search_dedups_and_limits() {
        let fetcher = StaticFetcher::new();
        fetcher.insert(
            "https://a.example/search?q=vr",
            r#"<a href="/">home</a><a href="/p/1?utm_source=x">1</a><a href="https://a.example/p/1#c">1 again</a>
               <a href="https://other.example/p/9">offsite</a><a href="/p/2/">2</a><a href="/p/3">3</a>"#,
        );
        let clock = FakeClock::fixed();
        let source = Source::new(config("a"), Arc::new(fetcher), Arc::new(clock)).unwrap();
        let urls = search_source(&source, "vr", 10).unwrap();
        assert_eq!(urls, vec!["https://a.example/p/1", "https://a.example/p/2", "https://a.example/p/3"]);
        assert_eq!(search_source(&source, "vr", 2).unwrap().len(), 2);
    }

    #[test]
    fn disabled_source_is_rejected() {
        let mut c = config("a");
        c.enabled = false;
        let source = Source::new(c, Arc::new(StaticFetcher::new()), Arc::new(FakeClock::fixed())).unwrap();
        assert!(matches!(search_source(&source, "vr", 3), Err(IngestError::SourceDisabled(_))));
    }

    #[test]
    fn fetch_errors_name_the_source() {
        let source = Source::new(config("a"), Arc::new(StaticFetcher::new()), Arc::new(FakeClock::fixed())).unwrap();
        let err = search_source(&source, "vr", 3).unwrap_err();
        assert!(err.to_string().starts_with("source a:"), "{err}");
    }

    #[test]
    fn poll_is_idempotent_and_tolerates_failures() {
        let fetcher = StaticFetcher::new();
        fetcher.insert("https://a.example/search?q=vr", r#"<a href="/p/1">1</a><a href="/p/2">2</a>"#);
        fetcher.insert("https://a.example/search?q=metaverse", r#"<a href="/p/2">2</a>"#);
        fetcher.insert("https://a.example/p/1", page("One"));
        fetcher.insert("https://a.example/p/2", page("Two"));
        let clock = Arc::new(FakeClock::fixed());
        let f: Arc<dyn Fetcher> = Arc::new(fetcher.clone());
        let sources = vec![
            Source::new(config("a"), f.clone(), clock.clone()).unwrap(),
            Source::new(config("down"), f, clock).unwrap(),
        ];
        let domains = vec![TechDomain::new("virtual reality", &["vr", "metaverse"])];
        let mut known = HashSet::new();
        let first = poll_updates(&sources, &domains, None, &known, 10);
        assert_eq!(first.articles.len(), 2);
        assert_eq!(first.errors.len(), 2, "one failure per keyword on the down source");
        assert!(first.errors.iter().all(|e| e.source == "down"));
        for p in &first.articles {
            known.insert(p.article.canonical_url.clone());
        }
        let second = poll_updates(&sources, &domains, None, &known, 10);
        assert!(second.articles.is_empty());
        // each article page was downloaded exactly once
        let article_gets = fetcher.requests().iter().filter(|u| u.contains("/p/")).count();
        assert_eq!(article_gets, 2);
    }
}
