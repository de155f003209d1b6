//! Article ingestion: source search, page download, and content extraction.

mod bulk;
mod canonical;
mod extract;
mod fetch;
mod source;

pub use bulk::{parse_url_csv, BulkRow};
pub use canonical::{canonicalize_url, TRACKING_PARAMS};
pub use extract::{extract_article, extract_article_with, MIN_BODY_WORDS};
pub use fetch::{Fetcher, HttpFetcher, StaticFetcher};
pub use source::{load_sources, poll_updates, poll_updates_since, search_source, KnownUrls, PolledArticle, PollOutcome, Source, SourceConfig, SourceFailure};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed URL: {0:?}")]
    MalformedUrl(String),
    #[error("page has no title")]
    NoTitle,
    #[error("extracted body too short ({words} words)")]
    NoContent { words: usize },
    #[error("fetch failed for {url}: {message}")]
    Fetch { url: String, message: String },
    #[error("source {source_name}: {inner}")]
    Source {
        source_name: String,
        #[source]
        inner: Box<IngestError>,
    },
    #[error("source {0} is disabled")]
    SourceDisabled(String),
    #[error("invalid source configuration: {0}")]
    InvalidSource(String),
    #[error("invalid CSV: {0}")]
    Csv(String),
}

impl IngestError {
    pub(crate) fn in_source(self, source: &str) -> Self {
        IngestError::Source { source_name: source.to_string(), inner: Box::new(self) }
    }
}
